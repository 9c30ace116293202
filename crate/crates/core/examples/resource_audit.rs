//! Recorded clicks versus actual photons: the loss and multi-pair
//! correction checked against the simulator's emitted-pair truth.
//!
//! ```text
//! cargo run --release --example resource_audit
//! ```

use dqsense::model::{EfficiencyBudget, PhaseSetting, SourceParams};
use dqsense::resources::{hl, snl, ResourceAudit};
use dqsense::simulator::{run_experiment, ExperimentConfig, RoutingMode};

fn main() -> dqsense::Result<()> {
    for (mu, eta) in [(0.0025, 0.74), (0.056, 0.74), (0.072, 0.6), (0.1, 0.53)] {
        let source = SourceParams::new(mu, 0.98, 4)?;
        let eff = EfficiencyBudget::uniform(eta)?;
        let config = ExperimentConfig {
            source: source.clone(),
            eff: eff.clone(),
            settings: vec![PhaseSetting::from_global(0.4)],
            pulses_per_setting: 50_000_000,
            seed: 1,
            chunk_size: 1 << 20,
            routing: RoutingMode::Phase,
        };
        let out = run_experiment(&config, None)?;
        let audit = ResourceAudit::from_tally(&out.tallies[0], &eff, mu)?;
        let truth = out.truth_photon_passes()[0] as f64;
        println!(
            "mu = {mu:<6} eta = {eta:<5} n = {:12.1} truth = {truth:12.0} rel = {:+.4}%  snl = {:.3e}  hl = {:.3e}",
            audit.n,
            100.0 * (audit.n / truth - 1.0),
            snl(audit.n)?,
            hl(audit.n)?
        );
    }
    Ok(())
}
