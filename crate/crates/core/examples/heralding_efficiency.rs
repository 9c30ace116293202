//! Per-channel heralding efficiencies recovered from a calibration run
//! with deterministic A1-B1 / A2-B2 partnering.
//!
//! ```text
//! cargo run --release --example heralding_efficiency
//! ```

use dqsense::events::estimate_efficiencies;
use dqsense::model::{Channel, EfficiencyBudget, PhaseSetting, SourceParams};
use dqsense::simulator::{run_experiment, ExperimentConfig, RoutingMode};

fn main() -> dqsense::Result<()> {
    let eff = EfficiencyBudget::new([0.7432, 0.7667, 0.7477, 0.6974])?;
    for mu in [0.0025, 0.056] {
        let config = ExperimentConfig {
            source: SourceParams::new(mu, 1.0, 4)?,
            eff: eff.clone(),
            settings: vec![PhaseSetting::from_global(0.0)],
            pulses_per_setting: 100_000_000,
            seed: 2,
            chunk_size: 1 << 20,
            routing: RoutingMode::Calibration,
        };
        let tally = &run_experiment(&config, None)?.tallies[0];
        let est = estimate_efficiencies(tally)?;
        print!("mu = {mu:<6}");
        for ch in Channel::ALL {
            print!("  {ch}: {:.4} (set {:.4})", est.get(ch), eff.eta(ch));
        }
        println!();
    }
    Ok(())
}
