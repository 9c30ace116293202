//! Sample click patterns for one setting and compare the tally with the
//! exact pattern distribution.
//!
//! ```text
//! cargo run --release --example monte_carlo_tally -- 10000000
//! ```

use dqsense::events::{classify, Tally};
use dqsense::model::{pattern_distribution, ClickPattern, EfficiencyBudget, PhaseSetting, SourceParams};
use dqsense::simulator::{run_experiment, ExperimentConfig, RoutingMode};

fn main() -> dqsense::Result<()> {
    let pulses: u64 = std::env::args().nth(1).map_or(Ok(10_000_000), |s| s.parse()).expect("pulses");
    let source = SourceParams::new(0.056, 0.9804, 4)?;
    let eff = EfficiencyBudget::new([0.7432, 0.7667, 0.7477, 0.6974])?;
    let theta_hat = 0.3;
    let config = ExperimentConfig {
        source: source.clone(),
        eff: eff.clone(),
        settings: vec![PhaseSetting::from_global(theta_hat)],
        pulses_per_setting: pulses,
        seed: 7,
        chunk_size: 1 << 18,
        routing: RoutingMode::Phase,
    };
    let out = run_experiment(&config, None)?;
    let tally: &Tally = &out.tallies[0];
    let exact = pattern_distribution(&source, &eff, 3.0 * theta_hat)?;
    println!("{:>10} {:>12} {:>14} {:>8}", "event", "count", "expected", "z");
    for p in ClickPattern::all() {
        let observed = tally.pattern_count(p) as f64;
        let expected = exact.prob(p) * pulses as f64;
        let z = if expected > 0.0 { (observed - expected) / expected.sqrt() } else { 0.0 };
        println!("{:>10} {:>12} {:>14.1} {:>8.2}", classify(p).name(), observed, expected, z);
    }
    println!("C_sum = {}, pairs emitted = {}", tally.c_sum(), out.truth_pairs[0]);
    Ok(())
}
