//! Random unknown phases drawn from 64-bit blocks, estimated against a
//! calibrated fringe, printed as a standard-deviation table.
//!
//! ```text
//! cargo run --release --example random_phase -- 6 400
//! ```

use dqsense::cli::{run_random_phase, RunConfig};

fn main() -> dqsense::Result<()> {
    let mut args = std::env::args().skip(1);
    let phases: usize = args.next().map_or(Ok(6), |a| a.parse()).expect("phase count");
    let s: usize = args.next().map_or(Ok(400), |a| a.parse()).expect("block count");
    let mut cfg = RunConfig::preset("paper-10km")?;
    if let Some(r) = cfg.random_phase.as_mut() {
        r.num_phases = phases;
        r.s = s;
    }
    let run = run_random_phase(&cfg)?;
    println!("{:>3} {:>10} {:>10} {:>16}", "#", "truth", "estimate", "stddev (1e-2)");
    for t in &run.trials.trials {
        println!(
            "{:>3} {:10.6} {:10.6} {:>7.3} +- {:.3}{}",
            t.index + 1,
            t.theta_truth,
            t.report.theta_hat,
            t.report.delta_hat * 100.0,
            t.report.delta_err * 100.0,
            if t.near_extremum { "  (near extremum)" } else { "" }
        );
    }
    Ok(())
}
