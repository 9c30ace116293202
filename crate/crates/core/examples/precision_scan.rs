//! Block-statistics precision against the shot-noise and Heisenberg limits.
//!
//! Uses a preset with fewer blocks so the run takes seconds.
//!
//! ```text
//! cargo run --release --example precision_scan -- paper-240m 300
//! ```

use dqsense::cli::{run_precision, RunConfig};

fn main() -> dqsense::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "paper-240m".into());
    let s: usize = args.next().map_or(Ok(300), |a| a.parse()).expect("block count");
    let mut cfg = RunConfig::preset(&name)?;
    cfg.blocks.s = s;
    let run = run_precision(&cfg)?;
    println!("{:>8} {:>10} {:>10} {:>10} {:>10} {:>8}", "theta", "delta", "snl", "hl", "n", "dB");
    for r in &run.reports {
        println!(
            "{:8.4} {:10.3e} {:10.3e} {:10.3e} {:10.0} {:8.3}",
            r.theta_truth, r.delta_hat, r.snl, r.hl, r.n, r.db_below_snl
        );
    }
    println!("peak {:.3} dB below the SNL", run.peak_db_below_snl);
    Ok(())
}
