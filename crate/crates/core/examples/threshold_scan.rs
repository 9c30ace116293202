//! Uniform-efficiency sweep locating the efficiency at which the entangled
//! scheme ties the shot-noise limit.
//!
//! ```text
//! cargo run --release --example threshold_scan
//! ```

use dqsense::cli::{run_threshold_scan, RunConfig};
use dqsense::resources::threshold_efficiency;

fn main() -> dqsense::Result<()> {
    let cfg = RunConfig::preset("ideal")?;
    let run = run_threshold_scan(&cfg)?;
    for p in &run.points {
        println!("eta = {:.3}  C_sum = {:5}  n = {:8.1}  dB = {:+.3}", p.eta, p.c_sum, p.n, p.db_below_snl);
    }
    println!(
        "crossing at eta = {:.4} (closed form {:.4})",
        run.crossing.unwrap_or(f64::NAN),
        threshold_efficiency()
    );
    Ok(())
}
