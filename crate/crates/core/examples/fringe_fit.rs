//! Simulated calibration scan and joint fringe fit for a preset.
//!
//! ```text
//! cargo run --release --example fringe_fit -- paper-10km
//! ```

use dqsense::cli::{calibrate, RunConfig};

fn main() -> dqsense::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "paper-240m".into());
    let cfg = RunConfig::preset(&name)?;
    let run = calibrate(&cfg, None)?;
    let fit = &run.fit;
    println!(
        "{name}: V = {:.5} +- {:.5}, phi0 = {:.5} +- {:.5} rad, chi2 = {:.1} / {} dof",
        fit.visibility_hat,
        fit.visibility_std(),
        fit.phase_offset,
        fit.phase_offset_std(),
        fit.residual,
        fit.dof
    );
    for p in &run.scan {
        let m = fit.fractions(p.theta_hat);
        println!(
            "theta = {:.4}  data {:.4} {:.4} {:.4} {:.4}  fit {:.4} {:.4} {:.4} {:.4}",
            p.theta_hat, p.fractions[0], p.fractions[1], p.fractions[2], p.fractions[3], m[0], m[1], m[2], m[3]
        );
    }
    Ok(())
}
