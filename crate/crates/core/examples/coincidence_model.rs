//! Closed-form coincidence probabilities, Fisher information and the
//! Cramer-Rao bound across one fringe.
//!
//! ```text
//! cargo run --example coincidence_model -- 0.98
//! ```

use std::f64::consts::PI;

use dqsense::model::{coincidence_probs, crb, effective_fi, fisher_matrix, ALPHA};

fn main() -> dqsense::Result<()> {
    let v: f64 = std::env::args().nth(1).map_or(Ok(1.0), |s| s.parse()).expect("visibility");
    println!("{:>8} {:>9} {:>9} {:>9} {:>9} {:>8} {:>12}", "u", "A1B1", "A1B2", "A2B1", "A2B2", "F_eff", "crb(k=4750)");
    for i in 1..12 {
        let u = i as f64 * PI / 12.0;
        let p = coincidence_probs(u, v)?;
        let f = effective_fi(&fisher_matrix(u, v)?, ALPHA)?;
        println!(
            "{u:8.4} {:9.5} {:9.5} {:9.5} {:9.5} {f:8.4} {:12.3e}",
            p[0],
            p[1],
            p[2],
            p[3],
            crb(4750.0, f)?
        );
    }
    Ok(())
}
