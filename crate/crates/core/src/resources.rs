//! Resource accounting without post-selection.
//!
//! Every photon that passed a phase gate counts as a resource, including
//! those lost before detection. Recorded clicks are inflated back to actual
//! photon numbers with a one-and-two-pair correction, Bob's photons count
//! twice (two passes), and the classical baseline is the optimally allocated
//! shot-noise limit `1 / sqrt(n)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{block_stats, mle_phase, BlockStats, EstimateWarning, FringeFit, MleOptions};
use crate::events::Tally;
use crate::model::{fold_fringe_argument, Channel, EfficiencyBudget, SourceParams};
use crate::simulator::BlockSample;

/// Actual photons behind `recorded` clicks of a channel with efficiency `eta`.
///
/// `N~ = (N / eta) * ((4 + mu) eta - 4 (2 + mu)) / (2 (2 + mu) (eta - 2))`
pub fn actual_photons(recorded: f64, eta: f64, mu: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Domain(format!("efficiency {eta} outside (0, 1]")));
    }
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::Domain(format!("mean photon number {mu} must be >= 0")));
    }
    if !(recorded >= 0.0) {
        return Err(Error::Domain(format!("recorded count {recorded} must be >= 0")));
    }
    let factor = ((4.0 + mu) * eta - 4.0 * (2.0 + mu)) / (2.0 * (2.0 + mu) * (eta - 2.0));
    Ok(recorded / eta * factor)
}

/// The same correction written as its three contributions (one pair; two
/// photons of a double pair in one detector; in different detectors).
pub fn actual_photons_by_parts(recorded: f64, eta: f64, mu: f64) -> f64 {
    let norm = 1.0 + mu / 2.0;
    let same = recorded / (1.0 - (1.0 - eta).powi(2)) * (mu / 4.0) / norm * 2.0;
    recorded / eta / norm + same + recorded / eta * (mu / 4.0) / norm
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::Domain(format!("{name} = {x} must be positive")));
    }
    Ok(())
}

/// Shot-noise limit `1 / sqrt(n)`.
pub fn snl(n: f64) -> Result<f64> {
    check_positive("n", n)?;
    let direct = 1.0 / n.sqrt();
    debug_assert!((direct - snl_optimal_allocation(n)).abs() <= 1e-12 * direct);
    Ok(direct)
}

/// Alice estimates with `n/3` photons, Bob with `2n/3` single-pass photons.
pub fn snl_optimal_allocation(n: f64) -> f64 {
    (1.0 / 9.0 * 3.0 / n + 4.0 / 9.0 * 3.0 / (2.0 * n)).sqrt()
}

/// Lossless entangled bound `1 / sqrt(3n)`: `F = 9` per trial, `n / 3` trials.
pub fn hl(n: f64) -> Result<f64> {
    check_positive("n", n)?;
    Ok(1.0 / (3.0 * n).sqrt())
}

/// Uniform efficiency at which the ideal entangled scheme ties the SNL.
pub fn threshold_efficiency() -> f64 {
    3f64.sqrt() / 3.0
}

/// `10 log10((snl / delta)^2)`; positive when `delta` beats the SNL.
pub fn db_below_snl(delta_hat: f64, snl: f64) -> Result<f64> {
    check_positive("delta_hat", delta_hat)?;
    check_positive("snl", snl)?;
    Ok(20.0 * (snl / delta_hat).log10())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceAudit {
    /// Recorded singles-inclusive clicks `(A1, A2, B1, B2)`.
    #[serde(rename = "N")]
    pub recorded: [u64; 4],
    #[serde(rename = "N_tilde")]
    pub actual: [f64; 4],
    /// `N~_A1 + N~_A2 + 2 N~_B1 + 2 N~_B2`.
    pub n: f64,
    pub mu: f64,
    pub eta: [f64; 4],
}

impl ResourceAudit {
    pub fn from_counts(recorded: [u64; 4], eff: &EfficiencyBudget, mu: f64) -> Result<Self> {
        let mut actual = [0.0; 4];
        let mut n = 0.0;
        for ch in Channel::ALL {
            let i = ch.index();
            actual[i] = actual_photons(recorded[i] as f64, eff.eta(ch), mu)?;
            n += f64::from(ch.passes()) * actual[i];
        }
        Ok(ResourceAudit {
            recorded,
            actual,
            n,
            mu,
            eta: eff.as_array(),
        })
    }

    pub fn from_tally(tally: &Tally, eff: &EfficiencyBudget, mu: f64) -> Result<Self> {
        ResourceAudit::from_counts(tally.channel_clicks_all(), eff, mu)
    }

    /// Recorded clicks weighted by passes; a lower bound on `n`.
    pub fn recorded_passes(&self) -> f64 {
        Channel::ALL
            .iter()
            .map(|c| f64::from(c.passes()) * self.recorded[c.index()] as f64)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionReport {
    pub setting_index: usize,
    /// Global phase of the simulated setting, folded onto the estimation branch.
    pub theta_truth: f64,
    /// Mean block estimate.
    pub theta_hat: f64,
    pub delta_hat: f64,
    pub delta_err: f64,
    /// Mean resources per block.
    pub n: f64,
    pub snl: f64,
    pub hl: f64,
    pub db_below_snl: f64,
    /// `1 / sqrt(k_bar F)` with `F` from the calibrated fringes; absent where `F = 0`.
    pub delta_fisher: Option<f64>,
    pub db_below_snl_fisher: Option<f64>,
    pub mu: f64,
    pub visibility: f64,
    pub eta: [f64; 4],
    pub k_bar: f64,
    pub s: usize,
    /// Blocks whose estimate sat on the branch boundary.
    pub boundary_blocks: usize,
}

/// Estimate every block against `calibration` and fold the spread, the
/// audited resources and both baselines into one report.
///
/// `setpoint` is the simulated global phase in scan coordinates; resources
/// are averaged over blocks.
pub fn precision_report(
    blocks: &[BlockSample],
    calibration: &FringeFit,
    options: MleOptions,
    source: &SourceParams,
    eff: &EfficiencyBudget,
    setpoint: f64,
    k_bar: u64,
) -> Result<(PrecisionReport, BlockStats)> {
    let first = blocks
        .first()
        .ok_or_else(|| Error::Domain("precision report needs at least one block".into()))?;
    let mut merged = Tally::new(first.tally.setting_index);
    let mut estimates = Vec::with_capacity(blocks.len());
    let mut boundary_blocks = 0;
    for b in blocks {
        let est = mle_phase(&b.tally, calibration, options)?;
        if est.warning == Some(EstimateWarning::Boundary) {
            boundary_blocks += 1;
        }
        estimates.push(est.theta_hat);
        merged.merge(&b.tally)?;
    }
    let stats = block_stats(&estimates, k_bar as f64)?;
    let audit = ResourceAudit::from_tally(&merged, eff, source.mu())?;
    let n = audit.n / blocks.len() as f64;
    let snl = snl(n)?;
    let fi = calibration.effective_fi(setpoint);
    let delta_fisher = (fi > 0.0).then(|| 1.0 / (k_bar as f64 * fi).sqrt());
    let report = PrecisionReport {
        setting_index: first.tally.setting_index,
        theta_truth: fold_fringe_argument(3.0 * setpoint) / 3.0,
        theta_hat: stats.mean(),
        delta_hat: stats.delta_hat,
        delta_err: stats.delta_err,
        n,
        snl,
        hl: hl(n)?,
        db_below_snl: db_below_snl(stats.delta_hat, snl)?,
        delta_fisher,
        db_below_snl_fisher: delta_fisher.map(|d| db_below_snl(d, snl)).transpose()?,
        mu: source.mu(),
        visibility: source.visibility(),
        eta: eff.as_array(),
        k_bar: k_bar as f64,
        s: blocks.len(),
        boundary_blocks,
    };
    Ok((report, stats))
}
