//! Fringe calibration, phase estimation and block statistics.
//!
//! The calibrated fringe of coincidence `c` is
//!
//! ```text
//! f_c(theta_hat) = a_c * (1 + s_c * V * cos(3 theta_hat + phi0))
//! ```
//!
//! with `s_c = -1` for {A1B1, A2B2} and `+1` for {A1B2, A2B1}. Offsets `a_c`
//! are per channel; `V` and `phi0` are shared, which enforces the anti-phase
//! relation between the two groups.
//!
//! Only `w = 3 theta_hat + phi0 in [0, pi]` is identifiable from the
//! fractions (the fringe is even in `w`), so estimates are folded onto that
//! branch and reported as `theta_hat = (w - phi0) / 3`.

use std::f64::consts::PI;

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::Tally;
use crate::model::{CoincidenceOutcome, THETA_HAT_PERIOD};

const N_PARAMS: usize = 6;
const MAX_ITERATIONS: usize = 200;
const XTOL: f64 = 1e-10;

type Mat6 = SMatrix<f64, N_PARAMS, N_PARAMS>;
type Vec6 = SVector<f64, N_PARAMS>;

/// One calibration setpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub theta_hat: f64,
    /// Twofold fractions in `CoincidenceOutcome` order.
    pub fractions: [f64; 4],
    /// Informative events behind the fractions; `None` for noiseless input
    /// (unit weights, covariance scaled by the reduced chi-square).
    pub c_sum: Option<u64>,
}

impl ScanPoint {
    pub fn from_tally(theta_hat: f64, tally: &Tally) -> Result<Self> {
        Ok(ScanPoint {
            theta_hat,
            fractions: crate::events::coincidence_fractions(tally)?,
            c_sum: Some(tally.c_sum()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    pub visibility_hat: f64,
    pub phase_offset: f64,
    /// `a_c V`, in `CoincidenceOutcome` order.
    pub amplitude: [f64; 4],
    /// `a_c`.
    pub offset: [f64; 4],
    /// Parameter order: `a_A1B1, a_A1B2, a_A2B1, a_A2B2, V, phi0`.
    pub covariance: [[f64; N_PARAMS]; N_PARAMS],
    /// Weighted sum of squared residuals.
    pub residual: f64,
    pub dof: usize,
    pub iterations: usize,
}

impl FringeFit {
    /// A calibration that is exactly the ideal model at visibility `v`.
    pub fn ideal(visibility: f64) -> Self {
        FringeFit {
            visibility_hat: visibility,
            phase_offset: 0.0,
            amplitude: [visibility / 4.0; 4],
            offset: [0.25; 4],
            covariance: [[0.0; N_PARAMS]; N_PARAMS],
            residual: 0.0,
            dof: 0,
            iterations: 0,
        }
    }

    pub fn visibility_std(&self) -> f64 {
        self.covariance[4][4].sqrt()
    }

    pub fn phase_offset_std(&self) -> f64 {
        self.covariance[5][5].sqrt()
    }

    pub fn fraction(&self, outcome: CoincidenceOutcome, theta_hat: f64) -> f64 {
        let c = (3.0 * theta_hat + self.phase_offset).cos();
        self.offset[outcome.index()] * (1.0 + outcome.fringe_sign() * self.visibility_hat * c)
    }

    pub fn fractions(&self, theta_hat: f64) -> [f64; 4] {
        CoincidenceOutcome::ALL.map(|o| self.fraction(o, theta_hat))
    }

    /// Fisher information about `theta_hat` per informative event, from the calibrated fringes.
    pub fn effective_fi(&self, theta_hat: f64) -> f64 {
        let w = 3.0 * theta_hat + self.phase_offset;
        let (s, c) = w.sin_cos();
        let v = self.visibility_hat;
        let info_w: f64 = CoincidenceOutcome::ALL
            .iter()
            .map(|o| {
                let a = self.offset[o.index()];
                let sign = o.fringe_sign();
                let f = a * (1.0 + sign * v * c);
                let df = -a * sign * v * s;
                if f > 0.0 {
                    df * df / f
                } else {
                    0.0
                }
            })
            .sum();
        9.0 * info_w
    }
}

fn model_and_gradient(p: &Vec6, outcome: CoincidenceOutcome, theta_hat: f64) -> (f64, Vec6) {
    let i = outcome.index();
    let sign = outcome.fringe_sign();
    let (a, v, phi) = (p[i], p[4], p[5]);
    let (sn, cs) = (3.0 * theta_hat + phi).sin_cos();
    let mut g = Vec6::zeros();
    g[i] = 1.0 + sign * v * cs;
    g[4] = a * sign * cs;
    g[5] = -a * sign * v * sn;
    (a * (1.0 + sign * v * cs), g)
}

fn weights(point: &ScanPoint) -> [f64; 4] {
    match point.c_sum {
        // Poisson variance f / C of a count fraction. Contrasts between the
        // two anti-phase groups are then weighted correctly.
        Some(c) if c > 0 => {
            let c = c as f64;
            point.fractions.map(|f| c / f.max(1.0 / c))
        }
        _ => [1.0; 4],
    }
}

struct Normal {
    jtj: Mat6,
    jtr: Vec6,
    chi2: f64,
}

fn normal_equations(scan: &[ScanPoint], w: &[[f64; 4]], p: &Vec6) -> Normal {
    let mut jtj = Mat6::zeros();
    let mut jtr = Vec6::zeros();
    let mut chi2 = 0.0;
    for (pt, wt) in scan.iter().zip(w) {
        for o in CoincidenceOutcome::ALL {
            let (m, g) = model_and_gradient(p, o, pt.theta_hat);
            let r = pt.fractions[o.index()] - m;
            let wi = wt[o.index()];
            chi2 += wi * r * r;
            jtj += wi * g * g.transpose();
            jtr += wi * r * g;
        }
    }
    Normal { jtj, jtr, chi2 }
}

fn chi2_at(scan: &[ScanPoint], w: &[[f64; 4]], p: &Vec6) -> f64 {
    scan.iter()
        .zip(w)
        .map(|(pt, wt)| {
            CoincidenceOutcome::ALL
                .iter()
                .map(|o| {
                    let (m, _) = model_and_gradient(p, *o, pt.theta_hat);
                    let r = pt.fractions[o.index()] - m;
                    wt[o.index()] * r * r
                })
                .sum::<f64>()
        })
        .sum()
}

/// Linear least-squares probe `f = m + p cos 3t + q sin 3t` per channel.
fn fourier_probe(scan: &[ScanPoint]) -> Result<Vec6> {
    let mut ms = [0.0; 4];
    let mut big_p = 0.0;
    let mut big_q = 0.0;
    let mut amp = 0.0;
    for o in CoincidenceOutcome::ALL {
        let mut ata = SMatrix::<f64, 3, 3>::zeros();
        let mut aty = SVector::<f64, 3>::zeros();
        for pt in scan {
            let (s, c) = (3.0 * pt.theta_hat).sin_cos();
            let row = SVector::<f64, 3>::new(1.0, c, s);
            ata += row * row.transpose();
            aty += row * pt.fractions[o.index()];
        }
        let sol = ata
            .lu()
            .solve(&aty)
            .ok_or_else(|| Error::Domain("setpoints do not resolve the fringe".into()))?;
        let sign = o.fringe_sign();
        ms[o.index()] = sol[0];
        big_p += sign * sol[1];
        big_q += sign * sol[2];
        amp += sol[1].hypot(sol[2]);
    }
    let total: f64 = ms.iter().sum();
    let v0 = if total > 0.0 { (amp / total).clamp(0.01, 1.0) } else { 0.5 };
    let phi0 = (-big_q).atan2(big_p);
    Ok(Vec6::from_column_slice(&[ms[0], ms[1], ms[2], ms[3], v0, phi0]))
}

fn wrap_phase(phi: f64) -> f64 {
    let r = (phi + PI).rem_euclid(2.0 * PI) - PI;
    if r <= -PI {
        r + 2.0 * PI
    } else {
        r
    }
}

/// Joint weighted least-squares fit of the four coincidence fringes.
pub fn fit_fringe(scan: &[ScanPoint]) -> Result<FringeFit> {
    let mut thetas: Vec<f64> = scan.iter().map(|p| p.theta_hat).collect();
    thetas.sort_by(f64::total_cmp);
    thetas.dedup();
    if thetas.len() < 5 {
        return Err(Error::Domain(format!(
            "fringe fit needs at least 5 distinct setpoints, got {}",
            thetas.len()
        )));
    }
    let span = thetas[thetas.len() - 1] - thetas[0];
    if span <= THETA_HAT_PERIOD / 2.0 {
        return Err(Error::Domain(format!(
            "setpoints span {span:.4} rad, more than half a period ({:.4}) is required",
            THETA_HAT_PERIOD / 2.0
        )));
    }

    let w: Vec<[f64; 4]> = scan.iter().map(weights).collect();
    let mut p = fourier_probe(scan)?;
    let mut lambda = 1e-3;
    let mut normal = normal_equations(scan, &w, &p);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut damped = normal.jtj;
        for i in 0..N_PARAMS {
            damped[(i, i)] += lambda * normal.jtj[(i, i)].max(1e-12);
        }
        let Some(step) = damped.cholesky().map(|c| c.solve(&normal.jtr)) else {
            lambda *= 10.0;
            continue;
        };
        let mut trial = p + step;
        trial[4] = trial[4].clamp(0.0, 1.0);
        let applied = trial - p;
        let small = applied.norm() <= XTOL * (p.norm() + XTOL);
        let chi2 = chi2_at(scan, &w, &trial);
        if chi2 <= normal.chi2 {
            p = trial;
            normal = normal_equations(scan, &w, &p);
            lambda = (lambda / 10.0).max(1e-15);
        } else {
            lambda *= 10.0;
        }
        if small || lambda > 1e30 {
            converged = true;
            break;
        }
    }
    if !converged {
        let residuals = scan
            .iter()
            .flat_map(|pt| {
                CoincidenceOutcome::ALL
                    .map(|o| pt.fractions[o.index()] - model_and_gradient(&p, o, pt.theta_hat).0)
            })
            .collect();
        return Err(Error::Fit {
            message: "relative parameter change stayed above 1e-10".into(),
            iterations,
            chi2: normal.chi2,
            residuals,
        });
    }

    let dof = (4 * scan.len()).saturating_sub(N_PARAMS);
    let unit_weights = scan.iter().all(|pt| pt.c_sum.is_none());
    let scale = if unit_weights && dof > 0 {
        normal.chi2 / dof as f64
    } else {
        1.0
    };
    let cov = normal
        .jtj
        .try_inverse()
        .map(|m| m * scale)
        .unwrap_or_else(|| Mat6::from_element(f64::NAN));
    let mut covariance = [[0.0; N_PARAMS]; N_PARAMS];
    for (i, row) in covariance.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = cov[(i, j)];
        }
    }
    let offset = [p[0], p[1], p[2], p[3]];
    Ok(FringeFit {
        visibility_hat: p[4],
        phase_offset: wrap_phase(p[5]),
        amplitude: offset.map(|a| a * p[4]),
        offset,
        covariance,
        residual: normal.chi2,
        dof,
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MleOptions {
    /// Also use the phase dependence of the non-twofold share of `C_sum`
    /// implied by the calibrated curves. Off by default.
    pub include_higher_order: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateWarning {
    /// Maximum on the branch boundary (fringe extremum).
    Boundary,
    /// No twofold information; the branch midpoint is returned.
    FlatLikelihood,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseEstimate {
    pub theta_hat: f64,
    /// `w = 3 theta_hat + phi0` on `[0, pi]`.
    pub fringe_argument: f64,
    pub warning: Option<EstimateWarning>,
}

/// Maximum-likelihood global phase from one tally against a calibration.
pub fn mle_phase(tally: &Tally, calibration: &FringeFit, options: MleOptions) -> Result<PhaseEstimate> {
    let c_sum = tally.c_sum();
    if c_sum == 0 {
        return Err(Error::EmptyStatistics(
            "tally has no informative events".into(),
        ));
    }
    let v = calibration.visibility_hat;
    if !(v > 0.0 && v <= 1.0) {
        return Err(Error::Domain(format!(
            "calibrated visibility {v} must lie in (0, 1]"
        )));
    }
    let counts = tally.twofold_counts().map(|c| c as f64);
    let plus = counts[1] + counts[2];
    let minus = counts[0] + counts[3];
    let rest = c_sum as f64 - counts.iter().sum::<f64>();

    let (x, warning) = if options.include_higher_order && rest > 0.0 {
        maximise_with_rest(&counts, rest, calibration)
    } else if plus + minus == 0.0 {
        (0.0, Some(EstimateWarning::FlatLikelihood))
    } else {
        // Stationary point of C+ ln(1 + V x) + C- ln(1 - V x), x = cos w.
        let x = (plus - minus) / (v * (plus + minus));
        if x >= 1.0 {
            (1.0, Some(EstimateWarning::Boundary))
        } else if x <= -1.0 {
            (-1.0, Some(EstimateWarning::Boundary))
        } else {
            (x, None)
        }
    };
    let w = x.acos();
    Ok(PhaseEstimate {
        theta_hat: (w - calibration.phase_offset) / 3.0,
        fringe_argument: w,
        warning,
    })
}

fn maximise_with_rest(
    counts: &[f64; 4],
    rest: f64,
    cal: &FringeFit,
) -> (f64, Option<EstimateWarning>) {
    let v = cal.visibility_hat;
    let a_total: f64 = cal.offset.iter().sum();
    let d = cal.offset[1] + cal.offset[2] - cal.offset[0] - cal.offset[3];
    // derivative of the (concave) log-likelihood in x = cos w
    let score = |x: f64| -> f64 {
        let mut g = 0.0;
        for o in CoincidenceOutcome::ALL {
            let c = counts[o.index()];
            if c > 0.0 {
                let s = o.fringe_sign();
                g += c * s * v / (1.0 + s * v * x);
            }
        }
        let r = (1.0 - a_total - v * d * x).max(1e-12);
        g - rest * v * d / r
    };
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    if score(hi - 1e-15) >= 0.0 {
        return (1.0, Some(EstimateWarning::Boundary));
    }
    if score(lo + 1e-15) <= 0.0 {
        return (-1.0, Some(EstimateWarning::Boundary));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if score(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi), None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockStats {
    pub s: usize,
    pub k_bar: f64,
    pub estimates: Vec<f64>,
    pub delta_hat: f64,
    pub delta_err: f64,
}

impl BlockStats {
    pub fn mean(&self) -> f64 {
        self.estimates.iter().sum::<f64>() / self.s as f64
    }
}

/// Bessel-corrected spread of block estimates and its error `delta / sqrt(2(s-1))`.
pub fn block_stats(estimates: &[f64], k_bar: f64) -> Result<BlockStats> {
    let s = estimates.len();
    if s < 2 {
        return Err(Error::Domain(format!("block statistics need s >= 2, got {s}")));
    }
    // shifted by the first value, so a constant list gives exactly zero
    let x0 = estimates[0];
    let (sum, sum_sq) = estimates
        .iter()
        .fold((0.0, 0.0), |(a, b), e| (a + (e - x0), b + (e - x0) * (e - x0)));
    let var = ((sum_sq - sum * sum / s as f64) / (s - 1) as f64).max(0.0);
    let delta_hat = var.sqrt();
    Ok(BlockStats {
        s,
        k_bar,
        estimates: estimates.to_vec(),
        delta_hat,
        delta_err: delta_error(delta_hat, s),
    })
}

pub fn delta_error(delta_hat: f64, s: usize) -> f64 {
    delta_hat / (2.0 * (s as f64 - 1.0)).sqrt()
}

/// Effective Fisher information per trial from an observed spread, `1 / (delta^2 k)`.
pub fn fisher_from_precision(delta_hat: f64, k_bar: f64) -> Result<f64> {
    if !(delta_hat > 0.0) {
        return Err(Error::Domain(format!("delta_hat = {delta_hat} must be > 0")));
    }
    if !(k_bar >= 1.0) {
        return Err(Error::Domain(format!("k_bar = {k_bar} must be >= 1")));
    }
    Ok(1.0 / (delta_hat * delta_hat * k_bar))
}
