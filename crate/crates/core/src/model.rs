//! Closed-form model of the two-node network.
//!
//! A singlet pair is shared between Alice (one pass through her phase gate)
//! and Bob (two passes). After the evolution the pair carries the phase
//! `u = theta_A - 2 theta_B = 3 theta_hat`, and a sigma_x measurement on both
//! sides routes it to one of the four detector pairs `A_i B_j`.
//!
//! On top of the ideal two-photon probabilities this module builds the full
//! distribution over the sixteen threshold-detector click patterns for a
//! Poissonian multi-pair source with per-channel losses, and the Fisher
//! analysis of the global phase.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients of the global function `theta_hat = alpha . (theta_A, theta_B)`.
pub const ALPHA: [f64; 2] = [1.0 / 3.0, -2.0 / 3.0];

/// Photon passes through the local phase gate at (Alice, Bob).
pub const PASS_COUNTS: (u32, u32) = (1, 2);

/// Period of every fringe in `theta_hat`.
pub const THETA_HAT_PERIOD: f64 = 2.0 * PI / 3.0;

/// Poisson mass that may be discarded by the pair-number truncation.
pub const MAX_TRUNCATED_MASS: f64 = 1e-6;

/// Detector channel. Bit positions follow the event-log convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Channel {
    A1,
    A2,
    B1,
    B2,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::A1, Channel::A2, Channel::B1, Channel::B2];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn bit(self) -> u8 {
        1 << self.index()
    }

    /// Photon passes through the phase gate for a photon landing in this channel.
    pub fn passes(self) -> u32 {
        match self {
            Channel::A1 | Channel::A2 => PASS_COUNTS.0,
            Channel::B1 | Channel::B2 => PASS_COUNTS.1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::A1 => "A1",
            Channel::A2 => "A2",
            Channel::B1 => "B1",
            Channel::B2 => "B2",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A 4-bit detector outcome: bit0 = A1, bit1 = A2, bit2 = B1, bit3 = B2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ClickPattern(u8);

impl ClickPattern {
    pub const EMPTY: ClickPattern = ClickPattern(0);

    pub fn new(mask: u8) -> Result<Self> {
        if mask > 15 {
            return Err(Error::Domain(format!("click pattern {mask} outside 0..=15")));
        }
        Ok(ClickPattern(mask))
    }

    pub(crate) const fn from_bits_unchecked(mask: u8) -> Self {
        ClickPattern(mask & 0x0f)
    }

    pub fn from_channels(channels: &[Channel]) -> Self {
        ClickPattern(channels.iter().fold(0, |m, c| m | c.bit()))
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn contains(self, channel: Channel) -> bool {
        self.0 & channel.bit() != 0
    }

    pub fn clicks(self) -> u32 {
        self.0.count_ones()
    }

    pub fn union(self, other: ClickPattern) -> ClickPattern {
        ClickPattern(self.0 | other.0)
    }

    pub fn all() -> impl Iterator<Item = ClickPattern> {
        (0u8..16).map(ClickPattern)
    }
}

/// One of the four Alice-Bob two-photon coincidences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CoincidenceOutcome {
    A1B1,
    A1B2,
    A2B1,
    A2B2,
}

impl CoincidenceOutcome {
    /// Canonical ordering used by every `[f64; 4]` in the crate.
    pub const ALL: [CoincidenceOutcome; 4] = [
        CoincidenceOutcome::A1B1,
        CoincidenceOutcome::A1B2,
        CoincidenceOutcome::A2B1,
        CoincidenceOutcome::A2B2,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn channels(self) -> (Channel, Channel) {
        match self {
            CoincidenceOutcome::A1B1 => (Channel::A1, Channel::B1),
            CoincidenceOutcome::A1B2 => (Channel::A1, Channel::B2),
            CoincidenceOutcome::A2B1 => (Channel::A2, Channel::B1),
            CoincidenceOutcome::A2B2 => (Channel::A2, Channel::B2),
        }
    }

    pub fn pattern(self) -> ClickPattern {
        let (a, b) = self.channels();
        ClickPattern::from_channels(&[a, b])
    }

    /// Sign of the `V cos u` term: -1 for the {A1B1, A2B2} group, +1 otherwise.
    pub fn fringe_sign(self) -> f64 {
        match self {
            CoincidenceOutcome::A1B1 | CoincidenceOutcome::A2B2 => -1.0,
            CoincidenceOutcome::A1B2 | CoincidenceOutcome::A2B1 => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CoincidenceOutcome::A1B1 => "A1B1",
            CoincidenceOutcome::A1B2 => "A1B2",
            CoincidenceOutcome::A2B1 => "A2B1",
            CoincidenceOutcome::A2B2 => "A2B2",
        }
    }
}

impl fmt::Display for CoincidenceOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Local phases at the two sensors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSetting {
    pub theta_a: f64,
    pub theta_b: f64,
    #[serde(default = "default_pass_counts")]
    pub pass_counts: (u32, u32),
}

fn default_pass_counts() -> (u32, u32) {
    PASS_COUNTS
}

impl PhaseSetting {
    pub fn new(theta_a: f64, theta_b: f64) -> Self {
        PhaseSetting {
            theta_a,
            theta_b,
            pass_counts: PASS_COUNTS,
        }
    }

    /// A setting realising the given global phase with Bob's plate at zero.
    pub fn from_global(theta_hat: f64) -> Self {
        PhaseSetting::new(3.0 * theta_hat, 0.0)
    }

    /// Fringe argument `u = 3 theta_hat`. Only the (1, 2) pass topology is modelled.
    pub fn fringe_argument(&self) -> Result<f64> {
        if self.pass_counts != PASS_COUNTS {
            return Err(Error::Domain(format!(
                "pass counts {:?} unsupported, the fringe model requires {:?}",
                self.pass_counts, PASS_COUNTS
            )));
        }
        Ok(self.theta_a - 2.0 * self.theta_b)
    }
}

/// Global phase `(theta_A - 2 theta_B) / 3`, optionally reduced to `[0, 2pi/3)`.
pub fn global_phase(setting: &PhaseSetting, reduce: bool) -> f64 {
    let raw = ALPHA[0] * setting.theta_a + ALPHA[1] * setting.theta_b;
    if reduce {
        reduce_theta_hat(raw)
    } else {
        raw
    }
}

pub fn reduce_theta_hat(theta_hat: f64) -> f64 {
    let r = theta_hat.rem_euclid(THETA_HAT_PERIOD);
    // rem_euclid can round up to the period itself for tiny negative inputs
    if r >= THETA_HAT_PERIOD {
        0.0
    } else {
        r
    }
}

/// Fold a fringe argument onto the identifiable branch `[0, pi]`.
pub fn fold_fringe_argument(u: f64) -> f64 {
    let r = u.rem_euclid(2.0 * PI);
    if r > PI {
        2.0 * PI - r
    } else {
        r
    }
}

/// Ideal two-photon coincidence probabilities `(A1B1, A1B2, A2B1, A2B2)`.
pub fn coincidence_probs(u: f64, visibility: f64) -> Result<[f64; 4]> {
    check_visibility(visibility)?;
    let c = visibility * u.cos();
    let minus = (1.0 - c) / 4.0;
    let plus = (1.0 + c) / 4.0;
    Ok([minus, plus, plus, minus])
}

fn check_visibility(visibility: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&visibility) {
        return Err(Error::Domain(format!(
            "visibility {visibility} outside [0, 1]"
        )));
    }
    Ok(())
}

/// SPDC source: Poissonian pair number truncated at `n_max`, plus fringe visibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSourceParams", into = "RawSourceParams")]
pub struct SourceParams {
    mu: f64,
    visibility: f64,
    n_max: u32,
    weights: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSourceParams {
    mu: f64,
    visibility: f64,
    #[serde(default = "default_n_max")]
    n_max: u32,
}

fn default_n_max() -> u32 {
    4
}

impl TryFrom<RawSourceParams> for SourceParams {
    type Error = Error;

    fn try_from(raw: RawSourceParams) -> Result<Self> {
        SourceParams::new(raw.mu, raw.visibility, raw.n_max)
    }
}

impl From<SourceParams> for RawSourceParams {
    fn from(s: SourceParams) -> Self {
        RawSourceParams {
            mu: s.mu,
            visibility: s.visibility,
            n_max: s.n_max,
        }
    }
}

impl SourceParams {
    pub fn new(mu: f64, visibility: f64, n_max: u32) -> Result<Self> {
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(Error::Config(format!("source.mu = {mu} must be finite and >= 0")));
        }
        if !(0.0..=1.0).contains(&visibility) {
            return Err(Error::Config(format!(
                "source.visibility = {visibility} outside [0, 1]"
            )));
        }
        if n_max < 1 {
            return Err(Error::Config("source.n_max must be >= 1".into()));
        }
        let mut raw = Vec::with_capacity(n_max as usize + 1);
        let mut term = (-mu).exp();
        for m in 0..=n_max {
            if m > 0 {
                term *= mu / f64::from(m);
            }
            raw.push(term);
        }
        let kept: f64 = raw.iter().sum();
        if 1.0 - kept > MAX_TRUNCATED_MASS {
            return Err(Error::Config(format!(
                "source.n_max = {n_max} discards Poisson mass {:.3e} at mu = {mu} (limit {MAX_TRUNCATED_MASS:e})",
                1.0 - kept
            )));
        }
        // Renormalise so the truncated distribution is a proper distribution.
        let weights = raw.into_iter().map(|w| w / kept).collect();
        Ok(SourceParams {
            mu,
            visibility,
            n_max,
            weights,
        })
    }

    pub fn with_default_truncation(mu: f64, visibility: f64) -> Result<Self> {
        SourceParams::new(mu, visibility, default_n_max())
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn visibility(&self) -> f64 {
        self.visibility
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    /// Renormalised truncated Poisson weights `P(m)`, `m = 0..=n_max`.
    pub fn pair_weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean_pairs(&self) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(m, w)| m as f64 * w)
            .sum()
    }
}

/// Component factors of one channel's heralding efficiency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EfficiencyBreakdown {
    /// Coupling into single-mode fibre.
    pub sc: f64,
    /// Transmission through the source optics.
    pub so: f64,
    pub fiber: f64,
    /// Measurement apparatus.
    pub m: f64,
    pub det: f64,
}

impl EfficiencyBreakdown {
    pub fn product(&self) -> f64 {
        self.sc * self.so * self.fiber * self.m * self.det
    }
}

/// Per-channel heralding efficiencies for (A1, A2, B1, B2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEfficiency", into = "RawEfficiency")]
pub struct EfficiencyBudget {
    eta: [f64; 4],
    breakdown: Option<[EfficiencyBreakdown; 4]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEfficiency {
    #[serde(rename = "A1")]
    a1: f64,
    #[serde(rename = "A2")]
    a2: f64,
    #[serde(rename = "B1")]
    b1: f64,
    #[serde(rename = "B2")]
    b2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    breakdown: Option<RawBreakdown>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBreakdown {
    #[serde(rename = "A1")]
    a1: EfficiencyBreakdown,
    #[serde(rename = "A2")]
    a2: EfficiencyBreakdown,
    #[serde(rename = "B1")]
    b1: EfficiencyBreakdown,
    #[serde(rename = "B2")]
    b2: EfficiencyBreakdown,
}

impl TryFrom<RawEfficiency> for EfficiencyBudget {
    type Error = Error;

    fn try_from(raw: RawEfficiency) -> Result<Self> {
        let budget = EfficiencyBudget::new([raw.a1, raw.a2, raw.b1, raw.b2])?;
        match raw.breakdown {
            None => Ok(budget),
            Some(b) => budget.with_breakdown([b.a1, b.a2, b.b1, b.b2]),
        }
    }
}

impl From<EfficiencyBudget> for RawEfficiency {
    fn from(b: EfficiencyBudget) -> Self {
        RawEfficiency {
            a1: b.eta[0],
            a2: b.eta[1],
            b1: b.eta[2],
            b2: b.eta[3],
            breakdown: b.breakdown.map(|d| RawBreakdown {
                a1: d[0],
                a2: d[1],
                b1: d[2],
                b2: d[3],
            }),
        }
    }
}

impl EfficiencyBudget {
    pub fn new(eta: [f64; 4]) -> Result<Self> {
        for (ch, e) in Channel::ALL.iter().zip(eta) {
            if !(e > 0.0 && e <= 1.0) {
                return Err(Error::Config(format!(
                    "efficiency.{ch} = {e} outside (0, 1]"
                )));
            }
        }
        Ok(EfficiencyBudget {
            eta,
            breakdown: None,
        })
    }

    pub fn uniform(eta: f64) -> Result<Self> {
        EfficiencyBudget::new([eta; 4])
    }

    /// Budget whose efficiencies are the products of the given components.
    pub fn from_breakdown(parts: [EfficiencyBreakdown; 4]) -> Result<Self> {
        let eta = parts.map(|p| p.product());
        EfficiencyBudget::new(eta)?.with_breakdown(parts)
    }

    /// Attach a breakdown; each product must match its efficiency to 1e-6 relative.
    pub fn with_breakdown(mut self, parts: [EfficiencyBreakdown; 4]) -> Result<Self> {
        for (i, ch) in Channel::ALL.iter().enumerate() {
            let p = parts[i].product();
            if ((p - self.eta[i]) / self.eta[i]).abs() > 1e-6 {
                return Err(Error::Config(format!(
                    "efficiency.breakdown.{ch}: component product {p:.8} differs from efficiency {:.8}",
                    self.eta[i]
                )));
            }
        }
        self.breakdown = Some(parts);
        Ok(self)
    }

    pub fn eta(&self, channel: Channel) -> f64 {
        self.eta[channel.index()]
    }

    pub fn as_array(&self) -> [f64; 4] {
        self.eta
    }

    pub fn breakdown(&self) -> Option<&[EfficiencyBreakdown; 4]> {
        self.breakdown.as_ref()
    }

    /// The same budget with A1<->A2 and B1<->B2 exchanged.
    pub fn swapped(&self) -> Self {
        let [a1, a2, b1, b2] = self.eta;
        EfficiencyBudget {
            eta: [a2, a1, b2, b1],
            breakdown: self.breakdown.map(|[a1, a2, b1, b2]| [a2, a1, b2, b1]),
        }
    }
}

/// How a single pair is split over the four detector pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairRouting {
    probs: [f64; 4],
}

impl PairRouting {
    /// sigma_x-basis routing at fringe argument `u`.
    pub fn phase(u: f64, visibility: f64) -> Result<Self> {
        Ok(PairRouting {
            probs: coincidence_probs(u, visibility)?,
        })
    }

    /// Calibration routing: every A1 photon is partnered by B1 and A2 by B2.
    pub fn calibration() -> Self {
        PairRouting {
            probs: [0.5, 0.0, 0.0, 0.5],
        }
    }

    pub fn probs(&self) -> [f64; 4] {
        self.probs
    }
}

/// Probability of each of the sixteen click patterns for one pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClickDistribution {
    pub probs: [f64; 16],
}

impl ClickDistribution {
    pub fn prob(&self, pattern: ClickPattern) -> f64 {
        self.probs[pattern.bits() as usize]
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Probability that the given channel clicks.
    pub fn channel_marginal(&self, channel: Channel) -> f64 {
        ClickPattern::all()
            .filter(|p| p.contains(channel))
            .map(|p| self.prob(p))
            .sum()
    }
}

/// Click-mask distribution produced by a single pair after losses.
pub(crate) fn single_pair_masks(eff: &EfficiencyBudget, routing: &PairRouting) -> [f64; 16] {
    let mut q = [0.0; 16];
    for outcome in CoincidenceOutcome::ALL {
        let p = routing.probs[outcome.index()];
        if p == 0.0 {
            continue;
        }
        let (a, b) = outcome.channels();
        let (ea, eb) = (eff.eta(a), eff.eta(b));
        q[0] += p * (1.0 - ea) * (1.0 - eb);
        q[a.bit() as usize] += p * ea * (1.0 - eb);
        q[b.bit() as usize] += p * (1.0 - ea) * eb;
        q[(a.bit() | b.bit()) as usize] += p * ea * eb;
    }
    q
}

/// Exact pattern distribution for a sigma_x measurement at fringe argument `u`.
///
/// Pair numbers follow the renormalised truncated Poisson weights of
/// `source`; each pair is routed independently and each photon survives with
/// its channel efficiency. A threshold detector clicks when at least one
/// photon reaches it, so the m-pair pattern is the OR of m single-pair masks.
pub fn pattern_distribution(
    source: &SourceParams,
    eff: &EfficiencyBudget,
    u: f64,
) -> Result<ClickDistribution> {
    let routing = PairRouting::phase(u, source.visibility())?;
    Ok(pattern_distribution_routed(source, eff, &routing))
}

pub fn pattern_distribution_routed(
    source: &SourceParams,
    eff: &EfficiencyBudget,
    routing: &PairRouting,
) -> ClickDistribution {
    let q = single_pair_masks(eff, routing);
    let mut total = [0.0; 16];
    let mut current = [0.0; 16];
    current[0] = 1.0;
    for (m, &w) in source.pair_weights().iter().enumerate() {
        if m > 0 {
            let mut next = [0.0; 16];
            for (x, &cx) in current.iter().enumerate() {
                if cx == 0.0 {
                    continue;
                }
                for (y, &qy) in q.iter().enumerate() {
                    next[x | y] += cx * qy;
                }
            }
            current = next;
        }
        for (t, c) in total.iter_mut().zip(current.iter()) {
            *t += w * c;
        }
    }
    ClickDistribution { probs: total }
}

impl ClickDistribution {
    /// Probability that a pulse is one of the nine informative types.
    pub fn informative(&self) -> f64 {
        (0..16u8)
            .filter(|m| m & 0b0011 != 0 && m & 0b1100 != 0)
            .map(|m| self.probs[m as usize])
            .sum()
    }

    /// Expected twofold fractions `P(A_iB_j) / P(informative)`.
    pub fn twofold_fractions(&self) -> Result<[f64; 4]> {
        let inf = self.informative();
        if !(inf > 0.0) {
            return Err(Error::EmptyStatistics(
                "configuration yields no informative events".into(),
            ));
        }
        Ok(CoincidenceOutcome::ALL.map(|o| self.prob(o.pattern()) / inf))
    }
}

/// Fisher information about the global phase per informative event,
/// carried by the four twofold fractions at fringe argument `u`.
pub fn twofold_fisher(source: &SourceParams, eff: &EfficiencyBudget, u: f64) -> Result<f64> {
    let h = 1e-5;
    let f0 = pattern_distribution(source, eff, u)?.twofold_fractions()?;
    let fp = pattern_distribution(source, eff, u + h)?.twofold_fractions()?;
    let fm = pattern_distribution(source, eff, u - h)?.twofold_fractions()?;
    let mut info_u = 0.0;
    for o in CoincidenceOutcome::ALL {
        let i = o.index();
        if f0[i] <= 0.0 {
            return Err(Error::SingularProbability { outcome: o });
        }
        let d = (fp[i] - fm[i]) / (2.0 * h);
        info_u += d * d / f0[i];
    }
    // u = 3 theta_hat
    Ok(9.0 * info_u)
}

/// Classical Fisher matrix over `(theta_A, theta_B)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherMatrix(pub [[f64; 2]; 2]);

impl FisherMatrix {
    pub fn zero() -> Self {
        FisherMatrix([[0.0; 2]; 2])
    }

    pub fn determinant(&self) -> f64 {
        let m = self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    fn quadratic_form(&self, v: [f64; 2]) -> f64 {
        let m = self.0;
        v[0] * (m[0][0] * v[0] + m[0][1] * v[1]) + v[1] * (m[1][0] * v[0] + m[1][1] * v[1])
    }
}

/// `F_kl = sum_i (1/P_i) dP_i/dtheta_k dP_i/dtheta_l` over the four coincidences.
pub fn fisher_matrix(u: f64, visibility: f64) -> Result<FisherMatrix> {
    let probs = coincidence_probs(u, visibility)?;
    // du/dtheta_A = p_A, du/dtheta_B = -p_B
    let du = [f64::from(PASS_COUNTS.0), -f64::from(PASS_COUNTS.1)];
    let mut f = [[0.0; 2]; 2];
    for outcome in CoincidenceOutcome::ALL {
        let p = probs[outcome.index()];
        if p <= 0.0 {
            return Err(Error::SingularProbability { outcome });
        }
        // d/du of (1 + s V cos u)/4
        let dp_du = -outcome.fringe_sign() * visibility * u.sin() / 4.0;
        for k in 0..2 {
            for l in 0..2 {
                f[k][l] += (dp_du * du[k]) * (dp_du * du[l]) / p;
            }
        }
    }
    Ok(FisherMatrix(f))
}

/// Effective Fisher information `(a^T F a) / (a^T a)^2` of the combination `alpha`.
pub fn effective_fi(fisher: &FisherMatrix, alpha: [f64; 2]) -> Result<f64> {
    let norm = alpha[0] * alpha[0] + alpha[1] * alpha[1];
    if norm == 0.0 {
        return Err(Error::Domain("coefficient vector alpha is zero".into()));
    }
    Ok(fisher.quadratic_form(alpha) / (norm * norm))
}

/// Cramer-Rao bound `1 / sqrt(k F_eff)`.
pub fn crb(trials: f64, effective_fi: f64) -> Result<f64> {
    if !(trials >= 1.0) {
        return Err(Error::Domain(format!("trial count {trials} must be >= 1")));
    }
    if !(effective_fi > 0.0) {
        return Err(Error::Domain(format!(
            "effective Fisher information {effective_fi} must be > 0"
        )));
    }
    Ok(1.0 / (trials * effective_fi).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn global_phase_examples() {
        assert_eq!(global_phase(&PhaseSetting::new(0.0, 0.0), false), 0.0);
        assert_relative_eq!(global_phase(&PhaseSetting::new(PI, 0.0), false), PI / 3.0);
        let s = PhaseSetting::new(0.0, PI / 2.0);
        assert_relative_eq!(global_phase(&s, false), -PI / 3.0);
        assert_relative_eq!(global_phase(&s, true), PI / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn reduced_phase_stays_in_period() {
        for x in [-1e-18, -THETA_HAT_PERIOD, 5.0, 0.0, THETA_HAT_PERIOD] {
            let r = reduce_theta_hat(x);
            assert!((0.0..THETA_HAT_PERIOD).contains(&r), "{x} -> {r}");
        }
    }

    #[test]
    fn non_paper_topology_rejected() {
        let mut s = PhaseSetting::new(1.0, 0.5);
        s.pass_counts = (1, 3);
        assert!(matches!(s.fringe_argument(), Err(Error::Domain(_))));
        assert_relative_eq!(PhaseSetting::new(1.0, 0.25).fringe_argument().unwrap(), 0.5);
    }

    #[test]
    fn coincidence_probs_examples() {
        assert_eq!(coincidence_probs(0.0, 1.0).unwrap(), [0.0, 0.5, 0.5, 0.0]);
        for p in coincidence_probs(PI / 2.0, 1.0).unwrap() {
            assert_relative_eq!(p, 0.25, epsilon = 1e-16);
        }
        let p = coincidence_probs(0.0, 0.98).unwrap();
        let expect = [0.005, 0.495, 0.495, 0.005];
        for (a, b) in p.iter().zip(expect) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
        assert!(coincidence_probs(0.0, 1.01).is_err());
        assert!(coincidence_probs(0.0, -0.01).is_err());
    }

    #[test]
    fn truncation_is_enforced() {
        assert!(SourceParams::new(0.1, 0.98, 4).is_ok());
        assert!(matches!(
            SourceParams::new(0.5, 0.98, 2),
            Err(Error::Config(_))
        ));
        let s = SourceParams::new(0.056, 1.0, 4).unwrap();
        let sum: f64 = s.pair_weights().iter().sum();
        assert_relative_eq!(sum, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn efficiency_domain() {
        assert!(EfficiencyBudget::new([0.5, 1.0, 0.7, 0.1]).is_ok());
        assert!(EfficiencyBudget::new([0.0, 1.0, 0.7, 0.1]).is_err());
        assert!(EfficiencyBudget::new([0.5, 1.2, 0.7, 0.1]).is_err());
    }

    #[test]
    fn breakdown_product_must_match() {
        let part = EfficiencyBreakdown {
            sc: 0.9,
            so: 0.9,
            fiber: 1.0,
            m: 1.0,
            det: 1.0,
        };
        let ok = EfficiencyBudget::uniform(0.81).unwrap().with_breakdown([part; 4]);
        assert!(ok.is_ok());
        let bad = EfficiencyBudget::uniform(0.8).unwrap().with_breakdown([part; 4]);
        assert!(matches!(bad, Err(Error::Config(_))));
    }

    #[test]
    fn empty_pattern_bounded_by_zero_pair_weight() {
        let s = SourceParams::new(0.0025, 0.4, 4).unwrap();
        for eta in [0.1, 0.7, 1.0] {
            let eff = EfficiencyBudget::uniform(eta).unwrap();
            for u in [0.0, 0.3, 2.0] {
                let d = pattern_distribution(&s, &eff, u).unwrap();
                assert!(d.prob(ClickPattern::EMPTY) >= (-0.0025f64).exp() - 1e-15);
                assert_relative_eq!(d.total(), 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn low_mu_lossless_reduces_to_two_photon_probs() {
        let s = SourceParams::new(1e-9, 1.0, 4).unwrap();
        let eff = EfficiencyBudget::uniform(1.0).unwrap();
        let d = pattern_distribution(&s, &eff, 0.0).unwrap();
        let nonempty: f64 = ClickPattern::all().skip(1).map(|p| d.prob(p)).sum();
        let p = d.prob(CoincidenceOutcome::A1B2.pattern()) / nonempty;
        assert_relative_eq!(p, 0.5, epsilon = 1e-8);
    }

    #[test]
    fn fisher_matrix_ideal_is_rank_one() {
        let f = fisher_matrix(PI / 2.0, 1.0).unwrap();
        let expect = [[1.0, -2.0], [-2.0, 4.0]];
        for k in 0..2 {
            for l in 0..2 {
                assert_relative_eq!(f.0[k][l], expect[k][l], epsilon = 1e-14);
            }
        }
        assert!(f.determinant().abs() < 1e-14);
    }

    #[test]
    fn fisher_singular_points_name_outcome() {
        match fisher_matrix(0.0, 1.0) {
            Err(Error::SingularProbability { outcome }) => {
                assert_eq!(outcome, CoincidenceOutcome::A1B1)
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(fisher_matrix(PI, 1.0).is_err());
        // at V < 1 the extrema are regular
        assert!(fisher_matrix(0.0, 0.99).is_ok());
    }

    #[test]
    fn effective_fi_examples() {
        let f = FisherMatrix([[1.0, -2.0], [-2.0, 4.0]]);
        assert_relative_eq!(effective_fi(&f, ALPHA).unwrap(), 9.0, epsilon = 1e-13);
        assert_eq!(effective_fi(&FisherMatrix::zero(), ALPHA).unwrap(), 0.0);
        assert_relative_eq!(effective_fi(&f, [1.0, 0.0]).unwrap(), 1.0);
        assert!(effective_fi(&f, [0.0, 0.0]).is_err());
    }

    #[test]
    fn crb_examples() {
        assert_relative_eq!(crb(1.0, 9.0).unwrap(), 1.0 / 3.0);
        assert_relative_eq!(crb(4750.0, 9.0).unwrap(), 0.004836, epsilon = 1e-6);
        assert_relative_eq!(crb(4.0, 1.0).unwrap(), 0.5);
        assert!(crb(0.0, 9.0).is_err());
        assert!(crb(10.0, 0.0).is_err());
        assert!(crb(10.0, -1.0).is_err());
    }
}
