//! Random unknown-phase runs.
//!
//! A seeded bit stream stands in for the hardware random number generator.
//! Each 64-bit block becomes one phase in `[0, 2pi)`; Alice's and Bob's
//! phases are drawn independently and the sensed global phase is reported
//! folded onto the estimation branch.

use std::f64::consts::TAU;
use std::io::Write;

use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{BlockStats, FringeFit, MleOptions};
use crate::model::{EfficiencyBudget, PhaseSetting, SourceParams};
use crate::resources::{precision_report, PrecisionReport};
use crate::simulator::{simulate_blocks, stream_rng, PulseSampler, StreamDomain};

/// Truths with `|cos u|` at or above this are flagged as near a fringe extremum.
pub const EXTREMUM_COS: f64 = 0.95;

/// Deterministic bit stream, most significant bit of each word first.
#[derive(Debug, Clone)]
pub struct BitSource {
    rng: ChaCha8Rng,
}

impl BitSource {
    pub fn new(seed: u64) -> Self {
        BitSource {
            rng: stream_rng(seed, StreamDomain::RandomBits, 0, 0),
        }
    }

    pub fn next_block(&mut self) -> [bool; 64] {
        let v = self.rng.next_u64();
        std::array::from_fn(|i| (v >> (63 - i)) & 1 == 1)
    }
}

/// Read 64 bits MSB first as `v` and return `2 pi v / 2^64`.
pub fn bits_to_phase(bits: &[bool]) -> Result<f64> {
    if bits.len() != 64 {
        return Err(Error::Domain(format!(
            "bits_to_phase needs exactly 64 bits, got {}",
            bits.len()
        )));
    }
    let v = bits.iter().fold(0u64, |acc, &b| (acc << 1) | u64::from(b));
    // v / 2^64 rounds to 1 for the top 2^10 values
    let phase = TAU * (v as f64 / 18_446_744_073_709_551_616.0);
    Ok(if phase >= TAU { TAU.next_down() } else { phase })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomPhaseTrial {
    pub index: usize,
    pub theta_a: f64,
    pub theta_b: f64,
    /// Folded global phase truth on the estimation branch.
    pub theta_truth: f64,
    pub near_extremum: bool,
    pub stats: BlockStats,
    pub report: PrecisionReport,
}

impl RandomPhaseTrial {
    /// Mean estimate minus truth.
    pub fn residual(&self) -> f64 {
        self.report.theta_hat - self.theta_truth
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomPhaseTrialSet {
    pub seed: u64,
    pub trials: Vec<RandomPhaseTrial>,
}

/// Everything a random-phase run needs besides the calibration.
#[derive(Debug, Clone)]
pub struct RandomPhaseSetup<'a> {
    pub source: &'a SourceParams,
    pub eff: &'a EfficiencyBudget,
    pub num_phases: usize,
    pub k_bar: u64,
    pub s: usize,
    pub seed: u64,
    pub options: MleOptions,
}

/// Draw `num_phases` random settings and estimate each with `s` blocks of `k_bar` events.
pub fn run_random_phase_experiment(
    setup: &RandomPhaseSetup<'_>,
    calibration: &FringeFit,
) -> Result<RandomPhaseTrialSet> {
    let mut bits = BitSource::new(setup.seed);
    let mut trials = Vec::with_capacity(setup.num_phases);
    for index in 0..setup.num_phases {
        let theta_a = bits_to_phase(&bits.next_block())?;
        let theta_b = bits_to_phase(&bits.next_block())?;
        let setting = PhaseSetting::new(theta_a, theta_b);
        let u = setting.fringe_argument()?;
        let sampler = PulseSampler::phase(setup.source, setup.eff, u)?;
        let blocks = simulate_blocks(&sampler, setup.k_bar, setup.s, setup.seed, index)?;
        let (report, stats) = precision_report(
            &blocks,
            calibration,
            setup.options,
            setup.source,
            setup.eff,
            u / 3.0,
            setup.k_bar,
        )?;
        trials.push(RandomPhaseTrial {
            index,
            theta_a,
            theta_b,
            theta_truth: report.theta_truth,
            near_extremum: u.cos().abs() >= EXTREMUM_COS,
            stats,
            report,
        });
    }
    Ok(RandomPhaseTrialSet {
        seed: setup.seed,
        trials,
    })
}

/// Table with columns `index,estimated_phase_rad,stddev,stddev_err`.
pub fn write_table_csv<W: Write>(writer: W, set: &RandomPhaseTrialSet) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["index", "estimated_phase_rad", "stddev", "stddev_err"])?;
    for t in &set.trials {
        w.write_record([
            t.index.to_string(),
            t.report.theta_hat.to_string(),
            t.report.delta_hat.to_string(),
            t.report.delta_err.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<random-phase table>", e))?;
    Ok(())
}
