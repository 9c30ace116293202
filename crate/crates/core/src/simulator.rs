//! Monte Carlo generation of per-pulse click patterns.
//!
//! # Determinism
//!
//! Every chunk of pulses (and every estimation block) draws from its own
//! ChaCha8 stream. The key is expanded from the run seed with
//! `SeedableRng::seed_from_u64`; the 64-bit ChaCha stream id packs
//!
//! ```text
//! bits 56..64  domain tag (pulses, blocks, random bits)
//! bits 32..56  setting index  (< 2^24)
//! bits  0..32  chunk / block index (< 2^32)
//! ```
//!
//! so a stream is a pure function of `(seed, domain, setting, chunk)` and the
//! ChaCha block counter. Chunks are simulated in parallel and merged in index
//! order, which makes every output independent of the worker count.
//!
//! # Vacuum skipping
//!
//! Pulses with no emitted pair always give the empty pattern. The chunk and
//! block samplers draw the number of vacuum pulses before the next emission
//! from the exact geometric law and only simulate emitting pulses, so the
//! sampled process is identical in distribution to pulse-by-pulse sampling.
//! [`sample_pulse`] is the pulse-by-pulse reference.
//!
//! # Event log
//!
//! The CSV log (`pulse_index,setting_index,pattern,truth_pairs`) contains
//! one row per pulse that emitted a pair, plus the final pulse of each setting
//! even when it is vacuum. `pulse_index` counts from zero within a setting,
//! so the pulse count of a setting is its largest `pulse_index + 1`.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::Tally;
use crate::model::{
    Channel, ClickPattern, CoincidenceOutcome, EfficiencyBudget, PairRouting, PhaseSetting,
    SourceParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum StreamDomain {
    Pulses = 1,
    Blocks = 2,
    RandomBits = 3,
}

pub const MAX_SETTINGS: u64 = 1 << 24;
pub const MAX_CHUNKS: u64 = 1 << 32;

/// Independent random stream for `(seed, domain, setting, chunk)`.
pub fn stream_rng(seed: u64, domain: StreamDomain, setting: u64, chunk: u64) -> ChaCha8Rng {
    debug_assert!(setting < MAX_SETTINGS && chunk < MAX_CHUNKS);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << 56) | (setting << 32) | chunk);
    rng
}

#[inline]
pub(crate) const fn is_informative_mask(mask: u8) -> bool {
    mask & 0b0011 != 0 && mask & 0b1100 != 0
}

/// Precomputed sampler for one `(source, efficiencies, routing)` triple.
#[derive(Debug, Clone)]
pub struct PulseSampler {
    /// Cumulative `P(m)` over `m = 0..=n_max`.
    cumulative: Vec<f64>,
    /// Cumulative `P(m | m >= 1)` over `m = 1..=n_max`.
    emitting_cumulative: Vec<f64>,
    p_emit: f64,
    gap: Geometric,
    route_cumulative: [f64; 4],
    eta: [f64; 4],
    n_max: u32,
}

impl PulseSampler {
    pub fn new(source: &SourceParams, eff: &EfficiencyBudget, routing: &PairRouting) -> Self {
        let w = source.pair_weights();
        let cumulative = w
            .iter()
            .scan(0.0, |acc, x| {
                *acc += x;
                Some(*acc)
            })
            .collect();
        let p_emit: f64 = w[1..].iter().sum();
        let emitting_cumulative = if p_emit > 0.0 {
            w[1..]
                .iter()
                .scan(0.0, |acc, x| {
                    *acc += x / p_emit;
                    Some(*acc)
                })
                .collect()
        } else {
            vec![1.0; w.len() - 1]
        };
        let probs = routing.probs();
        let mut route_cumulative = [0.0; 4];
        let mut acc = 0.0;
        for (c, p) in route_cumulative.iter_mut().zip(probs) {
            acc += p;
            *c = acc;
        }
        PulseSampler {
            cumulative,
            emitting_cumulative,
            p_emit,
            gap: Geometric::new(p_emit.clamp(0.0, 1.0)).expect("probability in [0, 1]"),
            route_cumulative,
            eta: eff.as_array(),
            n_max: source.n_max(),
        }
    }

    pub fn phase(source: &SourceParams, eff: &EfficiencyBudget, u: f64) -> Result<Self> {
        let routing = PairRouting::phase(u, source.visibility())?;
        Ok(PulseSampler::new(source, eff, &routing))
    }

    /// Probability that a pulse emits at least one pair.
    pub fn emission_probability(&self) -> f64 {
        self.p_emit
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    fn pick(cumulative: &[f64], r: f64) -> usize {
        cumulative
            .iter()
            .position(|c| r < *c)
            .unwrap_or(cumulative.len() - 1)
    }

    /// Pair number of one pulse from the truncated Poisson law.
    pub fn sample_pairs<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        Self::pick(&self.cumulative, rng.random::<f64>()) as u32
    }

    /// Pair number conditioned on at least one emission.
    pub fn sample_emitting_pairs<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        1 + Self::pick(&self.emitting_cumulative, rng.random::<f64>()) as u32
    }

    /// Vacuum pulses preceding the next emission (`u64::MAX` if the source is dark).
    pub fn vacuum_gap<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.gap.sample(rng)
    }

    /// Route `pairs` pairs, apply losses and OR the surviving photons.
    pub fn detect<R: Rng + ?Sized>(&self, pairs: u32, rng: &mut R) -> ClickPattern {
        let mut mask = 0u8;
        for _ in 0..pairs {
            let route = CoincidenceOutcome::ALL[Self::pick(&self.route_cumulative, rng.random())];
            let (a, b) = route.channels();
            if rng.random::<f64>() < self.eta[a.index()] {
                mask |= a.bit();
            }
            if rng.random::<f64>() < self.eta[b.index()] {
                mask |= b.bit();
            }
        }
        ClickPattern::from_bits_unchecked(mask)
    }

    /// One pulse, sampled pulse by pulse.
    pub fn sample_pulse<R: Rng + ?Sized>(&self, rng: &mut R) -> (ClickPattern, u32) {
        let m = self.sample_pairs(rng);
        (self.detect(m, rng), m)
    }
}

/// One pulse at fringe argument `u`: `(pattern, pairs emitted)`.
///
/// Builds a [`PulseSampler`] on every call; loops should hold a sampler.
pub fn sample_pulse<R: Rng + ?Sized>(
    source: &SourceParams,
    eff: &EfficiencyBudget,
    u: f64,
    rng: &mut R,
) -> Result<(ClickPattern, u32)> {
    Ok(PulseSampler::phase(source, eff, u)?.sample_pulse(rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoutingMode {
    /// sigma_x measurement at each setting's phase.
    #[default]
    Phase,
    /// Deterministic A1-B1 / A2-B2 partnering for efficiency calibration.
    Calibration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: SourceParams,
    pub eff: EfficiencyBudget,
    pub settings: Vec<PhaseSetting>,
    pub pulses_per_setting: u64,
    pub seed: u64,
    /// Pulses per random stream. A trailing partial chunk is simulated as is.
    pub chunk_size: u64,
    #[serde(default)]
    pub routing: RoutingMode,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pulses_per_setting < 1 {
            return Err(Error::Config("pulses_per_setting must be >= 1".into()));
        }
        if self.chunk_size < 1 {
            return Err(Error::Config("chunk_size must be >= 1".into()));
        }
        if self.settings.len() as u64 >= MAX_SETTINGS {
            return Err(Error::Config(format!(
                "at most {MAX_SETTINGS} settings per run"
            )));
        }
        if self.chunks_per_setting() >= MAX_CHUNKS {
            return Err(Error::Config(format!(
                "pulses_per_setting / chunk_size must stay below {MAX_CHUNKS}"
            )));
        }
        for s in &self.settings {
            s.fringe_argument()?;
        }
        Ok(())
    }

    pub fn chunks_per_setting(&self) -> u64 {
        self.pulses_per_setting.div_ceil(self.chunk_size)
    }

    fn sampler(&self, setting: &PhaseSetting) -> Result<PulseSampler> {
        let routing = match self.routing {
            RoutingMode::Phase => {
                PairRouting::phase(setting.fringe_argument()?, self.source.visibility())?
            }
            RoutingMode::Calibration => PairRouting::calibration(),
        };
        Ok(PulseSampler::new(&self.source, &self.eff, &routing))
    }
}

/// One logged pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub pulse_index: u64,
    pub setting_index: u64,
    pub pattern: u8,
    pub truth_pairs: u32,
}

/// Receives event-log records chunk by chunk, in pulse order.
pub trait EventSink {
    fn write_chunk(&mut self, records: &[EventRecord]) -> Result<()>;
}

impl EventSink for Vec<EventRecord> {
    fn write_chunk(&mut self, records: &[EventRecord]) -> Result<()> {
        self.extend_from_slice(records);
        Ok(())
    }
}

/// CSV event log writer.
pub struct CsvEventLog<W: Write> {
    writer: csv::Writer<W>,
}

impl<W: Write> CsvEventLog<W> {
    pub fn new(inner: W) -> Self {
        CsvEventLog {
            writer: csv::Writer::from_writer(inner),
        }
    }

    pub fn finish(mut self) -> Result<W> {
        self.writer
            .flush()
            .map_err(|e| Error::io("<event log>", e))?;
        self.writer
            .into_inner()
            .map_err(|e| Error::io("<event log>", e.into_error()))
    }
}

impl<W: Write> EventSink for CsvEventLog<W> {
    fn write_chunk(&mut self, records: &[EventRecord]) -> Result<()> {
        for r in records {
            self.writer.serialize(r)?;
        }
        Ok(())
    }
}

pub fn read_event_log<R: Read>(reader: R) -> Result<Vec<EventRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (line, row) in r.deserialize::<EventRecord>().enumerate() {
        let rec = row?;
        if rec.pattern > 15 {
            return Err(Error::Domain(format!(
                "event log row {}: pattern {} outside 0..=15",
                line + 2,
                rec.pattern
            )));
        }
        out.push(rec);
    }
    Ok(out)
}

/// Rebuild per-setting tallies and emitted-pair totals from a log.
pub fn tallies_from_log(records: &[EventRecord]) -> Result<(Vec<Tally>, Vec<u64>)> {
    let settings = records
        .iter()
        .map(|r| r.setting_index as usize + 1)
        .max()
        .unwrap_or(0);
    let mut tallies: Vec<Tally> = (0..settings).map(Tally::new).collect();
    let mut pulses = vec![0u64; settings];
    let mut logged = vec![0u64; settings];
    let mut pairs = vec![0u64; settings];
    for r in records {
        let s = r.setting_index as usize;
        pulses[s] = pulses[s].max(r.pulse_index + 1);
        // The terminal vacuum row only marks the setting length.
        if r.truth_pairs == 0 && r.pattern == 0 {
            continue;
        }
        logged[s] += 1;
        pairs[s] += u64::from(r.truth_pairs);
        tallies[s].record(ClickPattern::new(r.pattern)?)?;
    }
    for s in 0..settings {
        let vacuum = pulses[s].checked_sub(logged[s]).ok_or_else(|| {
            Error::Domain(format!("setting {s}: more records than pulses"))
        })?;
        tallies[s].add(ClickPattern::EMPTY, vacuum)?;
    }
    Ok((tallies, pairs))
}

/// Cut each setting's pulse sequence into consecutive blocks of `k_bar`
/// informative events. Vacuum pulses before an event belong to its block; an
/// unfinished trailing block is dropped.
pub fn blocks_from_log(records: &[EventRecord], k_bar: u64) -> Result<Vec<Vec<BlockSample>>> {
    if k_bar < 1 {
        return Err(Error::Domain("k_bar must be >= 1".into()));
    }
    let settings = records
        .iter()
        .map(|r| r.setting_index as usize + 1)
        .max()
        .unwrap_or(0);
    let mut out: Vec<Vec<BlockSample>> = vec![Vec::new(); settings];
    let mut current: Vec<([u64; 16], u64, u64, u64)> = vec![([0; 16], 0, 0, 0); settings];
    let mut last: Vec<Option<u64>> = vec![None; settings];
    for r in records {
        let s = r.setting_index as usize;
        if last[s].is_some_and(|p| r.pulse_index <= p) {
            return Err(Error::Domain(format!(
                "setting {s}: pulse_index {} out of order",
                r.pulse_index
            )));
        }
        last[s] = Some(r.pulse_index);
        if r.truth_pairs == 0 && r.pattern == 0 {
            continue;
        }
        let (counts, informative, start, pairs) = &mut current[s];
        counts[r.pattern as usize] += 1;
        *pairs += u64::from(r.truth_pairs);
        if is_informative_mask(r.pattern) {
            *informative += 1;
        }
        if *informative == k_bar {
            let pulses = r.pulse_index + 1 - *start;
            let emitted: u64 = counts.iter().sum();
            counts[0] += pulses - emitted;
            out[s].push(BlockSample {
                tally: Tally {
                    setting_index: s,
                    counts: *counts,
                },
                truth_pairs: *pairs,
            });
            current[s] = ([0; 16], 0, r.pulse_index + 1, 0);
        }
    }
    Ok(out)
}

/// Simulate `pulses` pulses of one setting on the streams of `setting_index`.
pub fn simulate_setting(
    sampler: &PulseSampler,
    pulses: u64,
    chunk_size: u64,
    seed: u64,
    setting_index: usize,
) -> Result<(Tally, u64)> {
    if pulses < 1 || chunk_size < 1 {
        return Err(Error::Config("pulses and chunk_size must be >= 1".into()));
    }
    let chunks = pulses.div_ceil(chunk_size);
    if chunks >= MAX_CHUNKS || setting_index as u64 >= MAX_SETTINGS {
        return Err(Error::Config("stream index out of range".into()));
    }
    let results: Vec<ChunkResult> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let first = c * chunk_size;
            let len = chunk_size.min(pulses - first);
            let mut rng = stream_rng(seed, StreamDomain::Pulses, setting_index as u64, c);
            simulate_chunk(sampler, &mut rng, setting_index as u64, first, len, false, false)
        })
        .collect();
    let mut tally = Tally::new(setting_index);
    let mut pairs = 0;
    for r in results {
        for (mask, n) in r.counts.iter().enumerate() {
            tally.add(ClickPattern::from_bits_unchecked(mask as u8), *n)?;
        }
        pairs += r.pairs;
    }
    Ok((tally, pairs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub tallies: Vec<Tally>,
    /// Pairs emitted per setting (simulation truth).
    pub truth_pairs: Vec<u64>,
}

impl ExperimentOutput {
    /// Photon passes through the phase gates per setting: 1 at Alice plus 2 at Bob per pair.
    pub fn truth_photon_passes(&self) -> Vec<u64> {
        let per_pair = u64::from(Channel::A1.passes() + Channel::B1.passes());
        self.truth_pairs.iter().map(|p| p * per_pair).collect()
    }
}

struct ChunkResult {
    counts: [u64; 16],
    pairs: u64,
    records: Vec<EventRecord>,
}

fn simulate_chunk(
    sampler: &PulseSampler,
    rng: &mut ChaCha8Rng,
    setting_index: u64,
    first_pulse: u64,
    len: u64,
    terminal: bool,
    log: bool,
) -> ChunkResult {
    let mut counts = [0u64; 16];
    let mut pairs = 0u64;
    let mut emissions = 0u64;
    let mut records = Vec::new();
    let mut pos = 0u64;
    loop {
        pos = pos.saturating_add(sampler.vacuum_gap(rng));
        if pos >= len {
            break;
        }
        let m = sampler.sample_emitting_pairs(rng);
        let pattern = sampler.detect(m, rng);
        counts[pattern.bits() as usize] += 1;
        pairs += u64::from(m);
        emissions += 1;
        if log {
            records.push(EventRecord {
                pulse_index: first_pulse + pos,
                setting_index,
                pattern: pattern.bits(),
                truth_pairs: m,
            });
        }
        pos += 1;
    }
    counts[0] += len - emissions;
    if log && terminal && records.last().map(|r| r.pulse_index) != Some(first_pulse + len - 1) {
        records.push(EventRecord {
            pulse_index: first_pulse + len - 1,
            setting_index,
            pattern: 0,
            truth_pairs: 0,
        });
    }
    ChunkResult {
        counts,
        pairs,
        records,
    }
}

/// Simulate every setting of `config`, optionally streaming an event log.
///
/// Runs on the ambient rayon pool; results do not depend on its size.
pub fn run_experiment(
    config: &ExperimentConfig,
    mut sink: Option<&mut dyn EventSink>,
) -> Result<ExperimentOutput> {
    config.validate()?;
    let samplers = config
        .settings
        .iter()
        .map(|s| config.sampler(s))
        .collect::<Result<Vec<_>>>()?;
    let chunks = config.chunks_per_setting();
    let jobs: Vec<(usize, u64)> = (0..config.settings.len())
        .flat_map(|s| (0..chunks).map(move |c| (s, c)))
        .collect();
    let log = sink.is_some();
    let batch = if log { 4 * rayon::current_num_threads().max(1) } else { jobs.len().max(1) };

    let mut tallies: Vec<Tally> = (0..config.settings.len()).map(Tally::new).collect();
    let mut truth_pairs = vec![0u64; config.settings.len()];
    for group in jobs.chunks(batch) {
        let results: Vec<ChunkResult> = group
            .par_iter()
            .map(|&(s, c)| {
                let first = c * config.chunk_size;
                let len = config.chunk_size.min(config.pulses_per_setting - first);
                let mut rng = stream_rng(config.seed, StreamDomain::Pulses, s as u64, c);
                simulate_chunk(
                    &samplers[s],
                    &mut rng,
                    s as u64,
                    first,
                    len,
                    c + 1 == chunks,
                    log,
                )
            })
            .collect();
        for (&(s, _), r) in group.iter().zip(results) {
            let t = &mut tallies[s];
            for (mask, n) in r.counts.iter().enumerate() {
                t.add(ClickPattern::from_bits_unchecked(mask as u8), *n)?;
            }
            truth_pairs[s] += r.pairs;
            if let Some(sink) = sink.as_deref_mut() {
                sink.write_chunk(&r.records)?;
            }
        }
    }
    Ok(ExperimentOutput {
        tallies,
        truth_pairs,
    })
}

/// One estimation block: pulses simulated until `k_bar` informative events.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSample {
    pub tally: Tally,
    pub truth_pairs: u64,
}

/// Simulate `s` independent blocks of exactly `k_bar` informative events each.
pub fn simulate_blocks(
    sampler: &PulseSampler,
    k_bar: u64,
    s: usize,
    seed: u64,
    setting_index: usize,
) -> Result<Vec<BlockSample>> {
    if k_bar < 1 {
        return Err(Error::Domain("k_bar must be >= 1".into()));
    }
    if sampler.emission_probability() == 0.0 {
        return Err(Error::Domain(
            "source never emits, blocks cannot be filled".into(),
        ));
    }
    if setting_index as u64 >= MAX_SETTINGS || s as u64 >= MAX_CHUNKS {
        return Err(Error::Domain("block stream index out of range".into()));
    }
    let blocks = (0..s)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, StreamDomain::Blocks, setting_index as u64, b as u64);
            let mut counts = [0u64; 16];
            let mut informative = 0u64;
            let mut pulses = 0u64;
            let mut pairs = 0u64;
            while informative < k_bar {
                pulses += sampler.vacuum_gap(&mut rng) + 1;
                let m = sampler.sample_emitting_pairs(&mut rng);
                let pattern = sampler.detect(m, &mut rng);
                pairs += u64::from(m);
                let mask = pattern.bits();
                counts[mask as usize] += 1;
                if is_informative_mask(mask) {
                    informative += 1;
                }
            }
            let emissions: u64 = counts.iter().sum();
            counts[0] += pulses - emissions;
            BlockSample {
                tally: Tally {
                    setting_index,
                    counts,
                },
                truth_pairs: pairs,
            }
        })
        .collect();
    Ok(blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn lossless(mu: f64) -> (SourceParams, EfficiencyBudget) {
        (
            SourceParams::new(mu, 1.0, 4).unwrap(),
            EfficiencyBudget::uniform(1.0).unwrap(),
        )
    }

    #[test]
    fn dark_source_gives_empty_pulses() {
        let (s, e) = lossless(0.0);
        let mut rng = stream_rng(1, StreamDomain::Pulses, 0, 0);
        for _ in 0..1000 {
            assert_eq!(
                sample_pulse(&s, &e, 0.3, &mut rng).unwrap(),
                (ClickPattern::EMPTY, 0)
            );
        }
        let sampler = PulseSampler::phase(&s, &e, 0.3).unwrap();
        assert_eq!(sampler.vacuum_gap(&mut rng), u64::MAX);
        assert!(simulate_blocks(&sampler, 10, 2, 0, 0).is_err());
    }

    #[test]
    fn empty_fraction_matches_zero_pair_weight() {
        let (s, e) = lossless(0.0025);
        let sampler = PulseSampler::phase(&s, &e, PI / 2.0).unwrap();
        let mut rng = stream_rng(11, StreamDomain::Pulses, 0, 0);
        let n = 1_000_000;
        let empty = (0..n)
            .filter(|_| sampler.sample_pulse(&mut rng).0 == ClickPattern::EMPTY)
            .count() as f64;
        let p0 = s.pair_weights()[0];
        let sigma = (p0 * (1.0 - p0) / n as f64).sqrt();
        assert!((empty / n as f64 - p0).abs() < 3.0 * sigma);
    }

    #[test]
    fn clicks_never_exceed_two_per_pair() {
        let s = SourceParams::new(0.4, 0.9, 10).unwrap();
        let e = EfficiencyBudget::new([0.9, 0.6, 0.8, 0.7]).unwrap();
        let sampler = PulseSampler::phase(&s, &e, 1.0).unwrap();
        let mut rng = stream_rng(5, StreamDomain::Pulses, 0, 0);
        for _ in 0..100_000 {
            let (p, m) = sampler.sample_pulse(&mut rng);
            assert!(p.clicks() <= 2 * m);
            assert!(m <= s.n_max());
        }
    }

    fn config(workers_seed: u64, pulses: u64, chunk: u64) -> ExperimentConfig {
        ExperimentConfig {
            source: SourceParams::new(0.056, 0.98, 4).unwrap(),
            eff: EfficiencyBudget::new([0.7432, 0.7667, 0.7477, 0.6974]).unwrap(),
            settings: (0..3).map(|i| PhaseSetting::from_global(0.3 * i as f64)).collect(),
            pulses_per_setting: pulses,
            seed: workers_seed,
            chunk_size: chunk,
            routing: RoutingMode::Phase,
        }
    }

    #[test]
    fn tallies_count_every_pulse() {
        let cfg = config(3, 100_003, 10_000);
        let out = run_experiment(&cfg, None).unwrap();
        for t in &out.tallies {
            assert_eq!(t.total(), 100_003);
        }
    }

    #[test]
    fn repeated_runs_are_identical() {
        let cfg = config(42, 200_000, 7_000);
        let a = run_experiment(&cfg, None).unwrap();
        let b = run_experiment(&cfg, None).unwrap();
        assert_eq!(a, b);
        let c = run_experiment(&config(43, 200_000, 7_000), None).unwrap();
        assert_ne!(a.tallies, c.tallies);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let cfg = config(9, 300_000, 5_000);
        let run = |w: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(w).build().unwrap();
            pool.install(|| {
                let mut log = Vec::new();
                let out = run_experiment(&cfg, Some(&mut log)).unwrap();
                (out, log)
            })
        };
        assert_eq!(run(1), run(8));
    }

    #[test]
    fn log_round_trip_rebuilds_tallies() {
        let cfg = config(17, 50_000, 4_096);
        let mut sink = CsvEventLog::new(Vec::new());
        let out = run_experiment(&cfg, Some(&mut sink)).unwrap();
        let bytes = sink.finish().unwrap();
        assert!(bytes.starts_with(b"pulse_index,setting_index,pattern,truth_pairs\n"));
        let records = read_event_log(bytes.as_slice()).unwrap();
        let (tallies, pairs) = tallies_from_log(&records).unwrap();
        assert_eq!(tallies, out.tallies);
        assert_eq!(pairs, out.truth_pairs);
    }

    #[test]
    fn bad_log_pattern_rejected() {
        let text = "pulse_index,setting_index,pattern,truth_pairs\n0,0,16,1\n";
        assert!(read_event_log(text.as_bytes()).is_err());
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = config(1, 10, 0);
        assert!(matches!(run_experiment(&cfg, None), Err(Error::Config(_))));
        cfg.chunk_size = 5;
        cfg.pulses_per_setting = 0;
        assert!(matches!(run_experiment(&cfg, None), Err(Error::Config(_))));
    }

    #[test]
    fn blocks_hold_exactly_k_bar_informative_events() {
        let cfg = config(0, 1, 1);
        let sampler = cfg.sampler(&cfg.settings[1]).unwrap();
        let blocks = simulate_blocks(&sampler, 500, 6, 77, 1).unwrap();
        assert_eq!(blocks.len(), 6);
        for b in &blocks {
            assert_eq!(b.tally.c_sum(), 500);
            assert!(b.tally.total() > 500);
        }
        assert_eq!(blocks, simulate_blocks(&sampler, 500, 6, 77, 1).unwrap());
    }

    #[test]
    fn streams_are_distinct() {
        let mut a = stream_rng(1, StreamDomain::Pulses, 0, 0);
        let mut b = stream_rng(1, StreamDomain::Pulses, 0, 1);
        let mut c = stream_rng(1, StreamDomain::Blocks, 0, 0);
        let (x, y, z): (u64, u64, u64) = (a.random(), b.random(), c.random());
        assert!(x != y && y != z && x != z);
    }
}
