//! Event taxonomy and tallies.
//!
//! Every 4-bit click pattern maps to exactly one [`EventType`]. Nine of the
//! sixteen types carry information about the global phase: the four
//! Alice-Bob twofolds, the four threefolds and the fourfold. Their total is
//! `C_sum`, the normalisation of all coincidence fractions.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Channel, ClickPattern, CoincidenceOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Twofold {
    A1B1,
    A1B2,
    A2B1,
    A2B2,
    A1A2,
    B1B2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Threefold {
    A1A2B1,
    A1A2B2,
    A1B1B2,
    A2B1B2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventType {
    NoClick,
    Single(Channel),
    Twofold(Twofold),
    Threefold(Threefold),
    Fourfold,
}

const A1: u8 = 0b0001;
const A2: u8 = 0b0010;
const B1: u8 = 0b0100;
const B2: u8 = 0b1000;

impl EventType {
    /// All sixteen types, indexed by their click mask.
    pub fn all() -> impl Iterator<Item = EventType> {
        ClickPattern::all().map(classify)
    }

    pub fn pattern(self) -> ClickPattern {
        let mask = match self {
            EventType::NoClick => 0,
            EventType::Single(ch) => ch.bit(),
            EventType::Twofold(t) => match t {
                Twofold::A1B1 => A1 | B1,
                Twofold::A1B2 => A1 | B2,
                Twofold::A2B1 => A2 | B1,
                Twofold::A2B2 => A2 | B2,
                Twofold::A1A2 => A1 | A2,
                Twofold::B1B2 => B1 | B2,
            },
            EventType::Threefold(t) => match t {
                Threefold::A1A2B1 => A1 | A2 | B1,
                Threefold::A1A2B2 => A1 | A2 | B2,
                Threefold::A1B1B2 => A1 | B1 | B2,
                Threefold::A2B1B2 => A2 | B1 | B2,
            },
            EventType::Fourfold => 0b1111,
        };
        ClickPattern::from_bits_unchecked(mask)
    }

    /// Whether the type carries phase information (at least one click on each side).
    pub fn is_informative(self) -> bool {
        let m = self.pattern().bits();
        m & (A1 | A2) != 0 && m & (B1 | B2) != 0
    }

    pub fn name(self) -> String {
        if self == EventType::NoClick {
            return "NoClick".to_owned();
        }
        let p = self.pattern();
        Channel::ALL
            .iter()
            .filter(|c| p.contains(**c))
            .map(|c| c.name())
            .collect()
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for EventType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EventType::all()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown event type `{s}`")))
    }
}

/// Classify a click pattern into the event taxonomy.
pub fn classify(pattern: ClickPattern) -> EventType {
    match pattern.bits() {
        0 => EventType::NoClick,
        A1 => EventType::Single(Channel::A1),
        A2 => EventType::Single(Channel::A2),
        B1 => EventType::Single(Channel::B1),
        B2 => EventType::Single(Channel::B2),
        m if m == A1 | B1 => EventType::Twofold(Twofold::A1B1),
        m if m == A1 | B2 => EventType::Twofold(Twofold::A1B2),
        m if m == A2 | B1 => EventType::Twofold(Twofold::A2B1),
        m if m == A2 | B2 => EventType::Twofold(Twofold::A2B2),
        m if m == A1 | A2 => EventType::Twofold(Twofold::A1A2),
        m if m == B1 | B2 => EventType::Twofold(Twofold::B1B2),
        m if m == A1 | A2 | B1 => EventType::Threefold(Threefold::A1A2B1),
        m if m == A1 | A2 | B2 => EventType::Threefold(Threefold::A1A2B2),
        m if m == A1 | B1 | B2 => EventType::Threefold(Threefold::A1B1B2),
        m if m == A2 | B1 | B2 => EventType::Threefold(Threefold::A2B1B2),
        _ => EventType::Fourfold,
    }
}

/// Counts per event type at one phase setting.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Tally {
    pub setting_index: usize,
    /// Indexed by click mask.
    pub counts: [u64; 16],
}

impl Tally {
    pub fn new(setting_index: usize) -> Self {
        Tally {
            setting_index,
            counts: [0; 16],
        }
    }

    pub fn record(&mut self, pattern: ClickPattern) -> Result<()> {
        self.add(pattern, 1)
    }

    pub fn add(&mut self, pattern: ClickPattern, n: u64) -> Result<()> {
        let slot = &mut self.counts[pattern.bits() as usize];
        *slot = slot.checked_add(n).ok_or(Error::Overflow("tally"))?;
        Ok(())
    }

    /// Monoid combination; setting index of `self` is kept.
    pub fn merge(&mut self, other: &Tally) -> Result<()> {
        for (a, b) in self.counts.iter_mut().zip(other.counts.iter()) {
            *a = a.checked_add(*b).ok_or(Error::Overflow("tally merge"))?;
        }
        Ok(())
    }

    pub fn count(&self, event: EventType) -> u64 {
        self.counts[event.pattern().bits() as usize]
    }

    pub fn pattern_count(&self, pattern: ClickPattern) -> u64 {
        self.counts[pattern.bits() as usize]
    }

    /// Pulses processed.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn nonempty(&self) -> u64 {
        self.total() - self.counts[0]
    }

    /// Sum over the nine informative types.
    pub fn c_sum(&self) -> u64 {
        EventType::all()
            .filter(|t| t.is_informative())
            .map(|t| self.count(t))
            .sum()
    }

    /// Singles-inclusive click total `N_i` of one channel.
    pub fn channel_clicks(&self, channel: Channel) -> u64 {
        ClickPattern::all()
            .filter(|p| p.contains(channel))
            .map(|p| self.pattern_count(p))
            .sum()
    }

    pub fn channel_clicks_all(&self) -> [u64; 4] {
        Channel::ALL.map(|c| self.channel_clicks(c))
    }

    /// Exact twofold counts in `CoincidenceOutcome` order.
    pub fn twofold_counts(&self) -> [u64; 4] {
        CoincidenceOutcome::ALL.map(|o| self.pattern_count(o.pattern()))
    }

    /// Events in which both channels clicked, whatever else clicked.
    pub fn inclusive_coincidences(&self, a: Channel, b: Channel) -> u64 {
        ClickPattern::all()
            .filter(|p| p.contains(a) && p.contains(b))
            .map(|p| self.pattern_count(p))
            .sum()
    }

    pub fn from_patterns<I>(setting_index: usize, patterns: I) -> Result<Self>
    where
        I: IntoIterator<Item = ClickPattern>,
    {
        let mut t = Tally::new(setting_index);
        for p in patterns {
            t.record(p)?;
        }
        Ok(t)
    }
}

/// Twofold fractions `C_{A_iB_j} / C_sum`.
///
/// The four values sum to less than one whenever threefold or fourfold
/// events were recorded, since those enter `C_sum` only.
pub fn coincidence_fractions(tally: &Tally) -> Result<[f64; 4]> {
    let c_sum = tally.c_sum();
    if c_sum == 0 {
        return Err(Error::EmptyStatistics(format!(
            "setting {} has C_sum = 0",
            tally.setting_index
        )));
    }
    Ok(tally.twofold_counts().map(|c| c as f64 / c_sum as f64))
}

/// Heralding-efficiency estimates from a calibration-mode tally.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyEstimate {
    /// `(A1, A2, B1, B2)`.
    pub eta: [f64; 4],
    /// Set when a small-sample estimate exceeds one.
    pub overshoot: bool,
}

impl EfficiencyEstimate {
    pub fn get(&self, channel: Channel) -> f64 {
        self.eta[channel.index()]
    }
}

/// `eta_A1 = C11/N_B1, eta_B1 = C11/N_A1, eta_A2 = C22/N_B2, eta_B2 = C22/N_A2`.
pub fn estimate_efficiencies(tally: &Tally) -> Result<EfficiencyEstimate> {
    let n = tally.channel_clicks_all();
    for ch in Channel::ALL {
        if n[ch.index()] == 0 {
            return Err(Error::EmptyStatistics(format!(
                "no clicks recorded in channel {ch}"
            )));
        }
    }
    let c11 = tally.inclusive_coincidences(Channel::A1, Channel::B1) as f64;
    let c22 = tally.inclusive_coincidences(Channel::A2, Channel::B2) as f64;
    let ratio = |c: f64, ch: Channel| c / n[ch.index()] as f64;
    let eta = [
        ratio(c11, Channel::B1),
        ratio(c22, Channel::B2),
        ratio(c11, Channel::A1),
        ratio(c22, Channel::A2),
    ];
    Ok(EfficiencyEstimate {
        eta,
        overshoot: eta.iter().any(|e| *e > 1.0),
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct TallyRow {
    setting_index: usize,
    event_type: String,
    count: u64,
}

/// Write tallies as `setting_index,event_type,count`, sixteen rows per tally.
pub fn write_tally_csv<W: Write>(writer: W, tallies: &[Tally]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for t in tallies {
        for ev in EventType::all() {
            w.serialize(TallyRow {
                setting_index: t.setting_index,
                event_type: ev.name(),
                count: t.count(ev),
            })?;
        }
    }
    w.flush().map_err(|e| Error::io("<tally csv>", e))?;
    Ok(())
}

pub fn read_tally_csv<R: Read>(reader: R) -> Result<Vec<Tally>> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out: Vec<Tally> = Vec::new();
    for row in r.deserialize() {
        let row: TallyRow = row?;
        let ev: EventType = row.event_type.parse()?;
        let idx = match out.iter().position(|t| t.setting_index == row.setting_index) {
            Some(i) => i,
            None => {
                out.push(Tally::new(row.setting_index));
                out.len() - 1
            }
        };
        out[idx].add(ev.pattern(), row.count)?;
    }
    Ok(out)
}
