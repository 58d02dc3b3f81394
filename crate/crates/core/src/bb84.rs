//! Single-direction BB84 baseline: random preparation, sifting on `(T, CB)`,
//! and error estimation by publicly comparing a random sample of sifted bits
//! which are then thrown away.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::{EveRecord, EveStrategy};
use crate::error::ConfigError;
use crate::quantum::{Bit, ChannelModel};
use crate::record::{simulate_slot, Direction, DrawSource, SlotRecord, Timeslot, UniformDraws};
use crate::rng::session_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bb84Config {
    pub n_timeslots: usize,
    pub channel: ChannelModel,
    pub eve: EveStrategy,
    pub sample_fraction: f64,
    pub seed: u64,
    /// Sessions whose sampled error rate exceeds this are flagged.
    pub error_threshold: f64,
}

impl Bb84Config {
    pub fn new(n_timeslots: usize, sample_fraction: f64, seed: u64) -> Self {
        Self {
            n_timeslots,
            channel: ChannelModel::IDEAL,
            eve: EveStrategy::absent(),
            sample_fraction,
            seed,
            error_threshold: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_timeslots == 0 {
            return Err(ConfigError::TooFewTimeslots {
                min: 1,
                got: self.n_timeslots,
            });
        }
        if !(self.sample_fraction > 0.0 && self.sample_fraction < 1.0) {
            return Err(ConfigError::SampleFraction(self.sample_fraction));
        }
        if !(0.0..=1.0).contains(&self.error_threshold) {
            return Err(ConfigError::Threshold(self.error_threshold));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bb84Outcome {
    pub records: Vec<SlotRecord>,
    pub eve_records: Vec<EveRecord>,
    pub sifted_records: Vec<SlotRecord>,
    /// Compared publicly and discarded, in timeslot order.
    pub sampled_timeslots: Vec<Timeslot>,
    pub sample_errors: usize,
    pub estimated_error_rate: f64,
    /// Error rate over every sifted slot, known only to the simulator.
    pub true_error_rate: f64,
    /// Original timeslot of key bit `i`; the renumbered key index is `i + 1`.
    pub key_timeslots: Vec<Timeslot>,
    pub key_bits_alice: Vec<Bit>,
    pub key_bits_bob: Vec<Bit>,
    pub detected: bool,
}

impl Bb84Outcome {
    /// `(renumbered index, original timeslot)` pairs for the kept key.
    pub fn renumbering(&self) -> impl Iterator<Item = (usize, Timeslot)> + '_ {
        self.key_timeslots
            .iter()
            .enumerate()
            .map(|(i, t)| (i + 1, *t))
    }

    pub fn keys_agree(&self) -> bool {
        self.key_bits_alice == self.key_bits_bob
    }
}

/// Result of comparing a random sample of sifted bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorSample {
    pub sampled: Vec<Timeslot>,
    pub errors: usize,
}

impl ErrorSample {
    pub fn error_rate(&self) -> f64 {
        if self.sampled.is_empty() {
            0.0
        } else {
            self.errors as f64 / self.sampled.len() as f64
        }
    }
}

/// Keeps received, basis-matched slots in their original order.
pub fn sift(records: &[SlotRecord]) -> Vec<SlotRecord> {
    records.iter().filter(|r| r.is_matched()).copied().collect()
}

/// Draws `count` sifted slots uniformly without replacement and compares
/// their bit values.
pub fn sample_errors<R: Rng + ?Sized>(
    sifted: &[SlotRecord],
    count: usize,
    rng: &mut R,
) -> ErrorSample {
    let count = count.min(sifted.len());
    let mut picked = index::sample(rng, sifted.len(), count).into_vec();
    picked.sort_unstable();
    let errors = picked.iter().filter(|&&i| sifted[i].is_error()).count();
    ErrorSample {
        sampled: picked.into_iter().map(|i| sifted[i].timeslot).collect(),
        errors,
    }
}

pub fn sample_size(sample_fraction: f64, sifted: usize) -> usize {
    (sample_fraction * sifted as f64).ceil() as usize
}

/// Transmits `n_timeslots` photons Alice to Bob and returns the raw records.
pub fn transmit_slots<R: Rng + ?Sized, D: DrawSource>(
    n_timeslots: usize,
    channel: &ChannelModel,
    eve: &EveStrategy,
    draws: &mut D,
    rng: &mut R,
) -> (Vec<SlotRecord>, Vec<EveRecord>) {
    let mut records = Vec::with_capacity(n_timeslots);
    let mut eve_records = Vec::new();
    for t in 1..=n_timeslots as u64 {
        let t = Timeslot(t);
        let draw = draws.draw(t, rng);
        let (rec, seen) = simulate_slot(t, Direction::AliceToBob, draw, channel, eve, rng);
        records.push(rec);
        eve_records.extend(seen);
    }
    (records, eve_records)
}

pub fn run_bb84(config: &Bb84Config) -> Result<Bb84Outcome, ConfigError> {
    let mut rng = session_rng(config.seed, 0, 0);
    run_bb84_with(config, &mut rng)
}

/// Runs one session drawing from `rng`; `config.seed` is not consulted.
pub fn run_bb84_with<R: Rng + ?Sized>(
    config: &Bb84Config,
    rng: &mut R,
) -> Result<Bb84Outcome, ConfigError> {
    config.validate()?;
    let (records, eve_records) = transmit_slots(
        config.n_timeslots,
        &config.channel,
        &config.eve,
        &mut UniformDraws,
        rng,
    );
    let sifted = sift(&records);
    let sample = sample_errors(
        &sifted,
        sample_size(config.sample_fraction, sifted.len()),
        rng,
    );

    let true_errors = sifted.iter().filter(|r| r.is_error()).count();
    let true_error_rate = if sifted.is_empty() {
        0.0
    } else {
        true_errors as f64 / sifted.len() as f64
    };

    let mut key_timeslots = Vec::new();
    let mut key_bits_alice = Vec::new();
    let mut key_bits_bob = Vec::new();
    let mut sampled = sample.sampled.iter().peekable();
    for r in &sifted {
        if sampled.peek() == Some(&&r.timeslot) {
            sampled.next();
            continue;
        }
        key_timeslots.push(r.timeslot);
        key_bits_alice.push(r.sender_bit);
        key_bits_bob.push(r.receiver_bit.expect("sifted slots were received"));
    }

    let estimated_error_rate = sample.error_rate();
    Ok(Bb84Outcome {
        records,
        eve_records,
        sifted_records: sifted,
        sampled_timeslots: sample.sampled,
        sample_errors: sample.errors,
        estimated_error_rate,
        true_error_rate,
        key_timeslots,
        key_bits_alice,
        key_bits_bob,
        detected: estimated_error_rate > config.error_threshold,
    })
}
