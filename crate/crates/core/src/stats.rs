//! Closed-form error and detection probabilities, Eve's information from the
//! public pairing data, per-session reports and Monte Carlo aggregation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF, Normal};

use crate::adversary::{EveRecord, EveStrategy};
use crate::bb84::Bb84Outcome;
use crate::duplex::{DuplexSession, PairingVariant, Triple};
use crate::error::StatsError;
use crate::quantum::{Basis, Bit, ChannelModel};
use crate::record::Timeslot;

/// Per-matched-slot error probability from intercept-resend alone.
///
/// Sender bases are uniform, so whatever Eve's basis policy she picks the
/// wrong basis half the time and then corrupts the bit half the time.
pub fn eve_slot_error_probability(eve: &EveStrategy) -> f64 {
    eve.effective_fraction() * 0.5 * 0.5
}

/// Two independent error sources compose as an XOR.
pub fn compose_error_probabilities(p_eve: f64, p_channel: f64) -> f64 {
    p_eve + p_channel - 2.0 * p_eve * p_channel
}

pub fn slot_error_probability(eve: &EveStrategy, channel: &ChannelModel) -> f64 {
    compose_error_probabilities(eve_slot_error_probability(eve), channel.flip_probability())
}

/// Probability that a single pair check fails: exactly one of its two slots
/// is in error.
pub fn pair_failure_probability(p_slot: f64) -> f64 {
    2.0 * p_slot * (1.0 - p_slot)
}

pub fn pair_error_probability(eve: &EveStrategy, channel: &ChannelModel) -> f64 {
    pair_failure_probability(slot_error_probability(eve, channel))
}

/// Chance that `n_pairs` independent checks all pass.
pub fn undetected_probability(n_pairs: usize, p_pair: f64) -> f64 {
    (1.0 - p_pair).powf(n_pairs as f64)
}

/// Inverts `2p(1-p)` on `[0, 1/2]`. Pair failure rates above 1/2 map to 1/2.
pub fn slot_error_from_pair_rate(pair_rate: f64) -> f64 {
    let disc = (1.0 - 2.0 * pair_rate).max(0.0);
    (1.0 - disc.sqrt()) / 2.0
}

/// What the public data and Eve's own measurements tell her about one pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairKnowledge {
    pub triple: Triple,
    /// Bits revealed by the public flip bit alone.
    pub flip_bits_revealed: u32,
    /// `(BV(set 2), BV(set 3))` values still consistent with everything
    /// Eve knows.
    pub candidates: Vec<(Bit, Bit)>,
    /// Slots Eve measured in the basis later announced for them.
    pub exposed_slots: Vec<Timeslot>,
    pub key_bit_exposed: bool,
}

impl PairKnowledge {
    /// Bits of the pair's two that Eve knows: 1 from the flip bit, 2 once
    /// the candidates collapse to a single value.
    pub fn bits_revealed(&self) -> u32 {
        if self.candidates.len() == 2 {
            1
        } else {
            2
        }
    }

    /// Eve's observations contradict the flip bit (a channel error hit a
    /// slot she measured).
    pub fn contradicted(&self) -> bool {
        self.candidates.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EveInformation {
    pub pairs: Vec<PairKnowledge>,
    pub total_bits_revealed: u64,
    pub exposed_key_bits: u64,
}

/// Accounts for Eve's knowledge of every triple.
///
/// `announced_bases` is the public basis of each timeslot (for kept slots
/// sender and receiver bases agree). An interception in that basis gives Eve
/// the sender's bit exactly; one in the other basis tells her nothing.
pub fn eve_information(
    triples: &[Triple],
    eve_records: &[EveRecord],
    announced_bases: &BTreeMap<Timeslot, Basis>,
) -> EveInformation {
    let seen: BTreeMap<Timeslot, &EveRecord> =
        eve_records.iter().map(|r| (r.timeslot, r)).collect();
    let known_bit = |t: Timeslot| -> Option<Bit> {
        let rec = seen.get(&t)?;
        (announced_bases.get(&t) == Some(&rec.measured_basis)).then_some(rec.measured_bit)
    };

    let mut info = EveInformation::default();
    for triple in triples {
        let k2 = known_bit(triple.t_set2);
        let k3 = known_bit(triple.t_set3);
        let candidates: Vec<(Bit, Bit)> = Bit::ALL
            .iter()
            .flat_map(|&a| Bit::ALL.iter().map(move |&b| (a, b)))
            .filter(|&(a, b)| a ^ b == triple.flip)
            .filter(|&(a, _)| k2.is_none_or(|k| k == a))
            .filter(|&(_, b)| k3.is_none_or(|k| k == b))
            .collect();
        let exposed_slots = [(triple.t_set2, k2), (triple.t_set3, k3)]
            .into_iter()
            .filter(|(_, k)| k.is_some())
            .map(|(t, _)| t)
            .collect();
        let knowledge = PairKnowledge {
            triple: *triple,
            flip_bits_revealed: 1,
            key_bit_exposed: candidates.len() == 1,
            candidates,
            exposed_slots,
        };
        info.total_bits_revealed += u64::from(knowledge.bits_revealed());
        info.exposed_key_bits += u64::from(knowledge.key_bit_exposed);
        info.pairs.push(knowledge);
    }
    info
}

/// Mutual information in bits of a 2x2 joint count table.
pub fn mutual_information(joint: [[u64; 2]; 2]) -> f64 {
    let total: u64 = joint.iter().flatten().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    let rows = [joint[0][0] + joint[0][1], joint[1][0] + joint[1][1]];
    let cols = [joint[0][0] + joint[1][0], joint[0][1] + joint[1][1]];
    let mut mi = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let c = joint[i][j];
            if c == 0 {
                continue;
            }
            // c * n / (row * col) is exactly 1 when the cell factorises
            let ratio = (c as f64 * n) / (rows[i] as f64 * cols[j] as f64);
            mi += c as f64 / n * ratio.log2();
        }
    }
    mi
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Bb84,
    Duplex,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Bb84 => "bb84",
            Protocol::Duplex => "duplex",
        }
    }
}

/// Summary of one simulated session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub protocol: Protocol,
    pub variant: Option<PairingVariant>,
    pub n_timeslots: usize,
    /// Received, basis-matched slots.
    pub sifted: usize,
    /// Pairs checked (duplex) or sifted slots (BB84).
    pub sifted_or_paired: usize,
    pub paired: usize,
    pub unpaired: usize,
    pub sampled: usize,
    pub checked: usize,
    pub failures: usize,
    pub estimated_error_rate: f64,
    pub true_error_rate: f64,
    pub key_length: usize,
    pub keys_agree: bool,
    pub key_disagreements: usize,
    pub eve_pair_bits_revealed: u64,
    pub exposed_key_bits: u64,
    pub detected: bool,
    pub aborted: bool,
}

impl SessionReport {
    pub fn from_duplex(session: &DuplexSession) -> Self {
        let transcript = &session.transcript;
        let matched: Vec<_> = transcript
            .slots()
            .iter()
            .filter(|s| s.is_matched())
            .collect();
        let errors = matched.iter().filter(|s| s.is_error()).count();
        let bases = session
            .alice_announcement()
            .map(|a| a.bases())
            .unwrap_or_default();
        let info = eve_information(&session.triples, &session.eve_records, &bases);
        let pair_rate = session.verification.failure_rate();
        let paired = session.triples.len();
        Self {
            protocol: Protocol::Duplex,
            variant: Some(session.variant),
            n_timeslots: transcript.len(),
            sifted: session.partition.kept(),
            sifted_or_paired: paired,
            paired,
            unpaired: session.unpaired.len(),
            sampled: 0,
            checked: session.verification.checked_pairs,
            failures: session.verification.failures.len(),
            estimated_error_rate: slot_error_from_pair_rate(pair_rate),
            true_error_rate: ratio(errors, matched.len()),
            key_length: session.alice_key.len(),
            keys_agree: session.keys_agree(),
            key_disagreements: session.key_disagreements().len(),
            eve_pair_bits_revealed: info.total_bits_revealed,
            exposed_key_bits: info.exposed_key_bits,
            detected: session.aborted,
            aborted: session.aborted,
        }
    }

    pub fn from_bb84(outcome: &Bb84Outcome) -> Self {
        let sifted = outcome.sifted_records.len();
        let disagreements = outcome
            .key_bits_alice
            .iter()
            .zip(&outcome.key_bits_bob)
            .filter(|(a, b)| a != b)
            .count();
        Self {
            protocol: Protocol::Bb84,
            variant: None,
            n_timeslots: outcome.records.len(),
            sifted,
            sifted_or_paired: sifted,
            paired: 0,
            unpaired: 0,
            sampled: outcome.sampled_timeslots.len(),
            checked: outcome.sampled_timeslots.len(),
            failures: outcome.sample_errors,
            estimated_error_rate: outcome.estimated_error_rate,
            true_error_rate: outcome.true_error_rate,
            key_length: outcome.key_bits_alice.len(),
            keys_agree: outcome.keys_agree(),
            key_disagreements: disagreements,
            eve_pair_bits_revealed: 0,
            exposed_key_bits: 0,
            detected: outcome.detected,
            aborted: false,
        }
    }

    /// Every sifted slot is accounted for exactly once.
    pub fn conserves(&self) -> bool {
        match self.protocol {
            Protocol::Duplex => self.sifted == 2 * self.paired + self.unpaired,
            Protocol::Bb84 => self.sifted == self.key_length + self.sampled,
        }
    }

    pub fn key_rate(&self) -> f64 {
        ratio(self.key_length, self.n_timeslots)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

const DEFAULT_CONFIDENCE: f64 = 0.95;

fn z_score(confidence: f64) -> f64 {
    Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(0.5 + confidence / 2.0)
}

/// Normal-approximation half-width for a proportion.
pub fn proportion_half_width(p: f64, n: usize, confidence: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    z_score(confidence) * (p * (1.0 - p) / n as f64).sqrt()
}

/// Clopper-Pearson interval for `successes` out of `trials`.
pub fn exact_binomial_interval(successes: u64, trials: u64, confidence: f64) -> (f64, f64) {
    assert!(successes <= trials, "successes exceed trials");
    if trials == 0 {
        return (0.0, 1.0);
    }
    let alpha = 1.0 - confidence;
    let (k, n) = (successes as f64, trials as f64);
    let lower = if successes == 0 {
        0.0
    } else {
        Beta::new(k, n - k + 1.0)
            .expect("positive shapes")
            .inverse_cdf(alpha / 2.0)
    };
    let upper = if successes == trials {
        1.0
    } else {
        Beta::new(k + 1.0, n - k)
            .expect("positive shapes")
            .inverse_cdf(1.0 - alpha / 2.0)
    };
    (lower, upper)
}

/// Mean and normal-approximation half-width of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
}

impl Estimate {
    pub fn of(values: &[f64], confidence: f64) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: 0.0,
                half_width: 0.0,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let half_width = if n < 2 {
            0.0
        } else {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            z_score(confidence) * (var / n as f64).sqrt()
        };
        Self { mean, half_width }
    }
}

/// Monte Carlo summary over many sessions of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub protocol: Protocol,
    pub sessions: usize,
    pub detected_sessions: usize,
    pub detection_rate: Estimate,
    pub error_rate: Estimate,
    pub key_rate: Estimate,
    pub mean_key_length: f64,
    pub mean_sifted: f64,
    pub mean_sampled: f64,
    pub total_checked: u64,
    pub total_failures: u64,
    /// Pooled failures per check across all sessions.
    pub check_failure_rate: f64,
    pub sessions_with_key_disagreement: usize,
}

impl Aggregate {
    pub fn from_reports(reports: &[SessionReport]) -> Result<Self, StatsError> {
        let first = reports.first().ok_or(StatsError::Empty("session"))?;
        let n = reports.len();
        let detected = reports.iter().filter(|r| r.detected).count();
        let det_rate = ratio(detected, n);
        let errors: Vec<f64> = reports.iter().map(|r| r.estimated_error_rate).collect();
        let rates: Vec<f64> = reports.iter().map(|r| r.key_rate()).collect();
        let total_checked: u64 = reports.iter().map(|r| r.checked as u64).sum();
        let total_failures: u64 = reports.iter().map(|r| r.failures as u64).sum();
        let mean = |f: &dyn Fn(&SessionReport) -> usize| {
            reports.iter().map(|r| f(r) as f64).sum::<f64>() / n as f64
        };
        Ok(Self {
            protocol: first.protocol,
            sessions: n,
            detected_sessions: detected,
            detection_rate: Estimate {
                mean: det_rate,
                half_width: proportion_half_width(det_rate, n, DEFAULT_CONFIDENCE),
            },
            error_rate: Estimate::of(&errors, DEFAULT_CONFIDENCE),
            key_rate: Estimate::of(&rates, DEFAULT_CONFIDENCE),
            mean_key_length: mean(&|r| r.key_length),
            mean_sifted: mean(&|r| r.sifted),
            mean_sampled: mean(&|r| r.sampled),
            total_checked,
            total_failures,
            check_failure_rate: if total_checked == 0 {
                0.0
            } else {
                total_failures as f64 / total_checked as f64
            },
            sessions_with_key_disagreement: reports.iter().filter(|r| !r.keys_agree).count(),
        })
    }
}

/// Plain rows-and-columns table, rendered with any single-character delimiter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn to_delimited(&self, sep: char) -> String {
        let mut out = String::new();
        for line in std::iter::once(&self.headers).chain(&self.rows) {
            out.push_str(&line.join(&sep.to_string()));
            out.push('\n');
        }
        out
    }
}

fn fmt_f(x: f64) -> String {
    format!("{x:.6}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub protocol: Protocol,
    pub sessions: usize,
    pub mean_timeslots: f64,
    pub mean_sifted: f64,
    pub mean_key_bits: f64,
    pub key_bits_per_timeslot: f64,
    /// Key rate if no sifted bits were spent on error estimation.
    pub key_bits_per_timeslot_unsampled: f64,
    /// Sifted bits consumed by detection beyond the duplex 2-to-1 pairing.
    pub bits_sacrificed: f64,
    pub detection_rate: f64,
    pub mean_error_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn to_table(&self) -> Table {
        let headers = [
            "protocol",
            "sessions",
            "mean_timeslots",
            "mean_sifted",
            "mean_key_bits",
            "key_bits_per_timeslot",
            "key_bits_per_timeslot_unsampled",
            "bits_sacrificed",
            "detection_rate",
            "mean_error_rate",
        ]
        .map(String::from)
        .to_vec();
        let rows = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.protocol.name().to_string(),
                    r.sessions.to_string(),
                    fmt_f(r.mean_timeslots),
                    fmt_f(r.mean_sifted),
                    fmt_f(r.mean_key_bits),
                    fmt_f(r.key_bits_per_timeslot),
                    fmt_f(r.key_bits_per_timeslot_unsampled),
                    fmt_f(r.bits_sacrificed),
                    fmt_f(r.detection_rate),
                    fmt_f(r.mean_error_rate),
                ]
            })
            .collect();
        Table { headers, rows }
    }
}

fn comparison_row(protocol: Protocol, reports: &[SessionReport]) -> ComparisonRow {
    let n = reports.len() as f64;
    let mean = |f: &dyn Fn(&SessionReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    let timeslots = mean(&|r| r.n_timeslots as f64);
    let key = mean(&|r| r.key_length as f64);
    let sampled = mean(&|r| r.sampled as f64);
    let per_slot = |bits: f64| {
        if timeslots > 0.0 {
            bits / timeslots
        } else {
            0.0
        }
    };
    ComparisonRow {
        protocol,
        sessions: reports.len(),
        mean_timeslots: timeslots,
        mean_sifted: mean(&|r| r.sifted as f64),
        mean_key_bits: key,
        key_bits_per_timeslot: per_slot(key),
        key_bits_per_timeslot_unsampled: per_slot(match protocol {
            Protocol::Bb84 => key + sampled,
            Protocol::Duplex => key,
        }),
        bits_sacrificed: sampled,
        detection_rate: mean(&|r| f64::from(u8::from(r.detected))),
        mean_error_rate: mean(&|r| r.estimated_error_rate),
    }
}

pub fn compare_protocols(
    duplex_reports: &[SessionReport],
    bb84_reports: &[SessionReport],
) -> Result<ComparisonTable, StatsError> {
    if duplex_reports.is_empty() {
        return Err(StatsError::Empty("duplex"));
    }
    if bb84_reports.is_empty() {
        return Err(StatsError::Empty("bb84"));
    }
    Ok(ComparisonTable {
        rows: vec![
            comparison_row(Protocol::Duplex, duplex_reports),
            comparison_row(Protocol::Bb84, bb84_reports),
        ],
    })
}

/// Parameter lists whose cross product forms a sweep.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepGrid {
    pub intercept_fractions: Vec<f64>,
    pub flip_probabilities: Vec<f64>,
    pub loss_probabilities: Vec<f64>,
    pub n_timeslots: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub intercept_fraction: f64,
    pub flip_probability: f64,
    pub loss_probability: f64,
    pub n_timeslots: usize,
}

impl SweepGrid {
    /// Cells in row-major order with the intercept fraction varying fastest.
    pub fn points(&self) -> Result<Vec<SweepPoint>, StatsError> {
        if self.intercept_fractions.is_empty()
            || self.flip_probabilities.is_empty()
            || self.loss_probabilities.is_empty()
            || self.n_timeslots.is_empty()
        {
            return Err(StatsError::Empty("grid"));
        }
        let mut out = Vec::new();
        for &n_timeslots in &self.n_timeslots {
            for &loss_probability in &self.loss_probabilities {
                for &flip_probability in &self.flip_probabilities {
                    for &intercept_fraction in &self.intercept_fractions {
                        out.push(SweepPoint {
                            intercept_fraction,
                            flip_probability,
                            loss_probability,
                            n_timeslots,
                        });
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub point: SweepPoint,
    pub aggregate: Aggregate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub protocol: Protocol,
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    pub fn to_table(&self) -> Table {
        let headers = [
            "protocol",
            "intercept_fraction",
            "flip_probability",
            "loss_probability",
            "n_timeslots",
            "sessions",
            "detection_rate",
            "detection_half_width",
            "mean_error_rate",
            "error_rate_half_width",
            "mean_key_rate",
            "key_rate_half_width",
        ]
        .map(String::from)
        .to_vec();
        let rows = self
            .cells
            .iter()
            .map(|c| {
                let a = &c.aggregate;
                vec![
                    self.protocol.name().to_string(),
                    fmt_f(c.point.intercept_fraction),
                    fmt_f(c.point.flip_probability),
                    fmt_f(c.point.loss_probability),
                    c.point.n_timeslots.to_string(),
                    a.sessions.to_string(),
                    fmt_f(a.detection_rate.mean),
                    fmt_f(a.detection_rate.half_width),
                    fmt_f(a.error_rate.mean),
                    fmt_f(a.error_rate.half_width),
                    fmt_f(a.key_rate.mean),
                    fmt_f(a.key_rate.half_width),
                ]
            })
            .collect();
        Table { headers, rows }
    }
}
