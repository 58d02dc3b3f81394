//! One duplex session as an ordered exchange of public messages:
//!
//! 1. Alice announces her coding basis for every slot (sent or measured).
//! 2. Bob filters into three sets and returns the discard set.
//! 3. Bob publishes triples (or same-value pairs).
//! 4. Alice checks each against her own bits and announces the verdict.
//! 5. Both sides extract key bits from the surviving pairs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::{EveRecord, EveStrategy};
use crate::error::{ConfigError, ProtocolError};
use crate::quantum::{Bit, ChannelModel};
use crate::record::{DrawSource, Party, Timeslot};

use super::filter::{filter_sets, BasisAnnouncement, SetPartition};
use super::pairing::{make_pairs_search, make_triples_flip, Triple};
use super::transcript::{run_duplex_transmission, Transcript};
use super::verify::{extract_key, verify_triples, VerificationResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairingVariant {
    /// Positional pairing with a public flip bit per pair.
    #[default]
    FlipTriples,
    /// Bob searches set 3 for a slot with the same bit value.
    SearchPairs,
}

/// Which slot of a pair Alice inverts when the flip bit is 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipConvention {
    #[default]
    FlipSet3,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "max_failure_rate")]
pub enum FailurePolicy {
    /// Any failed check aborts the session.
    #[default]
    AbortOnAny,
    /// Abort only when the pair failure rate exceeds the threshold; failed
    /// pairs are dropped from the key otherwise.
    Threshold(f64),
}

/// Whether same-value pairs become key material in the search variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchKeyPolicy {
    #[default]
    Keep,
    Discard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DuplexConfig {
    pub n_timeslots: usize,
    pub channel: ChannelModel,
    pub eve: EveStrategy,
    pub variant: PairingVariant,
    pub failure_policy: FailurePolicy,
    pub search_key_policy: SearchKeyPolicy,
    /// Check at most this many pairs; matched slots beyond it are left
    /// unpaired.
    pub pair_limit: Option<usize>,
}

impl DuplexConfig {
    pub fn new(n_timeslots: usize) -> Self {
        Self {
            n_timeslots,
            channel: ChannelModel::IDEAL,
            eve: EveStrategy::absent(),
            variant: PairingVariant::FlipTriples,
            failure_policy: FailurePolicy::AbortOnAny,
            search_key_policy: SearchKeyPolicy::Keep,
            pair_limit: None,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_timeslots < 2 {
            return Err(ConfigError::TooFewTimeslots {
                min: 2,
                got: self.n_timeslots,
            });
        }
        if let FailurePolicy::Threshold(x) = self.failure_policy {
            if !(0.0..=1.0).contains(&x) {
                return Err(ConfigError::Threshold(x));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "message")]
pub enum PublicMessage {
    AliceBases(BasisAnnouncement),
    Discard(Vec<Timeslot>),
    Triples(Vec<Triple>),
    Pairs(Vec<(Timeslot, Timeslot)>),
    Verdict {
        checked: usize,
        failures: usize,
        aborted: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuplexSession {
    pub transcript: Transcript,
    pub eve_records: Vec<EveRecord>,
    /// Everything sent over the classical channel, in order.
    pub public_log: Vec<PublicMessage>,
    pub partition: SetPartition,
    pub variant: PairingVariant,
    pub flip_convention: FlipConvention,
    pub triples: Vec<Triple>,
    /// Matched slots that were never checked.
    pub unpaired: Vec<Timeslot>,
    pub verification: VerificationResult,
    pub aborted: bool,
    /// Triples whose bits form the key, in key order.
    pub key_triples: Vec<Triple>,
    pub alice_key: Vec<Bit>,
    pub bob_key: Vec<Bit>,
}

impl DuplexSession {
    pub fn keys_agree(&self) -> bool {
        self.alice_key == self.bob_key
    }

    /// Key positions where Alice and Bob disagree despite passing checks.
    pub fn key_disagreements(&self) -> Vec<Triple> {
        self.key_triples
            .iter()
            .zip(self.alice_key.iter().zip(&self.bob_key))
            .filter(|(_, (a, b))| a != b)
            .map(|(t, _)| *t)
            .collect()
    }

    pub fn alice_announcement(&self) -> Option<&BasisAnnouncement> {
        self.public_log.iter().find_map(|m| match m {
            PublicMessage::AliceBases(a) => Some(a),
            _ => None,
        })
    }
}

/// Runs transmission and the classical exchange for one session.
pub fn run_duplex_session<R: Rng + ?Sized, D: DrawSource>(
    config: &DuplexConfig,
    draws: &mut D,
    rng: &mut R,
) -> Result<DuplexSession, DuplexSessionError> {
    config.validate()?;
    let tx = run_duplex_transmission(config.n_timeslots, &config.channel, &config.eve, draws, rng)?;
    Ok(process_transcript(tx.transcript, tx.eve_records, config)?)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DuplexSessionError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

/// Runs the classical exchange on an existing transcript. Only the pairing
/// variant, failure policy, key policy and pair limit of `config` are used.
pub fn process_transcript(
    transcript: Transcript,
    eve_records: Vec<EveRecord>,
    config: &DuplexConfig,
) -> Result<DuplexSession, ProtocolError> {
    let mut public_log = Vec::new();

    let alice_bases = BasisAnnouncement::from_transcript(&transcript, Party::Alice);
    let bob_bases = BasisAnnouncement::from_transcript(&transcript, Party::Bob);
    public_log.push(PublicMessage::AliceBases(alice_bases.clone()));
    let partition = filter_sets(&transcript, &alice_bases, &bob_bases)?;
    public_log.push(PublicMessage::Discard(
        partition.discard.iter().copied().collect(),
    ));

    let bob_set2 = transcript.bit_view(Party::Bob, &partition.set2)?;
    let bob_set3 = transcript.bit_view(Party::Bob, &partition.set3)?;

    let (mut triples, mut unpaired, keep_as_key) = match config.variant {
        PairingVariant::FlipTriples => {
            let plan = make_triples_flip(&bob_set2, &bob_set3);
            (plan.triples, plan.unpaired, true)
        }
        PairingVariant::SearchPairs => {
            let search = make_pairs_search(&bob_set2, &bob_set3);
            let mut unpaired = search.skipped.clone();
            unpaired.extend(&search.unused);
            (
                search.as_triples(),
                unpaired,
                config.search_key_policy == SearchKeyPolicy::Keep,
            )
        }
    };
    if let Some(limit) = config.pair_limit {
        if triples.len() > limit {
            for t in triples.drain(limit..) {
                unpaired.extend([t.t_set2, t.t_set3]);
            }
        }
    }
    unpaired.sort_unstable();

    public_log.push(match config.variant {
        PairingVariant::FlipTriples => PublicMessage::Triples(triples.clone()),
        PairingVariant::SearchPairs => {
            PublicMessage::Pairs(triples.iter().map(|t| (t.t_set2, t.t_set3)).collect())
        }
    });

    let alice_table = transcript.bit_table(Party::Alice);
    let bob_table = transcript.bit_table(Party::Bob);
    let verification = verify_triples(&alice_table, &triples)?;
    let aborted = match config.failure_policy {
        FailurePolicy::AbortOnAny => !verification.pass,
        FailurePolicy::Threshold(max) => verification.failure_rate() > max,
    };
    public_log.push(PublicMessage::Verdict {
        checked: verification.checked_pairs,
        failures: verification.failures.len(),
        aborted,
    });

    let key_triples: Vec<Triple> = if aborted || !keep_as_key {
        Vec::new()
    } else {
        triples
            .iter()
            .filter(|t| !verification.failures.contains(t))
            .copied()
            .collect()
    };
    let alice_key = extract_key(&key_triples, &alice_table)?;
    let bob_key = extract_key(&key_triples, &bob_table)?;

    Ok(DuplexSession {
        transcript,
        eve_records,
        public_log,
        partition,
        variant: config.variant,
        flip_convention: FlipConvention::FlipSet3,
        triples,
        unpaired,
        verification,
        aborted,
        key_triples,
        alice_key,
        bob_key,
    })
}
