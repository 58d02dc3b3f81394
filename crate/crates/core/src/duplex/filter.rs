use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::ProtocolError;
use crate::quantum::Basis;
use crate::record::{Direction, Party, Timeslot};

use super::transcript::Transcript;

/// What a party says publicly about one timeslot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Announced {
    Basis(Basis),
    /// The party was the receiver and detected nothing.
    NoDetection,
}

/// A party's public list of coding bases for every timeslot, covering both
/// the slots it sent in and the slots it measured.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisAnnouncement {
    pub party: Party,
    pub entries: BTreeMap<Timeslot, Announced>,
}

impl BasisAnnouncement {
    pub fn from_transcript(transcript: &Transcript, party: Party) -> Self {
        let entries = transcript
            .slots()
            .iter()
            .map(|s| {
                let entry = if s.direction.receiver() == party && s.is_lost() {
                    Announced::NoDetection
                } else {
                    Announced::Basis(s.basis_of(party))
                };
                (s.timeslot, entry)
            })
            .collect();
        Self { party, entries }
    }

    /// Announced basis per timeslot, skipping no-detection entries.
    pub fn bases(&self) -> BTreeMap<Timeslot, Basis> {
        self.entries
            .iter()
            .filter_map(|(t, a)| match a {
                Announced::Basis(b) => Some((*t, *b)),
                Announced::NoDetection => None,
            })
            .collect()
    }
}

/// Bob's three-way split of the announced timeslots.
///
/// Set 1 (`discard`) holds lost and basis-mismatched slots. Set 2 holds the
/// remaining slots Alice sent; set 3 the remaining slots Bob sent.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SetPartition {
    pub discard: BTreeSet<Timeslot>,
    pub set2: Vec<Timeslot>,
    pub set3: Vec<Timeslot>,
}

impl SetPartition {
    pub fn kept(&self) -> usize {
        self.set2.len() + self.set3.len()
    }
}

pub fn filter_sets(
    transcript: &Transcript,
    alice: &BasisAnnouncement,
    bob: &BasisAnnouncement,
) -> Result<SetPartition, ProtocolError> {
    let mut partition = SetPartition::default();
    for slot in transcript.slots() {
        let t = slot.timeslot;
        let a = alice
            .entries
            .get(&t)
            .ok_or(ProtocolError::MissingAnnouncement(t))?;
        let b = bob
            .entries
            .get(&t)
            .ok_or(ProtocolError::MissingAnnouncement(t))?;
        let agreed = matches!((a, b), (Announced::Basis(x), Announced::Basis(y)) if x == y);
        if !agreed {
            partition.discard.insert(t);
        } else if slot.direction == Direction::AliceToBob {
            partition.set2.push(t);
        } else {
            partition.set3.push(t);
        }
    }
    Ok(partition)
}
