use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{EveRecord, EveStrategy};
use crate::error::{ConfigError, ProtocolError};
use crate::quantum::{Basis, Bit, ChannelModel};
use crate::record::{simulate_slot, BitTable, Direction, DrawSource, Party, SlotRecord, Timeslot};

/// Which direction each timeslot carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interleaving {
    /// Alice sends in odd timeslots, Bob in even ones.
    #[default]
    OddAliceToBob,
    /// Directions are taken from each record as given.
    Explicit,
}

impl Interleaving {
    pub fn direction(self, timeslot: Timeslot) -> Option<Direction> {
        match self {
            Interleaving::OddAliceToBob if timeslot.0 % 2 == 1 => Some(Direction::AliceToBob),
            Interleaving::OddAliceToBob => Some(Direction::BobToAlice),
            Interleaving::Explicit => None,
        }
    }
}

/// Complete duplex record, one entry per timeslot in increasing order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Transcript {
    slots: Vec<SlotRecord>,
    interleaving: Interleaving,
}

impl Transcript {
    /// Builds a transcript, sorting by timeslot. The interleaving is
    /// `OddAliceToBob` when every record agrees with it, else `Explicit`.
    pub fn from_records(mut slots: Vec<SlotRecord>) -> Result<Self, ProtocolError> {
        slots.sort_by_key(|s| s.timeslot);
        if let Some(w) = slots.windows(2).find(|w| w[0].timeslot == w[1].timeslot) {
            return Err(ProtocolError::DuplicateTimeslot(w[0].timeslot));
        }
        let odd = Interleaving::OddAliceToBob;
        let interleaving = if slots
            .iter()
            .all(|s| odd.direction(s.timeslot) == Some(s.direction))
        {
            odd
        } else {
            Interleaving::Explicit
        };
        Ok(Self {
            slots,
            interleaving,
        })
    }

    pub fn with_interleaving(
        slots: Vec<SlotRecord>,
        interleaving: Interleaving,
    ) -> Result<Self, ProtocolError> {
        let mut t = Self::from_records(slots)?;
        if interleaving == Interleaving::OddAliceToBob {
            if let Some(bad) = t
                .slots
                .iter()
                .find(|s| interleaving.direction(s.timeslot) != Some(s.direction))
            {
                return Err(ProtocolError::Interleaving(bad.timeslot));
            }
        }
        t.interleaving = interleaving;
        Ok(t)
    }

    pub fn slots(&self) -> &[SlotRecord] {
        &self.slots
    }

    pub fn interleaving(&self) -> Interleaving {
        self.interleaving
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn get(&self, timeslot: Timeslot) -> Option<&SlotRecord> {
        self.slots
            .binary_search_by_key(&timeslot, |s| s.timeslot)
            .ok()
            .map(|i| &self.slots[i])
    }

    pub fn timeslots(&self) -> BTreeSet<Timeslot> {
        self.slots.iter().map(|s| s.timeslot).collect()
    }

    /// The `(T, BV)` table held by `party`: bits it sent plus bits it
    /// received. Lost slots are absent.
    pub fn bit_table(&self, party: Party) -> BitTable {
        self.slots
            .iter()
            .filter_map(|s| s.bit_of(party).map(|b| (s.timeslot, b)))
            .collect()
    }

    /// `party`'s bit values for the listed timeslots, in the given order.
    pub fn bit_view(
        &self,
        party: Party,
        timeslots: &[Timeslot],
    ) -> Result<Vec<(Timeslot, Bit)>, ProtocolError> {
        timeslots
            .iter()
            .map(|&t| {
                self.get(t)
                    .and_then(|s| s.bit_of(party))
                    .map(|b| (t, b))
                    .ok_or(ProtocolError::MissingRecord(t))
            })
            .collect()
    }

    /// Renders the transcript in the plain-text replay format.
    pub fn to_text(&self) -> String {
        let mut out = String::from(
            "timeslot\tdirection\tsender_basis\tsender_bit\treceiver_basis\treceiver_bit\n",
        );
        for s in &self.slots {
            let received = match s.receiver_bit {
                Some(b) => b.to_string(),
                None => LOST.to_string(),
            };
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                s.timeslot, s.direction, s.sender_basis, s.sender_bit, s.receiver_basis, received
            )
            .expect("writing to a String cannot fail");
        }
        out
    }
}

/// Photons sent in both directions plus everything Eve recorded on the way.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplexTransmission {
    pub transcript: Transcript,
    pub eve_records: Vec<EveRecord>,
}

/// Runs the quantum phase of the duplex protocol over `n_timeslots`
/// interleaved slots (odd: Alice sends, even: Bob sends).
pub fn run_duplex_transmission<R: Rng + ?Sized, D: DrawSource>(
    n_timeslots: usize,
    channel: &ChannelModel,
    eve: &EveStrategy,
    draws: &mut D,
    rng: &mut R,
) -> Result<DuplexTransmission, ConfigError> {
    if n_timeslots < 2 {
        return Err(ConfigError::TooFewTimeslots {
            min: 2,
            got: n_timeslots,
        });
    }
    let interleaving = Interleaving::OddAliceToBob;
    let mut slots = Vec::with_capacity(n_timeslots);
    let mut eve_records = Vec::new();
    for t in 1..=n_timeslots as u64 {
        let t = Timeslot(t);
        let direction = interleaving.direction(t).expect("fixed interleaving");
        let draw = draws.draw(t, rng);
        let (rec, seen) = simulate_slot(t, direction, draw, channel, eve, rng);
        slots.push(rec);
        eve_records.extend(seen);
    }
    Ok(DuplexTransmission {
        transcript: Transcript {
            slots,
            interleaving,
        },
        eve_records,
    })
}

const LOST: &str = "LOST";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TranscriptParseError {
    #[error("line {line}: {message}")]
    Row { line: usize, message: String },
    #[error("line {line}: {source}")]
    Protocol {
        line: usize,
        #[source]
        source: ProtocolError,
    },
}

fn parse_direction(tok: &str) -> Option<Direction> {
    match tok.to_ascii_lowercase().as_str() {
        "alicetobob" | "a>b" | "ab" => Some(Direction::AliceToBob),
        "bobtoalice" | "b>a" | "ba" => Some(Direction::BobToAlice),
        _ => None,
    }
}

fn parse_basis(tok: &str) -> Option<Basis> {
    match tok {
        "X" | "x" => Some(Basis::X),
        "Y" | "y" => Some(Basis::Y),
        _ => None,
    }
}

fn parse_bit(tok: &str) -> Option<Bit> {
    match tok {
        "0" => Some(Bit::Zero),
        "1" => Some(Bit::One),
        _ => None,
    }
}

fn parse_row(fields: &[&str]) -> Result<SlotRecord, String> {
    if fields.len() != 6 {
        return Err(format!("expected 6 columns, found {}", fields.len()));
    }
    let timeslot = fields[0]
        .parse::<u64>()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| format!("bad timeslot {:?}", fields[0]))?;
    let direction =
        parse_direction(fields[1]).ok_or_else(|| format!("bad direction {:?}", fields[1]))?;
    let sender_basis =
        parse_basis(fields[2]).ok_or_else(|| format!("bad sender basis {:?}", fields[2]))?;
    let sender_bit =
        parse_bit(fields[3]).ok_or_else(|| format!("bad sender bit {:?}", fields[3]))?;
    let receiver_basis =
        parse_basis(fields[4]).ok_or_else(|| format!("bad receiver basis {:?}", fields[4]))?;
    let receiver_bit = if fields[5].eq_ignore_ascii_case(LOST) {
        None
    } else {
        Some(parse_bit(fields[5]).ok_or_else(|| format!("bad receiver bit {:?}", fields[5]))?)
    };
    Ok(SlotRecord {
        timeslot: Timeslot(timeslot),
        direction,
        sender_basis,
        sender_bit,
        receiver_basis,
        receiver_bit,
    })
}

impl FromStr for Transcript {
    type Err = TranscriptParseError;

    /// Parses whitespace-separated rows of
    /// `timeslot direction sender_basis sender_bit receiver_basis receiver_bit`.
    /// `#` starts a comment; a header row starting with `timeslot` is skipped.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut slots = Vec::new();
        let mut lines_of = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            if fields[0].eq_ignore_ascii_case("timeslot") {
                continue;
            }
            let rec = parse_row(&fields)
                .map_err(|message| TranscriptParseError::Row { line, message })?;
            slots.push(rec);
            lines_of.push((rec.timeslot, line));
        }
        Transcript::from_records(slots).map_err(|source| {
            let line = match &source {
                ProtocolError::DuplicateTimeslot(t) => lines_of
                    .iter()
                    .filter(|(ts, _)| ts == t)
                    .map(|(_, l)| *l)
                    .nth(1)
                    .unwrap_or(0),
                _ => 0,
            };
            TranscriptParseError::Protocol { line, source }
        })
    }
}
