//! Per-timeslot truth records and the single-slot simulation step shared by
//! the baseline and duplex protocols.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::{maybe_intercept, EveRecord, EveStrategy};
use crate::quantum::{measure, prepare, transmit, Basis, Bit, ChannelModel};

/// A transmission timeslot `T`, numbered from 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timeslot(pub u64);

impl fmt::Display for Timeslot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    AliceToBob,
    BobToAlice,
}

impl Direction {
    pub fn sender(self) -> Party {
        match self {
            Direction::AliceToBob => Party::Alice,
            Direction::BobToAlice => Party::Bob,
        }
    }

    pub fn receiver(self) -> Party {
        match self {
            Direction::AliceToBob => Party::Bob,
            Direction::BobToAlice => Party::Alice,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Direction::AliceToBob => f.write_str("AliceToBob"),
            Direction::BobToAlice => f.write_str("BobToAlice"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Party {
    Alice,
    Bob,
}

/// Everything that happened in one timeslot, as seen by an omniscient observer.
///
/// `receiver_bit` is `None` exactly when the photon never arrived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub timeslot: Timeslot,
    pub direction: Direction,
    pub sender_basis: Basis,
    pub sender_bit: Bit,
    pub receiver_basis: Basis,
    pub receiver_bit: Option<Bit>,
}

impl SlotRecord {
    pub fn is_lost(&self) -> bool {
        self.receiver_bit.is_none()
    }

    pub fn bases_match(&self) -> bool {
        self.sender_basis == self.receiver_basis
    }

    /// Received with matching bases: the slot survives sifting.
    pub fn is_matched(&self) -> bool {
        !self.is_lost() && self.bases_match()
    }

    /// Matched slot whose received bit differs from the sent bit.
    pub fn is_error(&self) -> bool {
        self.is_matched() && self.receiver_bit != Some(self.sender_bit)
    }

    /// The coding basis `party` used in this slot.
    pub fn basis_of(&self, party: Party) -> Basis {
        if self.direction.sender() == party {
            self.sender_basis
        } else {
            self.receiver_basis
        }
    }

    /// The bit value `party` holds for this slot: the bit sent, or the bit
    /// measured (`None` when nothing arrived).
    pub fn bit_of(&self, party: Party) -> Option<Bit> {
        if self.direction.sender() == party {
            Some(self.sender_bit)
        } else {
            self.receiver_bit
        }
    }
}

/// Local `(T, BV)` table of one party.
pub type BitTable = BTreeMap<Timeslot, Bit>;

/// Random choices made by the two honest parties for one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotDraw {
    pub sender_basis: Basis,
    pub sender_bit: Bit,
    pub receiver_basis: Basis,
}

/// Supplies the honest parties' basis and bit choices slot by slot.
pub trait DrawSource {
    fn draw<R: Rng + ?Sized>(&mut self, timeslot: Timeslot, rng: &mut R) -> SlotDraw;
}

/// Independent uniform choices for every slot.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformDraws;

impl DrawSource for UniformDraws {
    fn draw<R: Rng + ?Sized>(&mut self, _timeslot: Timeslot, rng: &mut R) -> SlotDraw {
        SlotDraw {
            sender_basis: Basis::random(rng),
            sender_bit: Bit::random(rng),
            receiver_basis: Basis::random(rng),
        }
    }
}

/// Pre-recorded choices keyed by timeslot; unscripted slots fall back to
/// uniform draws.
#[derive(Debug, Clone, Default)]
pub struct ScriptedDraws {
    script: BTreeMap<Timeslot, SlotDraw>,
}

impl ScriptedDraws {
    pub fn new(script: BTreeMap<Timeslot, SlotDraw>) -> Self {
        Self { script }
    }
}

impl FromIterator<(Timeslot, SlotDraw)> for ScriptedDraws {
    fn from_iter<I: IntoIterator<Item = (Timeslot, SlotDraw)>>(iter: I) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

impl DrawSource for ScriptedDraws {
    fn draw<R: Rng + ?Sized>(&mut self, timeslot: Timeslot, rng: &mut R) -> SlotDraw {
        match self.script.get(&timeslot) {
            Some(d) => *d,
            None => UniformDraws.draw(timeslot, rng),
        }
    }
}

/// Prepares, (maybe) intercepts, transmits and measures one photon.
pub fn simulate_slot<R: Rng + ?Sized>(
    timeslot: Timeslot,
    direction: Direction,
    draw: SlotDraw,
    channel: &ChannelModel,
    eve: &EveStrategy,
    rng: &mut R,
) -> (SlotRecord, Option<EveRecord>) {
    let sent = prepare(draw.sender_basis, draw.sender_bit);
    let (forwarded, eve_record) = maybe_intercept(timeslot, sent, eve, rng);
    let receiver_bit =
        transmit(forwarded, channel, rng).map(|s| measure(s, draw.receiver_basis, rng));
    let record = SlotRecord {
        timeslot,
        direction,
        sender_basis: draw.sender_basis,
        sender_bit: draw.sender_bit,
        receiver_basis: draw.receiver_basis,
        receiver_bit,
    };
    (record, eve_record)
}
