use serde::{Deserialize, Serialize};

use crate::error::ProtocolError;
use crate::quantum::Bit;
use crate::record::{BitTable, Timeslot};

use super::pairing::Triple;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct VerificationResult {
    pub checked_pairs: usize,
    pub failures: Vec<Triple>,
    pub pass: bool,
}

impl VerificationResult {
    pub fn failure_rate(&self) -> f64 {
        if self.checked_pairs == 0 {
            0.0
        } else {
            self.failures.len() as f64 / self.checked_pairs as f64
        }
    }
}

fn lookup(table: &BitTable, t: Timeslot) -> Result<Bit, ProtocolError> {
    table
        .get(&t)
        .copied()
        .ok_or(ProtocolError::MissingRecord(t))
}

/// Alice's parity check of one triple against her own bit values.
pub fn check_triple(alice: &BitTable, triple: &Triple) -> Result<bool, ProtocolError> {
    let b2 = lookup(alice, triple.t_set2)?;
    let b3 = lookup(alice, triple.t_set3)?;
    Ok(b2 == b3 ^ triple.flip)
}

/// Checks every triple: `BV(t_set2) == BV(t_set3) XOR flip` on Alice's side.
pub fn verify_triples(
    alice: &BitTable,
    triples: &[Triple],
) -> Result<VerificationResult, ProtocolError> {
    let mut failures = Vec::new();
    for triple in triples {
        if !check_triple(alice, triple)? {
            failures.push(*triple);
        }
    }
    Ok(VerificationResult {
        checked_pairs: triples.len(),
        pass: failures.is_empty(),
        failures,
    })
}

/// Reads an ordered pair of bit values as one key bit: `(0,1)` and `(0,0)`
/// read as 0, `(1,0)` and `(1,1)` as 1.
pub fn key_rule(first: Bit, second: Bit) -> Bit {
    match (first, second) {
        (Bit::Zero, Bit::One) | (Bit::Zero, Bit::Zero) => Bit::Zero,
        (Bit::One, Bit::Zero) | (Bit::One, Bit::One) => Bit::One,
    }
}

/// One key bit per triple from the caller's own records, the set-2 slot
/// read first.
pub fn extract_key(triples: &[Triple], local: &BitTable) -> Result<Vec<Bit>, ProtocolError> {
    triples
        .iter()
        .map(|t| Ok(key_rule(lookup(local, t.t_set2)?, lookup(local, t.t_set3)?)))
        .collect()
}
