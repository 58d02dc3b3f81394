use std::fmt;

use serde::{Deserialize, Serialize};

use crate::quantum::Bit;
use crate::record::Timeslot;

/// Bob's published check unit: one set-2 slot, one set-3 slot and a flip bit
/// telling Alice whether to invert her set-3 bit before comparing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub t_set2: Timeslot,
    pub t_set3: Timeslot,
    pub flip: Bit,
}

impl Triple {
    pub fn new(t_set2: Timeslot, t_set3: Timeslot, flip: Bit) -> Self {
        Self {
            t_set2,
            t_set3,
            flip,
        }
    }

    /// The triple as it is listed on the wire: later timeslot first. Alice
    /// recovers which slot is which from the direction of each timeslot.
    pub fn listed(&self) -> (u64, u64, u8) {
        let (a, b) = (self.t_set2.0, self.t_set3.0);
        (a.max(b), a.min(b), self.flip.as_u8())
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (a, b, flip) = self.listed();
        write!(f, "({a},{b},{flip})")
    }
}

/// Output of the flip-bit pairing.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TriplePlan {
    pub triples: Vec<Triple>,
    /// Tail of the longer set; never checked and never used as key.
    pub unpaired: Vec<Timeslot>,
}

/// Pairs the i-th set-2 slot with the i-th set-3 slot, using Bob's local
/// bit values. `flip = BV(set 2) XOR BV(set 3)`.
pub fn make_triples_flip(
    set2_view: &[(Timeslot, Bit)],
    set3_view: &[(Timeslot, Bit)],
) -> TriplePlan {
    let n = set2_view.len().min(set3_view.len());
    let triples = set2_view
        .iter()
        .zip(set3_view)
        .map(|(&(t2, b2), &(t3, b3))| Triple::new(t2, t3, b2 ^ b3))
        .collect();
    let unpaired = set2_view[n..]
        .iter()
        .chain(&set3_view[n..])
        .map(|&(t, _)| t)
        .collect();
    TriplePlan { triples, unpaired }
}

/// Output of the same-bit-value search pairing.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SearchPairing {
    /// `(set-2 slot, set-3 slot)` with equal bit values at Bob.
    pub pairs: Vec<(Timeslot, Timeslot)>,
    /// Set-2 slots for which no unused set-3 slot had the same bit value.
    pub skipped: Vec<Timeslot>,
    /// Set-3 slots never matched.
    pub unused: Vec<Timeslot>,
}

impl SearchPairing {
    /// The pairs as triples with a zero flip bit.
    pub fn as_triples(&self) -> Vec<Triple> {
        self.pairs
            .iter()
            .map(|&(t2, t3)| Triple::new(t2, t3, Bit::Zero))
            .collect()
    }
}

/// Walks set 2 in order, matching each slot to the earliest unused set-3
/// slot with the same bit value at Bob. Unmatched set-2 slots are skipped.
pub fn make_pairs_search(
    set2_view: &[(Timeslot, Bit)],
    set3_view: &[(Timeslot, Bit)],
) -> SearchPairing {
    let mut used = vec![false; set3_view.len()];
    let mut out = SearchPairing::default();
    for &(t2, b2) in set2_view {
        let hit = set3_view
            .iter()
            .enumerate()
            .find(|(i, &(_, b3))| !used[*i] && b3 == b2)
            .map(|(i, &(t3, _))| (i, t3));
        match hit {
            Some((i, t3)) => {
                used[i] = true;
                out.pairs.push((t2, t3));
            }
            None => out.skipped.push(t2),
        }
    }
    out.unused = set3_view
        .iter()
        .zip(&used)
        .filter(|(_, &u)| !u)
        .map(|(&(t, _), _)| t)
        .collect();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn view(pairs: &[(u64, u8)]) -> Vec<(Timeslot, Bit)> {
        pairs
            .iter()
            .map(|&(t, b)| (Timeslot(t), Bit::try_from(b).unwrap()))
            .collect()
    }

    fn set2() -> Vec<(Timeslot, Bit)> {
        view(&[(3, 1), (5, 1), (9, 1), (11, 1), (15, 1), (17, 0)])
    }

    fn set3() -> Vec<(Timeslot, Bit)> {
        view(&[(2, 0), (6, 1), (8, 1), (10, 1), (14, 0), (16, 1), (18, 0)])
    }

    #[test]
    fn flip_triples_for_the_worked_example() {
        let plan = make_triples_flip(&set2(), &set3());
        let listed: Vec<String> = plan.triples.iter().map(|t| t.to_string()).collect();
        assert_eq!(
            listed,
            [
                "(3,2,1)",
                "(6,5,0)",
                "(9,8,0)",
                "(11,10,0)",
                "(15,14,1)",
                "(17,16,1)"
            ]
        );
        assert_eq!(plan.unpaired, vec![Timeslot(18)]);
        assert_eq!(
            plan.triples[1],
            Triple::new(Timeslot(5), Timeslot(6), Bit::Zero)
        );
    }

    #[test]
    fn flip_triples_empty() {
        assert_eq!(make_triples_flip(&[], &[]), TriplePlan::default());
    }

    #[test]
    fn equal_values_give_zero_flip() {
        let plan = make_triples_flip(&view(&[(1, 1)]), &view(&[(2, 1)]));
        assert_eq!(
            plan.triples,
            vec![Triple::new(Timeslot(1), Timeslot(2), Bit::Zero)]
        );
    }

    // Hand trace: set-3 ones are 6, 8, 10, 16 and zeros are 2, 14, 18.
    // 3->6, 5->8, 9->10, 11->16, 15 finds no unused one, 17->2.
    #[test]
    fn search_pairs_for_the_worked_example() {
        let p = make_pairs_search(&set2(), &set3());
        let pairs: Vec<(u64, u64)> = p.pairs.iter().map(|(a, b)| (a.0, b.0)).collect();
        assert_eq!(pairs[0], (3, 6));
        assert_eq!(pairs, vec![(3, 6), (5, 8), (9, 10), (11, 16), (17, 2)]);
        assert_eq!(p.skipped, vec![Timeslot(15)]);
        assert_eq!(p.unused, vec![Timeslot(14), Timeslot(18)]);
    }

    #[test]
    fn search_with_no_matches_skips_everything() {
        let p = make_pairs_search(&view(&[(1, 1), (3, 1)]), &view(&[(2, 0), (4, 0)]));
        assert!(p.pairs.is_empty());
        assert_eq!(p.skipped, vec![Timeslot(1), Timeslot(3)]);
        assert_eq!(p.unused.len(), 2);
    }

    #[test]
    fn search_single_equal_pair() {
        let p = make_pairs_search(&view(&[(1, 0)]), &view(&[(2, 0)]));
        assert_eq!(p.pairs, vec![(Timeslot(1), Timeslot(2))]);
        assert_eq!(p.as_triples()[0].flip, Bit::Zero);
    }
}
