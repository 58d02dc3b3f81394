//! Qubit states as basis eigenstates, complementary-basis measurement and an
//! abstract lossy, noisy channel.
//!
//! Every state that occurs in BB84 (honest preparation or the collapse left
//! behind by an intercept-resend attack) is an eigenstate of one of the two
//! complementary observables, so a `(basis, bit)` pair describes it exactly.

use std::fmt;
use std::ops::{BitXor, Not};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// One of the two complementary coding bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Basis {
    X,
    Y,
}

impl Basis {
    pub const ALL: [Basis; 2] = [Basis::X, Basis::Y];

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        if rng.gen::<bool>() {
            Basis::Y
        } else {
            Basis::X
        }
    }

    pub fn complement(self) -> Self {
        match self {
            Basis::X => Basis::Y,
            Basis::Y => Basis::X,
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Basis::X => f.write_str("X"),
            Basis::Y => f.write_str("Y"),
        }
    }
}

/// Bit value carried by an eigenstate: `+` is 1, `-` is 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Bit {
    Zero,
    One,
}

impl Bit {
    pub const ALL: [Bit; 2] = [Bit::Zero, Bit::One];

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Bit::from(rng.gen::<bool>())
    }

    pub fn as_u8(self) -> u8 {
        match self {
            Bit::Zero => 0,
            Bit::One => 1,
        }
    }
}

impl From<bool> for Bit {
    fn from(b: bool) -> Self {
        if b {
            Bit::One
        } else {
            Bit::Zero
        }
    }
}

impl From<Bit> for bool {
    fn from(b: Bit) -> Self {
        b == Bit::One
    }
}

impl From<Bit> for u8 {
    fn from(b: Bit) -> Self {
        b.as_u8()
    }
}

impl TryFrom<u8> for Bit {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            0 => Ok(Bit::Zero),
            1 => Ok(Bit::One),
            other => Err(format!("bit value must be 0 or 1, got {other}")),
        }
    }
}

impl Not for Bit {
    type Output = Bit;

    fn not(self) -> Bit {
        match self {
            Bit::Zero => Bit::One,
            Bit::One => Bit::Zero,
        }
    }
}

impl BitXor for Bit {
    type Output = Bit;

    fn bitxor(self, rhs: Bit) -> Bit {
        Bit::from(self != rhs)
    }
}

impl fmt::Display for Bit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// An eigenstate `|±⟩` of the X or Y observable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QubitState {
    pub basis: Basis,
    pub bit: Bit,
}

impl fmt::Display for QubitState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = match self.bit {
            Bit::One => '+',
            Bit::Zero => '-',
        };
        write!(f, "|{sign}>_{}", self.basis)
    }
}

pub fn prepare(basis: Basis, bit: Bit) -> QubitState {
    QubitState { basis, bit }
}

/// Measures `state` in `basis`.
///
/// A matching basis returns the encoded bit. A complementary basis yields a
/// uniformly random outcome; the state left behind is `prepare(basis, outcome)`.
pub fn measure<R: Rng + ?Sized>(state: QubitState, basis: Basis, rng: &mut R) -> Bit {
    if state.basis == basis {
        state.bit
    } else {
        Bit::random(rng)
    }
}

/// Measures and returns the outcome together with the collapsed state.
pub fn measure_collapse<R: Rng + ?Sized>(
    state: QubitState,
    basis: Basis,
    rng: &mut R,
) -> (Bit, QubitState) {
    let outcome = measure(state, basis, rng);
    (outcome, prepare(basis, outcome))
}

/// Loss and within-basis bit-flip probabilities of the quantum channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    loss_probability: f64,
    flip_probability: f64,
}

impl ChannelModel {
    pub const IDEAL: ChannelModel = ChannelModel {
        loss_probability: 0.0,
        flip_probability: 0.0,
    };

    pub fn new(loss_probability: f64, flip_probability: f64) -> Result<Self, ConfigError> {
        check_probability("loss_probability", loss_probability)?;
        check_probability("flip_probability", flip_probability)?;
        Ok(Self {
            loss_probability,
            flip_probability,
        })
    }

    pub fn loss_probability(&self) -> f64 {
        self.loss_probability
    }

    pub fn flip_probability(&self) -> f64 {
        self.flip_probability
    }
}

impl Default for ChannelModel {
    fn default() -> Self {
        Self::IDEAL
    }
}

pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(ConfigError::Probability { name, value })
    }
}

/// Sends `state` through `channel`. `None` means the photon was lost.
pub fn transmit<R: Rng + ?Sized>(
    state: QubitState,
    channel: &ChannelModel,
    rng: &mut R,
) -> Option<QubitState> {
    if rng.gen_bool(channel.loss_probability) {
        return None;
    }
    if rng.gen_bool(channel.flip_probability) {
        Some(QubitState {
            basis: state.basis,
            bit: !state.bit,
        })
    } else {
        Some(state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn prepare_encodes_sign_convention() {
        assert_eq!(prepare(Basis::X, Bit::One).to_string(), "|+>_X");
        assert_eq!(prepare(Basis::Y, Bit::Zero).to_string(), "|->_Y");
        assert_eq!(prepare(Basis::X, Bit::Zero).to_string(), "|->_X");
    }

    #[test]
    fn same_basis_measurement_is_deterministic() {
        let mut r = rng();
        for _ in 0..1000 {
            assert_eq!(
                measure(prepare(Basis::X, Bit::One), Basis::X, &mut r),
                Bit::One
            );
            assert_eq!(
                measure(prepare(Basis::Y, Bit::Zero), Basis::Y, &mut r),
                Bit::Zero
            );
        }
    }

    #[test]
    fn cross_basis_measurement_is_fair() {
        let mut r = rng();
        let n = 100_000;
        let zeros = (0..n)
            .filter(|_| measure(prepare(Basis::X, Bit::One), Basis::Y, &mut r) == Bit::Zero)
            .count();
        let freq = zeros as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.01, "frequency {freq}");
    }

    #[test]
    fn collapse_repeats_on_remeasurement() {
        let mut r = rng();
        for _ in 0..1000 {
            let (out, post) = measure_collapse(prepare(Basis::X, Bit::Zero), Basis::Y, &mut r);
            assert_eq!(post, prepare(Basis::Y, out));
            assert_eq!(measure(post, Basis::Y, &mut r), out);
        }
    }

    #[test]
    fn ideal_channel_is_identity() {
        let mut r = rng();
        for basis in Basis::ALL {
            for bit in Bit::ALL {
                let s = prepare(basis, bit);
                assert_eq!(transmit(s, &ChannelModel::IDEAL, &mut r), Some(s));
            }
        }
    }

    #[test]
    fn total_loss_drops_everything() {
        let mut r = rng();
        let ch = ChannelModel::new(1.0, 0.3).unwrap();
        assert!((0..1000).all(|_| transmit(prepare(Basis::Y, Bit::One), &ch, &mut r).is_none()));
    }

    #[test]
    fn flip_frequency_matches_channel() {
        let mut r = rng();
        let ch = ChannelModel::new(0.0, 0.1).unwrap();
        let n = 100_000;
        let flipped = (0..n)
            .filter(|_| {
                let out = transmit(prepare(Basis::X, Bit::One), &ch, &mut r).unwrap();
                assert_eq!(out.basis, Basis::X);
                out.bit == Bit::Zero
            })
            .count();
        let freq = flipped as f64 / n as f64;
        assert!((freq - 0.1).abs() < 0.005, "frequency {freq}");
    }

    #[test]
    fn rejects_out_of_range_probabilities() {
        assert!(ChannelModel::new(-0.1, 0.0).is_err());
        assert!(ChannelModel::new(0.0, 1.5).is_err());
        assert!(ChannelModel::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn bit_algebra() {
        assert_eq!(Bit::One ^ Bit::One, Bit::Zero);
        assert_eq!(Bit::One ^ Bit::Zero, Bit::One);
        assert_eq!(!Bit::Zero, Bit::One);
        assert!(Bit::try_from(2u8).is_err());
    }
}
