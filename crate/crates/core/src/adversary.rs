//! Intercept-resend eavesdropper.
//!
//! Eve sits on the quantum channel in both directions. On an intercepted slot
//! she measures in a basis chosen by her policy and resends the collapsed
//! eigenstate without noise; channel noise is applied afterwards.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::quantum::{check_probability, measure_collapse, Basis, Bit, QubitState};
use crate::Timeslot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EveKind {
    #[default]
    Absent,
    InterceptResend,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisPolicy {
    #[default]
    UniformRandom,
    AlwaysX,
    AlwaysY,
}

impl BasisPolicy {
    pub fn choose<R: Rng + ?Sized>(self, rng: &mut R) -> Basis {
        match self {
            BasisPolicy::UniformRandom => Basis::random(rng),
            BasisPolicy::AlwaysX => Basis::X,
            BasisPolicy::AlwaysY => Basis::Y,
        }
    }
}

/// Adversary configuration. With `kind == Absent` the other fields are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EveStrategy {
    kind: EveKind,
    intercept_fraction: f64,
    basis_policy: BasisPolicy,
}

impl EveStrategy {
    pub const ABSENT: EveStrategy = EveStrategy {
        kind: EveKind::Absent,
        intercept_fraction: 0.0,
        basis_policy: BasisPolicy::UniformRandom,
    };

    pub fn absent() -> Self {
        Self::ABSENT
    }

    pub fn intercept_resend(
        intercept_fraction: f64,
        basis_policy: BasisPolicy,
    ) -> Result<Self, ConfigError> {
        check_probability("intercept_fraction", intercept_fraction)?;
        Ok(Self {
            kind: EveKind::InterceptResend,
            intercept_fraction,
            basis_policy,
        })
    }

    /// Full interception with uniformly random measurement bases.
    pub fn full_uniform() -> Self {
        Self {
            kind: EveKind::InterceptResend,
            intercept_fraction: 1.0,
            basis_policy: BasisPolicy::UniformRandom,
        }
    }

    pub fn kind(&self) -> EveKind {
        self.kind
    }

    pub fn basis_policy(&self) -> BasisPolicy {
        self.basis_policy
    }

    /// Fraction of slots actually intercepted (0 when absent).
    pub fn effective_fraction(&self) -> f64 {
        match self.kind {
            EveKind::Absent => 0.0,
            EveKind::InterceptResend => self.intercept_fraction,
        }
    }
}

/// What Eve saw on one intercepted timeslot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EveRecord {
    pub timeslot: Timeslot,
    pub measured_basis: Basis,
    pub measured_bit: Bit,
}

/// Possibly intercepts the photon in `timeslot`, returning the state that
/// continues down the channel and Eve's record if she measured it.
pub fn maybe_intercept<R: Rng + ?Sized>(
    timeslot: Timeslot,
    state: QubitState,
    strategy: &EveStrategy,
    rng: &mut R,
) -> (QubitState, Option<EveRecord>) {
    if strategy.kind == EveKind::Absent || !rng.gen_bool(strategy.intercept_fraction) {
        return (state, None);
    }
    let basis = strategy.basis_policy.choose(rng);
    let (bit, forwarded) = measure_collapse(state, basis, rng);
    let record = EveRecord {
        timeslot,
        measured_basis: basis,
        measured_bit: bit,
    };
    (forwarded, Some(record))
}
