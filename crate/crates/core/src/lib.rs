//! Simulation of duplex BB84 key distribution, where eavesdropping is
//! detected by parity checks over paired timeslots instead of by publicly
//! comparing a sample of key bits, alongside the classic single-direction
//! protocol for comparison.
//!
//! Modules, bottom up:
//! - [`quantum`]: eigenstate qubits, measurement, lossy/noisy channel
//! - [`adversary`]: intercept-resend eavesdropper
//! - [`bb84`]: baseline protocol with sample-based error estimation
//! - [`duplex`]: interleaved two-way protocol, three-set filtering,
//!   flip-bit triples, verification and key extraction
//! - [`stats`]: closed-form probabilities, information accounting, reports

pub mod adversary;
pub mod bb84;
pub mod duplex;
pub mod error;
pub mod quantum;
pub mod record;
pub mod rng;
pub mod stats;

pub use error::{ConfigError, ProtocolError, StatsError};
pub use quantum::{Basis, Bit, ChannelModel, QubitState};
pub use record::{Direction, Party, SlotRecord, Timeslot};
