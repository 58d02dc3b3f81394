//! Duplex BB84: both parties transmit, bases are announced, and Bob pairs a
//! slot Alice sent with a slot he sent so Alice can check their parity
//! without any bit value ever being made public.

mod filter;
mod pairing;
mod session;
mod transcript;
mod verify;

pub use filter::{filter_sets, Announced, BasisAnnouncement, SetPartition};
pub use pairing::{make_pairs_search, make_triples_flip, SearchPairing, Triple, TriplePlan};
pub use session::{
    process_transcript, run_duplex_session, DuplexConfig, DuplexSession, DuplexSessionError,
    FailurePolicy, FlipConvention, PairingVariant, PublicMessage, SearchKeyPolicy,
};
pub use transcript::{
    run_duplex_transmission, DuplexTransmission, Interleaving, Transcript, TranscriptParseError,
};
pub use verify::{check_triple, extract_key, key_rule, verify_triples, VerificationResult};

pub use crate::record::{Direction, SlotRecord};
