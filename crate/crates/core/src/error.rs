use thiserror::Error;

use crate::Timeslot;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{name} must lie in [0, 1], got {value}")]
    Probability { name: &'static str, value: f64 },
    #[error("sample_fraction must lie strictly between 0 and 1, got {0}")]
    SampleFraction(f64),
    #[error("need at least {min} timeslots, got {got}")]
    TooFewTimeslots { min: usize, got: usize },
    #[error("failure threshold must lie in [0, 1], got {0}")]
    Threshold(f64),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("no basis announcement for timeslot {0}")]
    MissingAnnouncement(Timeslot),
    #[error("no bit value recorded for timeslot {0}")]
    MissingRecord(Timeslot),
    #[error("timeslot {0} appears more than once")]
    DuplicateTimeslot(Timeslot),
    #[error("timeslot {0} does not follow the transcript's interleaving rule")]
    Interleaving(Timeslot),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("no {0} sessions to aggregate")]
    Empty(&'static str),
}
