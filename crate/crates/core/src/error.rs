use thiserror::Error;

use crate::model::{MessageId, SimTime};
use crate::processing::RecordStatus;
use crate::validate::Finding;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unknown node role `{0}`")]
    UnknownRole(String),
    #[error("malformed node id `{0}` (expected `<role>:<index>`)")]
    BadNodeId(String),
    #[error("hop for message {message} at {next} precedes previous hop at {last}")]
    HopOutOfOrder {
        message: MessageId,
        last: SimTime,
        next: SimTime,
    },
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("failed to read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse scenario JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RadioError {
    #[error("zero-rate link")]
    ZeroRate,
}

#[derive(Debug, Error, PartialEq)]
pub enum ProcessingError {
    #[error("duplicate ingest of message {0}")]
    DuplicateIngest(MessageId),
    #[error("DPC inbox full: {needed} bits needed, {free} free")]
    InboxFull { needed: u64, free: u64 },
    #[error("no record for message {0}")]
    UnknownRecord(MessageId),
    #[error("record {id} is {status:?}; operation requires {expected}")]
    InvalidStatus {
        id: MessageId,
        status: RecordStatus,
        expected: &'static str,
    },
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scenario has {} error finding(s)", .0.len())]
    InvalidScenario(Vec<Finding>),
    #[error("simulation invariant violated at {at}: {detail}")]
    Invariant { at: SimTime, detail: String },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BufferError {
    #[error("{owner} buffer full: {needed} bits needed, {free} free")]
    Full {
        owner: crate::model::NodeId,
        needed: u64,
        free: u64,
    },
    #[error("message {0} is already buffered")]
    Duplicate(MessageId),
}
