//! Data Processing Center pipeline.
//!
//! Records enter a FIFO served by a single processor. After service each
//! record is scored against related values held by peer DPCs:
//!
//! ```text
//! Queued -> Processing -> confidence >= threshold      -> Passed  -> Forwarded
//!                      -> below, retries < limit       -> (peer sync wait) -> Queued
//!                      -> below, retries == limit      -> Flagged -> Forwarded
//! ```
//!
//! Nothing is discarded: a record that never reaches the threshold is
//! forwarded with a low-confidence mark.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::ProcessingError;
use crate::model::{Message, MessageId, NodeId, SimTime};
use crate::scenario::DpcConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Queued,
    Processing,
    Passed,
    Flagged,
    Forwarded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpcRecord {
    pub message: Message,
    pub arrived_at: SimTime,
    pub confidence: Option<f64>,
    pub retries: u32,
    pub status: RecordStatus,
    /// Set when the record ended Flagged; survives forwarding.
    pub low_confidence: bool,
}

impl DpcRecord {
    pub fn new(message: Message, arrived_at: SimTime) -> Self {
        Self {
            message,
            arrived_at,
            confidence: None,
            retries: 0,
            status: RecordStatus::Queued,
            low_confidence: false,
        }
    }

    pub fn id(&self) -> MessageId {
        self.message.id
    }
}

/// Peer values gathered for one scoring round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceReport {
    pub record: MessageId,
    pub peer_values: Vec<(NodeId, f64)>,
    pub agreement: f64,
}

/// Fraction of peer values within relative `tolerance` of the record's value.
///
/// Records without a measurement, and records with no peer values, score 1.0.
pub fn compute_confidence(record: &DpcRecord, peer_values: &[f64], tolerance: f64) -> f64 {
    let Some(value) = record.message.payload_value else {
        return 1.0;
    };
    if !record.message.kind.is_scored() || peer_values.is_empty() {
        return 1.0;
    }
    let bound = tolerance * value.abs();
    let agreeing = peer_values
        .iter()
        .filter(|p| (*p - value).abs() <= bound)
        .count();
    agreeing as f64 / peer_values.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transition {
    Passed,
    /// Sent back for another round; `attempt` is the new retry count.
    Retry { attempt: u32 },
    Flagged,
}

/// Applies the threshold check to a scored record.
pub fn dpc_process(
    record: &mut DpcRecord,
    confidence: f64,
    threshold: f64,
    retry_limit: u32,
) -> Result<Transition, ProcessingError> {
    if !matches!(
        record.status,
        RecordStatus::Queued | RecordStatus::Processing
    ) {
        return Err(ProcessingError::InvalidStatus {
            id: record.id(),
            status: record.status,
            expected: "Queued or Processing",
        });
    }
    record.confidence = Some(confidence);
    if confidence >= threshold {
        record.status = RecordStatus::Passed;
        Ok(Transition::Passed)
    } else if record.retries < retry_limit {
        record.retries += 1;
        record.status = RecordStatus::Processing;
        Ok(Transition::Retry {
            attempt: record.retries,
        })
    } else {
        record.status = RecordStatus::Flagged;
        record.low_confidence = true;
        Ok(Transition::Flagged)
    }
}

/// Marks a finished record Forwarded and returns its CDC arrival time.
pub fn forward_to_cdc(
    record: &mut DpcRecord,
    now: SimTime,
    backhaul_delay_s: f64,
) -> Result<SimTime, ProcessingError> {
    match record.status {
        RecordStatus::Passed | RecordStatus::Flagged => {
            record.status = RecordStatus::Forwarded;
            Ok(now + backhaul_delay_s)
        }
        status => Err(ProcessingError::InvalidStatus {
            id: record.id(),
            status,
            expected: "Passed or Flagged",
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpcParams {
    pub threshold: f64,
    pub retry_limit: u32,
    pub service_s: f64,
    pub peer_sync_s: f64,
    pub tolerance: f64,
    pub inbox_bits: u64,
}

impl From<&DpcConfig> for DpcParams {
    fn from(cfg: &DpcConfig) -> Self {
        Self {
            threshold: cfg.confidence_threshold,
            retry_limit: cfg.retry_limit,
            service_s: cfg.service_s,
            peer_sync_s: cfg.peer_sync_s,
            tolerance: cfg.agreement_tolerance,
            inbox_bits: cfg.inbox_bits,
        }
    }
}

/// One DPC: bounded inbox, FIFO queue and a single processing server.
#[derive(Debug, Clone)]
pub struct DpcPipeline {
    pub id: NodeId,
    pub params: DpcParams,
    records: BTreeMap<MessageId, DpcRecord>,
    queue: VecDeque<MessageId>,
    in_service: Option<MessageId>,
    used_bits: u64,
    reserved_bits: u64,
}

impl DpcPipeline {
    pub fn new(id: NodeId, params: DpcParams) -> Self {
        Self {
            id,
            params,
            records: BTreeMap::new(),
            queue: VecDeque::new(),
            in_service: None,
            used_bits: 0,
            reserved_bits: 0,
        }
    }

    pub fn used_bits(&self) -> u64 {
        self.used_bits
    }

    pub fn free_bits(&self) -> u64 {
        self.params
            .inbox_bits
            .saturating_sub(self.used_bits + self.reserved_bits)
    }

    /// Holds inbox space for an incoming transfer.
    pub fn reserve(&mut self, bits: u64) -> bool {
        if bits > self.free_bits() {
            return false;
        }
        self.reserved_bits += bits;
        true
    }

    pub fn release(&mut self, bits: u64) {
        debug_assert!(self.reserved_bits >= bits);
        self.reserved_bits -= bits;
    }

    /// Takes custody of a message; the record starts Queued.
    pub fn ingest(&mut self, message: Message, now: SimTime) -> Result<&DpcRecord, ProcessingError> {
        let id = message.id;
        if self.records.contains_key(&id) {
            return Err(ProcessingError::DuplicateIngest(id));
        }
        let needed = message.size_bits;
        if needed > self.params.inbox_bits.saturating_sub(self.used_bits) {
            return Err(ProcessingError::InboxFull {
                needed,
                free: self.free_bits(),
            });
        }
        self.used_bits += needed;
        self.queue.push_back(id);
        Ok(self.records.entry(id).or_insert(DpcRecord::new(message, now)))
    }

    pub fn is_idle(&self) -> bool {
        self.in_service.is_none()
    }

    /// Moves the head of the queue into service if the server is free.
    /// Returns the record id and its service duration.
    pub fn start_next(&mut self) -> Option<(MessageId, f64)> {
        if self.in_service.is_some() {
            return None;
        }
        let id = self.queue.pop_front()?;
        let rec = self.records.get_mut(&id).expect("queued record exists");
        rec.status = RecordStatus::Processing;
        self.in_service = Some(id);
        Some((id, self.params.service_s))
    }

    /// Ends service of `id`, scoring it with `confidence`. Frees the server.
    pub fn finish_service(&mut self, id: MessageId, confidence: f64) -> Result<Transition, ProcessingError> {
        if self.in_service != Some(id) {
            return Err(ProcessingError::UnknownRecord(id));
        }
        self.in_service = None;
        let params = self.params;
        let rec = self
            .records
            .get_mut(&id)
            .ok_or(ProcessingError::UnknownRecord(id))?;
        dpc_process(rec, confidence, params.threshold, params.retry_limit)
    }

    /// Returns a record to the queue after its peer-sync wait.
    pub fn requeue(&mut self, id: MessageId) -> Result<(), ProcessingError> {
        let rec = self
            .records
            .get_mut(&id)
            .ok_or(ProcessingError::UnknownRecord(id))?;
        if rec.status != RecordStatus::Processing {
            return Err(ProcessingError::InvalidStatus {
                id,
                status: rec.status,
                expected: "Processing",
            });
        }
        rec.status = RecordStatus::Queued;
        self.queue.push_back(id);
        Ok(())
    }

    /// Removes a Passed or Flagged record from the inbox and marks it Forwarded.
    pub fn forward(
        &mut self,
        id: MessageId,
        now: SimTime,
        backhaul_delay_s: f64,
    ) -> Result<(DpcRecord, SimTime), ProcessingError> {
        let rec = self
            .records
            .get_mut(&id)
            .ok_or(ProcessingError::UnknownRecord(id))?;
        let arrival = forward_to_cdc(rec, now, backhaul_delay_s)?;
        let rec = self.records.remove(&id).expect("record present");
        self.used_bits -= rec.message.size_bits;
        Ok((rec, arrival))
    }

    pub fn record(&self, id: MessageId) -> Option<&DpcRecord> {
        self.records.get(&id)
    }

    pub fn records(&self) -> impl Iterator<Item = &DpcRecord> {
        self.records.values()
    }

    pub fn queued(&self) -> impl Iterator<Item = MessageId> + '_ {
        self.queue.iter().copied()
    }
}
