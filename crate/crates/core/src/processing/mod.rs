//! Processing centres: the DPC confidence pipeline, the CDC historical merge,
//! DCC rule evaluation and the emergency bypass.

pub mod bypass;
pub mod cdc;
pub mod dcc;
pub mod dpc;

pub use bypass::{emergency_bypass_check, AlertLedger, EmergencyAlert};
pub use cdc::{cdc_merge, AreaHistory, AreaReport, Sample};
pub use dcc::{dcc_decide, default_rule_table, Action, Aggregate, Comparison, Decision, Rule};
pub use dpc::{
    compute_confidence, dpc_process, forward_to_cdc, ConfidenceReport, DpcParams, DpcPipeline,
    DpcRecord, RecordStatus, Transition,
};
