//! Deterministic discrete-event simulator for rural e-service networks:
//! kiosks, MAP data ferries, district processing centres (DPC), the central
//! data centre (CDC), the decision control centre (DCC) and hospitals.
//!
//! ```
//! use ruralmesh_core::{run, ScenarioConfig, SimTime};
//!
//! let cfg = ScenarioConfig::from_json_str(include_str!("../tests/fixtures/tiny.json")).unwrap();
//! let report = run(&cfg, SimTime::from_hours(2.0)).unwrap();
//! assert!(report.events_executed > 0);
//! ```

pub mod engine;
pub mod error;
pub mod ferry;
pub mod model;
pub mod processing;
pub mod radio;
pub mod scenario;
pub mod validate;
pub mod workloads;

pub use engine::{run, run_with, RunOptions, RunReport, Simulation};
pub use error::{BufferError, ModelError, ProcessingError, RadioError, ScenarioError, SimError};
pub use model::{GeoPoint, Message, MessageId, MessageKind, NodeId, Role, SimTime};
pub use radio::{effective_rate, LinkProfile, RadioStandard};
pub use scenario::ScenarioConfig;
pub use validate::{has_errors, validate_scenario, Finding, FindingCode, Severity};
