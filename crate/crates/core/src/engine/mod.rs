//! Event queue, simulation loop and run report.

pub mod queue;
pub mod report;
pub mod sim;

pub use queue::{EventQueue, Scheduled};
pub use report::{
    AlertRecord, EventRecord, KindStats, KindTally, LatencyStats, OccupancySample, RoundTripStats,
    RunReport, TransferStats,
};
pub use sim::{run, run_with, HopTransfer, RunOptions, Simulation};
