//! Deterministic discrete-event core: integer-nanosecond clock, a stable
//! event queue, named RNG streams and the dataplane trace log.

mod queue;
mod rng;
mod time;
mod trace;

pub use queue::{run_until, EventId, EventQueue, Model, QueueStats, RunSummary};
pub use rng::{mix64, Draw, RngStream};
pub use time::SimTime;
pub use trace::{TraceAction, TraceLog, TraceRecord};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SimError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
