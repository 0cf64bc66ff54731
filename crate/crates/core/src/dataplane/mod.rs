//! Compromised-switch programs: per-packet match/act logic with registers, a
//! bloom filter and a tamper budget, hosting the attacks and the two
//! misdirection tricks.

mod bloom;
mod budget;
mod config;
mod program;
mod registers;

pub use bloom::BloomFilter;
pub use budget::{BudgetConfig, BudgetWindow, TamperBudget};
pub use config::{pod_of, AttackConfig, AttackKind, PulseSchedule, ResolvedSelector, TargetSelector, TracerouteMode};
pub use program::{
    time_exceeded, AttackCounters, AttackProgram, Emitted, ProgramOutput, SwitchView, Verdict, ATTACKER_PROBE_BIT,
    SPOOF_BASE,
};
pub use registers::{RegisterArray, DEFAULT_REGISTER_SLOTS};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DataplaneError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("`{0}` is not a switch")]
    NotASwitch(String),
    #[error("invalid attack parameter: {0}")]
    InvalidParameter(String),
}
