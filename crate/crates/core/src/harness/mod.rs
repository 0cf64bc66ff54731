//! Scenario files, baseline-vs-attack runs, the evasion matrix, the incast
//! sweep and the coflow sweep, plus the artifacts they write.

mod incast;
mod matrix;
mod report;
mod scenario;
pub mod workload;

pub use incast::{run_incast_sweep, IncastRow, IncastSweep, INCAST_CSV_HEADER};
pub use matrix::{expected_matrix, matrix_cells, run_matrix, variant_scenarios, MatrixCell, MatrixReport, MatrixRow, ATTACK_ROWS};
pub use report::{run_coflow_sweep, run_scenario, run_scenario_file, write_report, Multipliers, RunReport, RunSummary, VerdictRecord};
pub use scenario::{Scenario, TopologySpec, SCHEMA_VERSION};
pub use workload::{EmpiricalCdf, ExplicitFlow, PoissonWorkload, SizeDist, WorkloadPart};

use crate::coflow::CoflowError;
use crate::simcore::SimError;
use crate::topology::TopologyError;
use crate::world::WorldError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{path}: {msg}")]
    Invalid { path: String, msg: String },
    #[error("cannot read {file}: {source}")]
    Read { file: String, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Coflow(#[from] CoflowError),
}

impl HarnessError {
    pub fn invalid(path: &str, msg: &str) -> Self {
        HarnessError::Invalid { path: path.to_string(), msg: msg.to_string() }
    }
}
