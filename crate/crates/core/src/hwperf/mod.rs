//! Area, latency and energy of a network mapped onto CIM tiles.

mod area;
mod chip;
mod cost;
mod estimate;
mod report;

use thiserror::Error;

pub use area::{chip_area, subarray_area};
pub use chip::{build_chip, ChipPlan, Interconnect, StagePlan};
pub use cost::{subarray_read_cost, CostParams, Mask, ReadCost, ReadEnergy, COST_DEFAULTS_VERSION};
pub use estimate::{
    attention_core_latency, digital_ops, estimate, estimate_average, estimate_trace, traffic_bits,
};
pub use report::{summarize, Breakdown, HardwareReport, Metrics, StageReport, REPORT_SCHEMA_VERSION};

use crate::cimkernel::KernelError;

#[derive(Debug, Error)]
pub enum HwError {
    #[error("no trace recorded for unit `{0}`")]
    MissingTrace(String),
    #[error("no statistics for unit `{0}`")]
    MissingStats(String),
    #[error("inconsistent activity: {0}")]
    Inconsistent(String),
    #[error("no inferences observed")]
    NoSamples,
    #[error("{0} must be positive and finite")]
    Degenerate(&'static str),
    #[error("unsupported report schema version {0}")]
    Schema(u32),
    #[error("malformed report: {0}")]
    Parse(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}
