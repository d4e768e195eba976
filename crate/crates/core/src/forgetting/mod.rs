//! Forgetting ledgers, activation supports, overlaps and ratio reports.

mod ledger;
mod report;
mod support;

pub use ledger::{compute_forgetting, ForgettingLedger};
pub use report::{
    coefficient_of_variation, ratio_report_theorem1, ratio_report_theorem2, ratio_report_theorem3,
    CumulativeMeasurement, DenominatorKind, DimensionMeasurement, PairMeasurement, RatioReport, RatioRow,
};
pub use support::{
    cumulative_overlap, mask_from_samples, measure_supports, measure_supports_on, pairwise_overlap, support_axes,
    union_overlap, BinAxis, BranchMask, CumulativeOverlap, LayerSupport, PairOverlap, SupportProfile, UnionBranch,
    UnionOverlap, DEFAULT_BINS, DEFAULT_THRESHOLD,
};

use thiserror::Error;

use crate::network::NetworkError;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("{0}")]
    Usage(String),
    #[error("support axes differ: {0}")]
    AxisMismatch(String),
    #[error(
        "union bound violated for task {task}, layer {layer}, branch {branch}: union {union} exceeds bound {bound}"
    )]
    BoundViolation {
        task: usize,
        layer: usize,
        branch: usize,
        union: f64,
        bound: f64,
    },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
