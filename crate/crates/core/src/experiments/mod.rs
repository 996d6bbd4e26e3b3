//! Simulation harness: oracle covariance floors, the variance-versus-B
//! identity, single-tree variance decomposition, candidate overlap,
//! alignment across disjoint samples, interval coverage and estimator bias.
//!
//! Each experiment returns a typed result that converts into a [`Report`],
//! a long-format table plus named pass/fail checks.

mod alignment;
mod bias;
mod coverage;
mod decomposition;
mod identity;
mod oracle;
mod overlap;
mod report;
mod scenario;

pub use alignment::{alignment_probe, default_q_grid, scenario_alignment, AlignmentResult, AlignmentRow};
pub use bias::{bias_diagnostics, BiasSummary, NuisanceSource};
pub use coverage::{coverage_study, CoverageResult, FloorMode, COVERAGE_BINS};
pub use decomposition::{single_tree_variance_decomposition, Decomposition};
pub use identity::{scenario_curve, variance_vs_b, VarianceCurve, DEFAULT_B_GRID};
pub use oracle::{oracle_true_ct, scenario_oracle, OracleResult};
pub use overlap::{candidate_overlap_sim, OverlapResult};
pub use report::{Check, Record, Report};
pub use scenario::{sampling_label, Budgets, Preset, Scenario, ScenarioConfig};

/// Names accepted by the experiment dispatcher.
pub const EXPERIMENTS: [&str; 7] = [
    "oracle",
    "variance-vs-b",
    "decomposition",
    "overlap",
    "alignment",
    "coverage",
    "bias",
];
