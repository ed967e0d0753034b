//! Rejection ABC with local-linear regression adjustment, theoretical
//! limiting posteriors and the analysis tools used to measure convergence
//! rates.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adjust;
pub mod analysis;
pub mod domain;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod io;
pub mod models;
pub mod quadrature;
pub mod rng;
pub mod theory;

pub use adjust::{adjust_samples, fit_local_linear, oracle_adjustment, AdjustmentModel};
pub use analysis::{
    brute_force_posterior, estimate_density, l1_between, l1_discrepancy, loglog_slope,
    posterior_risk, segmented_slope, DensityEstimate, LogLogFit, RiskCurve, RiskKind, RiskPoint,
    SegmentedFit,
};
pub use domain::{
    euclidean_distance, AcceptedDraw, GenerativeModel, LocalProposal, ParameterPoint, RateProfile,
    ReferenceTable, RunWarning, SummaryVector,
};
pub use engine::{acceptance_rate, run_rejection, RunConfig, Sampler, ToleranceSpec};
pub use error::{Error, Result};
pub use experiments::{
    run_experiment, ExperimentConfig, ExperimentOutput, ExperimentReport, Outcome,
};
pub use models::{Example1Model, Scenario, UniformRiskModel, UniformShapeModel};
pub use theory::TheoreticalPosterior;
