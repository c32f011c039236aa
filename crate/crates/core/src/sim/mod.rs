//! Simulation: the Friedman benchmark, synthetic A/A panels and Monte Carlo
//! coverage studies.

pub mod friedman;
pub mod panel;
pub mod study;

pub use friedman::{
    efficiency_bound, efficiency_bound_friedman, friedman_b, friedman_tau, generate_friedman, softplus,
    tau_variance_friedman, true_ate_friedman, try_friedman_b, FriedmanDgpConfig,
};
pub use panel::{generate_aa_panel, AaPanelConfig, OutcomeFamily};
pub use study::{
    coverage_half_width, run_coverage_study, CoverageStudyResult, Dgp, Estimator, MethodSummary, RepRecord,
    SimSample, StudyConfig, StudyMethod,
};
