//! Pseudo-observations, structure estimation and parameter estimation.

pub mod nested;
pub mod opac;
pub mod pseudo;
pub mod structure;

pub use nested::{
    branch_ranges, fit, fit_bottomup, fit_hac, fit_opac, fit_topdown, fit_topdown_warm, Branch, Estimator, EstimatorConfig, FitReport,
    ForkRecord,
};
pub use opac::{
    aggregate_mean, default_ranges, fit_opac_aggregated, fit_opac_ml, fit_opac_sn, fit_pair, FitOptions, Method, PairFit,
};
pub use pseudo::{kendall_matrix, kendall_tau_b, pseudo_observations};
pub use structure::{estimate_structure, StructureEstimate};
