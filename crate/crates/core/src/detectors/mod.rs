//! Residual generators, thresholds and the fault/attack decision logic.

pub mod chi2;
pub mod decision;
pub mod fault;
pub mod twin;

pub use chi2::{chi2_cdf, chi2_threshold};
pub use decision::{discriminate, persistence_filter, DecisionLabel, PersistenceFilter};
pub use fault::{chi2_statistic, FaultDetector, ResidualFilter};
pub use twin::{TwinDesign, TwinDetector};
