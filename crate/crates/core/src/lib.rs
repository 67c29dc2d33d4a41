//! Population-size estimation for a partially observed population whose
//! credentialed stratum has a known, fixed citywide total.
//!
//! The crate provides the closed-form ratio, subregion and subtotal
//! estimators with plug-in standard errors, weighted and overdispersed
//! generalizations, simulators for the generative count models, a Monte
//! Carlo validation harness, and a hierarchical Bayesian alternative fit by
//! adaptive random-walk Metropolis.

pub mod counts;
pub mod distributions;
pub mod error;
pub mod estimate;
pub mod estimators;
pub mod harness;
pub mod io;
pub mod hierarchical;
pub mod overdispersed;
pub mod partition;
pub mod reference;
pub mod report;
pub mod rng;
pub mod simulator;
pub mod weighted;

pub use counts::{aggregate, subregion_counts, Aggregate, CountTable, EstimationClass, SurveyRecord, VendorClass};
pub use error::{Error, Result};
pub use estimate::{Estimate, Flags};
pub use partition::{CellId, Partition, Subregion};
