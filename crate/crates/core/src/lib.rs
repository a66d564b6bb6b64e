//! Stochastic bin packing under chance constraints.
//!
//! Jobs have uncertain usage; machines have a fixed capacity `V`. A set of
//! jobs may share a machine when its *effective load* (mean plus a risk
//! buffer) stays within `V`. The crate provides the capacity models, online
//! and offline packers, closed-form planners for few job classes, theoretical
//! lower bounds and ratio audits, Monte Carlo risk estimation and an
//! experiment harness.

// Negated comparisons below are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audit;
pub mod bounds;
pub mod capacity;
pub mod error;
pub mod experiment;
pub mod monte_carlo;
pub mod normal;
pub mod offline;
pub mod online;
pub mod par;
pub mod planner;
pub mod workload;

pub use capacity::{CapacityModel, ConstraintSpec, Item, LoadSummary, RiskFamily, Variant};
pub use error::{Error, Result};
pub use online::{Algorithm, Assignment, BucketingPolicy, Machine};
pub use par::Execution;
pub use workload::{Job, UsageDistribution, UsageKind, WorkloadSpec};
