//! Probabilistic digital twin for preloaded embankments.
//!
//! Soil parameters are uncertain and static; a particle belief over them is updated from
//! weekly settlement readings and drives a threshold heuristic that decides whether to raise
//! the surcharge. Numerical types are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision.

// `!(x > 0)` is how inputs are checked so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod consolidation;
pub mod error;
pub mod filter;
pub mod optimizer;
pub mod policy;
pub mod priors;
pub mod rng;
pub mod scalar;
pub mod scenario;
pub mod session;
pub mod stats;

pub use error::{PdtError, Result};
pub use scalar::Scalar;

pub use consolidation::{ActionSchedule, ConsolidationModel, SettlementModel, Trajectory};
pub use filter::{Belief, Measurement};
pub use policy::{CostParams, HeuristicParams, Requirements};
pub use priors::{LognormalDist, SoilPriorSet, SoilSample};
pub use scenario::{load_scenario, Scenario};
pub use session::{SessionLog, TwinSession};

pub type Belief64 = filter::Belief<f64>;
pub type Belief32 = filter::Belief<f32>;
pub type SoilSample64 = priors::SoilSample<f64>;
pub type SoilSample32 = priors::SoilSample<f32>;
pub type SoilPriorSet64 = priors::SoilPriorSet<f64>;
pub type SoilPriorSet32 = priors::SoilPriorSet<f32>;
pub type Trajectory64 = consolidation::Trajectory<f64>;
pub type Trajectory32 = consolidation::Trajectory<f32>;
pub type ConsolidationModel64 = consolidation::ConsolidationModel<f64>;
pub type ConsolidationModel32 = consolidation::ConsolidationModel<f32>;
pub type DecisionProblem64 = optimizer::DecisionProblem<f64>;
pub type DecisionProblem32 = optimizer::DecisionProblem<f32>;
