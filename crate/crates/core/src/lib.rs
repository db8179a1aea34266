//! Heuristic performance-gap analysis.
//!
//! Heuristics and their optimal benchmarks are modelled as flow networks
//! ([`flow_dsl`]), compiled to constraint programs ([`milp_bridge`]) and solved
//! exactly at desk scale ([`solver`]). On top of that sit the adversarial
//! search ([`analyzer`]), the subspace generator ([`subspace`]) with its
//! significance checks ([`stats`]), per-edge decision heatmaps
//! ([`explainer`]) and cross-instance trend tests ([`generalizer`]).
//!
//! Everything that draws random numbers takes an explicit seed; identical
//! seeds give identical results whether or not the `parallel` feature is on.

pub mod analyzer;
pub mod explainer;
pub mod flow_dsl;
pub mod generalizer;
pub mod heuristics;
pub mod milp_bridge;
pub mod par;
pub mod rng;
pub mod solver;
pub mod stats;
pub mod subspace;

/// Absolute tolerance for constraint satisfaction.
pub const EPS_FEAS: f64 = 1e-6;
/// An edge (or variable) "carries flow" when its value exceeds this.
pub const EPS_FLOW: f64 = 1e-9;
