//! Built-in problem families: traffic engineering with Demand Pinning and
//! vector bin packing with First-Fit, their optimal benchmarks, the gap, and
//! their projections onto flow networks.

mod network;
mod problem;
mod te;
mod vbp;

pub use network::{
    ball_id, bin_id, pin_dp, project_allocation, te_ids, te_inputs, te_network, to_flow_network, vbp_inputs,
    vbp_network, Model, ProjectionError, TeIds, MET, OCCUPANCY, UNMET,
};
pub use problem::{
    DemandSpec, Outcome, Problem, Scenario, TeProblem, TeScenario, VbpProblem, VbpScenario, DEFAULT_K_PATHS,
};
pub use te::{five_node_instance, k_shortest_paths, optimal_te, run_dp, Demand, Link, TeAllocation, TeInstance};
pub use vbp::{
    optimal_vbp, run_ff, vbp_program, FfStep, FfTrace, VbpAllocation, VbpInstance, FF17_SIZES, FIT_TOL,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::solver::SolverError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeuristicError {
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("ball {0} fits in no bin")]
    Unplaceable(usize),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("solver: {0}")]
    Solver(String),
}

impl From<SolverError> for HeuristicError {
    fn from(e: SolverError) -> Self {
        HeuristicError::Solver(e.to_string())
    }
}

/// A problem instance of either family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Instance {
    Te(TeInstance),
    Vbp(VbpInstance),
}

/// A concrete decision of a heuristic or benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Allocation {
    Te(TeAllocation),
    Vbp(VbpAllocation),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GapMode {
    #[default]
    Absolute,
    Relative,
}

/// Which way round "worse" is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Larger objective is better (TE routes more): benchmark - heuristic.
    Maximize,
    /// Smaller objective is better (VBP uses fewer bins): heuristic - benchmark.
    Minimize,
}

/// Denominator floor for relative gaps.
pub const EPS_DEN: f64 = 1e-9;

/// Gap between a heuristic and a benchmark value, larger meaning a worse heuristic.
pub fn gap_value(heuristic: f64, benchmark: f64, mode: GapMode, orientation: Orientation) -> f64 {
    let abs = match orientation {
        Orientation::Maximize => benchmark - heuristic,
        Orientation::Minimize => heuristic - benchmark,
    };
    match mode {
        GapMode::Absolute => abs,
        GapMode::Relative => abs / benchmark.abs().max(EPS_DEN),
    }
}

/// Runs both functions on `inputs` and returns their gap.
pub fn gap<H, B>(inputs: &[f64], heuristic: H, benchmark: B, mode: GapMode, orientation: Orientation) -> f64
where
    H: Fn(&[f64]) -> f64,
    B: Fn(&[f64]) -> f64,
{
    gap_value(heuristic(inputs), benchmark(inputs), mode, orientation)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_node_gap() {
        let inst = five_node_instance();
        let d = [100.0, 50.0, 0.0, 0.0, 100.0, 0.0, 0.0, 0.0];
        let h = |x: &[f64]| run_dp(&inst, x).unwrap().total;
        let b = |x: &[f64]| optimal_te(&inst, x).unwrap().total;
        assert_eq!(gap(&d, h, b, GapMode::Absolute, Orientation::Maximize), 100.0);
        assert!((gap(&d, h, b, GapMode::Relative, Orientation::Maximize) - 0.4).abs() < 1e-12);
        assert_eq!(gap(&d, h, h, GapMode::Relative, Orientation::Maximize), 0.0);
    }

    #[test]
    fn ff_gap() {
        let inst = VbpInstance::scalar(&[0.01, 0.49, 0.51, 0.51], &[1.0; 3], false);
        let ff = run_ff(&inst).unwrap().0.bins_used as f64;
        let opt = optimal_vbp(&inst).unwrap().bins_used as f64;
        assert_eq!(gap_value(ff, opt, GapMode::Absolute, Orientation::Minimize), 1.0);
    }
}
