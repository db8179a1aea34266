use std::collections::BTreeMap;

use thiserror::Error;

use super::{FlowAssignment, FlowNetwork};
use crate::milp_bridge::{compile_network, simplify, CompileError};
use crate::solver::{solve_mip, SolveStatus, SolverError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error("no flow satisfies the network's constraints")]
    Infeasible,
    #[error("objective sink inflow is unbounded")]
    Unbounded,
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub objective: f64,
    pub flows: FlowAssignment,
    /// Branch-and-bound nodes explored.
    pub nodes: usize,
}

/// Optimizes the inflow of `objective_sink` in its sense, given source supplies.
pub fn evaluate(
    net: &FlowNetwork,
    inputs: &BTreeMap<String, f64>,
    objective_sink: &str,
) -> Result<Evaluation, FlowError> {
    let prog = compile_network(net, Some(objective_sink), inputs)?;
    let simple = simplify(&prog);
    let sol = solve_mip(&simple.program)?;
    match sol.status {
        SolveStatus::Infeasible => return Err(FlowError::Infeasible),
        SolveStatus::Unbounded => return Err(FlowError::Unbounded),
        SolveStatus::Optimal => {}
    }
    let flows = simple.expand(&sol.values);
    Ok(Evaluation {
        objective: sol.objective,
        flows: FlowAssignment(flows),
        nodes: sol.nodes,
    })
}
