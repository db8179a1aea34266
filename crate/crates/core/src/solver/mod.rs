//! Exact small-scale optimizer.
//!
//! A dense two-phase primal simplex ([`solve_lp`]) and a depth-first
//! branch-and-bound on top of it ([`solve_mip`]) that branches on fractional
//! binaries and on exactly-one groups. Intended for programs of up to a few
//! hundred variables and constraints.

mod branch;
mod lp_format;
mod program;
mod simplex;

pub use branch::{solve_mip, solve_mip_with, MipOptions, DEFAULT_NODE_LIMIT};
pub use lp_format::to_lp_format;
pub use program::{
    ConstraintProgram, ConstraintSense, LinearConstraint, Objective, ObjectiveSense, VarId,
    VarKind, Variable,
};
pub use simplex::{solve_lp, PIVOT_TOLERANCE};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub status: SolveStatus,
    /// Objective value including the constant term; `0.0` unless optimal.
    pub objective: f64,
    /// One value per program variable; empty unless optimal.
    pub values: Vec<f64>,
    /// Branch-and-bound nodes explored (1 for a plain LP).
    pub nodes: usize,
}

impl Solution {
    pub(crate) fn infeasible(nodes: usize) -> Self {
        Solution {
            status: SolveStatus::Infeasible,
            objective: 0.0,
            values: Vec::new(),
            nodes,
        }
    }

    pub(crate) fn unbounded(nodes: usize) -> Self {
        Solution {
            status: SolveStatus::Unbounded,
            objective: 0.0,
            values: Vec::new(),
            nodes,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid program: {0}")]
    InvalidProgram(String),
    #[error("solve_lp called on a program with binaries or exactly-one groups")]
    NotContinuous,
    #[error("numerical instability: {0}")]
    NumericalInstability(String),
    #[error("branch-and-bound node limit of {0} exceeded")]
    BudgetExceeded(usize),
}
