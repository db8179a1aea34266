//! Between networks and programs: compile a [`FlowNetwork`](crate::flow_dsl::FlowNetwork)
//! to a [`ConstraintProgram`](crate::solver::ConstraintProgram), simplify it,
//! and encode an arbitrary MILP back into a network.

mod compile;
mod encode;
mod milp_file;
mod simplify;

pub use compile::compile_network;
pub use encode::{encode_milp, expand_integers, CoefEdge, EncodingTrace, Milp, RowOrigin, VarRef};
pub use milp_file::{parse_milp_file, MilpFile};
pub use simplify::{simplify, Simplified, VarMap};

use thiserror::Error;

use crate::flow_dsl::Violation;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompileError {
    #[error("network fails validation: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("objective sink {0:?} does not exist")]
    UnknownSink(String),
    #[error("objective node {0:?} is not a sink")]
    NotASink(String),
    #[error("no input given for source {0:?}")]
    MissingInput(String),
    #[error("source {0:?} has invalid supply {1}")]
    BadInput(String, f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncodeError {
    #[error("inconsistent dimensions: {0}")]
    Dimension(String),
    #[error("variable x{0} is a general integer; expand it into binaries first")]
    IntegerVariable(usize),
    #[error("non-finite data in {0}")]
    NonFinite(String),
    #[error("malformed MILP file: {0}")]
    Format(String),
}
