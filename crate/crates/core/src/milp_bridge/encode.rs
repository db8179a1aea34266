//! MILP to flow network.
//!
//! Every `<=` row `i` becomes a split node balancing
//! `sum a+_ij z_j + b-_i + f_i = sum a-_ij z_j + b+_i`, with `f_i` a free slack edge.
//! Positive coefficients leave the variable's all-equal node through a
//! multiply node (factor `a+`) into the row; negative ones leave the row
//! through a multiply node (factor `1/a-`) back into the all-equal node.
//! Binaries are pick nodes fed a constant 1. The objective is one more such
//! row whose slack is the edge into the objective sink.

use serde::{Deserialize, Serialize};

use super::EncodeError;
use crate::flow_dsl::{FlowAssignment, FlowNetwork, NodeBehavior, SourceInner, Supply};
use crate::solver::{
    solve_lp, solve_mip, ConstraintProgram, ConstraintSense, ObjectiveSense, SolveStatus, VarKind,
};

/// `sense c_x.x + c_y.y` subject to `A_x x + A_y y (row_sense) b`,
/// `x >= 0` continuous, `y` binary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Milp {
    pub sense: ObjectiveSense,
    pub c_x: Vec<f64>,
    pub c_y: Vec<f64>,
    pub a_x: Vec<Vec<f64>>,
    pub a_y: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub row_sense: Vec<ConstraintSense>,
    /// Columns of `x` that must take integer values.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub integer_x: Vec<usize>,
}

impl Milp {
    pub fn check(&self) -> Result<(), EncodeError> {
        let rows = self.b.len();
        let dim = |what: &str| Err(EncodeError::Dimension(what.to_string()));
        if self.a_x.len() != rows || self.a_y.len() != rows || self.row_sense.len() != rows {
            return dim("row counts of A_x, A_y, b and row_sense differ");
        }
        if self.a_x.iter().any(|r| r.len() != self.c_x.len()) {
            return dim("A_x column count differs from c_x");
        }
        if self.a_y.iter().any(|r| r.len() != self.c_y.len()) {
            return dim("A_y column count differs from c_y");
        }
        if let Some(&j) = self.integer_x.iter().find(|&&j| j >= self.c_x.len()) {
            return Err(EncodeError::Dimension(format!("integer column {j} out of range")));
        }
        let finite = |v: &[f64]| v.iter().all(|a| a.is_finite());
        if !finite(&self.c_x) || !finite(&self.c_y) || !finite(&self.b) {
            return Err(EncodeError::NonFinite("objective or rhs".into()));
        }
        if !self.a_x.iter().chain(&self.a_y).all(|r| finite(r)) {
            return Err(EncodeError::NonFinite("constraint matrix".into()));
        }
        Ok(())
    }

    /// The MILP as a solver program: `x` first, then `y`.
    pub fn to_program(&self) -> Result<ConstraintProgram, EncodeError> {
        self.check()?;
        if let Some(&j) = self.integer_x.first() {
            return Err(EncodeError::IntegerVariable(j));
        }
        let nx = self.c_x.len();
        let mut p = ConstraintProgram::new(self.sense);
        for j in 0..nx {
            p.continuous(format!("x{j}"));
        }
        for j in 0..self.c_y.len() {
            p.binary(format!("y{j}"));
        }
        for i in 0..self.b.len() {
            let terms = self.a_x[i]
                .iter()
                .chain(&self.a_y[i])
                .enumerate()
                .filter(|(_, &a)| a != 0.0)
                .map(|(j, &a)| (j, a))
                .collect();
            p.add_constraint(format!("r{i}"), terms, self.row_sense[i], self.b[i]);
        }
        let obj = self
            .c_x
            .iter()
            .chain(&self.c_y)
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(j, &c)| (j, c))
            .collect();
        p.set_objective(self.sense, obj);
        Ok(p)
    }
}

/// Replaces each general-integer `x_j` by binaries, given `bounds[k]` for
/// `integer_x[k]`: adds `y` columns for the bits, the row
/// `x_j - sum 2^k y_k = 0` and `x_j <= bound`.
pub fn expand_integers(m: &Milp, bounds: &[u64]) -> Milp {
    assert_eq!(bounds.len(), m.integer_x.len(), "one bound per integer column");
    let mut out = m.clone();
    for (&j, &bound) in m.integer_x.iter().zip(bounds) {
        let bits = (64 - bound.leading_zeros()).max(1) as usize;
        let first = out.c_y.len();
        out.c_y.extend(std::iter::repeat(0.0).take(bits));
        for row in out.a_y.iter_mut() {
            row.extend(std::iter::repeat(0.0).take(bits));
        }
        let mut link_x = vec![0.0; out.c_x.len()];
        link_x[j] = 1.0;
        let mut link_y = vec![0.0; out.c_y.len()];
        for k in 0..bits {
            link_y[first + k] = -((1u64 << k) as f64);
        }
        out.a_x.push(link_x.clone());
        out.a_y.push(link_y);
        out.b.push(0.0);
        out.row_sense.push(ConstraintSense::Eq);
        out.a_x.push(link_x);
        out.a_y.push(vec![0.0; out.c_y.len()]);
        out.b.push(bound as f64);
        out.row_sense.push(ConstraintSense::Le);
    }
    out.integer_x.clear();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarRef {
    X(usize),
    Y(usize),
}

/// Which original row a normalized `<=` row came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowOrigin {
    pub source_row: usize,
    /// True when the row was multiplied by -1 (a `>=` row or the second half of `=`).
    pub negated: bool,
}

/// The edges realizing one nonzero coefficient: `x+_ij`/`u+_ij` when positive,
/// `u-_ij`/`x-_ij` when negative. `row == None` is the objective row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefEdge {
    pub row: Option<usize>,
    pub var: VarRef,
    pub coef: f64,
    /// Edge on the variable side (`x+_ij` or `x-_ij`).
    pub var_edge: String,
    /// Edge on the row side (`u+_ij` or `u-_ij`).
    pub row_edge: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingTrace {
    pub rows: Vec<RowOrigin>,
    pub a_x_pos: Vec<Vec<f64>>,
    pub a_x_neg: Vec<Vec<f64>>,
    pub a_y_pos: Vec<Vec<f64>>,
    pub a_y_neg: Vec<Vec<f64>>,
    pub b_pos: Vec<f64>,
    pub b_neg: Vec<f64>,
    pub coefficients: Vec<CoefEdge>,
    pub slack_edges: Vec<String>,
    pub x_edges: Vec<String>,
    pub y_edges: Vec<String>,
    pub objective_sink: String,
    pub objective_edge: String,
    /// Constant added to the objective row so its edge stays nonnegative.
    pub objective_offset: f64,
    /// True when a minimization was encoded as maximizing the negation.
    pub negated: bool,
}

impl EncodingTrace {
    /// MILP objective value for a given objective-sink inflow.
    pub fn objective_from_sink(&self, flow: f64) -> f64 {
        let v = flow - self.objective_offset;
        if self.negated {
            -v
        } else {
            v
        }
    }

    /// `(x, y)` read back from a flow assignment.
    pub fn point(&self, net: &FlowNetwork, flows: &FlowAssignment) -> (Vec<f64>, Vec<f64>) {
        let read = |ids: &[String]| {
            ids.iter()
                .map(|id| flows.get(net, id).unwrap_or(0.0))
                .collect()
        };
        (read(&self.x_edges), read(&self.y_edges))
    }
}

fn split_sign(v: f64) -> (f64, f64) {
    if v >= 0.0 {
        (v, 0.0)
    } else {
        (0.0, -v)
    }
}

/// Smallest offset `K >= 0` with `c.z + K >= 0` at the optimum, for `c` in
/// maximization form. Zero when `c >= 0`; otherwise from the minimum of `c.z`
/// over the relaxation, or over the MILP itself when that is unbounded.
fn objective_offset(m: &Milp, c: &[f64]) -> f64 {
    if c.iter().all(|&v| v >= 0.0) {
        return 0.0;
    }
    let Ok(mut prog) = m.to_program() else {
        return 0.0;
    };
    let terms: Vec<_> = c.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(j, &v)| (j, v)).collect();
    let relaxed = {
        let mut r = prog.clone();
        for var in r.variables.iter_mut() {
            if var.kind == VarKind::Binary {
                var.kind = VarKind::Continuous;
                var.upper = Some(1.0);
            }
        }
        r.set_objective(ObjectiveSense::Minimize, terms.clone());
        r
    };
    if let Ok(s) = solve_lp(&relaxed) {
        match s.status {
            SolveStatus::Optimal => return (-s.objective).max(0.0),
            SolveStatus::Infeasible => return 0.0,
            SolveStatus::Unbounded => {}
        }
    }
    prog.set_objective(ObjectiveSense::Maximize, terms);
    match solve_mip(&prog) {
        Ok(s) if s.is_optimal() => (-s.objective).max(0.0),
        _ => 0.0,
    }
}

/// Encodes `m` as a network whose objective-sink inflow, maximized, equals
/// the MILP optimum (up to [`EncodingTrace::objective_from_sink`]).
pub fn encode_milp(m: &Milp) -> Result<(FlowNetwork, EncodingTrace), EncodeError> {
    m.check()?;
    if let Some(&j) = m.integer_x.first() {
        return Err(EncodeError::IntegerVariable(j));
    }
    let nx = m.c_x.len();
    let ny = m.c_y.len();
    let negated = m.sense == ObjectiveSense::Minimize;
    let flip = if negated { -1.0 } else { 1.0 };

    // Normalized <= rows over z = (x, y).
    let mut rows: Vec<(RowOrigin, Vec<f64>, f64)> = Vec::new();
    for i in 0..m.b.len() {
        let coefs: Vec<f64> = m.a_x[i].iter().chain(&m.a_y[i]).copied().collect();
        let neg: Vec<f64> = coefs.iter().map(|a| -a).collect();
        let plain = RowOrigin { source_row: i, negated: false };
        let flipped = RowOrigin { source_row: i, negated: true };
        match m.row_sense[i] {
            ConstraintSense::Le => rows.push((plain, coefs, m.b[i])),
            ConstraintSense::Ge => rows.push((flipped, neg, -m.b[i])),
            ConstraintSense::Eq => {
                rows.push((plain, coefs, m.b[i]));
                rows.push((flipped, neg, -m.b[i]));
            }
        }
    }
    let c: Vec<f64> = m.c_x.iter().chain(&m.c_y).map(|v| flip * v).collect();
    let offset = objective_offset(m, &c);

    let mut net = FlowNetwork::new();
    net.add_node("const", NodeBehavior::Source { inner: SourceInner::Split, supply: Supply::Free });
    net.add_node("free", NodeBehavior::Source { inner: SourceInner::Split, supply: Supply::Free });
    net.add_node("objective", NodeBehavior::Sink { sense: ObjectiveSense::Maximize });
    net.add_node("absorb", NodeBehavior::Sink { sense: ObjectiveSense::Maximize });

    let var_node = |j: usize| if j < nx { format!("x{j}") } else { format!("y{}", j - nx) };
    let var_ref = |j: usize| if j < nx { VarRef::X(j) } else { VarRef::Y(j - nx) };

    let mut x_edges = Vec::new();
    for j in 0..nx {
        net.add_node(var_node(j), NodeBehavior::AllEqual);
        let e = net.add_edge("free", var_node(j));
        x_edges.push(net.edges[e].id.clone());
    }
    let mut y_edges = Vec::new();
    for k in 0..ny {
        let pick = format!("pick:y{k}");
        net.add_node(&pick, NodeBehavior::Pick);
        net.add_node(var_node(nx + k), NodeBehavior::AllEqual);
        net.add_edge_with("const", &pick, None, Some(1.0));
        let e = net.add_edge(&pick, var_node(nx + k));
        y_edges.push(net.edges[e].id.clone());
        net.add_edge(&pick, "absorb");
    }

    let mut coefficients = Vec::new();
    let mut wire_row = |net: &mut FlowNetwork, row: Option<usize>, node: &str, coefs: &[f64]| {
        for (j, &a) in coefs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let tag = row.map_or("obj".to_string(), |i| format!("r{i}"));
            let mul = format!("mul:{tag}:{}", var_node(j));
            let (var_edge, row_edge) = if a > 0.0 {
                net.add_node(&mul, NodeBehavior::Multiply { factor: a });
                (net.add_edge(var_node(j), &mul), net.add_edge(&mul, node))
            } else {
                net.add_node(&mul, NodeBehavior::Multiply { factor: 1.0 / -a });
                let u = net.add_edge(node, &mul);
                (net.add_edge(&mul, var_node(j)), u)
            };
            coefficients.push(CoefEdge {
                row,
                var: var_ref(j),
                coef: a,
                var_edge: net.edges[var_edge].id.clone(),
                row_edge: net.edges[row_edge].id.clone(),
            });
        }
    };

    let mut slack_edges = Vec::new();
    for (i, (_, coefs, rhs)) in rows.iter().enumerate() {
        let node = format!("r{i}");
        net.add_node(&node, NodeBehavior::Split);
        let (bp, bn) = split_sign(*rhs);
        if bn > 0.0 {
            net.add_edge_with("const", &node, None, Some(bn));
        }
        let s = net.add_edge("free", &node);
        slack_edges.push(net.edges[s].id.clone());
        if bp > 0.0 {
            net.add_edge_with(&node, "absorb", None, Some(bp));
        }
        wire_row(&mut net, Some(i), &node, coefs);
    }

    net.add_node("obj", NodeBehavior::Split);
    if offset > 0.0 {
        net.add_edge_with("const", "obj", None, Some(offset));
    }
    let p = net.add_edge("obj", "objective");
    let objective_edge = net.edges[p].id.clone();
    wire_row(&mut net, None, "obj", &c);

    let part = |pick: fn(f64) -> f64, range: std::ops::Range<usize>| -> Vec<Vec<f64>> {
        rows.iter().map(|(_, r, _)| r[range.clone()].iter().map(|&a| pick(a)).collect()).collect()
    };
    let pos = |a: f64| a.max(0.0);
    let neg = |a: f64| (-a).max(0.0);
    let trace = EncodingTrace {
        rows: rows.iter().map(|r| r.0).collect(),
        a_x_pos: part(pos, 0..nx),
        a_x_neg: part(neg, 0..nx),
        a_y_pos: part(pos, nx..nx + ny),
        a_y_neg: part(neg, nx..nx + ny),
        b_pos: rows.iter().map(|r| split_sign(r.2).0).collect(),
        b_neg: rows.iter().map(|r| split_sign(r.2).1).collect(),
        coefficients,
        slack_edges,
        x_edges,
        y_edges,
        objective_sink: "objective".into(),
        objective_edge,
        objective_offset: offset,
        negated,
    };
    Ok((net, trace))
}
