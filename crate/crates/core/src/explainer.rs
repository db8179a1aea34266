//! Edge heatmaps: where, over samples of a subspace, the heuristic and the
//! benchmark send flow on different edges.
//!
//! Per sample and edge the score is 0 when both or neither use the edge,
//! +1 when only the benchmark does and -1 when only the heuristic does.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analyzer::InputSpace;
use crate::flow_dsl::{FlowAssignment, FlowNetwork, NodeBehavior, SourceInner};
use crate::heuristics::{project_allocation, to_flow_network, Problem};
use crate::stats::{sample_inside, StatsError};
use crate::subspace::Subspace;
use crate::{par, EPS_FLOW};

/// Samples per explanation unless configured otherwise.
pub const DEFAULT_SAMPLES: usize = 3000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExplainError {
    #[error(transparent)]
    Sampling(#[from] StatsError),
    #[error("evaluation failed at sample {index}: {reason}")]
    Evaluation { index: usize, reason: String },
    #[error("assignment has {got} edges, network has {want}")]
    Shape { got: usize, want: usize },
    #[error("heatmap does not match the network: {0}")]
    Mismatch(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeScore {
    pub id: String,
    pub from: String,
    pub to: String,
    /// `(benchmark_only - heuristic_only) / samples`
    pub mean: f64,
    pub both: usize,
    pub benchmark_only: usize,
    pub heuristic_only: usize,
    pub neither: usize,
    /// Mean of `|benchmark flow - heuristic flow|`.
    pub mean_abs_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub heuristic: String,
    pub benchmark: String,
    pub samples: usize,
    pub seed: u64,
    /// The subspace the samples were drawn from.
    pub subspace: Subspace,
    pub edges: Vec<EdgeScore>,
}

impl Heatmap {
    pub fn edge(&self, id: &str) -> Option<&EdgeScore> {
        self.edges.iter().find(|e| e.id == id)
    }
}

/// Scores every edge of `net` over `n` uniform samples of `sub`. The
/// evaluators return assignments on `net` for an input point.
#[allow(clippy::too_many_arguments)]
pub fn score_edges<H, B>(
    net: &FlowNetwork,
    heuristic_eval: H,
    benchmark_eval: B,
    sub: &Subspace,
    space: &InputSpace,
    n: usize,
    seed: u64,
) -> Result<Heatmap, ExplainError>
where
    H: Fn(&[f64]) -> Result<FlowAssignment, String> + Sync + Send,
    B: Fn(&[f64]) -> Result<FlowAssignment, String> + Sync + Send,
{
    score_pairs(net, |x| Ok((heuristic_eval(x)?, benchmark_eval(x)?)), sub, space, n, seed, ("heuristic", "benchmark"))
}

/// [`score_edges`] for a scenario: both allocations come from one run of
/// the problem at each sample, projected onto the heuristic's network.
pub fn explain_problem(
    problem: &Problem,
    sub: &Subspace,
    space: &InputSpace,
    n: usize,
    seed: u64,
) -> Result<(Heatmap, FlowNetwork), ExplainError> {
    let net = explain_network(problem);
    let eval = |x: &[f64]| -> Result<(FlowAssignment, FlowAssignment), String> {
        let o = problem.outcome(x).map_err(|e| e.to_string())?;
        let inst = problem.instance_at(x);
        let h = project_allocation(&o.heuristic_alloc, &inst, &net).map_err(|e| e.to_string())?;
        let b = project_allocation(&o.benchmark_alloc, &inst, &net).map_err(|e| e.to_string())?;
        Ok((h, b))
    };
    let hm = score_pairs(&net, eval, sub, space, n, seed, problem.names())?;
    Ok((hm, net))
}

/// The heuristic's network at the scenario defaults. Its shape does not
/// depend on the input point.
pub fn explain_network(problem: &Problem) -> FlowNetwork {
    to_flow_network(&problem.instance_at(problem.defaults()), problem.models().0).expect("models match the problem")
}

fn score_pairs<E>(
    net: &FlowNetwork,
    eval: E,
    sub: &Subspace,
    space: &InputSpace,
    n: usize,
    seed: u64,
    names: (&str, &str),
) -> Result<Heatmap, ExplainError>
where
    E: Fn(&[f64]) -> Result<(FlowAssignment, FlowAssignment), String> + Sync + Send,
{
    let points = sample_inside(sub, space, n, seed, "explain")?;
    let m = net.edges.len();
    let evals = par::map_slice(&points, |x| eval(x));
    let mut edges: Vec<EdgeScore> = net
        .edges
        .iter()
        .map(|e| EdgeScore {
            id: e.id.clone(),
            from: e.from.clone(),
            to: e.to.clone(),
            mean: 0.0,
            both: 0,
            benchmark_only: 0,
            heuristic_only: 0,
            neither: 0,
            mean_abs_delta: 0.0,
        })
        .collect();
    let mut delta = vec![0.0; m];
    for (index, r) in evals.into_iter().enumerate() {
        let (h, b) = r.map_err(|reason| ExplainError::Evaluation { index, reason })?;
        for a in [&h, &b] {
            if a.0.len() != m {
                return Err(ExplainError::Shape { got: a.0.len(), want: m });
            }
        }
        for (k, e) in edges.iter_mut().enumerate() {
            match (h.0[k] > EPS_FLOW, b.0[k] > EPS_FLOW) {
                (true, true) => e.both += 1,
                (false, true) => e.benchmark_only += 1,
                (true, false) => e.heuristic_only += 1,
                (false, false) => e.neither += 1,
            }
            delta[k] += (b.0[k] - h.0[k]).abs();
        }
    }
    let total = points.len();
    for (e, d) in edges.iter_mut().zip(delta) {
        if total > 0 {
            e.mean = (e.benchmark_only as f64 - e.heuristic_only as f64) / total as f64;
            e.mean_abs_delta = d / total as f64;
        }
    }
    Ok(Heatmap {
        heuristic: names.0.to_string(),
        benchmark: names.1.to_string(),
        samples: total,
        seed,
        subspace: sub.clone(),
        edges,
    })
}

const NEUTRAL: &str = "#9e9e9e";

/// White to red for `mean < 0`, white to blue for `mean > 0`, gray at 0.
pub fn edge_color(mean: f64) -> String {
    if mean == 0.0 {
        return NEUTRAL.to_string();
    }
    let t = mean.abs().min(1.0);
    let fade = (255.0 * (1.0 - t)).round() as u8;
    if mean < 0.0 {
        format!("#ff{fade:02x}{fade:02x}")
    } else {
        format!("#{fade:02x}{fade:02x}ff")
    }
}

fn node_fill(b: &NodeBehavior, capped: bool) -> &'static str {
    match b {
        NodeBehavior::Sink { .. } => "#d3e8d3",
        NodeBehavior::Source { inner: SourceInner::Split, .. } => "#ffb3ff:#e6e6ff",
        NodeBehavior::Source { inner: SourceInner::Pick, .. } => "#ffb3ff:#ffe6cc",
        NodeBehavior::Copy => "#ffffcc",
        NodeBehavior::Split if capped => "#e6e6ff",
        NodeBehavior::Pick => "#ffe6cc",
        NodeBehavior::Split | NodeBehavior::Multiply { .. } | NodeBehavior::AllEqual => "#ffffff",
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Graphviz rendering of a heatmap over its network.
pub fn emit_dot(hm: &Heatmap, net: &FlowNetwork) -> Result<String, ExplainError> {
    if hm.edges.len() != net.edges.len() {
        return Err(ExplainError::Mismatch(format!("{} scores for {} edges", hm.edges.len(), net.edges.len())));
    }
    let mut s = String::new();
    let _ = writeln!(s, "digraph heatmap {{");
    let _ = writeln!(s, "  rankdir=LR;");
    let _ = writeln!(
        s,
        "  label={};",
        quote(&format!("{} vs {}, {} samples", hm.heuristic, hm.benchmark, hm.samples))
    );
    let _ = writeln!(s, "  node [shape=box, style=filled, fontname=\"Helvetica\"];");
    for (id, node) in &net.nodes {
        let capped = net.edges.iter().any(|e| &e.from == id && e.capacity.is_some());
        let kind = node.metadata.get("kind").map_or(node.behavior.kind_name(), String::as_str);
        let _ = writeln!(
            s,
            "  {} [fillcolor={}, tooltip={}];",
            quote(id),
            quote(node_fill(&node.behavior, capped)),
            quote(kind)
        );
    }
    for (e, sc) in net.edges.iter().zip(&hm.edges) {
        if e.id != sc.id {
            return Err(ExplainError::Mismatch(format!("edge {} scored as {}", e.id, sc.id)));
        }
        let tip = format!(
            "{}: mean={:.4} both={} {}_only={} {}_only={} neither={} mean_abs_delta={:.4}",
            sc.id, sc.mean, sc.both, hm.benchmark, sc.benchmark_only, hm.heuristic, sc.heuristic_only, sc.neither,
            sc.mean_abs_delta
        );
        let _ = writeln!(
            s,
            "  {} -> {} [color={}, penwidth={:.2}, tooltip={}];",
            quote(&e.from),
            quote(&e.to),
            quote(&edge_color(sc.mean)),
            1.0 + 3.0 * sc.mean.abs(),
            quote(&tip)
        );
    }
    s.push_str("}\n");
    Ok(s)
}

pub fn emit_json(hm: &Heatmap) -> String {
    serde_json::to_string_pretty(hm).expect("heatmap serializes")
}

pub fn heatmap_from_json(text: &str) -> Result<Heatmap, serde_json::Error> {
    serde_json::from_str(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heuristics::{ball_id, bin_id, vbp_network, Model, VbpInstance};

    fn vbp_net() -> FlowNetwork {
        let inst = VbpInstance {
            sizes: vec![vec![0.6], vec![0.5]],
            bins: vec![vec![1.0], vec![1.0]],
            open_extra: false,
        };
        vbp_network(&inst, Model::Ff)
    }

    fn assignment(net: &FlowNetwork, on: &[(String, String)]) -> FlowAssignment {
        let mut f = FlowAssignment::zeros(net);
        for (i, e) in net.edges.iter().enumerate() {
            if on.iter().any(|(a, b)| *a == e.from && *b == e.to) {
                f.0[i] = 1.0;
            }
        }
        f
    }

    fn whole(n: usize) -> (Subspace, InputSpace) {
        let space = InputSpace::unit(n);
        (Subspace::from_box(&space.lo, &space.hi, space.labels.clone()), space)
    }

    #[test]
    fn single_sample_hand_trace() {
        let net = vbp_net();
        let ff = assignment(&net, &[(ball_id(0), bin_id(0))]);
        let opt = assignment(&net, &[(ball_id(0), bin_id(1))]);
        let (sub, space) = whole(1);
        let hm = score_edges(&net, |_| Ok(ff.clone()), |_| Ok(opt.clone()), &sub, &space, 1, 3).unwrap();
        assert_eq!(hm.edge("B0->Bin0").unwrap().mean, -1.0);
        assert_eq!(hm.edge("B0->Bin1").unwrap().mean, 1.0);
        assert_eq!(hm.edge("B1->Bin0").unwrap().neither, 1);
    }

    #[test]
    fn identical_evaluators_score_zero() {
        let net = vbp_net();
        let f = assignment(&net, &[(ball_id(1), bin_id(0))]);
        let (sub, space) = whole(2);
        let hm = score_edges(&net, |_| Ok(f.clone()), |_| Ok(f.clone()), &sub, &space, 50, 1).unwrap();
        assert!(hm.edges.iter().all(|e| e.mean == 0.0 && e.both + e.neither == 50));
        let dot = emit_dot(&hm, &net).unwrap();
        assert_eq!(dot.matches(NEUTRAL).count(), net.edges.len());
    }

    #[test]
    fn colors() {
        assert_eq!(edge_color(1.0), "#0000ff");
        assert_eq!(edge_color(-1.0), "#ff0000");
        assert_eq!(edge_color(-0.5), "#ff8080");
        assert_eq!(edge_color(0.0), NEUTRAL);
    }

    #[test]
    fn json_round_trip() {
        let net = vbp_net();
        let a = assignment(&net, &[(ball_id(0), bin_id(0))]);
        let (sub, space) = whole(1);
        let hm = score_edges(&net, |_| Ok(a.clone()), |_| Ok(FlowAssignment::zeros(&net)), &sub, &space, 7, 2).unwrap();
        assert_eq!(heatmap_from_json(&emit_json(&hm)).unwrap(), hm);
    }

    #[test]
    fn evaluator_error_reported() {
        let net = vbp_net();
        let (sub, space) = whole(1);
        let r = score_edges(&net, |_| Err("boom".into()), |_| Ok(FlowAssignment::zeros(&net)), &sub, &space, 3, 2);
        assert!(matches!(r, Err(ExplainError::Evaluation { index: 0, .. })));
    }
}
