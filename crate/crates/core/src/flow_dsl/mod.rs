//! The network-flow DSL.
//!
//! A [`FlowNetwork`] is a directed graph whose edges are nonnegative flow
//! variables and whose nodes each impose one [`NodeBehavior`] on the flows
//! incident to them. Heuristics and their benchmarks are both written in this
//! form so their decisions can be compared edge by edge.

mod evaluate;
mod json;
mod validate;

pub use evaluate::{evaluate, Evaluation, FlowError};
pub use json::{from_json, to_json, NetworkDocument};
pub use validate::{validate, Violation};

use std::collections::BTreeMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::solver::ObjectiveSense;

pub type Metadata = BTreeMap<String, String>;

/// Which conservation rule a source node applies to its outgoing edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceInner {
    Split,
    Pick,
}

/// Where a source's outgoing traffic comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Supply {
    /// Taken from the evaluation inputs under the node's id.
    #[default]
    Input,
    /// A constant, used when the inputs do not name the node.
    Fixed(f64),
    /// Unconstrained: outgoing flow is a free nonnegative decision.
    Free,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NodeBehavior {
    /// Flow conservation. Capacities and constant rates live on the edges.
    Split,
    /// Conservation, and at most one outgoing edge carries flow.
    Pick,
    /// `out = factor * in` over exactly one incoming and one outgoing edge.
    Multiply { factor: f64 },
    /// Every incident edge carries the same flow.
    AllEqual,
    /// Every outgoing edge carries the total inflow.
    Copy,
    /// Problem input: supply (plus constant-rate feeds) leaves via `inner` rules.
    Source { inner: SourceInner, supply: Supply },
    /// Absorbs flow; the objective sink's inflow is optimized in `sense`.
    Sink { sense: ObjectiveSense },
}

impl NodeBehavior {
    pub fn kind_name(&self) -> &'static str {
        match self {
            NodeBehavior::Split => "split",
            NodeBehavior::Pick => "pick",
            NodeBehavior::Multiply { .. } => "multiply",
            NodeBehavior::AllEqual => "all_equal",
            NodeBehavior::Copy => "copy",
            NodeBehavior::Source { .. } => "source",
            NodeBehavior::Sink { .. } => "sink",
        }
    }

    pub fn is_pick(&self) -> bool {
        matches!(
            self,
            NodeBehavior::Pick
                | NodeBehavior::Source {
                    inner: SourceInner::Pick,
                    ..
                }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub behavior: NodeBehavior,
    pub metadata: Metadata,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: String,
    pub from: String,
    pub to: String,
    pub capacity: Option<f64>,
    pub fixed_rate: Option<f64>,
    pub metadata: Metadata,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlowNetwork {
    pub nodes: IndexMap<String, Node>,
    pub edges: Vec<Edge>,
}

/// Incoming and outgoing edge indices per node, in edge order.
#[derive(Debug, Clone)]
pub struct Adjacency {
    pub incoming: Vec<Vec<usize>>,
    pub outgoing: Vec<Vec<usize>>,
}

impl FlowNetwork {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds (or replaces) a node.
    pub fn add_node(&mut self, id: impl Into<String>, behavior: NodeBehavior) -> &mut Node {
        let id = id.into();
        self.nodes.insert(
            id.clone(),
            Node {
                behavior,
                metadata: Metadata::new(),
            },
        );
        self.nodes.get_mut(&id).expect("just inserted")
    }

    /// Adds an edge with id `from->to` (suffixed if taken) and returns its index.
    pub fn add_edge(&mut self, from: impl Into<String>, to: impl Into<String>) -> usize {
        let from = from.into();
        let to = to.into();
        let base = format!("{from}->{to}");
        let mut id = base.clone();
        let mut k = 1;
        while self.edges.iter().any(|e| e.id == id) {
            id = format!("{base}#{k}");
            k += 1;
        }
        self.edges.push(Edge {
            id,
            from,
            to,
            capacity: None,
            fixed_rate: None,
            metadata: Metadata::new(),
        });
        self.edges.len() - 1
    }

    pub fn add_edge_with(
        &mut self,
        from: impl Into<String>,
        to: impl Into<String>,
        capacity: Option<f64>,
        fixed_rate: Option<f64>,
    ) -> usize {
        let e = self.add_edge(from, to);
        self.edges[e].capacity = capacity;
        self.edges[e].fixed_rate = fixed_rate;
        e
    }

    pub fn edge_index(&self, id: &str) -> Option<usize> {
        self.edges.iter().position(|e| e.id == id)
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.get_index_of(id)
    }

    /// Edge adjacency by node index. Edges with unknown endpoints are skipped.
    pub fn adjacency(&self) -> Adjacency {
        let n = self.nodes.len();
        let mut incoming = vec![Vec::new(); n];
        let mut outgoing = vec![Vec::new(); n];
        for (i, e) in self.edges.iter().enumerate() {
            if let Some(f) = self.node_index(&e.from) {
                outgoing[f].push(i);
            }
            if let Some(t) = self.node_index(&e.to) {
                incoming[t].push(i);
            }
        }
        Adjacency { incoming, outgoing }
    }

    /// Ids of all sink nodes, in node order.
    pub fn sinks(&self) -> Vec<&str> {
        self.nodes
            .iter()
            .filter(|(_, n)| matches!(n.behavior, NodeBehavior::Sink { .. }))
            .map(|(id, _)| id.as_str())
            .collect()
    }

    pub fn sources(&self) -> Vec<&str> {
        self.nodes
            .iter()
            .filter(|(_, n)| matches!(n.behavior, NodeBehavior::Source { .. }))
            .map(|(id, _)| id.as_str())
            .collect()
    }
}

/// Flow per edge, indexed like [`FlowNetwork::edges`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowAssignment(pub Vec<f64>);

impl FlowAssignment {
    pub fn zeros(net: &FlowNetwork) -> Self {
        FlowAssignment(vec![0.0; net.edges.len()])
    }

    pub fn get(&self, net: &FlowNetwork, edge_id: &str) -> Option<f64> {
        net.edge_index(edge_id).map(|i| self.0[i])
    }

    /// Edge id to flow, in edge order.
    pub fn by_id(&self, net: &FlowNetwork) -> IndexMap<String, f64> {
        net.edges
            .iter()
            .zip(&self.0)
            .map(|(e, &f)| (e.id.clone(), f))
            .collect()
    }

    /// Largest violation of any node behavior, bound, or sign condition.
    /// Returns the violation and the offending node or edge id.
    pub fn max_violation(&self, net: &FlowNetwork, inputs: &BTreeMap<String, f64>) -> (f64, String) {
        let f = &self.0;
        let adj = net.adjacency();
        let mut worst = (0.0, String::new());
        let mut note = |v: f64, who: &str| {
            if v > worst.0 {
                worst = (v, who.to_string());
            }
        };
        for (i, e) in net.edges.iter().enumerate() {
            note(-f[i], &e.id);
            if let Some(c) = e.capacity {
                note(f[i] - c, &e.id);
            }
            if let Some(d) = e.fixed_rate {
                note((f[i] - d).abs(), &e.id);
            }
        }
        for (n, (id, node)) in net.nodes.iter().enumerate() {
            let fin: f64 = adj.incoming[n].iter().map(|&e| f[e]).sum();
            let fout: f64 = adj.outgoing[n].iter().map(|&e| f[e]).sum();
            match &node.behavior {
                NodeBehavior::Split => note((fin - fout).abs(), id),
                NodeBehavior::Pick => {
                    note((fin - fout).abs(), id);
                    let positive = adj.outgoing[n].iter().filter(|&&e| f[e] > crate::EPS_FLOW).count();
                    if positive > 1 {
                        note(f64::INFINITY, id);
                    }
                }
                NodeBehavior::Multiply { factor } => {
                    if let (Some(&i), Some(&o)) = (adj.incoming[n].first(), adj.outgoing[n].first()) {
                        note((f[o] - factor * f[i]).abs(), id);
                    }
                }
                NodeBehavior::AllEqual => {
                    let all: Vec<f64> = adj.incoming[n]
                        .iter()
                        .chain(&adj.outgoing[n])
                        .map(|&e| f[e])
                        .collect();
                    for w in all.windows(2) {
                        note((w[0] - w[1]).abs(), id);
                    }
                }
                NodeBehavior::Copy => {
                    for &o in &adj.outgoing[n] {
                        note((f[o] - fin).abs(), id);
                    }
                }
                NodeBehavior::Source { inner, supply } => {
                    let s = match (inputs.get(id), supply) {
                        (Some(&v), _) => Some(v),
                        (None, Supply::Fixed(v)) => Some(*v),
                        _ => None,
                    };
                    if let Some(s) = s {
                        note((fout - fin - s).abs(), id);
                    }
                    if *inner == SourceInner::Pick {
                        let positive = adj.outgoing[n].iter().filter(|&&e| f[e] > crate::EPS_FLOW).count();
                        if positive > 1 {
                            note(f64::INFINITY, id);
                        }
                    }
                }
                NodeBehavior::Sink { .. } => {}
            }
        }
        worst
    }
}
