use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{FlowNetwork, NodeBehavior, Supply};

/// One broken structural rule. `subject` is a node or edge id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub subject: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.rule)
    }
}

fn bad_number(x: f64) -> bool {
    !x.is_finite() || x < 0.0
}

/// Lists every structural violation; empty means the network is well formed.
pub fn validate(net: &FlowNetwork) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |subject: &str, rule: &str| {
        out.push(Violation {
            subject: subject.to_string(),
            rule: rule.to_string(),
        })
    };

    let mut seen = HashSet::new();
    for e in &net.edges {
        if !seen.insert(e.id.as_str()) {
            push(&e.id, "duplicate edge id");
        }
        if !net.nodes.contains_key(&e.from) || !net.nodes.contains_key(&e.to) {
            push(&e.id, "unknown endpoint");
        }
        if e.from == e.to {
            push(&e.id, "self loop");
        }
        if e.capacity.is_some_and(bad_number) {
            push(&e.id, "negative capacity");
        }
        if e.fixed_rate.is_some_and(bad_number) {
            push(&e.id, "negative fixed rate");
        }
    }

    let adj = net.adjacency();
    for (n, (id, node)) in net.nodes.iter().enumerate() {
        let ins = &adj.incoming[n];
        let outs = &adj.outgoing[n];
        match &node.behavior {
            NodeBehavior::Multiply { factor } => {
                if ins.len() != 1 || outs.len() != 1 {
                    push(id, "multiply arity");
                }
                if !factor.is_finite() || *factor <= 0.0 {
                    push(id, "multiply factor must be positive");
                }
            }
            NodeBehavior::Sink { .. } => {
                if !outs.is_empty() {
                    push(id, "sink has outgoing");
                }
            }
            NodeBehavior::Source { supply, .. } => {
                if ins.iter().any(|&e| net.edges[e].fixed_rate.is_none()) {
                    push(id, "source has non-constant incoming");
                }
                if let Supply::Fixed(s) = supply {
                    if bad_number(*s) {
                        push(id, "negative supply");
                    }
                }
            }
            _ => {}
        }
        if node.behavior.is_pick() && outs.is_empty() {
            push(id, "pick without outgoing");
        }
    }
    out
}
