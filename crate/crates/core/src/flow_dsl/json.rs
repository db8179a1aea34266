//! JSON wire format for networks.
//!
//! ```json
//! { "nodes": [ { "id": "d0", "behavior": "source",
//!                "params": { "inner": "split", "supply": "input" }, "metadata": {} } ],
//!   "edges": [ { "id": "d0->p0", "from": "d0", "to": "p0", "capacity": 5.0, "metadata": {} } ] }
//! ```
//!
//! `supply` is `"input"`, `"free"` or a number.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Edge, FlowNetwork, Metadata, Node, NodeBehavior, SourceInner, Supply};
use crate::solver::ObjectiveSense;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDocument {
    pub nodes: Vec<NodeDoc>,
    pub edges: Vec<EdgeDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDoc {
    pub id: String,
    pub behavior: String,
    #[serde(default, skip_serializing_if = "Params::is_empty")]
    pub params: Params,
    #[serde(default)]
    pub metadata: Metadata,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner: Option<SourceInner>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supply: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sense: Option<ObjectiveSense>,
}

impl Params {
    fn is_empty(&self) -> bool {
        *self == Params::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub from: String,
    pub to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_rate: Option<f64>,
    #[serde(default)]
    pub metadata: Metadata,
}

fn behavior_to_doc(b: &NodeBehavior) -> (String, Params) {
    let mut p = Params::default();
    match b {
        NodeBehavior::Multiply { factor } => p.factor = Some(*factor),
        NodeBehavior::Source { inner, supply } => {
            p.inner = Some(*inner);
            p.supply = Some(match supply {
                Supply::Input => Value::from("input"),
                Supply::Free => Value::from("free"),
                Supply::Fixed(v) => Value::from(*v),
            });
        }
        NodeBehavior::Sink { sense } => p.sense = Some(*sense),
        _ => {}
    }
    (b.kind_name().to_string(), p)
}

fn behavior_from_doc(id: &str, kind: &str, p: &Params) -> Result<NodeBehavior, String> {
    Ok(match kind {
        "split" => NodeBehavior::Split,
        "pick" => NodeBehavior::Pick,
        "all_equal" => NodeBehavior::AllEqual,
        "copy" => NodeBehavior::Copy,
        "multiply" => NodeBehavior::Multiply {
            factor: p.factor.ok_or_else(|| format!("node {id}: multiply needs params.factor"))?,
        },
        "source" => {
            let supply = match &p.supply {
                None => Supply::Input,
                Some(Value::String(s)) if s == "input" => Supply::Input,
                Some(Value::String(s)) if s == "free" => Supply::Free,
                Some(Value::Number(n)) => Supply::Fixed(n.as_f64().unwrap_or(f64::NAN)),
                Some(other) => return Err(format!("node {id}: bad supply {other}")),
            };
            NodeBehavior::Source {
                inner: p.inner.unwrap_or(SourceInner::Split),
                supply,
            }
        }
        "sink" => NodeBehavior::Sink {
            sense: p.sense.unwrap_or(ObjectiveSense::Maximize),
        },
        other => return Err(format!("node {id}: unknown behavior {other:?}")),
    })
}

impl NetworkDocument {
    pub fn from_network(net: &FlowNetwork) -> Self {
        let nodes = net
            .nodes
            .iter()
            .map(|(id, n)| {
                let (behavior, params) = behavior_to_doc(&n.behavior);
                NodeDoc {
                    id: id.clone(),
                    behavior,
                    params,
                    metadata: n.metadata.clone(),
                }
            })
            .collect();
        let edges = net
            .edges
            .iter()
            .map(|e| EdgeDoc {
                id: Some(e.id.clone()),
                from: e.from.clone(),
                to: e.to.clone(),
                capacity: e.capacity,
                fixed_rate: e.fixed_rate,
                metadata: e.metadata.clone(),
            })
            .collect();
        NetworkDocument { nodes, edges }
    }

    pub fn into_network(self) -> Result<FlowNetwork, String> {
        let mut net = FlowNetwork::new();
        for n in self.nodes {
            if net.nodes.contains_key(&n.id) {
                return Err(format!("duplicate node id {:?}", n.id));
            }
            let behavior = behavior_from_doc(&n.id, &n.behavior, &n.params)?;
            net.nodes.insert(
                n.id,
                Node {
                    behavior,
                    metadata: n.metadata,
                },
            );
        }
        for e in self.edges {
            match e.id {
                Some(id) => net.edges.push(Edge {
                    id,
                    from: e.from,
                    to: e.to,
                    capacity: e.capacity,
                    fixed_rate: e.fixed_rate,
                    metadata: e.metadata,
                }),
                None => {
                    let i = net.add_edge_with(e.from, e.to, e.capacity, e.fixed_rate);
                    net.edges[i].metadata = e.metadata;
                }
            }
        }
        Ok(net)
    }
}

pub fn to_json(net: &FlowNetwork) -> String {
    serde_json::to_string_pretty(&NetworkDocument::from_network(net)).expect("network serializes")
}

pub fn from_json(text: &str) -> Result<FlowNetwork, String> {
    let doc: NetworkDocument = serde_json::from_str(text).map_err(|e| e.to_string())?;
    doc.into_network()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FlowNetwork {
        let mut net = FlowNetwork::new();
        net.add_node(
            "s",
            NodeBehavior::Source {
                inner: SourceInner::Pick,
                supply: Supply::Fixed(0.1 + 0.2),
            },
        )
        .metadata
        .insert("label".into(), "ball 0".into());
        net.add_node("free", NodeBehavior::Source { inner: SourceInner::Split, supply: Supply::Free });
        net.add_node("m", NodeBehavior::Multiply { factor: 1.0 / 3.0 });
        net.add_node("t", NodeBehavior::Sink { sense: ObjectiveSense::Minimize });
        net.add_edge_with("s", "m", Some(2.5), None);
        net.add_edge_with("m", "t", None, Some(1e-17));
        net.add_edge("free", "t");
        net
    }

    #[test]
    fn round_trip_is_lossless() {
        let net = sample();
        let text = to_json(&net);
        let back = from_json(&text).unwrap();
        assert_eq!(back, net);
        assert_eq!(to_json(&back), text);
    }

    #[test]
    fn edge_ids_default() {
        let text = r#"{"nodes":[{"id":"a","behavior":"split"},{"id":"b","behavior":"sink"}],
                       "edges":[{"from":"a","to":"b"},{"from":"a","to":"b"}]}"#;
        let net = from_json(text).unwrap();
        assert_eq!(net.edges[0].id, "a->b");
        assert_eq!(net.edges[1].id, "a->b#1");
    }

    #[test]
    fn unknown_behavior_rejected() {
        let text = r#"{"nodes":[{"id":"a","behavior":"teleport"}],"edges":[]}"#;
        assert!(from_json(text).unwrap_err().contains("teleport"));
    }
}
