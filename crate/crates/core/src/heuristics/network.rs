//! Flow-network views of the built-in problems.
//!
//! TE: demand sources (split) feed the Unmet sink and their path nodes
//! (copy); path nodes feed link nodes (split, capacity on the outgoing
//! edge); link nodes feed the Met sink. VBP: ball sources (pick) feed bin
//! nodes (split) which feed the Occupancy sink with the bin capacity.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Allocation, HeuristicError, TeInstance, VbpInstance};
use crate::flow_dsl::{FlowAssignment, FlowNetwork, NodeBehavior, SourceInner, Supply};
use crate::solver::ObjectiveSense;

pub const UNMET: &str = "unmet";
pub const MET: &str = "met";
pub const OCCUPANCY: &str = "occupancy";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Dp,
    OptTe,
    Ff,
    OptVbp,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjectionError {
    #[error("network has no edge {0} -> {1}")]
    MissingEdge(String, String),
    #[error("allocation does not match the instance: {0}")]
    Mismatch(String),
}

/// Node ids of a TE network.
pub struct TeIds {
    pub demands: Vec<String>,
    /// `paths[k][p]`
    pub paths: Vec<Vec<String>>,
    pub links: Vec<String>,
}

pub fn te_ids(inst: &TeInstance) -> TeIds {
    let mut taken = std::collections::HashSet::new();
    let mut unique = |base: String| {
        let mut id = base.clone();
        let mut n = 1;
        while !taken.insert(id.clone()) {
            id = format!("{base}#{n}");
            n += 1;
        }
        id
    };
    let links = inst
        .links
        .iter()
        .map(|l| unique(format!("{}->{}", l.from, l.to)))
        .collect();
    let demands = (0..inst.demands.len()).map(|k| unique(inst.demand_label(k))).collect();
    let paths = inst
        .demands
        .iter()
        .map(|d| d.paths.iter().map(|p| unique(inst.path_label(p))).collect())
        .collect();
    TeIds { demands, paths, links }
}

pub fn ball_id(i: usize) -> String {
    format!("B{i}")
}

pub fn bin_id(j: usize) -> String {
    format!("Bin{j}")
}

fn meta(net: &mut FlowNetwork, id: &str, pairs: &[(&str, String)]) {
    let node = net.nodes.get_mut(id).expect("node exists");
    for (k, v) in pairs {
        node.metadata.insert(k.to_string(), v.clone());
    }
}

pub fn te_network(inst: &TeInstance, model: Model) -> FlowNetwork {
    let ids = te_ids(inst);
    let mut net = FlowNetwork::new();
    net.add_node(UNMET, NodeBehavior::Sink { sense: ObjectiveSense::Minimize });
    meta(&mut net, UNMET, &[("kind", "unmet".into())]);
    for (k, id) in ids.demands.iter().enumerate() {
        net.add_node(id, NodeBehavior::Source { inner: SourceInner::Split, supply: Supply::Input });
        meta(&mut net, id, &[("kind", "demand".into()), ("index", k.to_string())]);
    }
    for (k, paths) in ids.paths.iter().enumerate() {
        for (p, id) in paths.iter().enumerate() {
            net.add_node(id, NodeBehavior::Copy);
            let shortest = (inst.demands[k].shortest == p).to_string();
            meta(&mut net, id, &[("kind", "path".into()), ("demand", k.to_string()), ("shortest", shortest)]);
        }
    }
    for (l, id) in ids.links.iter().enumerate() {
        net.add_node(id, NodeBehavior::Split);
        meta(&mut net, id, &[("kind", "link".into()), ("index", l.to_string())]);
    }
    net.add_node(MET, NodeBehavior::Sink { sense: ObjectiveSense::Maximize });
    meta(&mut net, MET, &[("kind", "met".into())]);

    for (k, dem) in inst.demands.iter().enumerate() {
        net.add_edge(&ids.demands[k], UNMET);
        for (p, _) in dem.paths.iter().enumerate() {
            net.add_edge(&ids.demands[k], &ids.paths[k][p]);
        }
    }
    for (k, dem) in inst.demands.iter().enumerate() {
        for (p, path) in dem.paths.iter().enumerate() {
            for &l in path {
                net.add_edge(&ids.paths[k][p], &ids.links[l]);
            }
        }
    }
    for (l, link) in inst.links.iter().enumerate() {
        net.add_edge_with(&ids.links[l], MET, Some(link.capacity), None);
    }
    net.edges.iter_mut().for_each(|e| {
        e.metadata.insert("model".into(), model_name(model).into());
    });
    net
}

pub fn vbp_network(inst: &VbpInstance, model: Model) -> FlowNetwork {
    let mut net = FlowNetwork::new();
    for i in 0..inst.sizes.len() {
        net.add_node(ball_id(i), NodeBehavior::Source { inner: SourceInner::Pick, supply: Supply::Input });
        meta(&mut net, &ball_id(i), &[("kind", "ball".into()), ("index", i.to_string())]);
    }
    let caps = bin_caps(inst);
    for j in 0..caps.len() {
        net.add_node(bin_id(j), NodeBehavior::Split);
        meta(&mut net, &bin_id(j), &[("kind", "bin".into()), ("index", j.to_string())]);
    }
    net.add_node(OCCUPANCY, NodeBehavior::Sink { sense: ObjectiveSense::Maximize });
    meta(&mut net, OCCUPANCY, &[("kind", "occupancy".into())]);
    for i in 0..inst.sizes.len() {
        for j in 0..caps.len() {
            net.add_edge(ball_id(i), bin_id(j));
        }
    }
    for (j, cap) in caps.iter().enumerate() {
        net.add_edge_with(bin_id(j), OCCUPANCY, Some(*cap), None);
    }
    net.edges.iter_mut().for_each(|e| {
        e.metadata.insert("model".into(), model_name(model).into());
    });
    net
}

/// First-dimension capacity of every bin a run may use: with `open_extra`
/// First-Fit can open up to one bin per ball, shaped like the last bin.
fn bin_caps(inst: &VbpInstance) -> Vec<f64> {
    let mut caps: Vec<f64> = inst.bins.iter().map(|b| b[0]).collect();
    if inst.open_extra {
        if let Some(&last) = caps.last() {
            caps.resize(caps.len().max(inst.sizes.len()), last);
        }
    }
    caps
}

fn model_name(m: Model) -> &'static str {
    match m {
        Model::Dp => "dp",
        Model::OptTe => "opt_te",
        Model::Ff => "ff",
        Model::OptVbp => "opt_vbp",
    }
}

/// Network for either problem family; the model must match the family.
pub fn to_flow_network(inst: &super::Instance, model: Model) -> Result<FlowNetwork, HeuristicError> {
    match (inst, model) {
        (super::Instance::Te(t), Model::Dp | Model::OptTe) => Ok(te_network(t, model)),
        (super::Instance::Vbp(v), Model::Ff | Model::OptVbp) => Ok(vbp_network(v, model)),
        _ => Err(HeuristicError::Invalid(format!("model {} does not fit this instance", model_name(model)))),
    }
}

/// Source supplies for evaluating a TE network on demand vector `d`.
pub fn te_inputs(inst: &TeInstance, d: &[f64]) -> BTreeMap<String, f64> {
    te_ids(inst).demands.into_iter().zip(d.iter().copied()).collect()
}

/// Source supplies for a VBP network (first dimension of each ball).
pub fn vbp_inputs(inst: &VbpInstance) -> BTreeMap<String, f64> {
    inst.sizes.iter().enumerate().map(|(i, y)| (ball_id(i), y[0])).collect()
}

/// Fixes the rates Demand Pinning chooses for pinned demands on `net`, so
/// that minimizing Unmet reproduces DP's max-flow phase.
pub fn pin_dp(net: &mut FlowNetwork, inst: &TeInstance, d: &[f64]) -> Result<(), HeuristicError> {
    let dp = super::run_dp(inst, d)?;
    let ids = te_ids(inst);
    for (k, dem) in inst.demands.iter().enumerate() {
        if d[k] > inst.threshold {
            continue;
        }
        for p in 0..dem.paths.len() {
            let e = edge_between(net, &ids.demands[k], &ids.paths[k][p])
                .map_err(|e| HeuristicError::Invalid(e.to_string()))?;
            net.edges[e].fixed_rate = Some(dp.flows[k][p]);
        }
    }
    Ok(())
}

fn edge_between(net: &FlowNetwork, from: &str, to: &str) -> Result<usize, ProjectionError> {
    net.edges
        .iter()
        .position(|e| e.from == from && e.to == to)
        .ok_or_else(|| ProjectionError::MissingEdge(from.to_string(), to.to_string()))
}

/// Edge index lookup by endpoints, built once per network.
struct EdgeIndex(HashMap<(String, String), usize>);

impl EdgeIndex {
    fn new(net: &FlowNetwork) -> Self {
        let mut m = HashMap::new();
        for (i, e) in net.edges.iter().enumerate() {
            m.entry((e.from.clone(), e.to.clone())).or_insert(i);
        }
        EdgeIndex(m)
    }

    fn get(&self, from: &str, to: &str) -> Result<usize, ProjectionError> {
        self.0
            .get(&(from.to_string(), to.to_string()))
            .copied()
            .ok_or_else(|| ProjectionError::MissingEdge(from.to_string(), to.to_string()))
    }
}

/// Maps concrete decisions onto the edges of the matching network.
pub fn project_allocation(
    alloc: &Allocation,
    inst: &super::Instance,
    net: &FlowNetwork,
) -> Result<FlowAssignment, ProjectionError> {
    let idx = EdgeIndex::new(net);
    let mut f = FlowAssignment::zeros(net);
    match (alloc, inst) {
        (Allocation::Te(a), super::Instance::Te(t)) => {
            if a.flows.len() != t.demands.len() {
                return Err(ProjectionError::Mismatch("demand count".into()));
            }
            let ids = te_ids(t);
            let mut load = vec![0.0; t.links.len()];
            for (k, dem) in t.demands.iter().enumerate() {
                f.0[idx.get(&ids.demands[k], UNMET)?] = a.unmet[k];
                for (p, path) in dem.paths.iter().enumerate() {
                    let rate = a.flows[k][p];
                    f.0[idx.get(&ids.demands[k], &ids.paths[k][p])?] = rate;
                    for &l in path {
                        f.0[idx.get(&ids.paths[k][p], &ids.links[l])?] = rate;
                        load[l] += rate;
                    }
                }
            }
            for (l, id) in ids.links.iter().enumerate() {
                f.0[idx.get(id, MET)?] = load[l];
            }
        }
        (Allocation::Vbp(a), super::Instance::Vbp(v)) => {
            if a.assignment.len() != v.sizes.len() {
                return Err(ProjectionError::Mismatch("ball count".into()));
            }
            let mut load = vec![0.0; bin_caps(v).len()];
            for (i, &j) in a.assignment.iter().enumerate() {
                if j >= load.len() {
                    return Err(ProjectionError::MissingEdge(ball_id(i), bin_id(j)));
                }
                let e = idx.get(&ball_id(i), &bin_id(j))?;
                f.0[e] = v.sizes[i][0];
                load[j] += v.sizes[i][0];
            }
            for (j, l) in load.iter().enumerate() {
                f.0[idx.get(&bin_id(j), OCCUPANCY)?] = *l;
            }
        }
        _ => return Err(ProjectionError::Mismatch("allocation kind differs from instance".into())),
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow_dsl::{evaluate, validate};
    use crate::heuristics::{five_node_instance, optimal_te, run_dp, run_ff, Instance};

    const D: [f64; 8] = [100.0, 50.0, 0.0, 0.0, 100.0, 0.0, 0.0, 0.0];

    #[test]
    fn dp_network_shape() {
        let inst = five_node_instance();
        let net = te_network(&inst, Model::Dp);
        assert!(validate(&net).is_empty());
        let count = |kind: &str| net.nodes.values().filter(|n| n.metadata.get("kind").map(String::as_str) == Some(kind)).count();
        assert_eq!((count("demand"), count("path"), count("link")), (8, 9, 5));
        assert_eq!(net.sinks(), vec![UNMET, MET]);
    }

    #[test]
    fn opt_network_routes_250() {
        let inst = five_node_instance();
        let net = te_network(&inst, Model::OptTe);
        let ev = evaluate(&net, &te_inputs(&inst, &D), UNMET).unwrap();
        assert!((250.0 - (D.iter().sum::<f64>() - ev.objective)).abs() < 1e-9);
    }

    #[test]
    fn pinned_network_matches_dp() {
        let inst = five_node_instance();
        let mut net = te_network(&inst, Model::Dp);
        pin_dp(&mut net, &inst, &D).unwrap();
        let ev = evaluate(&net, &te_inputs(&inst, &D), UNMET).unwrap();
        assert!((D.iter().sum::<f64>() - ev.objective - 150.0).abs() < 1e-9);
    }

    #[test]
    fn projections_conserve() {
        let inst = five_node_instance();
        let net = te_network(&inst, Model::Dp);
        let wrapped = Instance::Te(inst.clone());
        let dp = project_allocation(&Allocation::Te(run_dp(&inst, &D).unwrap()), &wrapped, &net).unwrap();
        let (v, who) = dp.max_violation(&net, &te_inputs(&inst, &D));
        assert!(v <= crate::EPS_FEAS, "{who}");
        assert_eq!(dp.get(&net, "1~>3->1-2-3"), Some(50.0));
        assert_eq!(dp.get(&net, "1-2-3->1->2"), Some(50.0));
        assert_eq!(dp.get(&net, "1-2-3->2->3"), Some(50.0));
        let opt = project_allocation(&Allocation::Te(optimal_te(&inst, &D).unwrap()), &wrapped, &net).unwrap();
        assert_eq!(opt.get(&net, "1~>3->1-4-5-3"), Some(50.0));
        let zero = project_allocation(&Allocation::Te(run_dp(&inst, &[0.0; 8]).unwrap()), &wrapped, &net).unwrap();
        assert!(zero.0.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn ff_network_shape_and_projection() {
        let v = VbpInstance::scalar(&[0.01, 0.49, 0.51, 0.51], &[1.0; 3], false);
        let net = vbp_network(&v, Model::Ff);
        assert!(validate(&net).is_empty());
        assert_eq!(net.sources().len(), 4);
        let (ff, _) = run_ff(&v).unwrap();
        let f = project_allocation(&Allocation::Vbp(ff), &Instance::Vbp(v.clone()), &net).unwrap();
        let positive: Vec<&str> = net
            .edges
            .iter()
            .zip(&f.0)
            .filter(|(e, &x)| x > 0.0 && e.to != OCCUPANCY)
            .map(|(e, _)| e.id.as_str())
            .collect();
        assert_eq!(positive, vec!["B0->Bin0", "B1->Bin0", "B2->Bin1", "B3->Bin2"]);
        let (viol, _) = f.max_violation(&net, &vbp_inputs(&v));
        assert!(viol <= crate::EPS_FEAS);
    }
}
