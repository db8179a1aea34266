use std::collections::BTreeMap;

use crate::flow_dsl::{validate, FlowNetwork, NodeBehavior, SourceInner, Supply};
use crate::solver::{ConstraintProgram, ConstraintSense, ObjectiveSense, VarKind};

use super::CompileError;

/// Compiles `net` into a program with one nonnegative variable per edge
/// (variable `i` is edge `i`).
///
/// Source supplies are right-hand sides, so the inputs are needed here.
/// With `objective_sink == None` the objective is the constant 0.
pub fn compile_network(
    net: &FlowNetwork,
    objective_sink: Option<&str>,
    inputs: &BTreeMap<String, f64>,
) -> Result<ConstraintProgram, CompileError> {
    let violations = validate(net);
    if !violations.is_empty() {
        return Err(CompileError::Invalid(violations));
    }
    let sense = match objective_sink {
        None => ObjectiveSense::Maximize,
        Some(id) => match net.nodes.get(id) {
            None => return Err(CompileError::UnknownSink(id.to_string())),
            Some(n) => match n.behavior {
                NodeBehavior::Sink { sense } => sense,
                _ => return Err(CompileError::NotASink(id.to_string())),
            },
        },
    };

    let mut prog = ConstraintProgram::new(sense);
    for e in &net.edges {
        prog.add_var(format!("f[{}]", e.id), VarKind::Continuous, e.capacity);
    }
    for (i, e) in net.edges.iter().enumerate() {
        if let Some(d) = e.fixed_rate {
            prog.add_constraint(format!("rate:{}", e.id), vec![(i, 1.0)], ConstraintSense::Eq, d);
        }
    }

    let adj = net.adjacency();
    for (n, (id, node)) in net.nodes.iter().enumerate() {
        let ins = &adj.incoming[n];
        let outs = &adj.outgoing[n];
        let balance = || -> Vec<(usize, f64)> {
            ins.iter()
                .map(|&e| (e, 1.0))
                .chain(outs.iter().map(|&e| (e, -1.0)))
                .collect()
        };
        match &node.behavior {
            NodeBehavior::Split | NodeBehavior::Pick => {
                prog.add_constraint(format!("cons:{id}"), balance(), ConstraintSense::Eq, 0.0);
            }
            NodeBehavior::Multiply { factor } => {
                prog.add_constraint(
                    format!("mult:{id}"),
                    vec![(outs[0], 1.0), (ins[0], -factor)],
                    ConstraintSense::Eq,
                    0.0,
                );
            }
            NodeBehavior::AllEqual => {
                let all: Vec<usize> = ins.iter().chain(outs).copied().collect();
                for (k, w) in all.windows(2).enumerate() {
                    prog.add_constraint(
                        format!("alleq:{id}:{k}"),
                        vec![(w[0], 1.0), (w[1], -1.0)],
                        ConstraintSense::Eq,
                        0.0,
                    );
                }
            }
            NodeBehavior::Copy => {
                for &o in outs {
                    let mut terms = vec![(o, 1.0)];
                    terms.extend(ins.iter().map(|&e| (e, -1.0)));
                    prog.add_constraint(
                        format!("copy:{id}:{}", net.edges[o].id),
                        terms,
                        ConstraintSense::Eq,
                        0.0,
                    );
                }
            }
            NodeBehavior::Source { supply, .. } => {
                let s = match (inputs.get(id.as_str()), supply) {
                    (_, Supply::Free) => None,
                    (Some(&v), _) => Some(v),
                    (None, Supply::Fixed(v)) => Some(*v),
                    (None, Supply::Input) => return Err(CompileError::MissingInput(id.clone())),
                };
                if let Some(s) = s {
                    if !s.is_finite() || s < 0.0 {
                        return Err(CompileError::BadInput(id.clone(), s));
                    }
                    let terms = balance().into_iter().map(|(e, a)| (e, -a)).collect();
                    prog.add_constraint(format!("supply:{id}"), terms, ConstraintSense::Eq, s);
                }
            }
            NodeBehavior::Sink { .. } => {}
        }
        let picks = match node.behavior {
            NodeBehavior::Pick => true,
            NodeBehavior::Source { inner, .. } => inner == SourceInner::Pick,
            _ => false,
        };
        if picks {
            prog.exactly_one_groups.push(outs.clone());
        }
    }

    if let Some(id) = objective_sink {
        let n = net.node_index(id).expect("checked above");
        prog.set_objective(sense, adj.incoming[n].iter().map(|&e| (e, 1.0)).collect());
    }
    Ok(prog)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::solve_mip;

    #[test]
    fn empty_network() {
        let net = FlowNetwork::new();
        let p = compile_network(&net, None, &BTreeMap::new()).unwrap();
        assert!(p.variables.is_empty() && p.constraints.is_empty());
        let s = solve_mip(&p).unwrap();
        assert_eq!(s.objective, 0.0);
    }

    #[test]
    fn errors() {
        let mut net = FlowNetwork::new();
        net.add_node("s", NodeBehavior::Source { inner: SourceInner::Split, supply: Supply::Input });
        net.add_node("t", NodeBehavior::Sink { sense: ObjectiveSense::Maximize });
        net.add_edge("s", "t");
        let none = BTreeMap::new();
        assert_eq!(
            compile_network(&net, Some("t"), &none),
            Err(CompileError::MissingInput("s".into()))
        );
        let inputs = BTreeMap::from([("s".to_string(), 1.0)]);
        assert_eq!(
            compile_network(&net, Some("s"), &inputs),
            Err(CompileError::NotASink("s".into()))
        );
        assert_eq!(
            compile_network(&net, Some("x"), &inputs),
            Err(CompileError::UnknownSink("x".into()))
        );
    }

    #[test]
    fn pick_makes_group() {
        let mut net = FlowNetwork::new();
        net.add_node("b", NodeBehavior::Source { inner: SourceInner::Pick, supply: Supply::Fixed(0.5) });
        net.add_node("bin0", NodeBehavior::Split);
        net.add_node("bin1", NodeBehavior::Split);
        net.add_node("t", NodeBehavior::Sink { sense: ObjectiveSense::Maximize });
        net.add_edge("b", "bin0");
        net.add_edge("b", "bin1");
        net.add_edge("bin0", "t");
        net.add_edge("bin1", "t");
        let p = compile_network(&net, Some("t"), &BTreeMap::new()).unwrap();
        assert_eq!(p.exactly_one_groups, vec![vec![0, 1]]);
        assert_eq!(p.objective.terms, vec![(2, 1.0), (3, 1.0)]);
    }
}
