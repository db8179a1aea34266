//! Traffic engineering: Demand Pinning and the optimal multicommodity max-flow.

use serde::{Deserialize, Serialize};

use super::HeuristicError;
use crate::solver::{solve_lp, ConstraintProgram, ConstraintSense, ObjectiveSense, SolveStatus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub from: String,
    pub to: String,
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demand {
    pub src: String,
    pub dst: String,
    /// Each path is a sequence of link indices.
    pub paths: Vec<Vec<usize>>,
    /// Index into `paths` of the pinning path.
    #[serde(default)]
    pub shortest: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeInstance {
    pub nodes: Vec<String>,
    pub links: Vec<Link>,
    pub demands: Vec<Demand>,
    pub threshold: f64,
}

/// Per-demand, per-path rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeAllocation {
    pub flows: Vec<Vec<f64>>,
    pub total: f64,
    pub unmet: Vec<f64>,
}

impl TeInstance {
    pub fn link_index(&self, from: &str, to: &str) -> Option<usize> {
        self.links.iter().position(|l| l.from == from && l.to == to)
    }

    /// Link indices of a path given as a node sequence.
    pub fn path_from_nodes(&self, nodes: &[String]) -> Result<Vec<usize>, HeuristicError> {
        nodes
            .windows(2)
            .map(|w| {
                self.link_index(&w[0], &w[1])
                    .ok_or_else(|| HeuristicError::Invalid(format!("no link {} -> {}", w[0], w[1])))
            })
            .collect()
    }

    /// Node sequence of a path.
    pub fn path_nodes(&self, path: &[usize]) -> Vec<String> {
        let mut out = Vec::with_capacity(path.len() + 1);
        if let Some(&first) = path.first() {
            out.push(self.links[first].from.clone());
        }
        out.extend(path.iter().map(|&l| self.links[l].to.clone()));
        out
    }

    pub fn path_label(&self, path: &[usize]) -> String {
        self.path_nodes(path).join("-")
    }

    pub fn demand_label(&self, k: usize) -> String {
        format!("{}~>{}", self.demands[k].src, self.demands[k].dst)
    }

    pub fn validate(&self) -> Result<(), HeuristicError> {
        let bad = |m: String| Err(HeuristicError::Invalid(m));
        if !(self.threshold >= 0.0) {
            return bad(format!("threshold {} must be nonnegative", self.threshold));
        }
        for (i, l) in self.links.iter().enumerate() {
            if !(l.capacity > 0.0) || !l.capacity.is_finite() {
                return bad(format!("link {i} has capacity {}", l.capacity));
            }
            if !self.nodes.contains(&l.from) || !self.nodes.contains(&l.to) {
                return bad(format!("link {i} has an unknown endpoint"));
            }
        }
        for (k, d) in self.demands.iter().enumerate() {
            if d.paths.is_empty() {
                return bad(format!("demand {k} has no paths"));
            }
            if d.shortest >= d.paths.len() {
                return bad(format!("demand {k}: shortest path index out of range"));
            }
            for p in &d.paths {
                if p.iter().any(|&l| l >= self.links.len()) {
                    return bad(format!("demand {k} uses an unknown link"));
                }
                let nodes = self.path_nodes(p);
                let chained = p.windows(2).all(|w| self.links[w[0]].to == self.links[w[1]].from);
                if !chained || nodes.first() != Some(&d.src) || nodes.last() != Some(&d.dst) {
                    return bad(format!("demand {k} has a path that does not join {} to {}", d.src, d.dst));
                }
            }
        }
        Ok(())
    }
}

/// Up to `k` simple paths from `src` to `dst`, fewest hops first, ties in
/// lexicographic order of link indices.
pub fn k_shortest_paths(links: &[Link], src: &str, dst: &str, k: usize) -> Vec<Vec<usize>> {
    fn walk(
        links: &[Link],
        at: &str,
        dst: &str,
        visited: &mut Vec<String>,
        path: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if at == dst {
            out.push(path.clone());
            return;
        }
        for (i, l) in links.iter().enumerate() {
            if l.from == at && !visited.contains(&l.to) {
                visited.push(l.to.clone());
                path.push(i);
                walk(links, &l.to, dst, visited, path, out);
                path.pop();
                visited.pop();
            }
        }
    }
    let mut out = Vec::new();
    if src != dst {
        walk(links, src, dst, &mut vec![src.to_string()], &mut Vec::new(), &mut out);
    }
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out.truncate(k);
    out
}

/// Max total flow over `active` demands with the given link capacities.
/// Returns per-demand, per-path rates (zero for inactive demands). With
/// `spread`, ties among max flows go to one minimizing the largest link
/// utilization.
fn max_flow(
    inst: &TeInstance,
    d: &[f64],
    active: &[bool],
    capacity: &[f64],
    spread: bool,
) -> Result<Vec<Vec<f64>>, HeuristicError> {
    let mut prog = ConstraintProgram::new(ObjectiveSense::Maximize);
    let mut vars = Vec::new();
    let mut link_terms: Vec<Vec<(usize, f64)>> = vec![Vec::new(); inst.links.len()];
    let mut objective = Vec::new();
    for (k, dem) in inst.demands.iter().enumerate() {
        let mut row = Vec::new();
        for (p, path) in dem.paths.iter().enumerate() {
            if !active[k] || d[k] <= 0.0 {
                vars.push(None);
                continue;
            }
            let v = prog.continuous(format!("f[{k},{p}]"));
            vars.push(Some(v));
            row.push((v, 1.0));
            objective.push((v, 1.0));
            for &l in path {
                link_terms[l].push((v, 1.0));
            }
        }
        if !row.is_empty() {
            prog.add_constraint(format!("demand{k}"), row, ConstraintSense::Le, d[k]);
        }
    }
    for (l, terms) in link_terms.into_iter().enumerate() {
        if !terms.is_empty() {
            prog.add_constraint(format!("link{l}"), terms, ConstraintSense::Le, capacity[l].max(0.0));
        }
    }
    prog.set_objective(ObjectiveSense::Maximize, objective.clone());
    let mut sol = solve_lp(&prog)?;
    if sol.status != SolveStatus::Optimal {
        return Err(HeuristicError::Solver(format!("max-flow LP is {:?}", sol.status)));
    }
    if spread && !objective.is_empty() {
        let best = sol.objective;
        let u = prog.continuous("utilization");
        let loads: Vec<(usize, Vec<(usize, f64)>)> = prog
            .constraints
            .iter()
            .filter_map(|c| c.name.strip_prefix("link").and_then(|l| l.parse().ok()).map(|l: usize| (l, c.terms.clone())))
            .collect();
        for (l, mut terms) in loads {
            if capacity[l] > 0.0 {
                terms.push((u, -capacity[l]));
                prog.add_constraint(format!("util{l}"), terms, ConstraintSense::Le, 0.0);
            }
        }
        prog.add_constraint("total", objective, ConstraintSense::Ge, best);
        prog.set_objective(ObjectiveSense::Minimize, vec![(u, 1.0)]);
        if let Ok(second) = solve_lp(&prog) {
            if second.status == SolveStatus::Optimal {
                sol = second;
            }
        }
    }
    let mut it = vars.into_iter();
    Ok(inst
        .demands
        .iter()
        .map(|dem| {
            dem.paths
                .iter()
                .map(|_| it.next().flatten().map_or(0.0, |v| sol.values[v]))
                .collect()
        })
        .collect())
}

fn finish(d: &[f64], flows: Vec<Vec<f64>>) -> TeAllocation {
    let routed: Vec<f64> = flows.iter().map(|f| f.iter().sum()).collect();
    TeAllocation {
        total: routed.iter().sum(),
        unmet: d.iter().zip(&routed).map(|(dk, r)| (dk - r).max(0.0)).collect(),
        flows,
    }
}

fn check_demands(inst: &TeInstance, d: &[f64]) -> Result<(), HeuristicError> {
    if d.len() != inst.demands.len() {
        return Err(HeuristicError::Invalid(format!(
            "{} demand values for {} demands",
            d.len(),
            inst.demands.len()
        )));
    }
    if let Some(k) = d.iter().position(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(HeuristicError::Invalid(format!("demand {k} is {}", d[k])));
    }
    Ok(())
}

/// Demand Pinning: every demand with `d_k <= T` goes on its shortest path
/// (clamped to the residual capacity there), in demand order; the rest are
/// max-flowed over what remains.
pub fn run_dp(inst: &TeInstance, d: &[f64]) -> Result<TeAllocation, HeuristicError> {
    check_demands(inst, d)?;
    let mut residual: Vec<f64> = inst.links.iter().map(|l| l.capacity).collect();
    let mut pinned = Vec::new();
    let mut active = vec![true; d.len()];
    for (k, dem) in inst.demands.iter().enumerate() {
        let mut row = vec![0.0; dem.paths.len()];
        if d[k] <= inst.threshold {
            active[k] = false;
            let path = &dem.paths[dem.shortest];
            let room = path.iter().map(|&l| residual[l]).fold(f64::INFINITY, f64::min);
            let rate = d[k].min(room).max(0.0);
            for &l in path {
                residual[l] -= rate;
            }
            row[dem.shortest] = rate;
        }
        pinned.push(row);
    }
    let rest = max_flow(inst, d, &active, &residual, false)?;
    let flows = pinned
        .into_iter()
        .zip(rest)
        .enumerate()
        .map(|(k, (p, r))| if active[k] { r } else { p })
        .collect();
    Ok(finish(d, flows))
}

/// Path-based multicommodity max-flow. Among maximum flows the one with the
/// smallest peak link utilization is returned.
pub fn optimal_te(inst: &TeInstance, d: &[f64]) -> Result<TeAllocation, HeuristicError> {
    check_demands(inst, d)?;
    let capacity: Vec<f64> = inst.links.iter().map(|l| l.capacity).collect();
    let flows = max_flow(inst, d, &vec![true; d.len()], &capacity, true)?;
    Ok(finish(d, flows))
}

/// The instance of the DP example: five nodes, links 1-2 and 2-3 of
/// capacity 100, the detour 1-4-5-3 of capacity 50, threshold 50, and every
/// reachable pair as a demand with up to four paths.
pub fn five_node_instance() -> TeInstance {
    let nodes: Vec<String> = (1..=5).map(|i| i.to_string()).collect();
    let link = |a: u32, b: u32, c: f64| Link {
        from: a.to_string(),
        to: b.to_string(),
        capacity: c,
    };
    let links = vec![
        link(1, 2, 100.0),
        link(2, 3, 100.0),
        link(1, 4, 50.0),
        link(4, 5, 50.0),
        link(5, 3, 50.0),
    ];
    let pairs = [(1, 2), (1, 3), (1, 4), (1, 5), (2, 3), (4, 3), (4, 5), (5, 3)];
    let demands = pairs
        .iter()
        .map(|&(s, t)| Demand {
            src: s.to_string(),
            dst: t.to_string(),
            paths: k_shortest_paths(&links, &s.to_string(), &t.to_string(), 4),
            shortest: 0,
        })
        .collect();
    TeInstance {
        nodes,
        links,
        demands,
        threshold: 50.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Demand vector over the eight pairs with the three nonzero values.
    fn five_node_demands() -> Vec<f64> {
        // 1~2, 1~3, 1~4, 1~5, 2~3, 4~3, 4~5, 5~3
        vec![100.0, 50.0, 0.0, 0.0, 100.0, 0.0, 0.0, 0.0]
    }

    #[test]
    fn five_node_paths() {
        let inst = five_node_instance();
        inst.validate().unwrap();
        let labels: Vec<Vec<String>> = inst
            .demands
            .iter()
            .map(|d| d.paths.iter().map(|p| inst.path_label(p)).collect())
            .collect();
        assert_eq!(labels[1], vec!["1-2-3", "1-4-5-3"]);
        assert_eq!(labels.iter().map(Vec::len).sum::<usize>(), 9);
    }

    #[test]
    fn five_node_totals() {
        let inst = five_node_instance();
        let d = five_node_demands();
        let dp = run_dp(&inst, &d).unwrap();
        let opt = optimal_te(&inst, &d).unwrap();
        assert_eq!(dp.total, 150.0);
        assert_eq!(opt.total, 250.0);
        assert_eq!(dp.flows[1], vec![50.0, 0.0]);
        assert_eq!(opt.flows[1], vec![0.0, 50.0]);
        assert_eq!(dp.flows[0], vec![50.0]);
    }

    #[test]
    fn zero_threshold_is_optimal() {
        let mut inst = five_node_instance();
        inst.threshold = 0.0;
        let d = five_node_demands();
        assert_eq!(run_dp(&inst, &d).unwrap().total, 250.0);
    }

    #[test]
    fn zero_demands() {
        let inst = five_node_instance();
        let d = vec![0.0; 8];
        assert_eq!(run_dp(&inst, &d).unwrap().total, 0.0);
        assert_eq!(optimal_te(&inst, &d).unwrap().total, 0.0);
    }

    #[test]
    fn single_path() {
        let links = vec![Link { from: "a".into(), to: "b".into(), capacity: 10.0 }];
        let inst = TeInstance {
            nodes: vec!["a".into(), "b".into()],
            demands: vec![Demand { src: "a".into(), dst: "b".into(), paths: vec![vec![0]], shortest: 0 }],
            links,
            threshold: 0.0,
        };
        assert_eq!(optimal_te(&inst, &[4.0]).unwrap().total, 4.0);
    }

    #[test]
    fn pinning_clamps_to_residual() {
        // Two pinnable demands share link 1-2 (100); the second only gets what is left.
        let inst = five_node_instance();
        let mut d = vec![0.0; 8];
        d[0] = 50.0; // 1~2
        d[1] = 50.0; // 1~3 on 1-2-3
        let mut inst2 = inst.clone();
        inst2.links[0].capacity = 60.0;
        let dp = run_dp(&inst2, &d).unwrap();
        assert_eq!(dp.flows[0], vec![50.0]);
        assert_eq!(dp.flows[1], vec![10.0, 0.0]);
    }
}
