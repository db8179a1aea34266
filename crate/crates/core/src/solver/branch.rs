//! Depth-first branch-and-bound over binaries and exactly-one groups.

use super::program::{ConstraintProgram, ObjectiveSense, VarKind};
use super::simplex::solve_relaxation;
use super::{Solution, SolveStatus, SolverError};
use crate::EPS_FLOW;

pub const DEFAULT_NODE_LIMIT: usize = 1_000_000;
const INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MipOptions {
    pub node_limit: usize,
}

impl Default for MipOptions {
    fn default() -> Self {
        MipOptions {
            node_limit: DEFAULT_NODE_LIMIT,
        }
    }
}

pub fn solve_mip(prog: &ConstraintProgram) -> Result<Solution, SolverError> {
    solve_mip_with(prog, &MipOptions::default())
}

/// True when every feasible objective value is an integer, so bounds can be
/// rounded before pruning.
fn objective_is_integral(prog: &ConstraintProgram) -> bool {
    let is_int = |x: f64| (x - x.round()).abs() < 1e-12;
    is_int(prog.objective.constant)
        && prog.objective.terms.iter().all(|&(v, c)| {
            c == 0.0 || prog.variables[v].kind == VarKind::Binary && is_int(c)
        })
}

enum Branch {
    Binary(usize, f64),
    Group(usize),
}

pub fn solve_mip_with(prog: &ConstraintProgram, opts: &MipOptions) -> Result<Solution, SolverError> {
    prog.validate()?;
    let flip = match prog.objective.sense {
        ObjectiveSense::Maximize => 1.0,
        ObjectiveSense::Minimize => -1.0,
    };
    let integral = objective_is_integral(prog);
    let binaries: Vec<usize> = (0..prog.variables.len())
        .filter(|&v| prog.variables[v].kind == VarKind::Binary)
        .collect();

    let mut stack: Vec<Vec<Option<f64>>> = vec![vec![None; prog.variables.len()]];
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut nodes = 0usize;

    while let Some(fixed) = stack.pop() {
        nodes += 1;
        if nodes > opts.node_limit {
            return Err(SolverError::BudgetExceeded(opts.node_limit));
        }
        let relax = solve_relaxation(prog, &fixed)?;
        match relax.status {
            SolveStatus::Infeasible => continue,
            SolveStatus::Unbounded => return Ok(Solution::unbounded(nodes)),
            SolveStatus::Optimal => {}
        }
        let mut bound = flip * relax.objective;
        if integral {
            bound = (bound + INTEGRALITY_TOL).floor();
        }
        if let Some((best, _)) = &incumbent {
            if bound <= *best + 1e-9 {
                continue;
            }
        }
        let x = &relax.values;

        let branch = binaries
            .iter()
            .find(|&&v| fixed[v].is_none() && x[v].min(1.0 - x[v]) > INTEGRALITY_TOL)
            .map(|&v| Branch::Binary(v, x[v]))
            .or_else(|| {
                prog.exactly_one_groups
                    .iter()
                    .position(|g| g.iter().filter(|&&v| x[v] > EPS_FLOW).count() > 1)
                    .map(Branch::Group)
            });

        match branch {
            Some(Branch::Binary(v, val)) => {
                let mut down = fixed.clone();
                down[v] = Some(0.0);
                let mut up = fixed;
                up[v] = Some(1.0);
                // Explore the nearer rounding first: it is pushed last.
                if val >= 0.5 {
                    stack.push(down);
                    stack.push(up);
                } else {
                    stack.push(up);
                    stack.push(down);
                }
            }
            Some(Branch::Group(g)) => {
                let members = &prog.exactly_one_groups[g];
                let mut order: Vec<usize> = members
                    .iter()
                    .copied()
                    .filter(|&v| fixed[v] != Some(0.0))
                    .collect();
                order.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(a.cmp(&b)));
                for &keep in order.iter().rev() {
                    let mut child = fixed.clone();
                    for &v in members {
                        if v != keep {
                            child[v] = Some(0.0);
                        }
                    }
                    stack.push(child);
                }
            }
            None => {
                let mut values = relax.values;
                for &v in &binaries {
                    values[v] = values[v].round();
                }
                let obj = flip * prog.objective.value(&values);
                if incumbent.as_ref().map_or(true, |(best, _)| obj > *best + 1e-9) {
                    incumbent = Some((obj, values));
                }
            }
        }
    }

    Ok(match incumbent {
        Some((_, values)) => Solution {
            status: SolveStatus::Optimal,
            objective: prog.objective.value(&values),
            values,
            nodes,
        },
        None => Solution::infeasible(nodes),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{ConstraintSense, ConstraintProgram};

    #[test]
    fn all_binary_maximize_sum() {
        let mut p = ConstraintProgram::new(ObjectiveSense::Maximize);
        let ys: Vec<_> = (0..5).map(|i| p.binary(format!("y{i}"))).collect();
        p.set_objective(ObjectiveSense::Maximize, ys.iter().map(|&y| (y, 1.0)).collect());
        let s = solve_mip(&p).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert_eq!(s.values, vec![1.0; 5]);
        assert_eq!(s.objective, 5.0);
    }

    #[test]
    fn knapsack() {
        // max 5a + 4b + 3c  s.t. 2a + 3b + c <= 4  (binaries) -> a + c = 8
        let mut p = ConstraintProgram::new(ObjectiveSense::Maximize);
        let a = p.binary("a");
        let b = p.binary("b");
        let c = p.binary("c");
        p.add_constraint("w", vec![(a, 2.0), (b, 3.0), (c, 1.0)], ConstraintSense::Le, 4.0);
        p.set_objective(ObjectiveSense::Maximize, vec![(a, 5.0), (b, 4.0), (c, 3.0)]);
        let s = solve_mip(&p).unwrap();
        assert!((s.objective - 8.0).abs() < 1e-9);
    }

    #[test]
    fn group_allows_single_positive_member() {
        // in = 3 split over e1 (cap 2) and e2 (cap 5), one edge only; max e1 + 2*e2.
        let mut p = ConstraintProgram::new(ObjectiveSense::Maximize);
        let e1 = p.add_var("e1", VarKind::Continuous, Some(2.0));
        let e2 = p.add_var("e2", VarKind::Continuous, Some(5.0));
        p.add_constraint("cons", vec![(e1, 1.0), (e2, 1.0)], ConstraintSense::Le, 3.0);
        p.exactly_one_groups.push(vec![e1, e2]);
        p.set_objective(ObjectiveSense::Maximize, vec![(e1, 3.0), (e2, 1.0)]);
        // Relaxation would take e1 = 2, e2 = 1 (value 7); single edge gives max(6, 3).
        let s = solve_mip(&p).unwrap();
        assert!((s.objective - 6.0).abs() < 1e-9, "{s:?}");
        assert_eq!(s.values[e2], 0.0);
    }

    #[test]
    fn node_limit_is_reported() {
        let mut p = ConstraintProgram::new(ObjectiveSense::Maximize);
        let ys: Vec<_> = (0..12).map(|i| p.binary(format!("y{i}"))).collect();
        // sum 2y = 11 has no integer solution, forcing a full tree.
        p.add_constraint("odd", ys.iter().map(|&y| (y, 2.0)).collect(), ConstraintSense::Eq, 11.0);
        let r = solve_mip_with(&p, &MipOptions { node_limit: 10 });
        assert_eq!(r, Err(SolverError::BudgetExceeded(10)));
    }
}
