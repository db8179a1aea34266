//! Vector bin packing: First-Fit and the exact assignment MILP.

use serde::{Deserialize, Serialize};

use super::HeuristicError;
use crate::solver::{solve_mip, ConstraintProgram, ConstraintSense, ObjectiveSense, SolveStatus};

/// Slack allowed when testing whether a ball fits, so that sizes such as
/// 0.49 + 0.51 fill a unit bin exactly.
pub const FIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VbpInstance {
    /// Ball sizes, one vector of `D` dimensions per ball.
    pub sizes: Vec<Vec<f64>>,
    /// Bin capacities, one vector of `D` dimensions per bin.
    pub bins: Vec<Vec<f64>>,
    /// When set, First-Fit opens further bins shaped like the last one.
    #[serde(default)]
    pub open_extra: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VbpAllocation {
    /// Bin of each ball.
    pub assignment: Vec<usize>,
    pub bins_used: usize,
}

/// One (ball, bin) step of First-Fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FfStep {
    /// `C_j - Y_i - load_j`, per dimension.
    pub residual: Vec<f64>,
    pub fits: bool,
    /// No earlier bin took the ball.
    pub not_placed: bool,
    /// `fits && not_placed`.
    pub first_fit: bool,
}

/// `steps[i][j]` for every ball and every bin open when the ball arrived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FfTrace {
    pub steps: Vec<Vec<FfStep>>,
}

impl VbpInstance {
    /// Single-dimension instance.
    pub fn scalar(sizes: &[f64], bins: &[f64], open_extra: bool) -> Self {
        VbpInstance {
            sizes: sizes.iter().map(|&s| vec![s]).collect(),
            bins: bins.iter().map(|&c| vec![c]).collect(),
            open_extra,
        }
    }

    pub fn dims(&self) -> usize {
        self.bins.first().map_or(1, Vec::len)
    }

    pub fn validate(&self) -> Result<(), HeuristicError> {
        let bad = |m: String| Err(HeuristicError::Invalid(m));
        if self.bins.is_empty() {
            return bad("at least one bin is required".into());
        }
        let d = self.dims();
        for (j, c) in self.bins.iter().enumerate() {
            if c.len() != d || c.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                return bad(format!("bin {j} has bad capacity {c:?}"));
            }
        }
        for (i, y) in self.sizes.iter().enumerate() {
            if y.len() != d || y.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                return bad(format!("ball {i} has bad size {y:?}"));
            }
        }
        Ok(())
    }

    fn bin_capacity(&self, j: usize) -> &[f64] {
        &self.bins[j.min(self.bins.len() - 1)]
    }

    /// Bins that could ever be used: the configured ones, or one per ball
    /// when extra bins may be opened.
    pub fn bin_limit(&self) -> usize {
        if self.open_extra {
            self.bins.len().max(self.sizes.len())
        } else {
            self.bins.len()
        }
    }

    pub fn volume_lower_bound(&self) -> usize {
        let d = self.dims();
        (0..d)
            .map(|k| {
                let total: f64 = self.sizes.iter().map(|y| y[k]).sum();
                let cap = self.bins[0][k];
                ((total / cap) - FIT_TOL).ceil().max(0.0) as usize
            })
            .max()
            .unwrap_or(0)
    }
}

fn fits(residual: &[f64]) -> bool {
    residual.iter().all(|&r| r >= -FIT_TOL)
}

/// First-Fit in ball order.
pub fn run_ff(inst: &VbpInstance) -> Result<(VbpAllocation, FfTrace), HeuristicError> {
    inst.validate()?;
    let d = inst.dims();
    let mut loads: Vec<Vec<f64>> = vec![vec![0.0; d]; inst.bins.len()];
    let mut assignment = Vec::with_capacity(inst.sizes.len());
    let mut steps = Vec::with_capacity(inst.sizes.len());
    for (i, y) in inst.sizes.iter().enumerate() {
        let mut row = Vec::new();
        let mut chosen = None;
        let mut j = 0;
        loop {
            if j == loads.len() {
                if chosen.is_some() || !inst.open_extra {
                    break;
                }
                loads.push(vec![0.0; d]);
            }
            let cap = inst.bin_capacity(j);
            let residual: Vec<f64> = (0..d).map(|k| cap[k] - y[k] - loads[j][k]).collect();
            let f = fits(&residual);
            let not_placed = chosen.is_none();
            let first = f && not_placed;
            if first {
                chosen = Some(j);
            }
            row.push(FfStep {
                residual,
                fits: f,
                not_placed,
                first_fit: first,
            });
            j += 1;
        }
        let Some(j) = chosen else {
            return Err(HeuristicError::Unplaceable(i));
        };
        for k in 0..d {
            loads[j][k] += y[k];
        }
        assignment.push(j);
        steps.push(row);
    }
    let bins_used = count_used(&assignment);
    Ok((VbpAllocation { assignment, bins_used }, FfTrace { steps }))
}

fn count_used(assignment: &[usize]) -> usize {
    let mut seen: Vec<usize> = assignment.to_vec();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

/// Builds the assignment MILP with `m` bins: `x_ij` ball-in-bin, `y_j` bin
/// open. The `y` variables come first, then `x` row-major, so `x_ij` is
/// variable `m + i*m + j`.
pub fn vbp_program(inst: &VbpInstance, m: usize) -> ConstraintProgram {
    build_program(inst, m, None)
}

/// With `open`, the first `open` bins are forced open.
fn build_program(inst: &VbpInstance, m: usize, open: Option<usize>) -> ConstraintProgram {
    let n = inst.sizes.len();
    let d = inst.dims();
    let mut p = ConstraintProgram::new(ObjectiveSense::Minimize);
    let y: Vec<usize> = (0..m).map(|j| p.binary(format!("y{j}"))).collect();
    let x: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..m).map(|j| p.binary(format!("x{i}_{j}"))).collect())
        .collect();
    let identical = (0..m).all(|j| inst.bin_capacity(j) == inst.bin_capacity(0));
    for j in 0..open.unwrap_or(0).min(m) {
        p.add_constraint(format!("force{j}"), vec![(y[j], 1.0)], ConstraintSense::Eq, 1.0);
    }
    for i in 0..n {
        // With identical bins, ball i only needs bins 0..=i.
        let allowed = if identical { (i + 1).min(m) } else { m };
        let terms = (0..allowed).map(|j| (x[i][j], 1.0)).collect();
        p.add_constraint(format!("assign{i}"), terms, ConstraintSense::Eq, 1.0);
        for j in allowed..m {
            p.variables[x[i][j]].upper = Some(0.0);
        }
    }
    for j in 0..m {
        let cap = inst.bin_capacity(j);
        for k in 0..d {
            let mut terms: Vec<(usize, f64)> = (0..n)
                .filter(|&i| inst.sizes[i][k] > 0.0)
                .map(|i| (x[i][j], inst.sizes[i][k]))
                .collect();
            terms.push((y[j], -(cap[k] + FIT_TOL)));
            p.add_constraint(format!("cap{j}_{k}"), terms, ConstraintSense::Le, 0.0);
        }
        for i in 0..n {
            if inst.sizes[i].iter().all(|&s| s == 0.0) {
                p.add_constraint(format!("open{i}_{j}"), vec![(x[i][j], 1.0), (y[j], -1.0)], ConstraintSense::Le, 0.0);
            }
        }
        if identical && j + 1 < m {
            p.add_constraint(format!("order{j}"), vec![(y[j + 1], 1.0), (y[j], -1.0)], ConstraintSense::Le, 0.0);
        }
    }
    p.set_objective(ObjectiveSense::Minimize, y.iter().map(|&v| (v, 1.0)).collect());
    p
}

fn read_assignment(values: &[f64], n: usize, m: usize) -> Vec<usize> {
    (0..n)
        .map(|i| {
            (0..m)
                .find(|&j| values[m + i * m + j] > 0.5)
                .expect("each ball is assigned")
        })
        .collect()
}

/// Minimum number of bins, by branch-and-bound on the assignment MILP.
///
/// Balls are solved largest first (the optimum does not depend on order).
/// With identical bins the bin count is searched upward from the volume
/// bound: each step asks the MILP for a packing into exactly that many open
/// bins, and First-Fit's count closes the range. Otherwise one MILP over
/// all configured bins is solved.
pub fn optimal_vbp(inst: &VbpInstance) -> Result<VbpAllocation, HeuristicError> {
    inst.validate()?;
    let n = inst.sizes.len();
    if n == 0 {
        return Ok(VbpAllocation { assignment: vec![], bins_used: 0 });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let total = |i: usize| inst.sizes[i].iter().sum::<f64>();
    order.sort_by(|&a, &b| total(b).total_cmp(&total(a)).then(a.cmp(&b)));
    let sorted = VbpInstance {
        sizes: order.iter().map(|&i| inst.sizes[i].clone()).collect(),
        bins: inst.bins.clone(),
        open_extra: inst.open_extra,
    };
    let unsort = |a: Vec<usize>| {
        let mut out = vec![0; n];
        for (pos, &i) in order.iter().enumerate() {
            out[i] = a[pos];
        }
        out
    };
    let ff = run_ff(inst).ok().map(|(a, _)| a);
    let identical = inst.bins.iter().all(|c| c == &inst.bins[0]);
    if identical {
        let limit = inst.bin_limit();
        let upper = ff.as_ref().map_or(limit, |a| a.bins_used);
        for m in inst.volume_lower_bound().max(1)..upper.min(limit + 1) {
            let sol = solve_mip(&build_program(&sorted, m, Some(m)))?;
            if sol.status == SolveStatus::Optimal {
                let assignment = unsort(read_assignment(&sol.values, n, m));
                return Ok(VbpAllocation { bins_used: count_used(&assignment), assignment });
            }
        }
        return ff.ok_or_else(|| HeuristicError::Infeasible("no packing fits the bins".into()));
    }
    let m = inst.bin_limit();
    let sol = solve_mip(&build_program(&sorted, m, None))?;
    if sol.status != SolveStatus::Optimal {
        return Err(HeuristicError::Infeasible("no packing fits the bins".into()));
    }
    let assignment = unsort(read_assignment(&sol.values, n, m));
    Ok(VbpAllocation {
        bins_used: count_used(&assignment),
        assignment,
    })
}

/// A 17-ball instance where FF needs 9 unit bins and OPT needs 8.
pub const FF17_SIZES: [f64; 17] = [
    0.3, 0.8, 0.2, 0.4, 0.7, 0.7, 0.15, 0.85, 0.25, 0.25, 0.3, 0.75, 0.75, 0.6, 0.12, 0.4, 0.4,
];
