//! Dense two-phase primal simplex with Bland's anti-cycling rule.

use super::program::{ConstraintProgram, ConstraintSense, ObjectiveSense};
use super::{Solution, SolveStatus, SolverError};
use crate::EPS_FEAS;

/// Tableau entries at or below this magnitude are never used as pivots.
pub const PIVOT_TOLERANCE: f64 = 1e-10;
const REDUCED_COST_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 200_000;

/// Solves a program without binaries or exactly-one groups.
pub fn solve_lp(prog: &ConstraintProgram) -> Result<Solution, SolverError> {
    prog.validate()?;
    if prog.has_discrete() {
        return Err(SolverError::NotContinuous);
    }
    let fixed = vec![None; prog.variables.len()];
    let out = solve_relaxation(prog, &fixed)?;
    Ok(match out.status {
        SolveStatus::Optimal => Solution {
            status: SolveStatus::Optimal,
            objective: out.objective,
            values: out.values,
            nodes: 1,
        },
        SolveStatus::Infeasible => Solution::infeasible(1),
        SolveStatus::Unbounded => Solution::unbounded(1),
    })
}

pub(crate) struct Relaxation {
    pub status: SolveStatus,
    pub objective: f64,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum ColKind {
    Structural,
    Slack,
    Artificial,
}

struct Tableau {
    rows: usize,
    width: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
    kinds: Vec<ColKind>,
    reduced: Vec<f64>,
    value: f64,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.data[r * self.width + self.width - 1]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let p = self.data[r * w + c];
        for k in 0..w {
            self.data[r * w + k] /= p;
        }
        self.data[r * w + c] = 1.0;
        let (before, rest) = self.data.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        for row in before.chunks_mut(w).chain(after.chunks_mut(w)) {
            let f = row[c];
            if f != 0.0 {
                for k in 0..w {
                    row[k] -= f * prow[k];
                }
                row[c] = 0.0;
            }
        }
        let f = self.reduced[c];
        if f != 0.0 {
            for k in 0..w - 1 {
                self.reduced[k] -= f * prow[k];
            }
            self.reduced[c] = 0.0;
            self.value += f * prow[w - 1];
        }
        self.basis[r] = c;
    }

    /// Maximizes the current reduced-cost row over the allowed columns.
    fn optimize(&mut self, allow_artificial: bool) -> Result<SolveStatus, SolverError> {
        for _ in 0..MAX_PIVOTS {
            // Bland: lowest-index improving column.
            let entering = (0..self.width - 1).find(|&j| {
                (allow_artificial || self.kinds[j] != ColKind::Artificial)
                    && self.reduced[j] > REDUCED_COST_TOL
            });
            let Some(c) = entering else {
                return Ok(SolveStatus::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, c);
                if a > PIVOT_TOLERANCE {
                    let ratio = self.rhs(r).max(0.0) / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            let tie = (ratio - lratio).abs() <= 1e-12 * (1.0 + lratio.abs());
                            if ratio < lratio && !tie || tie && self.basis[r] < self.basis[lr] {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return Ok(SolveStatus::Unbounded),
                Some((r, _)) => self.pivot(r, c),
            }
        }
        Err(SolverError::NumericalInstability(format!(
            "no convergence after {MAX_PIVOTS} pivots"
        )))
    }

    fn drop_row(&mut self, r: usize) {
        let w = self.width;
        self.data.drain(r * w..(r + 1) * w);
        self.basis.remove(r);
        self.rows -= 1;
    }
}

/// Solves the LP relaxation (binaries in `[0, 1]`, groups ignored) with the
/// given variables pinned to fixed values.
pub(crate) fn solve_relaxation(
    prog: &ConstraintProgram,
    fixed: &[Option<f64>],
) -> Result<Relaxation, SolverError> {
    let nvars = prog.variables.len();
    let mut col_of = vec![usize::MAX; nvars];
    let mut free = Vec::new();
    for v in 0..nvars {
        if fixed[v].is_none() {
            col_of[v] = free.len();
            free.push(v);
        }
    }
    let n = free.len();

    // Rows over free columns: (coefficients, sense, rhs).
    let mut rows: Vec<(Vec<(usize, f64)>, ConstraintSense, f64)> = Vec::new();
    for c in &prog.constraints {
        let mut rhs = c.rhs;
        let mut terms: Vec<(usize, f64)> = Vec::with_capacity(c.terms.len());
        for &(v, a) in &c.terms {
            match fixed[v] {
                Some(val) => rhs -= a * val,
                None => {
                    if a != 0.0 {
                        terms.push((col_of[v], a));
                    }
                }
            }
        }
        if terms.is_empty() {
            let ok = match c.sense {
                ConstraintSense::Le => rhs >= -EPS_FEAS,
                ConstraintSense::Ge => rhs <= EPS_FEAS,
                ConstraintSense::Eq => rhs.abs() <= EPS_FEAS,
            };
            if !ok {
                return Ok(Relaxation {
                    status: SolveStatus::Infeasible,
                    objective: 0.0,
                    values: Vec::new(),
                });
            }
            continue;
        }
        rows.push((terms, c.sense, rhs));
    }
    for (j, &v) in free.iter().enumerate() {
        if let Some(u) = prog.upper_bound(v) {
            rows.push((vec![(j, 1.0)], ConstraintSense::Le, u));
        }
    }

    // Normalize to nonnegative right-hand sides.
    for row in rows.iter_mut() {
        if row.2 < 0.0 {
            for t in row.0.iter_mut() {
                t.1 = -t.1;
            }
            row.2 = -row.2;
            row.1 = match row.1 {
                ConstraintSense::Le => ConstraintSense::Ge,
                ConstraintSense::Ge => ConstraintSense::Le,
                ConstraintSense::Eq => ConstraintSense::Eq,
            };
        }
    }

    let m = rows.len();
    let mut kinds = vec![ColKind::Structural; n];
    let mut slack_col = vec![None; m];
    let mut art_col = vec![None; m];
    for (i, row) in rows.iter().enumerate() {
        match row.1 {
            ConstraintSense::Le => {
                slack_col[i] = Some(kinds.len());
                kinds.push(ColKind::Slack);
            }
            ConstraintSense::Ge => {
                slack_col[i] = Some(kinds.len());
                kinds.push(ColKind::Slack);
                art_col[i] = Some(kinds.len());
                kinds.push(ColKind::Artificial);
            }
            ConstraintSense::Eq => {
                art_col[i] = Some(kinds.len());
                kinds.push(ColKind::Artificial);
            }
        }
    }
    let ncols = kinds.len();
    let width = ncols + 1;
    let mut data = vec![0.0; m * width];
    let mut basis = vec![0; m];
    for (i, row) in rows.iter().enumerate() {
        let base = i * width;
        for &(j, a) in &row.0 {
            data[base + j] += a;
        }
        match row.1 {
            ConstraintSense::Le => {
                let s = slack_col[i].unwrap();
                data[base + s] = 1.0;
                basis[i] = s;
            }
            ConstraintSense::Ge => {
                data[base + slack_col[i].unwrap()] = -1.0;
                let a = art_col[i].unwrap();
                data[base + a] = 1.0;
                basis[i] = a;
            }
            ConstraintSense::Eq => {
                let a = art_col[i].unwrap();
                data[base + a] = 1.0;
                basis[i] = a;
            }
        }
        data[base + ncols] = row.2;
    }

    let mut tab = Tableau {
        rows: m,
        width,
        data,
        basis,
        kinds,
        reduced: vec![0.0; ncols],
        value: 0.0,
    };

    // Phase 1: maximize -sum(artificials).
    if art_col.iter().any(Option::is_some) {
        for j in 0..ncols {
            tab.reduced[j] = if tab.kinds[j] == ColKind::Artificial { -1.0 } else { 0.0 };
        }
        tab.value = 0.0;
        for r in 0..m {
            if tab.kinds[tab.basis[r]] == ColKind::Artificial {
                for j in 0..ncols {
                    tab.reduced[j] += tab.at(r, j);
                }
                tab.value -= tab.rhs(r);
            }
        }
        tab.optimize(true)?;
        if tab.value < -EPS_FEAS {
            return Ok(Relaxation {
                status: SolveStatus::Infeasible,
                objective: 0.0,
                values: Vec::new(),
            });
        }
        // Drive zero-level artificials out of the basis; drop redundant rows.
        let mut r = 0;
        while r < tab.rows {
            if tab.kinds[tab.basis[r]] == ColKind::Artificial {
                let col = (0..ncols).find(|&j| {
                    tab.kinds[j] != ColKind::Artificial && tab.at(r, j).abs() > 1e-9
                });
                match col {
                    Some(j) => {
                        tab.pivot(r, j);
                        r += 1;
                    }
                    None => tab.drop_row(r),
                }
            } else {
                r += 1;
            }
        }
    }

    // Phase 2.
    let flip = match prog.objective.sense {
        ObjectiveSense::Maximize => 1.0,
        ObjectiveSense::Minimize => -1.0,
    };
    let mut cost = vec![0.0; ncols];
    for &(v, c) in &prog.objective.terms {
        if fixed[v].is_none() {
            cost[col_of[v]] += flip * c;
        }
    }
    tab.reduced = cost.clone();
    tab.value = 0.0;
    for r in 0..tab.rows {
        let cb = cost[tab.basis[r]];
        if cb != 0.0 {
            for j in 0..ncols {
                tab.reduced[j] -= cb * tab.at(r, j);
            }
            tab.value += cb * tab.rhs(r);
        }
    }
    if tab.optimize(false)? == SolveStatus::Unbounded {
        return Ok(Relaxation {
            status: SolveStatus::Unbounded,
            objective: 0.0,
            values: Vec::new(),
        });
    }

    let mut values = vec![0.0; nvars];
    for v in 0..nvars {
        if let Some(val) = fixed[v] {
            values[v] = val;
        }
    }
    for r in 0..tab.rows {
        let c = tab.basis[r];
        if c < n {
            let x = tab.rhs(r);
            values[free[c]] = if x.abs() < 1e-11 { 0.0 } else { x };
        }
    }
    for x in values.iter_mut() {
        if *x < 0.0 && *x > -EPS_FEAS {
            *x = 0.0;
        }
    }

    // Never hand back a point that does not satisfy the original rows.
    for c in &prog.constraints {
        let viol = c.violation(&values);
        if viol > EPS_FEAS * (1.0 + c.rhs.abs()) {
            return Err(SolverError::NumericalInstability(format!(
                "constraint '{}' violated by {viol:e} at the reported optimum",
                c.name
            )));
        }
    }
    Ok(Relaxation {
        status: SolveStatus::Optimal,
        objective: prog.objective.value(&values),
        values,
    })
}
