//! Equality-chain substitution and dead-variable removal.

use std::collections::{BTreeMap, HashSet};

use crate::solver::{ConstraintProgram, ConstraintSense, LinearConstraint, VarId, VarKind};

/// How an original variable is recovered from the simplified program.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VarMap {
    /// `x = scale * y[var]`
    Var { var: VarId, scale: f64 },
    Const(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simplified {
    pub program: ConstraintProgram,
    pub map: Vec<VarMap>,
}

impl Simplified {
    /// Values of the original variables from a solution of `self.program`.
    pub fn expand(&self, values: &[f64]) -> Vec<f64> {
        self.map
            .iter()
            .map(|m| match *m {
                VarMap::Var { var, scale } => scale * values[var],
                VarMap::Const(c) => c,
            })
            .collect()
    }

    fn identity(prog: &ConstraintProgram) -> Self {
        Simplified {
            program: prog.clone(),
            map: (0..prog.variables.len())
                .map(|v| VarMap::Var { var: v, scale: 1.0 })
                .collect(),
        }
    }
}

#[derive(Clone, Copy)]
enum State {
    Root,
    Scaled(VarId, f64),
    Const(f64),
}

const COEF_TOL: f64 = 1e-12;

struct Work {
    state: Vec<State>,
    upper: Vec<Option<f64>>,
}

impl Work {
    /// Follows substitutions to a root or constant.
    fn resolve(&self, v: VarId) -> State {
        let mut scale = 1.0;
        let mut cur = v;
        loop {
            match self.state[cur] {
                State::Root => return if cur == v { State::Root } else { State::Scaled(cur, scale) },
                State::Scaled(u, s) => {
                    scale *= s;
                    cur = u;
                }
                State::Const(c) => return State::Const(scale * c),
            }
        }
    }

    /// Row terms over roots (merged, sorted) and the adjusted rhs.
    fn reduce(&self, terms: &[(VarId, f64)], rhs: f64) -> (Vec<(VarId, f64)>, f64) {
        let mut acc: BTreeMap<VarId, f64> = BTreeMap::new();
        let mut rhs = rhs;
        for &(v, a) in terms {
            match self.resolve(v) {
                State::Root => *acc.entry(v).or_default() += a,
                State::Scaled(u, s) => *acc.entry(u).or_default() += a * s,
                State::Const(c) => rhs -= a * c,
            }
        }
        let big = acc.values().fold(0.0f64, |m, a| m.max(a.abs()));
        let out = acc
            .into_iter()
            .filter(|(_, a)| a.abs() > COEF_TOL * big.max(1.0))
            .collect();
        (out, rhs)
    }

    fn tighten(&mut self, v: VarId, u: f64) {
        self.upper[v] = Some(self.upper[v].map_or(u, |w| w.min(u)));
    }
}

/// Substitutes variables pinned by two-term equalities with a positive ratio
/// (`x = s*y`) or one-term equalities (`x = c`), turns one-term inequalities
/// into bounds, and drops variables no row or objective mentions.
///
/// Binaries and exactly-one group members are never eliminated. If a
/// substitution exposes an infeasible row, the program is returned unchanged
/// and the solver reports the infeasibility.
pub fn simplify(prog: &ConstraintProgram) -> Simplified {
    let n = prog.variables.len();
    let mut protected = vec![false; n];
    for (v, var) in prog.variables.iter().enumerate() {
        protected[v] = var.kind == VarKind::Binary;
    }
    for g in &prog.exactly_one_groups {
        for &v in g {
            protected[v] = true;
        }
    }
    let mut w = Work {
        state: vec![State::Root; n],
        upper: prog.variables.iter().map(|v| v.upper).collect(),
    };
    let mut consumed = vec![false; prog.constraints.len()];

    let mut changed = true;
    while changed {
        changed = false;
        for (r, c) in prog.constraints.iter().enumerate() {
            if consumed[r] || c.sense != ConstraintSense::Eq {
                continue;
            }
            let (terms, rhs) = w.reduce(&c.terms, c.rhs);
            match terms.as_slice() {
                [] => {
                    if rhs.abs() > crate::EPS_FEAS {
                        return Simplified::identity(prog);
                    }
                    consumed[r] = true;
                }
                &[(x, a)] if !protected[x] => {
                    let val = rhs / a;
                    if val < -crate::EPS_FEAS || w.upper[x].is_some_and(|u| val > u + crate::EPS_FEAS) {
                        return Simplified::identity(prog);
                    }
                    w.state[x] = State::Const(val.max(0.0));
                    consumed[r] = true;
                    changed = true;
                }
                &[(x, a), (y, b)] if rhs.abs() <= COEF_TOL && a * b < 0.0 => {
                    // a x + b y = 0 -> x = (-b/a) y; eliminate the unprotected, higher index one.
                    let (elim, keep, s) = if !protected[y] {
                        (y, x, -a / b)
                    } else if !protected[x] {
                        (x, y, -b / a)
                    } else {
                        continue;
                    };
                    if let Some(u) = w.upper[elim] {
                        w.tighten(keep, u / s);
                    }
                    w.state[elim] = State::Scaled(keep, s);
                    consumed[r] = true;
                    changed = true;
                }
                _ => {}
            }
        }
    }

    // Remaining rows, with one-term inequalities folded into bounds.
    let mut rows: Vec<LinearConstraint> = Vec::new();
    for (r, c) in prog.constraints.iter().enumerate() {
        if consumed[r] {
            continue;
        }
        let (terms, rhs) = w.reduce(&c.terms, c.rhs);
        if terms.is_empty() {
            let ok = match c.sense {
                ConstraintSense::Le => rhs >= -crate::EPS_FEAS,
                ConstraintSense::Ge => rhs <= crate::EPS_FEAS,
                ConstraintSense::Eq => rhs.abs() <= crate::EPS_FEAS,
            };
            if !ok {
                return Simplified::identity(prog);
            }
            continue;
        }
        if let &[(x, a)] = terms.as_slice() {
            if prog.variables[x].kind == VarKind::Continuous && c.sense != ConstraintSense::Eq {
                // Normalize to a x <= rhs.
                let (a, rhs) = if c.sense == ConstraintSense::Ge { (-a, -rhs) } else { (a, rhs) };
                if a > 0.0 && rhs >= 0.0 {
                    w.tighten(x, rhs / a);
                    continue;
                }
                if a < 0.0 && rhs >= 0.0 {
                    continue;
                }
            }
        }
        rows.push(LinearConstraint {
            name: c.name.clone(),
            terms,
            sense: c.sense,
            rhs,
        });
    }
    let (obj_terms, neg_const) = w.reduce(&prog.objective.terms, 0.0);

    let mut used: HashSet<VarId> = HashSet::new();
    for row in &rows {
        used.extend(row.terms.iter().map(|t| t.0));
    }
    used.extend(obj_terms.iter().map(|t| t.0));
    for g in &prog.exactly_one_groups {
        used.extend(g.iter().copied());
    }
    for v in 0..n {
        if protected[v] && matches!(w.state[v], State::Root) {
            used.insert(v);
        }
    }

    let mut out = ConstraintProgram::new(prog.objective.sense);
    let mut new_index = vec![usize::MAX; n];
    for v in 0..n {
        if matches!(w.state[v], State::Root) && used.contains(&v) {
            let var = &prog.variables[v];
            new_index[v] = out.add_var(var.name.clone(), var.kind, w.upper[v]);
        }
    }
    for row in rows {
        let terms = row.terms.iter().map(|&(v, a)| (new_index[v], a)).collect();
        out.add_constraint(row.name, terms, row.sense, row.rhs);
    }
    out.set_objective(
        prog.objective.sense,
        obj_terms.iter().map(|&(v, a)| (new_index[v], a)).collect(),
    );
    out.objective.constant = prog.objective.constant - neg_const;
    out.exactly_one_groups = prog
        .exactly_one_groups
        .iter()
        .map(|g| g.iter().map(|&v| new_index[v]).collect())
        .collect();

    let map = (0..n)
        .map(|v| match w.resolve(v) {
            State::Root if new_index[v] != usize::MAX => VarMap::Var { var: new_index[v], scale: 1.0 },
            State::Scaled(u, s) if new_index[u] != usize::MAX => VarMap::Var { var: new_index[u], scale: s },
            State::Const(c) => VarMap::Const(c),
            _ => VarMap::Const(0.0),
        })
        .collect();
    Simplified { program: out, map }
}
