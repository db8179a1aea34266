use serde::{Deserialize, Serialize};

use super::SolverError;

pub type VarId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    /// Continuous, `x >= 0`.
    Continuous,
    /// `x ∈ {0, 1}`.
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintSense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

impl ConstraintSense {
    pub fn symbol(self) -> &'static str {
        match self {
            ConstraintSense::Le => "<=",
            ConstraintSense::Eq => "=",
            ConstraintSense::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub sense: ConstraintSense,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn lhs(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, a)| a * values[v]).sum()
    }

    /// Amount by which `values` violate this row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.lhs(values);
        match self.sense {
            ConstraintSense::Le => (lhs - self.rhs).max(0.0),
            ConstraintSense::Ge => (self.rhs - lhs).max(0.0),
            ConstraintSense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveSense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub sense: ObjectiveSense,
    pub terms: Vec<(VarId, f64)>,
    #[serde(default)]
    pub constant: f64,
}

impl Objective {
    pub fn value(&self, values: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * values[v]).sum::<f64>()
    }
}

/// Solver input: variables, linear rows, exactly-one groups and an objective.
///
/// An exactly-one group lets at most one of its members be positive; together
/// with a conservation row over the members this means "all flow leaves on a
/// single edge" and degenerates to "no edge" when the inflow is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintProgram {
    pub variables: Vec<Variable>,
    pub constraints: Vec<LinearConstraint>,
    #[serde(default)]
    pub exactly_one_groups: Vec<Vec<VarId>>,
    pub objective: Objective,
}

impl Default for ConstraintProgram {
    fn default() -> Self {
        ConstraintProgram::new(ObjectiveSense::Maximize)
    }
}

impl ConstraintProgram {
    pub fn new(sense: ObjectiveSense) -> Self {
        ConstraintProgram {
            variables: Vec::new(),
            constraints: Vec::new(),
            exactly_one_groups: Vec::new(),
            objective: Objective {
                sense,
                terms: Vec::new(),
                constant: 0.0,
            },
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, upper: Option<f64>) -> VarId {
        self.variables.push(Variable {
            name: name.into(),
            kind,
            upper,
        });
        self.variables.len() - 1
    }

    pub fn continuous(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, VarKind::Continuous, None)
    }

    pub fn binary(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, VarKind::Binary, None)
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(VarId, f64)>,
        sense: ConstraintSense,
        rhs: f64,
    ) {
        self.constraints.push(LinearConstraint {
            name: name.into(),
            terms,
            sense,
            rhs,
        });
    }

    pub fn set_objective(&mut self, sense: ObjectiveSense, terms: Vec<(VarId, f64)>) {
        self.objective = Objective {
            sense,
            terms,
            constant: 0.0,
        };
    }

    pub fn has_discrete(&self) -> bool {
        !self.exactly_one_groups.is_empty()
            || self.variables.iter().any(|v| v.kind == VarKind::Binary)
    }

    /// Upper bound of variable `v` after accounting for binaries.
    pub fn upper_bound(&self, v: VarId) -> Option<f64> {
        let var = &self.variables[v];
        match var.kind {
            VarKind::Binary => Some(var.upper.map_or(1.0, |u| u.min(1.0))),
            VarKind::Continuous => var.upper,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let n = self.variables.len();
        let check = |terms: &[(VarId, f64)], what: &str| -> Result<(), SolverError> {
            for &(v, a) in terms {
                if v >= n {
                    return Err(SolverError::InvalidProgram(format!(
                        "{what} references unknown variable {v}"
                    )));
                }
                if !a.is_finite() {
                    return Err(SolverError::InvalidProgram(format!(
                        "{what} has non-finite coefficient"
                    )));
                }
            }
            Ok(())
        };
        for c in &self.constraints {
            check(&c.terms, &format!("constraint '{}'", c.name))?;
            if !c.rhs.is_finite() {
                return Err(SolverError::InvalidProgram(format!(
                    "constraint '{}' has non-finite rhs",
                    c.name
                )));
            }
        }
        check(&self.objective.terms, "objective")?;
        for (g, members) in self.exactly_one_groups.iter().enumerate() {
            if let Some(&v) = members.iter().find(|&&v| v >= n) {
                return Err(SolverError::InvalidProgram(format!(
                    "group {g} references unknown variable {v}"
                )));
            }
        }
        for var in &self.variables {
            if let Some(u) = var.upper {
                if !(u >= 0.0) {
                    return Err(SolverError::InvalidProgram(format!(
                        "variable '{}' has invalid upper bound {u}",
                        var.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Largest violation of any row, bound, or group by `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let rows = self
            .constraints
            .iter()
            .map(|c| c.violation(values))
            .fold(0.0, f64::max);
        let bounds = (0..self.variables.len())
            .map(|v| {
                let lo = (-values[v]).max(0.0);
                let hi = self.upper_bound(v).map_or(0.0, |u| (values[v] - u).max(0.0));
                lo.max(hi)
            })
            .fold(0.0, f64::max);
        rows.max(bounds)
    }
}
