//! Scenario files and the gap functions built from them.

use serde::{Deserialize, Serialize};

use super::{
    gap_value, k_shortest_paths, optimal_te, optimal_vbp, run_dp, run_ff, Allocation, Demand, GapMode,
    HeuristicError, Instance, Link, Model, Orientation, TeInstance, VbpInstance,
};

/// Default number of candidate paths per demand.
pub const DEFAULT_K_PATHS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandSpec {
    pub src: String,
    pub dst: String,
    /// Explicit paths as node sequences; generated when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<Vec<Vec<String>>>,
    /// Index of the pinning path within `paths`.
    #[serde(default)]
    pub shortest: usize,
    /// Default demand value for `run-heuristic`.
    #[serde(default)]
    pub value: f64,
    /// Search interval; defaults to `[0, largest link capacity]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeScenario {
    pub nodes: Vec<String>,
    pub links: Vec<Link>,
    pub demands: Vec<DemandSpec>,
    pub threshold: f64,
    #[serde(default = "default_k")]
    pub k_paths: usize,
    #[serde(default = "relative")]
    pub gap_mode: GapMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VbpScenario {
    /// Default ball sizes for `run-heuristic`; their count fixes the dimension.
    pub sizes: Vec<f64>,
    /// Bin capacities.
    pub bins: Vec<f64>,
    #[serde(default)]
    pub open_extra: bool,
    /// Search interval for every ball; defaults to `[0, smallest bin]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_bounds: Option<[f64; 2]>,
    #[serde(default)]
    pub gap_mode: GapMode,
}

fn default_k() -> usize {
    DEFAULT_K_PATHS
}

fn relative() -> GapMode {
    GapMode::Relative
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    Te(TeScenario),
    Vbp(VbpScenario),
}

/// TE gap problem: inputs are the demand vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TeProblem {
    pub instance: TeInstance,
    pub bounds: Vec<(f64, f64)>,
    pub defaults: Vec<f64>,
    pub mode: GapMode,
}

/// VBP gap problem: inputs are the (single-dimension) ball sizes. Gap
/// evaluation always lets First-Fit open extra bins so that every input in
/// the box is defined.
#[derive(Debug, Clone, PartialEq)]
pub struct VbpProblem {
    pub bins: Vec<f64>,
    pub open_extra: bool,
    pub bounds: Vec<(f64, f64)>,
    pub defaults: Vec<f64>,
    pub mode: GapMode,
}

/// One heuristic/benchmark pair over a box of inputs.
#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    Te(TeProblem),
    Vbp(VbpProblem),
}

/// Both sides of one evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub heuristic: f64,
    pub benchmark: f64,
    pub gap: f64,
    pub heuristic_alloc: Allocation,
    pub benchmark_alloc: Allocation,
}

impl TeScenario {
    pub fn into_problem(self) -> Result<TeProblem, HeuristicError> {
        let mut demands = Vec::with_capacity(self.demands.len());
        let cap_max = self.links.iter().map(|l| l.capacity).fold(0.0, f64::max);
        let mut bounds = Vec::new();
        let mut defaults = Vec::new();
        let mut inst = TeInstance {
            nodes: self.nodes,
            links: self.links,
            demands: Vec::new(),
            threshold: self.threshold,
        };
        for (k, spec) in self.demands.into_iter().enumerate() {
            let paths = match &spec.paths {
                Some(ps) => ps
                    .iter()
                    .map(|p| inst.path_from_nodes(p))
                    .collect::<Result<Vec<_>, _>>()?,
                None => k_shortest_paths(&inst.links, &spec.src, &spec.dst, self.k_paths),
            };
            let [lo, hi] = spec.bounds.unwrap_or([0.0, cap_max]);
            if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
                return Err(HeuristicError::Invalid(format!("demand {k} has bounds [{lo}, {hi}]")));
            }
            bounds.push((lo, hi));
            defaults.push(spec.value);
            demands.push(Demand {
                src: spec.src,
                dst: spec.dst,
                paths,
                shortest: spec.shortest,
            });
        }
        inst.demands = demands;
        inst.validate()?;
        Ok(TeProblem {
            instance: inst,
            bounds,
            defaults,
            mode: self.gap_mode,
        })
    }
}

impl VbpScenario {
    pub fn into_problem(self) -> Result<VbpProblem, HeuristicError> {
        let cap_min = self.bins.iter().copied().fold(f64::INFINITY, f64::min);
        let [lo, hi] = self.size_bounds.unwrap_or([0.0, cap_min]);
        if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
            return Err(HeuristicError::Invalid(format!("size bounds [{lo}, {hi}]")));
        }
        if let Some(i) = self.sizes.iter().position(|&s| !(s >= lo && s <= hi)) {
            return Err(HeuristicError::Invalid(format!("ball {i} size {} outside [{lo}, {hi}]", self.sizes[i])));
        }
        let p = VbpProblem {
            bounds: vec![(lo, hi); self.sizes.len()],
            defaults: self.sizes,
            bins: self.bins,
            open_extra: self.open_extra,
            mode: self.gap_mode,
        };
        p.instance(&p.defaults, p.open_extra).validate()?;
        Ok(p)
    }
}

impl VbpProblem {
    pub fn instance(&self, sizes: &[f64], open_extra: bool) -> VbpInstance {
        VbpInstance::scalar(sizes, &self.bins, open_extra)
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario, HeuristicError> {
        serde_json::from_str(text).map_err(|e| HeuristicError::Invalid(format!("scenario: {e}")))
    }

    pub fn into_problem(self) -> Result<Problem, HeuristicError> {
        match self {
            Scenario::Te(s) => s.into_problem().map(Problem::Te),
            Scenario::Vbp(s) => s.into_problem().map(Problem::Vbp),
        }
    }
}

impl Problem {
    pub fn from_json(text: &str) -> Result<Problem, HeuristicError> {
        Scenario::from_json(text)?.into_problem()
    }

    pub fn dims(&self) -> usize {
        self.bounds().len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        match self {
            Problem::Te(p) => &p.bounds,
            Problem::Vbp(p) => &p.bounds,
        }
    }

    pub fn defaults(&self) -> &[f64] {
        match self {
            Problem::Te(p) => &p.defaults,
            Problem::Vbp(p) => &p.defaults,
        }
    }

    pub fn mode(&self) -> GapMode {
        match self {
            Problem::Te(p) => p.mode,
            Problem::Vbp(p) => p.mode,
        }
    }

    pub fn set_mode(&mut self, mode: GapMode) {
        match self {
            Problem::Te(p) => p.mode = mode,
            Problem::Vbp(p) => p.mode = mode,
        }
    }

    /// Dimension labels: demand endpoints or ball names.
    pub fn labels(&self) -> Vec<String> {
        match self {
            Problem::Te(p) => (0..p.instance.demands.len()).map(|k| p.instance.demand_label(k)).collect(),
            Problem::Vbp(p) => (0..p.bounds.len()).map(|i| format!("B{i}")).collect(),
        }
    }

    pub fn orientation(&self) -> Orientation {
        match self {
            Problem::Te(_) => Orientation::Maximize,
            Problem::Vbp(_) => Orientation::Minimize,
        }
    }

    pub fn models(&self) -> (Model, Model) {
        match self {
            Problem::Te(_) => (Model::Dp, Model::OptTe),
            Problem::Vbp(_) => (Model::Ff, Model::OptVbp),
        }
    }

    pub fn names(&self) -> (&'static str, &'static str) {
        match self {
            Problem::Te(_) => ("DP", "OPT"),
            Problem::Vbp(_) => ("FF", "OPT"),
        }
    }

    /// Smallest gap that counts as adversarial, by default.
    pub fn default_min_gap(&self) -> f64 {
        match self.mode() {
            GapMode::Relative => 0.05,
            GapMode::Absolute => match self {
                Problem::Te(p) => 0.05 * p.bounds.iter().map(|b| b.1).fold(0.0, f64::max),
                Problem::Vbp(_) => 1.0,
            },
        }
    }

    /// The concrete instance evaluated at `x` (gap semantics).
    pub fn instance_at(&self, x: &[f64]) -> Instance {
        match self {
            Problem::Te(p) => Instance::Te(p.instance.clone()),
            Problem::Vbp(p) => Instance::Vbp(p.instance(x, true)),
        }
    }

    /// Runs the heuristic and benchmark on `x` with the scenario's own
    /// bin policy (for reporting).
    pub fn run(&self, x: &[f64], open_extra: bool) -> Result<Outcome, HeuristicError> {
        let (h, b, ha, ba) = match self {
            Problem::Te(p) => {
                let dp = run_dp(&p.instance, x)?;
                let opt = optimal_te(&p.instance, x)?;
                (dp.total, opt.total, Allocation::Te(dp), Allocation::Te(opt))
            }
            Problem::Vbp(p) => {
                let inst = p.instance(x, open_extra);
                let (ff, _) = run_ff(&inst)?;
                let opt = if ff.bins_used == inst.volume_lower_bound() {
                    ff.clone()
                } else {
                    optimal_vbp(&inst)?
                };
                (ff.bins_used as f64, opt.bins_used as f64, Allocation::Vbp(ff), Allocation::Vbp(opt))
            }
        };
        Ok(Outcome {
            heuristic: h,
            benchmark: b,
            gap: gap_value(h, b, self.mode(), self.orientation()),
            heuristic_alloc: ha,
            benchmark_alloc: ba,
        })
    }

    /// Full evaluation at `x` under gap semantics.
    pub fn outcome(&self, x: &[f64]) -> Result<Outcome, HeuristicError> {
        self.run(x, true)
    }

    /// Gap at `x`; inputs the heuristics reject score zero.
    pub fn gap(&self, x: &[f64]) -> f64 {
        self.outcome(x).map_or(0.0, |o| o.gap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIVE_NODE: &str = r#"{
        "kind": "te",
        "nodes": ["1", "2", "3", "4", "5"],
        "links": [
            {"from": "1", "to": "2", "capacity": 100},
            {"from": "2", "to": "3", "capacity": 100},
            {"from": "1", "to": "4", "capacity": 50},
            {"from": "4", "to": "5", "capacity": 50},
            {"from": "5", "to": "3", "capacity": 50}
        ],
        "demands": [
            {"src": "1", "dst": "2", "value": 100},
            {"src": "1", "dst": "3", "value": 50},
            {"src": "1", "dst": "4"},
            {"src": "1", "dst": "5"},
            {"src": "2", "dst": "3", "value": 100},
            {"src": "4", "dst": "3"},
            {"src": "4", "dst": "5"},
            {"src": "5", "dst": "3"}
        ],
        "threshold": 50
    }"#;

    #[test]
    fn te_scenario_matches_builtin() {
        let p = Problem::from_json(FIVE_NODE).unwrap();
        let Problem::Te(te) = &p else { panic!() };
        assert_eq!(te.instance, super::super::five_node_instance());
        let o = p.outcome(p.defaults()).unwrap();
        assert_eq!((o.heuristic, o.benchmark), (150.0, 250.0));
        assert!((o.gap - 0.4).abs() < 1e-12);
        assert_eq!(p.bounds()[0], (0.0, 100.0));
    }

    #[test]
    fn vbp_scenario() {
        let p = Problem::from_json(r#"{"kind":"vbp","sizes":[0.01,0.49,0.51,0.51],"bins":[1,1,1]}"#).unwrap();
        let o = p.run(p.defaults(), false).unwrap();
        assert_eq!((o.heuristic, o.benchmark, o.gap), (3.0, 2.0, 1.0));
        // Four large balls need a fourth bin; gap semantics open it.
        assert_eq!(p.gap(&[0.6, 0.6, 0.6, 0.6]), 0.0);
        assert_eq!(p.labels(), vec!["B0", "B1", "B2", "B3"]);
    }

    #[test]
    fn rejects_bad_scenarios() {
        assert!(Problem::from_json(r#"{"kind":"vbp","sizes":[2.0],"bins":[1]}"#).is_err());
        assert!(Problem::from_json(r#"{"kind":"tsp"}"#).is_err());
        assert!(Problem::from_json(r#"{"kind":"vbp","sizes":[],"bins":[1],"extra":1}"#).is_err());
    }
}
