//! Pipeline configuration files.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use xplain_core::analyzer::AnalyzerParams;
use xplain_core::generalizer::{FamilyKind, InstanceFamily, Predicate};
use xplain_core::heuristics::{GapMode, Problem, Scenario};
use xplain_core::stats::{dkw_samples, SignificanceParams};
use xplain_core::subspace::{GenerateParams, GrowParams, TreeParams};

/// Bad or unreadable configuration; maps to exit code 1.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Scenario file, relative to the config file.
    #[serde(default)]
    pub scenario: Option<PathBuf>,
    /// `dp-opt` or `ff-opt`; checked against the scenario kind.
    #[serde(default)]
    pub pair: Option<String>,
    #[serde(default)]
    pub gap_mode: Option<GapMode>,
    /// Point for `run-heuristic`; the scenario defaults otherwise.
    #[serde(default)]
    pub inputs: Option<Vec<f64>>,
    #[serde(default)]
    pub analyzer: AnalyzerSection,
    #[serde(default)]
    pub subspace: SubspaceSection,
    #[serde(default)]
    pub stats: StatsSection,
    #[serde(default)]
    pub explainer: ExplainerSection,
    #[serde(default)]
    pub generalizer: Option<GeneralizerSection>,
    /// MILP file for `encode-milp`.
    #[serde(default)]
    pub milp: Option<PathBuf>,
    /// Output directory; `--out` wins.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzerSection {
    pub budget: usize,
    /// Defaults to 5% (relative) or the problem's absolute equivalent.
    pub min_gap: Option<f64>,
    pub grid_max: usize,
    pub grid_dims: usize,
    pub starts: usize,
    pub refine: usize,
}

impl Default for AnalyzerSection {
    fn default() -> Self {
        let d = AnalyzerParams::default();
        AnalyzerSection {
            budget: d.budget,
            min_gap: None,
            grid_max: d.grid_max,
            grid_dims: d.grid_dims,
            starts: d.starts,
            refine: d.refine,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubspaceSection {
    pub w0: f64,
    pub delta: f64,
    pub rho_min: f64,
    pub gamma: f64,
    pub n_shell: usize,
    pub refinements: u32,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub max_subspaces: usize,
    pub max_rounds: usize,
    pub revisit_cap: u32,
}

impl Default for SubspaceSection {
    fn default() -> Self {
        let g = GrowParams::default();
        let t = TreeParams::default();
        let d = GenerateParams::default();
        SubspaceSection {
            w0: g.w0,
            delta: g.delta,
            rho_min: g.rho_min,
            gamma: g.gamma,
            n_shell: g.n_shell,
            refinements: g.refinements,
            max_depth: t.max_depth,
            min_leaf: t.min_leaf,
            max_subspaces: d.max_subspaces,
            max_rounds: d.max_rounds,
            revisit_cap: d.revisit_cap,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsSection {
    /// DKW accuracy; with `delta` it fixes the number of test pairs.
    pub epsilon: f64,
    pub delta: f64,
    pub alpha: f64,
    pub margin: f64,
}

impl Default for StatsSection {
    fn default() -> Self {
        let s = SignificanceParams::default();
        StatsSection {
            epsilon: 0.1,
            delta: 0.05,
            alpha: s.alpha,
            margin: s.margin,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainerSection {
    pub samples: usize,
    /// Subspace JSON file to explain.
    pub subspace: Option<PathBuf>,
    /// Grow a subspace around this point and explain it.
    pub seed_point: Option<Vec<f64>>,
}

impl Default for ExplainerSection {
    fn default() -> Self {
        ExplainerSection {
            samples: xplain_core::explainer::DEFAULT_SAMPLES,
            subspace: None,
            seed_point: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneralizerSection {
    pub family: FamilySection,
    pub predicate: Predicate,
    /// Analyzer evaluations per instance.
    #[serde(default = "default_probe_budget")]
    pub budget: usize,
}

fn default_probe_budget() -> usize {
    AnalyzerParams::default().budget
}

/// An instance family without its seed, which comes from `--seed`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySection {
    pub kind: FamilyKind,
    pub size: (usize, usize),
    pub capacity: (f64, f64),
    #[serde(default)]
    pub threshold: (f64, f64),
    pub count: usize,
}

impl FamilySection {
    pub fn with_seed(&self, seed: u64) -> InstanceFamily {
        InstanceFamily {
            kind: self.kind,
            size: self.size,
            capacity: self.capacity,
            threshold: self.threshold,
            count: self.count,
            seed,
        }
    }
}

/// A loaded config with paths resolved against its directory.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub cfg: PipelineConfig,
    pub dir: PathBuf,
}

pub fn load(path: &Path) -> Result<Loaded, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    let cfg: PipelineConfig =
        serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    cfg.check()?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { cfg, dir })
}

fn in_range(name: &str, v: f64, lo: f64, hi: f64, open_lo: bool) -> Result<(), ConfigError> {
    let ok = v.is_finite() && v <= hi && if open_lo { v > lo } else { v >= lo };
    if ok {
        Ok(())
    } else {
        let l = if open_lo { '(' } else { '[' };
        bad(format!("{name} = {v} outside {l}{lo}, {hi}]"))
    }
}

fn positive(name: &str, v: usize) -> Result<(), ConfigError> {
    if v == 0 {
        return bad(format!("{name} must be positive"));
    }
    Ok(())
}

impl PipelineConfig {
    /// Range checks on every numeric parameter.
    pub fn check(&self) -> Result<(), ConfigError> {
        let a = &self.analyzer;
        positive("analyzer.budget", a.budget)?;
        positive("analyzer.grid_max", a.grid_max)?;
        positive("analyzer.starts", a.starts)?;
        positive("analyzer.refine", a.refine)?;
        if let Some(g) = a.min_gap {
            if !g.is_finite() {
                return bad("analyzer.min_gap must be finite");
            }
        }
        let s = &self.subspace;
        in_range("subspace.w0", s.w0, 0.0, 0.5, true)?;
        in_range("subspace.delta", s.delta, 0.0, 1.0, true)?;
        in_range("subspace.rho_min", s.rho_min, 0.0, 1.0, false)?;
        in_range("subspace.gamma", s.gamma, 0.0, 1.0, true)?;
        positive("subspace.n_shell", s.n_shell)?;
        positive("subspace.max_depth", s.max_depth)?;
        positive("subspace.min_leaf", s.min_leaf)?;
        positive("subspace.max_subspaces", s.max_subspaces)?;
        positive("subspace.max_rounds", s.max_rounds)?;
        let t = &self.stats;
        in_range("stats.epsilon", t.epsilon, 0.0, 1.0, true)?;
        in_range("stats.delta", t.delta, 0.0, 1.0, true)?;
        in_range("stats.alpha", t.alpha, 0.0, 1.0, true)?;
        in_range("stats.margin", t.margin, 0.0, 0.5, false)?;
        if t.epsilon >= 1.0 || t.delta >= 1.0 || t.alpha >= 1.0 {
            return bad("stats.epsilon, stats.delta and stats.alpha must be below 1");
        }
        positive("explainer.samples", self.explainer.samples)?;
        if self.explainer.subspace.is_some() && self.explainer.seed_point.is_some() {
            return bad("explainer.subspace and explainer.seed_point are exclusive");
        }
        if let Some(g) = &self.generalizer {
            positive("generalizer.budget", g.budget)?;
            g.predicate.check().map_err(|e| ConfigError(format!("generalizer.predicate: {e}")))?;
            g.family
                .with_seed(0)
                .check()
                .map_err(|e| ConfigError(format!("generalizer.family: {e}")))?;
        }
        Ok(())
    }
}

impl Loaded {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.dir.join(p)
        }
    }

    fn read(&self, what: &str, p: &Option<PathBuf>) -> Result<(PathBuf, String), ConfigError> {
        let Some(p) = p else {
            return bad(format!("{what} is required for this command"));
        };
        let full = self.resolve(p);
        let text = std::fs::read_to_string(&full).map_err(|e| ConfigError(format!("{}: {e}", full.display())))?;
        Ok((full, text))
    }

    /// The scenario as a gap problem, with the configured mode and pair
    /// applied.
    pub fn problem(&self) -> Result<Problem, ConfigError> {
        let (path, text) = self.read("scenario", &self.cfg.scenario)?;
        let mut p = Scenario::from_json(&text)
            .and_then(Scenario::into_problem)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        if let Some(m) = self.cfg.gap_mode {
            p.set_mode(m);
        }
        if let Some(pair) = &self.cfg.pair {
            let (h, b) = p.names();
            let want = format!("{h}-{b}").to_lowercase();
            if pair.to_lowercase() != want {
                return bad(format!("pair {pair:?} does not fit this scenario ({want})"));
            }
        }
        if let Some(x) = &self.cfg.inputs {
            if x.len() != p.dims() {
                return bad(format!("inputs has {} values for {} dimensions", x.len(), p.dims()));
            }
        }
        if let Some(x) = &self.cfg.explainer.seed_point {
            if x.len() != p.dims() {
                return bad(format!("explainer.seed_point has {} values for {} dimensions", x.len(), p.dims()));
            }
        }
        Ok(p)
    }

    pub fn milp_text(&self) -> Result<(PathBuf, String), ConfigError> {
        self.read("milp", &self.cfg.milp)
    }

    pub fn subspace_text(&self) -> Result<Option<(PathBuf, String)>, ConfigError> {
        match &self.cfg.explainer.subspace {
            None => Ok(None),
            some => self.read("explainer.subspace", some).map(Some),
        }
    }

    pub fn analyzer_params(&self, problem: &Problem) -> AnalyzerParams {
        let a = &self.cfg.analyzer;
        AnalyzerParams {
            budget: a.budget,
            min_gap: a.min_gap.unwrap_or_else(|| problem.default_min_gap()),
            grid_max: a.grid_max,
            grid_dims: a.grid_dims,
            starts: a.starts,
            refine: a.refine,
        }
    }

    pub fn generate_params(&self, problem: &Problem) -> Result<GenerateParams, ConfigError> {
        let s = &self.cfg.subspace;
        let t = &self.cfg.stats;
        let n_pairs = dkw_samples(t.epsilon, t.delta).map_err(|e| ConfigError(format!("stats: {e}")))?;
        Ok(GenerateParams {
            analyzer: self.analyzer_params(problem),
            grow: GrowParams {
                w0: s.w0,
                delta: s.delta,
                rho_min: s.rho_min,
                gamma: s.gamma,
                n_shell: s.n_shell,
                refinements: s.refinements,
            },
            tree: TreeParams {
                max_depth: s.max_depth,
                min_leaf: s.min_leaf,
            },
            significance: SignificanceParams {
                n_pairs,
                margin: t.margin,
                alpha: t.alpha,
            },
            max_subspaces: s.max_subspaces,
            max_rounds: s.max_rounds,
            revisit_cap: s.revisit_cap,
        })
    }

    pub fn generalizer(&self) -> Result<&GeneralizerSection, ConfigError> {
        self.cfg
            .generalizer
            .as_ref()
            .ok_or_else(|| ConfigError("generalizer is required for this command".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<PipelineConfig, String> {
        let c: PipelineConfig = serde_json::from_str(text).map_err(|e| e.to_string())?;
        c.check().map_err(|e| e.to_string())?;
        Ok(c)
    }

    #[test]
    fn defaults_fill_in() {
        let c = parse(r#"{"scenario": "s.json"}"#).unwrap();
        assert_eq!(c.subspace.n_shell, 185);
        assert_eq!(c.explainer.samples, 3000);
        assert_eq!(dkw_samples(c.stats.epsilon, c.stats.delta).unwrap(), 185);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(parse(r#"{"stats": {"alpha": 1.5}}"#).is_err());
        assert!(parse(r#"{"subspace": {"w0": 0}}"#).is_err());
        assert!(parse(r#"{"analyzer": {"budget": 0}}"#).is_err());
        assert!(parse(r#"{"seed": 3}"#).is_err());
        assert!(parse(r#"{"explainer": {"subspace": "a.json", "seed_point": [1]}}"#).is_err());
    }
}
