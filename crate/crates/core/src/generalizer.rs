//! Cross-instance trends: generate families of instances, probe each for
//! its worst gap, and test whether an instance feature orders the gaps.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analyzer::{find_adversarial, AnalyzerParams, ExclusionSet, InputSpace};
use crate::heuristics::{DemandSpec, HeuristicError, Link, Problem, Scenario, TeScenario, VbpScenario, DEFAULT_K_PATHS};
use crate::heuristics::GapMode;
use crate::stats::{kendall_trend, Alternative, Method, StatsError};
use crate::{par, rng};

/// Fewest instances a trend is evaluated on.
pub const MIN_INSTANCES: usize = 5;

/// Written into every finding.
pub const TREND_NOTE: &str = "the predicate is checked as a one-sided Kendall rank trend between the feature and the \
largest gap found per instance, not as a universally quantified statement over all instance pairs";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeneralizeError {
    #[error("{got} instances; at least {need} needed")]
    TooFewInstances { got: usize, need: usize },
    #[error("unknown feature {0:?}")]
    UnknownFeature(String),
    #[error("feature {feature} is undefined for instance {instance}")]
    FeatureUnavailable { feature: String, instance: usize },
    #[error("alpha {0} outside (0, 1)")]
    Alpha(f64),
    #[error("bad instance family: {0}")]
    Family(String),
    #[error("generated instance {index} is invalid: {source}")]
    Invalid { index: usize, source: HeuristicError },
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendKind {
    Increasing,
    Decreasing,
}

type Extractor = fn(&Problem) -> Option<f64>;

/// Registered features, by name.
pub const FEATURES: [(&str, Extractor); 3] = [
    ("pinned_shortest_path_length", pinned_shortest_path_length),
    ("min_path_capacity", min_path_capacity),
    ("ball_size_sum", ball_size_sum),
];

/// Longest shortest path, in hops, over the demands that can be pinned.
pub fn pinned_shortest_path_length(p: &Problem) -> Option<f64> {
    let Problem::Te(te) = p else { return None };
    let inst = &te.instance;
    inst.demands
        .iter()
        .zip(&te.bounds)
        .filter(|(_, b)| b.0 <= inst.threshold)
        .filter_map(|(d, _)| d.paths.get(d.shortest).map(Vec::len))
        .max()
        .map(|h| h as f64)
}

/// Smallest bottleneck capacity over the demands' shortest paths.
pub fn min_path_capacity(p: &Problem) -> Option<f64> {
    let Problem::Te(te) = p else { return None };
    let inst = &te.instance;
    inst.demands
        .iter()
        .filter_map(|d| d.paths.get(d.shortest))
        .map(|path| path.iter().map(|&l| inst.links[l].capacity).fold(f64::INFINITY, f64::min))
        .filter(|c| c.is_finite())
        .reduce(f64::min)
}

/// Sum of the default ball sizes.
pub fn ball_size_sum(p: &Problem) -> Option<f64> {
    let Problem::Vbp(v) = p else { return None };
    Some(v.defaults.iter().sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub kind: TrendKind,
    pub feature: String,
    pub alpha: f64,
}

impl Predicate {
    pub fn new(kind: TrendKind, feature: &str, alpha: f64) -> Result<Self, GeneralizeError> {
        let p = Predicate { kind, feature: feature.to_string(), alpha };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<(), GeneralizeError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(GeneralizeError::Alpha(self.alpha));
        }
        self.extractor().map(|_| ())
    }

    fn extractor(&self) -> Result<Extractor, GeneralizeError> {
        FEATURES
            .iter()
            .find(|(n, _)| *n == self.feature)
            .map(|(_, f)| *f)
            .ok_or_else(|| GeneralizeError::UnknownFeature(self.feature.clone()))
    }

    fn alternative(&self) -> Alternative {
        match self.kind {
            TrendKind::Increasing => Alternative::Greater,
            TrendKind::Decreasing => Alternative::Less,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    /// A line of `L` links carrying one end-to-end demand and one demand
    /// per link, plus a disjoint detour of `L + 1` links. Gaps are absolute.
    TeLine,
    /// Strongly connected random digraphs with `n` nodes and `n` demands.
    TeRandom,
    /// `n` balls, up to `n` identical bins.
    VbpRandom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFamily {
    pub kind: FamilyKind,
    /// Line length, node count or ball count.
    pub size: (usize, usize),
    /// Link or bin capacities are drawn from here.
    pub capacity: (f64, f64),
    /// TE pinning thresholds are drawn from here.
    pub threshold: (f64, f64),
    pub count: usize,
    pub seed: u64,
}

impl InstanceFamily {
    pub fn check(&self) -> Result<(), GeneralizeError> {
        let bad = |m: String| Err(GeneralizeError::Family(m));
        if self.count < 2 {
            return bad(format!("count {} < 2", self.count));
        }
        if self.size.0 > self.size.1 || self.size.0 == 0 {
            return bad(format!("size range {:?}", self.size));
        }
        if self.kind == FamilyKind::TeRandom && self.size.0 < 2 {
            return bad("random graphs need at least 2 nodes".into());
        }
        for (name, (lo, hi)) in [("capacity", self.capacity), ("threshold", self.threshold)] {
            if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
                return bad(format!("{name} range [{lo}, {hi}]"));
            }
        }
        if self.capacity.1 <= 0.0 {
            return bad("capacities must be positive".into());
        }
        Ok(())
    }
}

fn draw(r: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        r.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Deterministic per seed; every scenario passes validation. Te-line sizes
/// are spread evenly over the range in increasing order; the others are
/// drawn.
pub fn generate_instances(fam: &InstanceFamily) -> Result<Vec<Scenario>, GeneralizeError> {
    fam.check()?;
    let mut out = Vec::with_capacity(fam.count);
    for i in 0..fam.count {
        let mut r = rng::named(fam.seed, "instance", &[i as u64]);
        let s = match fam.kind {
            FamilyKind::TeLine => {
                let span = fam.size.1 - fam.size.0;
                let l = fam.size.0 + (i * span + (fam.count - 1) / 2) / (fam.count - 1);
                te_line(l, fam, &mut r)
            }
            FamilyKind::TeRandom => te_random(r.random_range(fam.size.0..=fam.size.1), fam, &mut r),
            FamilyKind::VbpRandom => vbp_random(r.random_range(fam.size.0..=fam.size.1), fam, &mut r),
        };
        s.clone().into_problem().map_err(|source| GeneralizeError::Invalid { index: i, source })?;
        out.push(s);
    }
    Ok(out)
}

fn te_line(l: usize, fam: &InstanceFamily, r: &mut impl Rng) -> Scenario {
    let threshold = draw(r, fam.threshold);
    let mut nodes: Vec<String> = (0..=l).map(|i| format!("n{i}")).collect();
    let mut links = Vec::new();
    for i in 0..l {
        links.push(Link { from: nodes[i].clone(), to: nodes[i + 1].clone(), capacity: draw(r, fam.capacity) });
    }
    // The detour can carry any pinnable demand.
    let detour: Vec<String> = (1..=l).map(|i| format!("d{i}")).collect();
    let cap = draw(r, fam.capacity).max(threshold);
    let mut hop = nodes[0].clone();
    for d in detour.iter().chain(std::iter::once(&nodes[l])) {
        links.push(Link { from: hop.clone(), to: d.clone(), capacity: cap });
        hop = d.clone();
    }
    let line_path: Vec<String> = nodes.clone();
    let mut detour_path = vec![nodes[0].clone()];
    detour_path.extend(detour.iter().cloned());
    detour_path.push(nodes[l].clone());
    let mut demands = vec![DemandSpec {
        src: nodes[0].clone(),
        dst: nodes[l].clone(),
        paths: Some(vec![line_path, detour_path]),
        shortest: 0,
        value: threshold,
        bounds: None,
    }];
    for (i, link) in links.iter().take(l).enumerate() {
        demands.push(DemandSpec {
            src: nodes[i].clone(),
            dst: nodes[i + 1].clone(),
            paths: Some(vec![vec![nodes[i].clone(), nodes[i + 1].clone()]]),
            shortest: 0,
            value: link.capacity,
            bounds: None,
        });
    }
    nodes.extend(detour);
    Scenario::Te(TeScenario {
        nodes,
        links,
        demands,
        threshold,
        k_paths: DEFAULT_K_PATHS,
        gap_mode: GapMode::Absolute,
    })
}

fn te_random(n: usize, fam: &InstanceFamily, r: &mut impl Rng) -> Scenario {
    let threshold = draw(r, fam.threshold);
    let nodes: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, r.random_range(0..=i));
    }
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for w in order.windows(2) {
        pairs.push((w[0], w[1]));
        pairs.push((w[1], w[0]));
    }
    for a in 0..n {
        for b in 0..n {
            if a != b && !pairs.contains(&(a, b)) && r.random_bool(0.3) {
                pairs.push((a, b));
            }
        }
    }
    let links = pairs
        .iter()
        .map(|&(a, b)| Link { from: nodes[a].clone(), to: nodes[b].clone(), capacity: draw(r, fam.capacity) })
        .collect();
    let mut demands = Vec::new();
    let mut used = Vec::new();
    while demands.len() < n.min(n * (n - 1)) {
        let (s, t) = (r.random_range(0..n), r.random_range(0..n));
        if s == t || used.contains(&(s, t)) {
            continue;
        }
        used.push((s, t));
        demands.push(DemandSpec {
            src: nodes[s].clone(),
            dst: nodes[t].clone(),
            paths: None,
            shortest: 0,
            value: draw(r, (0.0, threshold)),
            bounds: None,
        });
    }
    Scenario::Te(TeScenario {
        nodes,
        links,
        demands,
        threshold,
        k_paths: DEFAULT_K_PATHS,
        gap_mode: GapMode::Relative,
    })
}

fn vbp_random(balls: usize, fam: &InstanceFamily, r: &mut impl Rng) -> Scenario {
    let cap = draw(r, fam.capacity);
    let bins = r.random_range(1..=balls);
    let sizes = (0..balls).map(|_| draw(r, (0.0, cap))).collect();
    Scenario::Vbp(VbpScenario {
        sizes,
        bins: vec![cap; bins],
        open_extra: true,
        size_bounds: None,
        gap_mode: GapMode::Absolute,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub instance: usize,
    pub feature: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendFinding {
    pub predicate: Predicate,
    pub tau: f64,
    pub p: f64,
    pub method: Method,
    pub holds: bool,
    pub observations: Vec<Observation>,
    pub note: String,
}

impl TrendFinding {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("finding serializes")
    }
}

/// Largest gap the analyzer finds on the problem's input box with a fixed
/// budget.
pub fn analyzer_probe(params: AnalyzerParams) -> impl Fn(&Problem, u64) -> f64 + Sync + Send {
    move |p: &Problem, seed: u64| {
        let Ok(space) = InputSpace::new(p.bounds(), p.labels()) else {
            return 0.0;
        };
        let params = AnalyzerParams { min_gap: f64::NEG_INFINITY, ..params };
        let mut ex = ExclusionSet::new(0);
        match find_adversarial(&space, &|x: &[f64]| p.gap(x), &mut ex, &params, seed) {
            Ok(a) => a.gap,
            Err(e) => e.best_gap.max(0.0),
        }
    }
}

/// Probes every instance (in parallel, substream per instance id) and tests
/// the predicate's trend over `(feature, gap)`.
pub fn evaluate_predicate<G>(
    pred: &Predicate,
    instances: &[Problem],
    gap_probe: G,
    seed: u64,
) -> Result<TrendFinding, GeneralizeError>
where
    G: Fn(&Problem, u64) -> f64 + Sync + Send,
{
    pred.check()?;
    if instances.len() < MIN_INSTANCES {
        return Err(GeneralizeError::TooFewInstances { got: instances.len(), need: MIN_INSTANCES });
    }
    let extract = pred.extractor()?;
    let features = instances
        .iter()
        .enumerate()
        .map(|(i, p)| {
            extract(p).ok_or_else(|| GeneralizeError::FeatureUnavailable { feature: pred.feature.clone(), instance: i })
        })
        .collect::<Result<Vec<f64>, _>>()?;
    let gaps = par::map_range(instances.len(), |i| gap_probe(&instances[i], rng::derive(seed, &[i as u64])));
    trend_from(pred, features.into_iter().zip(gaps).collect())
}

/// The test on already observed `(feature, gap)` pairs, in instance order.
pub fn trend_from(pred: &Predicate, pairs: Vec<(f64, f64)>) -> Result<TrendFinding, GeneralizeError> {
    pred.check()?;
    if pairs.len() < MIN_INSTANCES {
        return Err(GeneralizeError::TooFewInstances { got: pairs.len(), need: MIN_INSTANCES });
    }
    let k = kendall_trend(&pairs, pred.alternative())?;
    let sign_ok = match pred.kind {
        TrendKind::Increasing => k.tau > 0.0,
        TrendKind::Decreasing => k.tau < 0.0,
    };
    Ok(TrendFinding {
        predicate: pred.clone(),
        tau: k.tau,
        p: k.p,
        method: k.method,
        holds: sign_ok && k.p < pred.alpha,
        observations: pairs
            .into_iter()
            .enumerate()
            .map(|(instance, (feature, gap))| Observation { instance, feature, gap })
            .collect(),
        note: TREND_NOTE.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_family(count: usize) -> InstanceFamily {
        InstanceFamily {
            kind: FamilyKind::TeLine,
            size: (2, 6),
            capacity: (50.0, 100.0),
            threshold: (20.0, 40.0),
            count,
            seed: 9,
        }
    }

    fn problems(s: &[Scenario]) -> Vec<Problem> {
        s.iter().map(|s| s.clone().into_problem().unwrap()).collect()
    }

    #[test]
    fn te_line_lengths_increase() {
        let ps = problems(&generate_instances(&line_family(5)).unwrap());
        let lens: Vec<f64> = ps.iter().map(|p| pinned_shortest_path_length(p).unwrap()).collect();
        assert_eq!(lens, vec![2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn deterministic_per_seed() {
        let fam = InstanceFamily { count: 2, size: (3, 3), ..line_family(2) };
        assert_eq!(generate_instances(&fam).unwrap(), generate_instances(&fam).unwrap());
        let r = InstanceFamily { kind: FamilyKind::TeRandom, size: (3, 6), ..line_family(4) };
        assert_eq!(generate_instances(&r).unwrap(), generate_instances(&r).unwrap());
    }

    #[test]
    fn vbp_random_runs() {
        let fam = InstanceFamily {
            kind: FamilyKind::VbpRandom,
            size: (4, 8),
            capacity: (1.0, 1.0),
            threshold: (0.0, 0.0),
            count: 6,
            seed: 3,
        };
        for p in problems(&generate_instances(&fam).unwrap()) {
            let o = p.outcome(p.defaults()).unwrap();
            assert!(o.heuristic >= o.benchmark);
            assert!(ball_size_sum(&p).is_some());
        }
    }

    #[test]
    fn constant_probe_does_not_hold() {
        let pred = Predicate::new(TrendKind::Increasing, "pinned_shortest_path_length", 0.05).unwrap();
        let ps = problems(&generate_instances(&line_family(5)).unwrap());
        let f = evaluate_predicate(&pred, &ps, |_, _| 0.3, 1).unwrap();
        assert!(!f.holds);
        assert_eq!(f.p, 1.0);
        assert!(f.note.contains("Kendall"));
    }

    #[test]
    fn identity_probe_holds() {
        let pred = Predicate::new(TrendKind::Increasing, "pinned_shortest_path_length", 0.05).unwrap();
        let ps = problems(&generate_instances(&line_family(6)).unwrap());
        let f = evaluate_predicate(&pred, &ps, |p, _| pinned_shortest_path_length(p).unwrap(), 1).unwrap();
        assert_eq!(f.tau, 1.0);
        assert!(f.holds);
    }

    #[test]
    fn errors() {
        assert_eq!(Predicate::new(TrendKind::Increasing, "nope", 0.05), Err(GeneralizeError::UnknownFeature("nope".into())));
        assert_eq!(Predicate::new(TrendKind::Increasing, "ball_size_sum", 1.0), Err(GeneralizeError::Alpha(1.0)));
        let pred = Predicate::new(TrendKind::Increasing, "ball_size_sum", 0.05).unwrap();
        let ps = problems(&generate_instances(&line_family(5)).unwrap());
        assert!(matches!(evaluate_predicate(&pred, &ps[..4], |_, _| 0.0, 1), Err(GeneralizeError::TooFewInstances { .. })));
        assert!(matches!(evaluate_predicate(&pred, &ps, |_, _| 0.0, 1), Err(GeneralizeError::FeatureUnavailable { .. })));
    }
}
