//! The find / grow / refine / test / exclude loop.

use serde::{Deserialize, Serialize};

use super::{
    extract_path_predicates, fit_regression_tree, grow_rough_subspace, Features, GrowParams, SampleStats, Subspace,
    TreeParams,
};
use crate::analyzer::{find_adversarial, AdversarialPoint, AnalyzerParams, ExclusionSet, InputSpace};
use crate::rng;
use crate::stats::{check_significance, SignificanceParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerateParams {
    pub analyzer: AnalyzerParams,
    pub grow: GrowParams,
    pub tree: TreeParams,
    pub significance: SignificanceParams,
    pub max_subspaces: usize,
    /// Find attempts, kept or not.
    pub max_rounds: usize,
    pub revisit_cap: u32,
}

impl Default for GenerateParams {
    fn default() -> Self {
        GenerateParams {
            analyzer: AnalyzerParams::default(),
            grow: GrowParams::default(),
            tree: TreeParams::default(),
            significance: SignificanceParams::default(),
            max_subspaces: 5,
            max_rounds: 20,
            revisit_cap: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum RoundOutcome {
    Kept { index: usize, p: f64 },
    Insignificant { p: f64 },
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub seed: AdversarialPoint,
    #[serde(flatten)]
    pub outcome: RoundOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateReport {
    pub subspaces: Vec<Subspace>,
    /// Growth samples behind each kept subspace.
    pub samples: Vec<Vec<(Vec<f64>, f64)>>,
    pub rounds: Vec<Round>,
    pub exclusions: ExclusionSet,
    /// Why the loop ended.
    pub stop: String,
}

/// Repeats: find an adversarial point outside everything excluded so far,
/// grow a box around it, cut it with the tree path of the seed, and test it.
/// Significant subspaces are returned and excluded; for insignificant ones
/// only a box of half-width `delta` around the seed is excluded.
pub fn generate_subspaces<F>(space: &InputSpace, gap_fn: &F, params: &GenerateParams, seed: u64) -> GenerateReport
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let mut exclusions = ExclusionSet::new(params.revisit_cap);
    let mut subspaces = Vec::new();
    let mut samples_out = Vec::new();
    let mut rounds = Vec::new();
    let mut stop = String::from("round limit");
    for round in 0..params.max_rounds {
        if subspaces.len() >= params.max_subspaces {
            stop = "subspace limit".into();
            break;
        }
        let r = round as u64;
        let found = find_adversarial(space, gap_fn, &mut exclusions, &params.analyzer, rng::derive(seed, &[rng::tag("find"), r]));
        let point = match found {
            Ok(p) => p,
            Err(e) => {
                stop = e.to_string();
                break;
            }
        };
        let built = build_subspace(&point, space, gap_fn, params, rng::derive(seed, &[r]));
        match built {
            Ok((sub, samples)) if sub.significance.as_ref().is_some_and(|s| s.keep) => {
                let p = sub.significance.as_ref().map_or(1.0, |s| s.p);
                rounds.push(Round { seed: point, outcome: RoundOutcome::Kept { index: subspaces.len(), p } });
                exclusions.push(sub.clone());
                subspaces.push(sub);
                samples_out.push(samples);
            }
            Ok((sub, _)) => {
                let p = sub.significance.as_ref().map_or(1.0, |s| s.p);
                rounds.push(Round { seed: point.clone(), outcome: RoundOutcome::Insignificant { p } });
                exclusions.push(seed_ball(&point, space, params.grow.delta));
            }
            Err(reason) => {
                rounds.push(Round { seed: point.clone(), outcome: RoundOutcome::Failed { reason } });
                exclusions.push(seed_ball(&point, space, params.grow.delta));
            }
        }
    }
    if subspaces.len() >= params.max_subspaces {
        stop = "subspace limit".into();
    }
    GenerateReport {
        subspaces,
        samples: samples_out,
        rounds,
        exclusions,
        stop,
    }
}

/// Grows, refines and tests one subspace around `point`. The result carries
/// its significance report whether or not it passed; `Err` when no tree or
/// test could be computed.
pub fn build_subspace<F>(
    point: &AdversarialPoint,
    space: &InputSpace,
    gap_fn: &F,
    params: &GenerateParams,
    seed: u64,
) -> Result<(Subspace, Vec<(Vec<f64>, f64)>), String>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let rough = grow_rough_subspace(point, space, gap_fn, &params.grow, rng::derive(seed, &[rng::tag("grow")]));
    let mut sub = Subspace::from_box(&rough.lo, &rough.hi, space.labels.clone());
    let features = Features::raw_and_sum(&space.labels);
    let tree = fit_regression_tree(&rough.samples, &features, &params.tree).map_err(|e| e.to_string())?;
    let (t, v) = extract_path_predicates(&tree, &point.x);
    sub.t = t;
    sub.v = v;
    sub.stats = SampleStats::of(&rough.samples, &sub, rough.bad_at);
    sub.seed = Some(point.clone());
    let report = check_significance(&sub, space, gap_fn, &params.significance, rng::derive(seed, &[rng::tag("significance")]))
        .map_err(|e| e.to_string())?;
    sub.significance = Some(report);
    Ok((sub, rough.samples))
}

fn seed_ball(p: &AdversarialPoint, space: &InputSpace, delta: f64) -> Subspace {
    let n = space.dims();
    let lo: Vec<f64> = (0..n).map(|i| (p.x[i] - delta * space.range(i)).max(space.lo[i])).collect();
    let hi: Vec<f64> = (0..n).map(|i| (p.x[i] + delta * space.range(i)).min(space.hi[i])).collect();
    let mut s = Subspace::from_box(&lo, &hi, space.labels.clone());
    s.seed = Some(p.clone());
    s
}
