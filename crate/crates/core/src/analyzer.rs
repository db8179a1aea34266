//! Single adversarial inputs: a seeded search for a point whose gap is at
//! least `min_gap`, steering clear of regions already explained.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::subspace::Subspace;
use crate::{par, rng};

/// Slack allowed when testing polytope rows.
pub const EPS_MEM: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("input space needs at least one dimension")]
    Empty,
    #[error("dimension {0}: bad interval [{1}, {2}]")]
    BadInterval(usize, f64, f64),
    #[error("{0} labels for {1} dimensions")]
    Labels(usize, usize),
}

/// Box of candidate inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSpace {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub labels: Vec<String>,
}

impl InputSpace {
    pub fn new(bounds: &[(f64, f64)], labels: Vec<String>) -> Result<Self, SpaceError> {
        if bounds.is_empty() {
            return Err(SpaceError::Empty);
        }
        if labels.len() != bounds.len() {
            return Err(SpaceError::Labels(labels.len(), bounds.len()));
        }
        for (i, &(l, h)) in bounds.iter().enumerate() {
            if !(l <= h) || !l.is_finite() || !h.is_finite() {
                return Err(SpaceError::BadInterval(i, l, h));
            }
        }
        Ok(InputSpace {
            lo: bounds.iter().map(|b| b.0).collect(),
            hi: bounds.iter().map(|b| b.1).collect(),
            labels,
        })
    }

    /// Unlabelled unit cube `[0, 1]^n`.
    pub fn unit(n: usize) -> Self {
        let labels = (0..n).map(|i| format!("x{i}")).collect();
        InputSpace::new(&vec![(0.0, 1.0); n], labels).expect("valid cube")
    }

    pub fn dims(&self) -> usize {
        self.lo.len()
    }

    pub fn range(&self, i: usize) -> f64 {
        self.hi[i] - self.lo[i]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dims() && x.iter().enumerate().all(|(i, &v)| v >= self.lo[i] && v <= self.hi[i])
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lo[i], self.hi[i]);
        }
    }

    pub fn sample<R: Rng>(&self, r: &mut R) -> Vec<f64> {
        (0..self.dims())
            .map(|i| if self.hi[i] > self.lo[i] { r.random_range(self.lo[i]..=self.hi[i]) } else { self.lo[i] })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Grid,
    PatternSearch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialPoint {
    pub x: Vec<f64>,
    pub gap: f64,
    pub strategy: Strategy,
    pub evaluations: usize,
}

/// True iff `x` satisfies every row of both systems of `sub`.
pub fn membership(x: &[f64], sub: &Subspace) -> bool {
    sub.contains(x)
}

/// Regions the search must avoid, with a counter of how often candidates
/// fell inside each one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusionSet {
    pub regions: Vec<Subspace>,
    pub revisits: Vec<u32>,
    pub cap: u32,
}

impl Default for ExclusionSet {
    fn default() -> Self {
        ExclusionSet::new(3)
    }
}

impl ExclusionSet {
    pub fn new(cap: u32) -> Self {
        ExclusionSet {
            regions: Vec::new(),
            revisits: Vec::new(),
            cap,
        }
    }

    pub fn push(&mut self, sub: Subspace) {
        self.regions.push(sub);
        self.revisits.push(0);
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    /// Index of the first region containing `x`.
    pub fn hit(&self, x: &[f64]) -> Option<usize> {
        self.regions.iter().position(|r| r.contains(x))
    }

    /// Regions whose counter reached the cap.
    pub fn saturated(&self) -> impl Iterator<Item = usize> + '_ {
        self.revisits.iter().enumerate().filter(|(_, &c)| c >= self.cap).map(|(i, _)| i)
    }

    fn record(&mut self, hits: &[usize]) {
        for &r in hits {
            self.revisits[r] = (self.revisits[r] + 1).min(self.cap);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyzerParams {
    /// Gap evaluations allowed.
    pub budget: usize,
    pub min_gap: f64,
    /// Grid points per dimension are capped at this.
    pub grid_max: usize,
    /// Largest dimension for exhaustive grids.
    pub grid_dims: usize,
    /// Uniform starting points for pattern search.
    pub starts: usize,
    /// Best starts refined by pattern search.
    pub refine: usize,
}

impl Default for AnalyzerParams {
    fn default() -> Self {
        AnalyzerParams {
            budget: 2000,
            min_gap: 1.0,
            grid_max: 101,
            grid_dims: 3,
            starts: 64,
            refine: 4,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("no input with gap >= {min_gap} found in {evaluations} evaluations (best {best_gap})")]
pub struct NotFound {
    pub evaluations: usize,
    pub best_gap: f64,
    pub min_gap: f64,
}

/// Every evaluated point, in evaluation order.
pub type Trace = Vec<(Vec<f64>, f64)>;

pub fn find_adversarial<F>(
    space: &InputSpace,
    gap_fn: &F,
    exclusions: &mut ExclusionSet,
    params: &AnalyzerParams,
    seed: u64,
) -> Result<AdversarialPoint, NotFound>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    find_adversarial_traced(space, gap_fn, exclusions, params, seed).0
}

fn grid_size(n: usize, params: &AnalyzerParams) -> Option<usize> {
    if n > params.grid_dims {
        return None;
    }
    let mut g = params.grid_max;
    while g >= 2 && g.checked_pow(n as u32).is_none_or(|t| t > params.budget) {
        g -= 1;
    }
    (g >= 2).then_some(g)
}

/// As [`find_adversarial`], also returning the trace of evaluated points.
pub fn find_adversarial_traced<F>(
    space: &InputSpace,
    gap_fn: &F,
    exclusions: &mut ExclusionSet,
    params: &AnalyzerParams,
    seed: u64,
) -> (Result<AdversarialPoint, NotFound>, Trace)
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = space.dims();
    let mut trace = Trace::new();
    let strategy;
    if let Some(g) = grid_size(n, params) {
        strategy = Strategy::Grid;
        let total = g.pow(n as u32);
        let points: Vec<Vec<f64>> = (0..total)
            .map(|mut idx| {
                (0..n)
                    .map(|i| {
                        let k = idx % g;
                        idx /= g;
                        space.lo[i] + space.range(i) * k as f64 / (g - 1) as f64
                    })
                    .collect()
            })
            .collect();
        let (kept, hits) = split_excluded(points, exclusions);
        exclusions.record(&hits);
        let gaps = par::map_slice(&kept, |x| gap_fn(x));
        trace.extend(kept.into_iter().zip(gaps));
    } else {
        strategy = Strategy::PatternSearch;
        let budget = params.budget.max(1);
        let starts_n = params.starts.clamp(1, budget);
        let mut starts = Vec::with_capacity(starts_n);
        let mut hits = Vec::new();
        for s in 0..starts_n {
            let mut r = rng::named(seed, "analyzer-start", &[s as u64]);
            for _ in 0..100 {
                let x = space.sample(&mut r);
                match exclusions.hit(&x) {
                    Some(h) => hits.push(h),
                    None => {
                        starts.push(x);
                        break;
                    }
                }
            }
        }
        let gaps = par::map_slice(&starts, |x| gap_fn(x));
        let mut order: Vec<usize> = (0..starts.len()).collect();
        order.sort_by(|&a, &b| gaps[b].total_cmp(&gaps[a]).then(a.cmp(&b)));
        trace.extend(starts.iter().cloned().zip(gaps.iter().copied()));
        let refine = params.refine.clamp(1, starts.len().max(1)).min(starts.len());
        let share = (budget.saturating_sub(trace.len())) / refine.max(1);
        let snapshot = exclusions.clone();
        let runs = par::map_range(refine, |k| {
            let s = order[k];
            pattern_search(space, gap_fn, &snapshot, starts[s].clone(), gaps[s], share)
        });
        for (t, h) in runs {
            trace.extend(t);
            hits.extend(h);
        }
        exclusions.record(&hits);
    }
    let best = trace
        .iter()
        .enumerate()
        .filter(|(_, (_, g))| g.is_finite())
        .max_by(|(i, a), (j, b)| a.1.total_cmp(&b.1).then(j.cmp(i)))
        .map(|(_, (x, g))| (x.clone(), *g));
    let result = match best {
        Some((x, g)) if g >= params.min_gap => {
            let x = center_on_plateau(space, gap_fn, exclusions, x, g, &mut trace);
            Ok(AdversarialPoint {
                x,
                gap: g,
                strategy,
                evaluations: trace.len(),
            })
        }
        other => Err(NotFound {
            evaluations: trace.len(),
            best_gap: other.map_or(f64::NEG_INFINITY, |(_, g)| g),
            min_gap: params.min_gap,
        }),
    };
    (result, trace)
}

/// Steps per side when centering, and their size as a fraction of the range.
const CENTER_STEPS: usize = 50;
const CENTER_STEP: f64 = 0.01;

/// Moves `x` to the middle of the run of points along each axis whose gap
/// stays at `g`, so that piecewise-constant gaps yield seeds away from the
/// edge of their region. Every probe is appended to `trace`.
fn center_on_plateau<F>(
    space: &InputSpace,
    gap_fn: &F,
    ex: &ExclusionSet,
    mut x: Vec<f64>,
    g: f64,
    trace: &mut Trace,
) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let same = |v: f64| v >= g - 1e-12 * g.abs().max(1.0);
    for i in 0..space.dims() {
        let h = CENTER_STEP * space.range(i);
        if h <= 0.0 {
            continue;
        }
        let mut reach = [0usize; 2];
        for (side, dir) in [1.0, -1.0].into_iter().enumerate() {
            for k in 1..=CENTER_STEPS {
                let v = x[i] + dir * h * k as f64;
                if v > space.hi[i] || v < space.lo[i] {
                    break;
                }
                let mut y = x.clone();
                y[i] = v;
                if ex.hit(&y).is_some() {
                    break;
                }
                let gy = gap_fn(&y);
                trace.push((y, gy));
                if !same(gy) {
                    break;
                }
                reach[side] = k;
            }
        }
        // Midpoint rounded onto a probed point.
        let shift = (reach[0] as i64 - reach[1] as i64) / 2;
        x[i] += h * shift as f64;
    }
    x
}

fn split_excluded(points: Vec<Vec<f64>>, ex: &ExclusionSet) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut kept = Vec::with_capacity(points.len());
    let mut hits = Vec::new();
    for x in points {
        match ex.hit(&x) {
            Some(h) => hits.push(h),
            None => kept.push(x),
        }
    }
    (kept, hits)
}

/// Coordinate pattern search: try +/- step along each axis, move on strict
/// improvement, halve the step from 25% down to 0.1% of the range.
fn pattern_search<F>(
    space: &InputSpace,
    gap_fn: &F,
    ex: &ExclusionSet,
    start: Vec<f64>,
    start_gap: f64,
    budget: usize,
) -> (Trace, Vec<usize>)
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = space.dims();
    let mut trace = Trace::new();
    let mut hits = Vec::new();
    let (mut x, mut gx) = (start, start_gap);
    let mut frac = 0.25;
    'outer: while frac >= 0.001 - 1e-12 {
        let mut improved = false;
        for i in 0..n {
            for dir in [1.0, -1.0] {
                if trace.len() >= budget {
                    break 'outer;
                }
                let mut y = x.clone();
                y[i] = (y[i] + dir * frac * space.range(i)).clamp(space.lo[i], space.hi[i]);
                if y[i] == x[i] {
                    continue;
                }
                if let Some(h) = ex.hit(&y) {
                    hits.push(h);
                    continue;
                }
                let gy = gap_fn(&y);
                trace.push((y.clone(), gy));
                if gy > gx {
                    x = y;
                    gx = gy;
                    improved = true;
                }
            }
        }
        if !improved {
            frac /= 2.0;
        }
    }
    (trace, hits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_finds_step() {
        let space = InputSpace::unit(1);
        let gap = |x: &[f64]| if (0.4..=0.6).contains(&x[0]) { 1.0 } else { 0.0 };
        let p = find_adversarial(&space, &gap, &mut ExclusionSet::default(), &AnalyzerParams::default(), 1).unwrap();
        assert_eq!(p.strategy, Strategy::Grid);
        assert_eq!(p.gap, 1.0);
        assert!((0.4..=0.6).contains(&p.x[0]));
    }

    #[test]
    fn pattern_search_climbs() {
        let space = InputSpace::unit(5);
        let gap = |x: &[f64]| -x.iter().map(|v| (v - 0.3) * (v - 0.3)).sum::<f64>();
        let params = AnalyzerParams { min_gap: -1e-3, ..Default::default() };
        let p = find_adversarial(&space, &gap, &mut ExclusionSet::default(), &params, 3).unwrap();
        assert_eq!(p.strategy, Strategy::PatternSearch);
        assert!(p.x.iter().all(|v| (v - 0.3).abs() < 0.02), "{:?}", p.x);
        assert!(p.evaluations <= params.budget);
    }

    #[test]
    fn not_found_and_exclusions() {
        let space = InputSpace::unit(1);
        let zero = |_: &[f64]| 0.0;
        let err = find_adversarial(&space, &zero, &mut ExclusionSet::default(), &AnalyzerParams::default(), 0);
        assert!(err.is_err());

        let gap = |x: &[f64]| if x[0] <= 0.5 { 1.0 } else { 0.5 };
        let mut ex = ExclusionSet::default();
        ex.push(Subspace::from_box(&[0.0], &[0.5], vec!["x0".into()]));
        let params = AnalyzerParams { min_gap: 0.5, ..Default::default() };
        let p = find_adversarial(&space, &gap, &mut ex, &params, 0).unwrap();
        assert!(p.x[0] > 0.5);
        assert_eq!(ex.revisits, vec![3]);
    }

    #[test]
    fn trace_is_reproducible() {
        let space = InputSpace::unit(4);
        let gap = |x: &[f64]| (x[0] * 7.0).sin() + x[1] * x[2] - x[3];
        let run = || find_adversarial_traced(&space, &gap, &mut ExclusionSet::default(), &AnalyzerParams::default(), 42).1;
        assert_eq!(run(), run());
    }
}
