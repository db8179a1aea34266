//! Sample sizes (DKW), the Wilcoxon signed-rank test, Kendall's tau trend
//! test, and the inside-vs-outside significance check for subspaces.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::analyzer::InputSpace;
use crate::subspace::Subspace;
use crate::{par, rng};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("argument out of range: {0}")]
    Domain(String),
    #[error("all differences are zero")]
    AllZero,
    #[error("rejection sampling accepted {accepted} of {draws} draws")]
    SamplingFailure { accepted: usize, draws: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    #[default]
    Greater,
    Less,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    NormalApprox,
}

/// Smallest `n` with `2 exp(-2 n eps^2) <= delta`.
pub fn dkw_samples(epsilon: f64, delta: f64) -> Result<usize, StatsError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(StatsError::Domain(format!("epsilon {epsilon} not in (0, 1)")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(StatsError::Domain(format!("delta {delta} not in (0, 1)")));
    }
    let n = ((2.0 / delta).ln() / (2.0 * epsilon * epsilon)).ceil();
    Ok((n as usize).max(1))
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

fn upper_tail(z: f64) -> f64 {
    (1.0 - standard_normal().cdf(z)).clamp(0.0, 1.0)
}

/// Differences this close to zero count as zero.
pub const ZERO_TOL: f64 = 1e-12;

fn tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= ZERO_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Midranks (1-based) of `values`, with tie group sizes.
fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && tied(values[idx[i]], values[idx[j]]) {
            j += 1;
        }
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = r;
        }
        ties.push(j - i);
        i = j;
    }
    (ranks, ties)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Nonzero differences used.
    pub n: usize,
    /// Sum of the ranks of positive differences.
    pub w: f64,
    pub p: f64,
    pub method: Method,
}

/// Largest `n` for which the exact null distribution is used.
pub const WILCOXON_EXACT_MAX: usize = 20;

/// Signed-rank test of `differences` against a zero median.
pub fn wilcoxon_signed_rank(differences: &[f64], alternative: Alternative) -> Result<WilcoxonResult, StatsError> {
    let n = differences.iter().filter(|d| d.abs() > ZERO_TOL).count();
    let method = if n <= WILCOXON_EXACT_MAX { Method::Exact } else { Method::NormalApprox };
    wilcoxon_with(differences, alternative, method)
}

/// As [`wilcoxon_signed_rank`] with the method forced.
pub fn wilcoxon_with(differences: &[f64], alternative: Alternative, method: Method) -> Result<WilcoxonResult, StatsError> {
    if differences.iter().any(|d| !d.is_finite()) {
        return Err(StatsError::Domain("non-finite difference".into()));
    }
    let nonzero: Vec<f64> = differences.iter().copied().filter(|d| d.abs() > ZERO_TOL).collect();
    if nonzero.is_empty() {
        return Err(StatsError::AllZero);
    }
    let n = nonzero.len();
    let abs: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let (ranks, ties) = midranks(&abs);
    let w: f64 = nonzero.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let p = match method {
        Method::Exact => exact_signed_rank_p(&ranks, w, alternative),
        Method::NormalApprox => {
            let nf = n as f64;
            let mean = nf * (nf + 1.0) / 4.0;
            let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
            let sd = (nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term).sqrt();
            if sd == 0.0 {
                1.0
            } else {
                match alternative {
                    Alternative::Greater => upper_tail((w - mean - 0.5) / sd),
                    Alternative::Less => 1.0 - upper_tail((w - mean + 0.5) / sd),
                    Alternative::TwoSided => (2.0 * upper_tail(((w - mean).abs() - 0.5) / sd)).min(1.0),
                }
            }
        }
    };
    Ok(WilcoxonResult { n, w, p: p.clamp(0.0, 1.0), method })
}

/// Null distribution of W over all sign patterns, counted by dynamic
/// programming on doubled (integer) midranks.
fn exact_signed_rank_p(ranks: &[f64], w: f64, alternative: Alternative) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0.0f64; total + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let patterns = 2f64.powi(ranks.len() as i32);
    let w2 = (2.0 * w).round() as usize;
    let ge: f64 = counts[w2..].iter().sum::<f64>() / patterns;
    let le: f64 = counts[..=w2].iter().sum::<f64>() / patterns;
    match alternative {
        Alternative::Greater => ge,
        Alternative::Less => le,
        Alternative::TwoSided => (2.0 * ge.min(le)).min(1.0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KendallResult {
    pub tau: f64,
    pub p: f64,
    pub method: Method,
    pub n: usize,
}

/// Largest `n` for which the permutation distribution is enumerated.
pub const KENDALL_EXACT_MAX: usize = 10;

fn sign(v: f64) -> i64 {
    if v.abs() <= ZERO_TOL * v.abs().max(1.0) {
        0
    } else if v > 0.0 {
        1
    } else {
        -1
    }
}

/// Concordant minus discordant pairs.
fn kendall_s(x: &[f64], y: &[f64]) -> i64 {
    let mut s = 0;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            s += sign(x[j] - x[i]) * sign(y[j] - y[i]);
        }
    }
    s
}

fn tie_groups(v: &[f64]) -> Vec<usize> {
    midranks(v).1.into_iter().filter(|&t| t > 1).collect()
}

/// Kendall's tau-b between feature values and gaps, with a one- or
/// two-sided p value (exact permutation test for small `n`).
pub fn kendall_trend(pairs: &[(f64, f64)], alternative: Alternative) -> Result<KendallResult, StatsError> {
    let n = pairs.len();
    if n < 2 {
        return Err(StatsError::Domain(format!("{n} pairs; at least 2 needed")));
    }
    if pairs.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
        return Err(StatsError::Domain("non-finite pair".into()));
    }
    let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let method = if n <= KENDALL_EXACT_MAX { Method::Exact } else { Method::NormalApprox };
    let tx = tie_groups(&x);
    let ty = tie_groups(&y);
    let pairs_of = |t: &[usize]| t.iter().map(|&t| (t * (t - 1) / 2) as f64).sum::<f64>();
    let n0 = (n * (n - 1) / 2) as f64;
    let (n1, n2) = (pairs_of(&tx), pairs_of(&ty));
    if n1 == n0 || n2 == n0 {
        return Ok(KendallResult { tau: 0.0, p: 1.0, method, n });
    }
    let s = kendall_s(&x, &y);
    let tau = s as f64 / ((n0 - n1) * (n0 - n2)).sqrt();
    let p = match method {
        Method::Exact => {
            let (mut ge, mut le, mut abs_ge, mut total) = (0u64, 0u64, 0u64, 0u64);
            let mut perm = y.clone();
            for_each_permutation(&mut perm, &mut |py| {
                let sp = kendall_s(&x, py);
                total += 1;
                ge += u64::from(sp >= s);
                le += u64::from(sp <= s);
                abs_ge += u64::from(sp.abs() >= s.abs());
            });
            let t = total as f64;
            match alternative {
                Alternative::Greater => ge as f64 / t,
                Alternative::Less => le as f64 / t,
                Alternative::TwoSided => abs_ge as f64 / t,
            }
        }
        Method::NormalApprox => {
            let nf = n as f64;
            let sum3 = |t: &[usize], f: &dyn Fn(f64) -> f64| t.iter().map(|&t| f(t as f64)).sum::<f64>();
            let a = |t: f64| t * (t - 1.0) * (2.0 * t + 5.0);
            let b = |t: f64| t * (t - 1.0) * (t - 2.0);
            let c = |t: f64| t * (t - 1.0);
            let var = (nf * (nf - 1.0) * (2.0 * nf + 5.0) - sum3(&tx, &a) - sum3(&ty, &a)) / 18.0
                + sum3(&tx, &b) * sum3(&ty, &b) / (9.0 * nf * (nf - 1.0) * (nf - 2.0))
                + sum3(&tx, &c) * sum3(&ty, &c) / (2.0 * nf * (nf - 1.0));
            let sd = var.sqrt();
            let sf = s as f64;
            match alternative {
                Alternative::Greater => upper_tail((sf - 1.0) / sd),
                Alternative::Less => 1.0 - upper_tail((sf + 1.0) / sd),
                Alternative::TwoSided => (2.0 * upper_tail((sf.abs() - 1.0) / sd)).min(1.0),
            }
        }
    };
    Ok(KendallResult { tau, p: p.clamp(0.0, 1.0), method, n })
}

/// Heap's algorithm; visits all `v.len()!` orderings.
fn for_each_permutation(v: &mut [f64], visit: &mut dyn FnMut(&[f64])) {
    let n = v.len();
    let mut c = vec![0usize; n];
    visit(v);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                v.swap(0, i);
            } else {
                v.swap(c[i], i);
            }
            visit(v);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignificanceParams {
    pub n_pairs: usize,
    /// Push past the reflected facet, as a fraction of each dimension's range.
    pub margin: f64,
    pub alpha: f64,
}

impl Default for SignificanceParams {
    fn default() -> Self {
        SignificanceParams {
            n_pairs: 185,
            margin: 0.025,
            alpha: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceReport {
    /// Pairs drawn (including those with zero difference).
    pub n_pairs: usize,
    /// Pairs with a nonzero difference.
    pub n_used: usize,
    pub w: f64,
    pub p: f64,
    pub method: Method,
    pub alpha: f64,
    pub keep: bool,
    pub mean_inside: f64,
    pub mean_outside: f64,
}

/// Uniform draws from the subspace by rejection from its sampling box. Draw `i` uses its own substream.
pub fn sample_inside(
    sub: &Subspace,
    space: &InputSpace,
    count: usize,
    seed: u64,
    stream: &str,
) -> Result<Vec<Vec<f64>>, StatsError> {
    let (lo, hi) = sub.sampling_box(space);
    if lo.iter().zip(&hi).any(|(l, h)| l > h) {
        return Err(StatsError::SamplingFailure { accepted: 0, draws: 0 });
    }
    let mut out = Vec::with_capacity(count);
    let mut draws = 0usize;
    let batch = count.max(16);
    while out.len() < count {
        let start = draws;
        let pts = par::map_range(batch, |k| {
            let mut r = rng::named(seed, stream, &[(start + k) as u64]);
            let x: Vec<f64> = lo.iter().zip(&hi).map(|(&l, &h)| if h > l { r.random_range(l..=h) } else { l }).collect();
            sub.contains(&x).then_some(x)
        });
        draws += batch;
        out.extend(pts.into_iter().flatten().take(count - out.len()));
        let rate = out.len() as f64 / draws as f64;
        if (draws >= 10 * count && rate < 0.01) || draws >= 1000 * count.max(1) {
            if out.len() < count {
                return Err(StatsError::SamplingFailure { accepted: out.len(), draws });
            }
        }
    }
    Ok(out)
}

/// Outside partner of `x`: reflect across the nearest facet that can be
/// left without leaving the space, then step `margin` further. Works in
/// coordinates scaled to the unit box. `None` when every facet lies on the
/// space boundary.
pub fn reflect_outside(x: &[f64], sub: &Subspace, space: &InputSpace, margin: f64) -> Option<Vec<f64>> {
    let n = x.len();
    let range: Vec<f64> = (0..n).map(|i| space.range(i).max(f64::MIN_POSITIVE)).collect();
    let mut facets: Vec<(f64, usize, Vec<f64>)> = sub
        .rows()
        .enumerate()
        .filter_map(|(r, (a, c))| {
            // Row in unit coordinates: (a * range) . u <= c - a . lo.
            let scaled: Vec<f64> = a.iter().zip(&range).map(|(ai, ri)| ai * ri).collect();
            let norm = scaled.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return None;
            }
            let slack = (c - a.iter().zip(x).map(|(ai, xi)| ai * xi).sum::<f64>()) / norm;
            Some((slack.max(0.0), r, scaled.into_iter().map(|v| v / norm).collect()))
        })
        .collect();
    facets.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for (slack, _, dir) in facets {
        let step = 2.0 * slack + margin;
        let y: Vec<f64> = (0..n)
            .map(|i| (x[i] + step * dir[i] * range[i]).clamp(space.lo[i], space.hi[i]))
            .collect();
        if !sub.contains(&y) {
            return Some(y);
        }
    }
    None
}

/// Paired inside/outside test: is the gap inside `sub` larger than just
/// outside it?
pub fn check_significance<F>(
    sub: &Subspace,
    space: &InputSpace,
    gap_fn: &F,
    params: &SignificanceParams,
    seed: u64,
) -> Result<SignificanceReport, StatsError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if !(params.alpha > 0.0 && params.alpha < 1.0) || params.n_pairs == 0 {
        return Err(StatsError::Domain("alpha must be in (0, 1) and n_pairs positive".into()));
    }
    let inside = sample_inside(sub, space, params.n_pairs, seed, "significance")?;
    let pairs: Vec<Option<(f64, f64)>> = par::map_slice(&inside, |x| {
        reflect_outside(x, sub, space, params.margin).map(|y| (gap_fn(x), gap_fn(&y)))
    });
    let pairs: Vec<(f64, f64)> = pairs.into_iter().flatten().collect();
    let m = pairs.len().max(1) as f64;
    let mean_inside = pairs.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_outside = pairs.iter().map(|p| p.1).sum::<f64>() / m;
    let diffs: Vec<f64> = pairs.iter().map(|(a, b)| a - b).collect();
    let report = |n_used, w, p, method| SignificanceReport {
        n_pairs: params.n_pairs,
        n_used,
        w,
        p,
        method,
        alpha: params.alpha,
        keep: p < params.alpha,
        mean_inside,
        mean_outside,
    };
    match wilcoxon_signed_rank(&diffs, Alternative::Greater) {
        Ok(r) => Ok(report(r.n, r.w, r.p, r.method)),
        Err(StatsError::AllZero) => Ok(report(0, 0.0, 1.0, Method::Exact)),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dkw_values() {
        assert_eq!(dkw_samples(0.1, 0.05), Ok(185));
        assert_eq!(dkw_samples(0.5, 0.9), Ok(2));
        assert_eq!(dkw_samples(0.5, 0.999_999), Ok(2));
        assert!(dkw_samples(1.0, 0.05).is_err());
        assert!(dkw_samples(0.1, 0.0).is_err());
    }

    #[test]
    fn wilcoxon_small() {
        let r = wilcoxon_signed_rank(&[1.0, 2.0, 3.0], Alternative::Greater).unwrap();
        assert_eq!((r.w, r.p, r.method), (6.0, 0.125, Method::Exact));
        let r = wilcoxon_signed_rank(&[-1.0, -2.0, -3.0], Alternative::Greater).unwrap();
        assert_eq!(r.p, 1.0);
        assert_eq!(wilcoxon_signed_rank(&[0.0; 3], Alternative::Greater), Err(StatsError::AllZero));
        let r = wilcoxon_signed_rank(&[0.0, 1.0, 2.0, 3.0], Alternative::TwoSided).unwrap();
        assert_eq!((r.n, r.p), (3, 0.25));
    }

    #[test]
    fn wilcoxon_ties_use_midranks() {
        // |d| = 1, 1, 2 -> ranks 1.5, 1.5, 3; W = 1.5 + 3.
        let r = wilcoxon_signed_rank(&[1.0, -1.0, 2.0], Alternative::Greater).unwrap();
        assert_eq!(r.w, 4.5);
        // Patterns with W >= 4.5: {1.5,3} twice and {1.5,1.5,3}: 3 of 8.
        assert_eq!(r.p, 3.0 / 8.0);
    }

    #[test]
    fn kendall_cases() {
        let up: Vec<(f64, f64)> = (0..8).map(|i| (i as f64, i as f64 * 2.0)).collect();
        let r = kendall_trend(&up, Alternative::Greater).unwrap();
        assert_eq!(r.tau, 1.0);
        assert!((r.p - 1.0 / 40320.0).abs() < 1e-15);
        let flat: Vec<(f64, f64)> = (0..8).map(|i| (i as f64, 3.0)).collect();
        let r = kendall_trend(&flat, Alternative::Greater).unwrap();
        assert_eq!((r.tau, r.p), (0.0, 1.0));
        let down: Vec<(f64, f64)> = (0..8).map(|i| (i as f64, -(i as f64))).collect();
        let r = kendall_trend(&down, Alternative::Greater).unwrap();
        assert_eq!(r.tau, -1.0);
        assert!(r.p > 0.99);
    }

    #[test]
    fn kendall_normal_on_long_series() {
        let up: Vec<(f64, f64)> = (0..30).map(|i| (i as f64, (i as f64).sqrt())).collect();
        let r = kendall_trend(&up, Alternative::Greater).unwrap();
        assert_eq!(r.method, Method::NormalApprox);
        assert!(r.p < 1e-6);
    }
}
