//! Rough box by directional slice expansion.

use serde::{Deserialize, Serialize};

use crate::analyzer::{AdversarialPoint, InputSpace};
use crate::{par, rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowParams {
    /// Initial half-width, as a fraction of each range.
    pub w0: f64,
    /// Shell thickness, as a fraction of each range.
    pub delta: f64,
    /// A shell is kept when at least this fraction of its samples is bad.
    pub rho_min: f64,
    /// Bad means `gap >= gamma * seed gap`.
    pub gamma: f64,
    /// Samples per shell (and in the initial cube).
    pub n_shell: usize,
    /// Times a sparse shell is halved and retried before its face freezes.
    pub refinements: u32,
}

impl Default for GrowParams {
    fn default() -> Self {
        GrowParams {
            w0: 0.02,
            delta: 0.05,
            rho_min: 0.5,
            gamma: 0.5,
            n_shell: 185,
            refinements: 2,
        }
    }
}

/// Per axis direction (`2i` is `+x_i`, `2i+1` is `-x_i`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceGrid {
    /// Growth beyond the initial cube, in input units.
    pub extent: Vec<f64>,
    /// Bad density of the last shell sampled.
    pub density: Vec<f64>,
    /// Current shell thickness, as a fraction of the range.
    pub thickness: Vec<f64>,
    pub frozen: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoughBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Every evaluated sample, kept or not.
    pub samples: Vec<(Vec<f64>, f64)>,
    pub grid: SliceGrid,
    pub rounds: usize,
    pub bad_at: f64,
}

/// Grows a box around `seed`: start from a cube of half-width `w0`, then in
/// rounds sample a shell of thickness `delta` beyond each unfrozen face and
/// extend that face when the shell is dense in bad samples. A sparse shell
/// is halved and retried up to `refinements` times before the face freezes;
/// faces at the boundary of the space freeze too.
pub fn grow_rough_subspace<F>(
    seed: &AdversarialPoint,
    space: &InputSpace,
    gap_fn: &F,
    params: &GrowParams,
    rng_seed: u64,
) -> RoughBox
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = space.dims();
    let x = &seed.x;
    let bad_at = params.gamma * seed.gap;
    let mut lo: Vec<f64> = (0..n).map(|i| (x[i] - params.w0 * space.range(i)).max(space.lo[i])).collect();
    let mut hi: Vec<f64> = (0..n).map(|i| (x[i] + params.w0 * space.range(i)).min(space.hi[i])).collect();
    let mut samples = sample_box(&lo, &hi, params.n_shell, rng_seed, &[u64::MAX], gap_fn);

    let mut grid = SliceGrid {
        extent: vec![0.0; 2 * n],
        density: vec![0.0; 2 * n],
        thickness: vec![params.delta; 2 * n],
        frozen: vec![false; 2 * n],
    };
    let at_edge = |d: usize, lo: &[f64], hi: &[f64]| {
        let i = d / 2;
        if d % 2 == 0 { hi[i] >= space.hi[i] } else { lo[i] <= space.lo[i] }
    };
    for d in 0..2 * n {
        grid.frozen[d] = at_edge(d, &lo, &hi);
    }
    let min_thickness = params.delta / 2f64.powi(params.refinements as i32) * (1.0 + 1e-9);
    let mut rounds = 0;
    while grid.frozen.iter().any(|f| !f) {
        let active: Vec<usize> = (0..2 * n).filter(|&d| !grid.frozen[d]).collect();
        // Shells are cut from the box as it stood at the start of the round.
        let shells: Vec<(Vec<f64>, Vec<f64>)> = active
            .iter()
            .map(|&d| {
                let i = d / 2;
                let step = grid.thickness[d] * space.range(i);
                let (mut slo, mut shi) = (lo.clone(), hi.clone());
                if d % 2 == 0 {
                    slo[i] = hi[i];
                    shi[i] = (hi[i] + step).min(space.hi[i]);
                } else {
                    shi[i] = lo[i];
                    slo[i] = (lo[i] - step).max(space.lo[i]);
                }
                (slo, shi)
            })
            .collect();
        let mut extend = vec![false; active.len()];
        for (k, &d) in active.iter().enumerate() {
            let (slo, shi) = &shells[k];
            let shell = sample_box(slo, shi, params.n_shell, rng_seed, &[d as u64, rounds as u64], gap_fn);
            let bad = shell.iter().filter(|(_, g)| *g >= bad_at).count();
            grid.density[d] = bad as f64 / shell.len().max(1) as f64;
            samples.extend(shell);
            if grid.density[d] >= params.rho_min {
                extend[k] = true;
            } else if grid.thickness[d] > min_thickness {
                grid.thickness[d] /= 2.0;
            } else {
                grid.frozen[d] = true;
            }
        }
        for (k, &d) in active.iter().enumerate() {
            if !extend[k] {
                continue;
            }
            let i = d / 2;
            if d % 2 == 0 {
                grid.extent[d] += shells[k].1[i] - hi[i];
                hi[i] = shells[k].1[i];
            } else {
                grid.extent[d] += lo[i] - shells[k].0[i];
                lo[i] = shells[k].0[i];
            }
        }
        for &d in &active {
            if at_edge(d, &lo, &hi) {
                grid.frozen[d] = true;
            }
        }
        rounds += 1;
    }
    RoughBox { lo, hi, samples, grid, rounds, bad_at }
}

/// `count` uniform samples of `[lo, hi]`, sample `k` from substream
/// `(seed, "grow", tags.., k)`.
fn sample_box<F>(lo: &[f64], hi: &[f64], count: usize, seed: u64, tags: &[u64], gap_fn: &F) -> Vec<(Vec<f64>, f64)>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let space = InputSpace {
        lo: lo.to_vec(),
        hi: hi.to_vec(),
        labels: Vec::new(),
    };
    par::map_range(count, |k| {
        let mut t = tags.to_vec();
        t.push(k as u64);
        let x = space.sample(&mut rng::named(seed, "grow", &t));
        let g = gap_fn(&x);
        (x, g)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyzer::Strategy;

    fn seed(x: Vec<f64>, gap: f64) -> AdversarialPoint {
        AdversarialPoint { x, gap, strategy: Strategy::Grid, evaluations: 0 }
    }

    #[test]
    fn step_function_box() {
        let space = InputSpace::unit(1);
        let gap = |x: &[f64]| if (0.4..=0.6).contains(&x[0]) { 1.0 } else { 0.0 };
        let r = grow_rough_subspace(&seed(vec![0.5], 1.0), &space, &gap, &GrowParams::default(), 7);
        assert!(r.lo[0] >= 0.35 - 1e-12 && r.hi[0] <= 0.65 + 1e-12, "{:?} {:?}", r.lo, r.hi);
        assert!(r.lo[0] <= 0.45 && r.hi[0] >= 0.55);
        assert!(r.grid.frozen.iter().all(|&f| f));
    }

    #[test]
    fn constant_gap_fills_space() {
        let space = InputSpace::unit(2);
        let gap = |_: &[f64]| 2.0;
        let r = grow_rough_subspace(&seed(vec![0.3, 0.6], 2.0), &space, &gap, &GrowParams::default(), 1);
        assert_eq!((r.lo, r.hi), (vec![0.0, 0.0], vec![1.0, 1.0]));
    }
}
