//! Adversarial subspaces: a rough box grown around a seed by slice
//! expansion, refined by the path predicates of a regression tree, and
//! enumerated with exclusion until the analyzer finds nothing new.
//!
//! A subspace is the polytope `{x : A x <= C, T x <= V}` where `A = [I; -I]`
//! holds the box bounds and `(T, V)` the tree predicates.

mod generate;
mod grow;
mod tree;

pub use generate::{build_subspace, generate_subspaces, GenerateParams, GenerateReport, Round, RoundOutcome};
pub use grow::{grow_rough_subspace, GrowParams, RoughBox, SliceGrid};
pub use tree::{extract_path_predicates, fit_regression_tree, Features, RegressionTree, TreeError, TreeNode, TreeParams};

use serde::{Deserialize, Serialize};

use crate::analyzer::{AdversarialPoint, InputSpace, EPS_MEM};
use crate::stats::SignificanceReport;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct SampleStats {
    pub count: usize,
    pub bad_fraction: f64,
    pub mean_gap: f64,
}

impl SampleStats {
    /// Summary of the samples lying in `sub`; bad means `gap >= bad_at`.
    pub fn of<'a>(samples: impl IntoIterator<Item = &'a (Vec<f64>, f64)>, sub: &Subspace, bad_at: f64) -> Self {
        let (mut count, mut bad, mut sum) = (0usize, 0usize, 0.0);
        for (x, g) in samples {
            if sub.contains(x) {
                count += 1;
                bad += usize::from(*g >= bad_at);
                sum += g;
            }
        }
        let c = count.max(1) as f64;
        SampleStats {
            count,
            bad_fraction: bad as f64 / c,
            mean_gap: sum / c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subspace {
    pub dimensions: Vec<String>,
    /// Box rows `[I; -I]`.
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    /// `[upper bounds; -lower bounds]`.
    #[serde(rename = "C")]
    pub c: Vec<f64>,
    /// Tree predicate rows.
    #[serde(rename = "T")]
    pub t: Vec<Vec<f64>>,
    #[serde(rename = "V")]
    pub v: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<AdversarialPoint>,
    #[serde(default)]
    pub stats: SampleStats,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub significance: Option<SignificanceReport>,
}

impl Subspace {
    /// Box `[lo, hi]` with no tree rows.
    pub fn from_box(lo: &[f64], hi: &[f64], dimensions: Vec<String>) -> Self {
        let n = lo.len();
        let mut a = Vec::with_capacity(2 * n);
        for sign in [1.0, -1.0] {
            for i in 0..n {
                let mut row = vec![0.0; n];
                row[i] = sign;
                a.push(row);
            }
        }
        let c = hi.iter().copied().chain(lo.iter().map(|v| -v)).collect();
        Subspace {
            dimensions,
            a,
            c,
            t: Vec::new(),
            v: Vec::new(),
            seed: None,
            stats: SampleStats::default(),
            significance: None,
        }
    }

    pub fn dims(&self) -> usize {
        self.dimensions.len()
    }

    /// Box bounds read back from `(A, C)`.
    pub fn box_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.dims();
        let mut lo = vec![f64::NEG_INFINITY; n];
        let mut hi = vec![f64::INFINITY; n];
        for (row, &c) in self.a.iter().zip(&self.c) {
            for (i, &coef) in row.iter().enumerate() {
                if coef > 0.0 {
                    hi[i] = hi[i].min(c / coef);
                } else if coef < 0.0 {
                    lo[i] = lo[i].max(c / coef);
                }
            }
        }
        (lo, hi)
    }

    /// Box bounds intersected with the input space.
    pub fn clipped_box(&self, space: &InputSpace) -> (Vec<f64>, Vec<f64>) {
        let (lo, hi) = self.box_bounds();
        let lo = lo.iter().zip(&space.lo).map(|(a, b)| a.max(*b)).collect();
        let hi = hi.iter().zip(&space.hi).map(|(a, b)| a.min(*b)).collect();
        (lo, hi)
    }

    /// Smallest axis-aligned box holding the subspace that can be read off
    /// directly: the clipped box, tightened by single-variable tree rows.
    pub fn sampling_box(&self, space: &InputSpace) -> (Vec<f64>, Vec<f64>) {
        let (mut lo, mut hi) = self.clipped_box(space);
        for (row, &v) in self.t.iter().zip(&self.v) {
            let mut nz = row.iter().enumerate().filter(|(_, c)| **c != 0.0);
            let (Some((i, &coef)), None) = (nz.next(), nz.next()) else {
                continue;
            };
            if coef > 0.0 {
                hi[i] = hi[i].min(v / coef);
            } else {
                lo[i] = lo[i].max(v / coef);
            }
        }
        (lo, hi)
    }

    /// All rows, box first.
    pub fn rows(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.a
            .iter()
            .zip(&self.c)
            .chain(self.t.iter().zip(&self.v))
            .map(|(r, &c)| (r.as_slice(), c))
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dims()
            && self
                .rows()
                .all(|(r, c)| r.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() <= c + EPS_MEM)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("subspace serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyzer::membership;

    /// D_0 from the FF example: B0 <= 0.01, B1..B3 >= 0.49, with the sum
    /// and B1 predicates.
    fn d0() -> Subspace {
        let names = (0..4).map(|i| format!("B{i}")).collect();
        let mut s = Subspace::from_box(&[0.0, 0.49, 0.49, 0.49], &[0.01, 0.51, 0.51, 0.51], names);
        s.t = vec![vec![-1.0; 4], vec![0.0, 1.0, 0.0, 0.0]];
        s.v = vec![-1.5, 0.5];
        s
    }

    #[test]
    fn membership_rows() {
        let s = d0();
        assert!(membership(&[0.005, 0.50, 0.50, 0.50], &s));
        assert!(!membership(&[0.2, 0.5, 0.5, 0.5], &s));
        assert_eq!(s.box_bounds().1, vec![0.01, 0.51, 0.51, 0.51]);
    }

    #[test]
    fn json_round_trip() {
        let s = d0();
        let text = s.to_json();
        assert!(text.contains("\"A\"") && text.contains("\"V\""));
        assert_eq!(Subspace::from_json(&text).unwrap(), s);
    }
}
