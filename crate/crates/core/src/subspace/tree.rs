//! CART regression trees over linear features and their path predicates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("no samples to fit")]
    NoSamples,
    #[error("sample has {0} inputs, features expect {1}")]
    Dimension(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { max_depth: 4, min_leaf: 30 }
    }
}

/// Linear features `w . x`, each with a name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Features {
    pub names: Vec<String>,
    pub weights: Vec<Vec<f64>>,
}

impl Features {
    /// Each raw input, then the sum of all inputs.
    pub fn raw_and_sum(labels: &[String]) -> Self {
        let n = labels.len();
        let mut names: Vec<String> = labels.to_vec();
        let mut weights: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut w = vec![0.0; n];
                w[i] = 1.0;
                w
            })
            .collect();
        if n > 1 {
            names.push("sum".into());
            weights.push(vec![1.0; n]);
        }
        Features { names, weights }
    }

    pub fn inputs(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn value(&self, f: usize, x: &[f64]) -> f64 {
        self.weights[f].iter().zip(x).map(|(w, v)| w * v).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TreeNode {
    /// Samples with `feature <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        mean: f64,
        count: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub features: Features,
    /// Node 0 is the root.
    pub nodes: Vec<TreeNode>,
}

impl RegressionTree {
    /// Nodes from the root to the leaf holding `x`, with the branch taken
    /// (`true` = left).
    pub fn path(&self, x: &[f64]) -> Vec<(usize, bool)> {
        let mut out = Vec::new();
        let mut at = 0;
        while let TreeNode::Split { feature, threshold, left, right } = self.nodes[at] {
            let go_left = self.features.value(feature, x) <= threshold;
            out.push((at, go_left));
            at = if go_left { left } else { right };
        }
        out
    }

    pub fn leaf(&self, x: &[f64]) -> usize {
        match self.path(x).last() {
            Some(&(node, left)) => match self.nodes[node] {
                TreeNode::Split { left: l, right: r, .. } => {
                    if left {
                        l
                    } else {
                        r
                    }
                }
                TreeNode::Leaf { .. } => unreachable!(),
            },
            None => 0,
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        match self.nodes[self.leaf(x)] {
            TreeNode::Leaf { mean, .. } => mean,
            TreeNode::Split { .. } => unreachable!(),
        }
    }

    pub fn leaves(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. }))
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &RegressionTree, at: usize) -> usize {
            match t.nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(t, left).max(walk(t, right)),
            }
        }
        walk(self, 0)
    }
}

/// Fits a variance-reduction tree. Thresholds are midpoints between
/// consecutive distinct feature values; ties in gain go to the lowest
/// feature index, then the lowest threshold.
pub fn fit_regression_tree(
    samples: &[(Vec<f64>, f64)],
    features: &Features,
    params: &TreeParams,
) -> Result<RegressionTree, TreeError> {
    if samples.is_empty() {
        return Err(TreeError::NoSamples);
    }
    if let Some((x, _)) = samples.iter().find(|(x, _)| x.len() != features.inputs()) {
        return Err(TreeError::Dimension(x.len(), features.inputs()));
    }
    // Feature values are computed once.
    let fv: Vec<Vec<f64>> = (0..features.weights.len())
        .map(|f| samples.iter().map(|(x, _)| features.value(f, x)).collect())
        .collect();
    let y: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let mut tree = RegressionTree {
        features: features.clone(),
        nodes: Vec::new(),
    };
    let all: Vec<usize> = (0..samples.len()).collect();
    grow(&mut tree, &fv, &y, all, 0, params);
    Ok(tree)
}

fn sse(idx: &[usize], y: &[f64]) -> (f64, f64) {
    let n = idx.len() as f64;
    let mean = idx.iter().map(|&i| y[i]).sum::<f64>() / n;
    (mean, idx.iter().map(|&i| (y[i] - mean).powi(2)).sum())
}

fn grow(tree: &mut RegressionTree, fv: &[Vec<f64>], y: &[f64], idx: Vec<usize>, depth: usize, p: &TreeParams) -> usize {
    let at = tree.nodes.len();
    let (mean, total) = sse(&idx, y);
    tree.nodes.push(TreeNode::Leaf { mean, count: idx.len() });
    let min_leaf = p.min_leaf.max(1);
    if depth >= p.max_depth || idx.len() < 2 * min_leaf || total <= 1e-12 * (1.0 + mean * mean) {
        return at;
    }
    // (gain, feature, threshold) of the best split so far.
    let mut best: Option<(f64, usize, f64)> = None;
    for (f, vals) in fv.iter().enumerate() {
        let mut order = idx.clone();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
        let n = order.len();
        let (mut s_left, mut q_left) = (0.0, 0.0);
        let s_all: f64 = order.iter().map(|&i| y[i]).sum();
        let q_all: f64 = order.iter().map(|&i| y[i] * y[i]).sum();
        for k in 0..n - 1 {
            let yi = y[order[k]];
            s_left += yi;
            q_left += yi * yi;
            let nl = k + 1;
            let nr = n - nl;
            if nl < min_leaf || nr < min_leaf || vals[order[k]] == vals[order[k + 1]] {
                continue;
            }
            let sse_l = q_left - s_left * s_left / nl as f64;
            let s_r = s_all - s_left;
            let sse_r = (q_all - q_left) - s_r * s_r / nr as f64;
            let gain = total - sse_l - sse_r;
            let threshold = 0.5 * (vals[order[k]] + vals[order[k + 1]]);
            // Features and thresholds are visited in increasing order, so
            // keeping the first of equal gains is the documented tie-break.
            let better = best.is_none_or(|(g, _, _)| gain > g + 1e-9 * total);
            if better {
                best = Some((gain, f, threshold));
            }
        }
    }
    let Some((gain, feature, threshold)) = best else {
        return at;
    };
    if gain <= 1e-12 * total.max(1e-300) {
        return at;
    }
    let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| fv[feature][i] <= threshold);
    let left = grow(tree, fv, y, l, depth + 1, p);
    let right = grow(tree, fv, y, r, depth + 1, p);
    tree.nodes[at] = TreeNode::Split { feature, threshold, left, right };
    at
}

/// Rows `t . x <= v` for the predicates on the root-to-leaf path of `seed`.
/// The `>` branch is stored as `-w . x <= -threshold`.
pub fn extract_path_predicates(tree: &RegressionTree, seed: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut t = Vec::new();
    let mut v = Vec::new();
    for (node, left) in tree.path(seed) {
        if let TreeNode::Split { feature, threshold, .. } = tree.nodes[node] {
            let w = &tree.features.weights[feature];
            if left {
                t.push(w.clone());
                v.push(threshold);
            } else {
                t.push(w.iter().map(|c| -c).collect());
                v.push(-threshold);
            }
        }
    }
    (t, v)
}
