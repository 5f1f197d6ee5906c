//! Histogram-binned regression trees over gradient statistics.
//!
//! One builder serves every tree learner in the crate. Each sample carries a
//! `k`-dimensional gradient and a scalar hessian; a leaf predicts
//! `-G / (H + lambda)` per output and a split is scored by
//! `sum_k G_L^2/(H_L+l) + G_R^2/(H_R+l) - G^2/(H+l)`.
//!
//! * random-forest regression: `g = -y`, `h = 1`, `lambda = 0` (SSE, mean leaf)
//! * random-forest classification: `g = -onehot(y)`, `h = 1` (Gini, class frequencies)
//! * boosting: the loss gradients and hessians at the current prediction.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Matrix;

const MAX_BINS: usize = 64;

/// Per-feature split candidates and the bin index of every training cell.
pub struct Binned {
    n_rows: usize,
    /// Column-major bin indices.
    bins: Vec<u8>,
    /// Ascending thresholds per feature; bin `b` holds values `<= thresholds[b]`.
    thresholds: Vec<Vec<f64>>,
}

impl Binned {
    pub fn new(x: &Matrix) -> Binned {
        let (n, f) = (x.rows, x.cols);
        let mut bins = vec![0u8; n * f];
        let mut thresholds = Vec::with_capacity(f);
        for j in 0..f {
            let mut vals: Vec<f64> = (0..n).map(|i| x.get(i, j)).collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            vals.dedup();
            let thr: Vec<f64> = if vals.len() <= MAX_BINS {
                vals.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
            } else {
                let mut t: Vec<f64> = (1..MAX_BINS)
                    .map(|q| {
                        let pos = q * (vals.len() - 1) / MAX_BINS;
                        0.5 * (vals[pos] + vals[pos + 1])
                    })
                    .collect();
                t.dedup();
                t
            };
            for i in 0..n {
                let v = x.get(i, j);
                bins[j * n + i] = thr.partition_point(|&t| t < v) as u8;
            }
            thresholds.push(thr);
        }
        Binned { n_rows: n, bins, thresholds }
    }

    fn n_features(&self) -> usize {
        self.thresholds.len()
    }

    fn bin(&self, row: usize, feat: usize) -> usize {
        self.bins[feat * self.n_rows + row] as usize
    }
}

#[derive(Clone, Debug)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub min_child_weight: f64,
    pub lambda: f64,
    /// Features considered per split; `None` means all.
    pub max_features: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
enum Node {
    Leaf(Vec<f64>),
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_values(&self, row: &[f64]) -> &[f64] {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf(v) => return v,
                Node::Split { feature, threshold, left, right } => {
                    idx = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }
}

struct Stats {
    g: Vec<f64>,
    h: f64,
    count: usize,
}

impl Stats {
    fn zero(k: usize) -> Stats {
        Stats { g: vec![0.0; k], h: 0.0, count: 0 }
    }

    fn score(&self, lambda: f64) -> f64 {
        let denom = self.h + lambda;
        if denom <= 0.0 {
            return 0.0;
        }
        self.g.iter().map(|g| g * g).sum::<f64>() / denom
    }
}

/// Fit a tree on `rows` (duplicates allowed, e.g. bootstrap samples).
pub fn fit_tree<R: Rng>(
    data: &Binned,
    rows: &[usize],
    grad: &[f64],
    hess: &[f64],
    k: usize,
    params: &TreeParams,
    rng: &mut R,
) -> Tree {
    let mut tree = Tree { nodes: Vec::new() };
    grow(data, rows.to_vec(), grad, hess, k, params, rng, 0, &mut tree);
    tree
}

#[allow(clippy::too_many_arguments)]
fn grow<R: Rng>(
    data: &Binned,
    rows: Vec<usize>,
    grad: &[f64],
    hess: &[f64],
    k: usize,
    params: &TreeParams,
    rng: &mut R,
    depth: usize,
    tree: &mut Tree,
) -> usize {
    let mut total = Stats::zero(k);
    for &r in &rows {
        for c in 0..k {
            total.g[c] += grad[r * k + c];
        }
        total.h += hess[r];
        total.count += 1;
    }
    let leaf = |total: &Stats| {
        let denom = total.h + params.lambda;
        Node::Leaf(
            total
                .g
                .iter()
                .map(|g| if denom > 0.0 { -g / denom } else { 0.0 })
                .collect(),
        )
    };
    let id = tree.nodes.len();
    tree.nodes.push(leaf(&total));
    if depth >= params.max_depth || rows.len() < 2 * params.min_samples_leaf.max(1) {
        return id;
    }

    let f = data.n_features();
    let features: Vec<usize> = match params.max_features {
        Some(m) if m < f => {
            let mut v = sample(rng, f, m.max(1)).into_vec();
            v.sort_unstable();
            v
        }
        _ => (0..f).collect(),
    };

    let parent_score = total.score(params.lambda);
    let mut best: Option<(f64, usize, usize)> = None;
    for &feat in &features {
        let nb = data.thresholds[feat].len() + 1;
        if nb < 2 {
            continue;
        }
        let mut hist_g = vec![0.0; nb * k];
        let mut hist_h = vec![0.0; nb];
        let mut hist_n = vec![0usize; nb];
        for &r in &rows {
            let b = data.bin(r, feat);
            for c in 0..k {
                hist_g[b * k + c] += grad[r * k + c];
            }
            hist_h[b] += hess[r];
            hist_n[b] += 1;
        }
        let mut left = Stats::zero(k);
        for b in 0..nb - 1 {
            for c in 0..k {
                left.g[c] += hist_g[b * k + c];
            }
            left.h += hist_h[b];
            left.count += hist_n[b];
            let right_count = total.count - left.count;
            if left.count < params.min_samples_leaf.max(1) || right_count < params.min_samples_leaf.max(1) {
                continue;
            }
            let right_h = total.h - left.h;
            if left.h < params.min_child_weight || right_h < params.min_child_weight {
                continue;
            }
            let right = Stats {
                g: total.g.iter().zip(&left.g).map(|(t, l)| t - l).collect(),
                h: right_h,
                count: right_count,
            };
            let gain = left.score(params.lambda) + right.score(params.lambda) - parent_score;
            if gain > 1e-12 && best.is_none_or(|(g, _, _)| gain > g) {
                best = Some((gain, feat, b));
            }
        }
    }

    let Some((_, feat, bin)) = best else {
        return id;
    };
    let (lrows, rrows): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&r| data.bin(r, feat) <= bin);
    let threshold = data.thresholds[feat][bin];
    let left = grow(data, lrows, grad, hess, k, params, rng, depth + 1, tree);
    let right = grow(data, rrows, grad, hess, k, params, rng, depth + 1, tree);
    tree.nodes[id] = Node::Split { feature: feat, threshold, left, right };
    id
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn step_function_is_recovered_exactly() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let x = Matrix::from_rows(xs.iter().map(|v| vec![*v]).collect());
        let y: Vec<f64> = xs.iter().map(|v| if *v < 7.0 { 1.0 } else { 5.0 }).collect();
        let grad: Vec<f64> = y.iter().map(|v| -v).collect();
        let hess = vec![1.0; 20];
        let params = TreeParams { max_depth: 3, min_samples_leaf: 1, min_child_weight: 0.0, lambda: 0.0, max_features: None };
        let rows: Vec<usize> = (0..20).collect();
        let tree = fit_tree(&Binned::new(&x), &rows, &grad, &hess, 1, &params, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(tree.depth(), 1);
        assert_eq!(tree.leaf_values(&[3.0]), &[1.0]);
        assert_eq!(tree.leaf_values(&[6.5]), &[1.0]);
        assert_eq!(tree.leaf_values(&[6.6]), &[5.0]);
    }
}
