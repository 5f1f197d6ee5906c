use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree, Binned, Tree, TreeParams};
use super::{Matrix, Params, Target};

pub struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl From<&Params> for ForestParams {
    fn from(p: &Params) -> Self {
        ForestParams {
            n_estimators: (p["n_estimators"] as usize).max(1),
            max_depth: p["max_depth"] as usize,
            min_samples_leaf: (p["min_samples_leaf"] as usize).max(1),
        }
    }
}

/// Bagged trees with per-split feature subsampling. Classification leaves
/// hold class frequencies, so the forest averages probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    trees: Vec<Tree>,
    outputs: usize,
}

impl Forest {
    pub fn fit(x: &Matrix, y: &Target, params: &ForestParams, seed: u64) -> Forest {
        let n = x.rows;
        let (k, grad, max_features) = match y {
            Target::Regression(v) => (1, v.iter().map(|t| -t).collect::<Vec<_>>(), (x.cols / 3).max(1)),
            Target::Classification { labels, n_classes } => {
                let k = (*n_classes).max(1);
                let mut g = vec![0.0; n * k];
                for (i, l) in labels.iter().enumerate() {
                    g[i * k + l] = -1.0;
                }
                (k, g, ((x.cols as f64).sqrt().round() as usize).max(1))
            }
        };
        let hess = vec![1.0; n];
        let binned = Binned::new(x);
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            min_samples_leaf: params.min_samples_leaf,
            min_child_weight: 0.0,
            lambda: 0.0,
            max_features: Some(max_features),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trees = (0..params.n_estimators)
            .map(|_| {
                let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n.max(1))).collect();
                fit_tree(&binned, &rows, &grad, &hess, k, &tree_params, &mut rng)
            })
            .collect();
        Forest { trees, outputs: k }
    }

    pub fn predict_row(&self, row: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.outputs];
        for t in &self.trees {
            for (o, v) in out.iter_mut().zip(t.leaf_values(row)) {
                *o += v;
            }
        }
        let m = self.trees.len() as f64;
        out.iter_mut().for_each(|o| *o /= m);
        out
    }
}
