use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree, Binned, Tree, TreeParams};
use super::{Matrix, ModelKind, Params, Target};

pub struct GbdtParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub min_child_weight: f64,
    pub min_samples_leaf: usize,
}

impl GbdtParams {
    /// Map each library's parameter names onto the shared learner.
    pub fn from_kind(kind: ModelKind, p: &Params) -> GbdtParams {
        let get = |k: &str| p[k];
        match kind {
            ModelKind::XgboostRegressor | ModelKind::XgboostClassifier => GbdtParams {
                n_estimators: get("n_estimators") as usize,
                max_depth: get("max_depth") as usize,
                learning_rate: get("learning_rate"),
                lambda: get("reg_lambda"),
                min_child_weight: get("min_child_weight"),
                min_samples_leaf: 1,
            },
            ModelKind::LightgbmRegressor | ModelKind::LightgbmClassifier => GbdtParams {
                n_estimators: get("n_estimators") as usize,
                max_depth: get("max_depth") as usize,
                learning_rate: get("learning_rate"),
                lambda: get("reg_lambda"),
                min_child_weight: 1e-3,
                min_samples_leaf: (get("min_child_samples") as usize).max(1),
            },
            _ => GbdtParams {
                n_estimators: get("iterations") as usize,
                max_depth: get("depth") as usize,
                learning_rate: get("learning_rate"),
                lambda: get("l2_leaf_reg"),
                min_child_weight: 0.0,
                min_samples_leaf: 1,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
enum Objective {
    Squared,
    Binary,
    Softmax(usize),
}

/// Gradient-boosted trees with squared, logistic or softmax loss and
/// Newton leaf values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gbdt {
    objective: Objective,
    base: Vec<f64>,
    learning_rate: f64,
    /// Per round, one tree per raw output.
    rounds: Vec<Vec<Tree>>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl Gbdt {
    pub fn fit(x: &Matrix, y: &Target, params: &GbdtParams) -> Gbdt {
        let n = x.rows;
        let (objective, base) = match y {
            Target::Regression(v) => (Objective::Squared, vec![v.iter().sum::<f64>() / n.max(1) as f64]),
            Target::Classification { labels, n_classes } if *n_classes <= 2 => {
                let pos = labels.iter().filter(|l| **l == 1).count() as f64;
                let p = ((pos + 0.5) / (n as f64 + 1.0)).clamp(1e-6, 1.0 - 1e-6);
                (Objective::Binary, vec![(p / (1.0 - p)).ln()])
            }
            Target::Classification { labels, n_classes } => {
                let base = (0..*n_classes)
                    .map(|c| {
                        let cnt = labels.iter().filter(|l| **l == c).count() as f64;
                        ((cnt + 0.5) / (n as f64 + 1.0)).ln()
                    })
                    .collect();
                (Objective::Softmax(*n_classes), base)
            }
        };
        let outputs = base.len();
        let mut raw: Vec<f64> = (0..n).flat_map(|_| base.iter().copied()).collect();
        let binned = Binned::new(x);
        let rows: Vec<usize> = (0..n).collect();
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            min_samples_leaf: params.min_samples_leaf,
            min_child_weight: params.min_child_weight,
            lambda: params.lambda,
            max_features: None,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut rounds = Vec::with_capacity(params.n_estimators);
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n];
        for _ in 0..params.n_estimators {
            let mut trees = Vec::with_capacity(outputs);
            for out in 0..outputs {
                for i in 0..n {
                    let (g, h) = match (objective, y) {
                        (Objective::Squared, Target::Regression(v)) => (raw[i] - v[i], 1.0),
                        (Objective::Binary, Target::Classification { labels, .. }) => {
                            let p = sigmoid(raw[i]);
                            (p - (labels[i] == 1) as u8 as f64, p * (1.0 - p))
                        }
                        (Objective::Softmax(k), Target::Classification { labels, .. }) => {
                            let z = &raw[i * k..(i + 1) * k];
                            let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                            let s: f64 = z.iter().map(|v| (v - m).exp()).sum();
                            let p = (z[out] - m).exp() / s;
                            (p - (labels[i] == out) as u8 as f64, p * (1.0 - p))
                        }
                        _ => unreachable!("objective matches target"),
                    };
                    grad[i] = g;
                    hess[i] = h.max(1e-6);
                }
                let tree = fit_tree(&binned, &rows, &grad, &hess, 1, &tree_params, &mut rng);
                for i in 0..n {
                    raw[i * outputs + out] += params.learning_rate * tree.leaf_values(x.row(i))[0];
                }
                trees.push(tree);
            }
            rounds.push(trees);
        }
        Gbdt { objective, base, learning_rate: params.learning_rate, rounds }
    }

    pub fn predict_row(&self, row: &[f64]) -> Vec<f64> {
        let mut raw = self.base.clone();
        for trees in &self.rounds {
            for (r, t) in raw.iter_mut().zip(trees) {
                *r += self.learning_rate * t.leaf_values(row)[0];
            }
        }
        match self.objective {
            Objective::Squared => raw,
            Objective::Binary => {
                let p = sigmoid(raw[0]);
                vec![1.0 - p, p]
            }
            Objective::Softmax(_) => {
                let m = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = raw.iter().map(|v| (v - m).exp()).collect();
                let s: f64 = e.iter().sum();
                e.into_iter().map(|v| v / s).collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boosting_fits_a_nonlinear_target() {
        let xs: Vec<f64> = (0..40).map(|i| i as f64 / 4.0).collect();
        let x = Matrix::from_rows(xs.iter().map(|v| vec![*v]).collect());
        let y: Vec<f64> = xs.iter().map(|v| (v * 0.8).sin() * 3.0).collect();
        let params = GbdtParams {
            n_estimators: 100,
            max_depth: 3,
            learning_rate: 0.3,
            lambda: 0.0,
            min_child_weight: 0.0,
            min_samples_leaf: 1,
        };
        let m = Gbdt::fit(&x, &Target::Regression(y.clone()), &params);
        let rmse = (xs.iter().zip(&y).map(|(v, t)| (m.predict_row(&[*v])[0] - t).powi(2)).sum::<f64>() / 40.0).sqrt();
        assert!(rmse < 0.1, "rmse {rmse}");
    }

    #[test]
    fn multiclass_probabilities_sum_to_one() {
        let xs: Vec<f64> = (0..30).map(f64::from).collect();
        let x = Matrix::from_rows(xs.iter().map(|v| vec![*v]).collect());
        let labels: Vec<usize> = (0..30).map(|i| i / 10).collect();
        let params = GbdtParams {
            n_estimators: 20,
            max_depth: 2,
            learning_rate: 0.5,
            lambda: 1.0,
            min_child_weight: 0.0,
            min_samples_leaf: 1,
        };
        let m = Gbdt::fit(&x, &Target::Classification { labels: labels.clone(), n_classes: 3 }, &params);
        for (v, l) in xs.iter().zip(&labels) {
            let p = m.predict_row(&[*v]);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert_eq!(super::super::argmax(&p), *l);
        }
    }
}
