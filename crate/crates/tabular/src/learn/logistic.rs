use serde::{Deserialize, Serialize};

use super::Matrix;

/// Multinomial logistic regression on standardized features, minimizing
/// `C * sum(log-loss) + 0.5 * |W|^2` with accelerated gradient descent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Logistic {
    mean: Vec<f64>,
    scale: Vec<f64>,
    /// `n_classes` rows of `d` weights.
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

fn softmax(z: &mut [f64]) {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    for v in z.iter_mut() {
        *v /= s;
    }
}

impl Logistic {
    pub fn fit(x: &Matrix, labels: &[usize], n_classes: usize, c: f64, max_iter: usize) -> Logistic {
        let (n, d, k) = (x.rows, x.cols, n_classes.max(1));
        let mean: Vec<f64> = (0..d).map(|j| (0..n).map(|i| x.get(i, j)).sum::<f64>() / n.max(1) as f64).collect();
        let scale: Vec<f64> = (0..d)
            .map(|j| {
                let var = (0..n).map(|i| (x.get(i, j) - mean[j]).powi(2)).sum::<f64>() / n.max(1) as f64;
                if var > 1e-24 { var.sqrt() } else { 1.0 }
            })
            .collect();
        let z: Vec<f64> = (0..n * d).map(|idx| (x.data[idx] - mean[idx % d]) / scale[idx % d]).collect();

        // Objective scaled by 1/(C n): mean log-loss + lambda/2 |W|^2.
        let lambda = 1.0 / (c.max(1e-12) * n.max(1) as f64);
        let lipschitz = 0.5 * (d as f64 + 1.0) + lambda;
        let step = 1.0 / lipschitz;

        let width = (d + 1) * k;
        let mut w = vec![0.0; width];
        let mut prev = w.clone();
        let mut look = w.clone();
        let mut t = 1.0f64;
        let mut grad = vec![0.0; width];
        let mut p = vec![0.0; k];
        for _ in 0..max_iter.max(1) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for i in 0..n {
                let row = &z[i * d..(i + 1) * d];
                for c in 0..k {
                    let wc = &look[c * (d + 1)..(c + 1) * (d + 1)];
                    p[c] = wc[d] + wc[..d].iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
                }
                softmax(&mut p);
                for c in 0..k {
                    let e = p[c] - if labels[i] == c { 1.0 } else { 0.0 };
                    let g = &mut grad[c * (d + 1)..(c + 1) * (d + 1)];
                    for j in 0..d {
                        g[j] += e * row[j];
                    }
                    g[d] += e;
                }
            }
            let inv_n = 1.0 / n.max(1) as f64;
            let mut next = vec![0.0; width];
            for idx in 0..width {
                let is_bias = idx % (d + 1) == d;
                let reg = if is_bias { 0.0 } else { lambda * look[idx] };
                next[idx] = look[idx] - step * (grad[idx] * inv_n + reg);
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let momentum = (t - 1.0) / t_next;
            let delta: f64 = next.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            prev.clone_from(&w);
            w = next;
            for idx in 0..width {
                look[idx] = w[idx] + momentum * (w[idx] - prev[idx]);
            }
            t = t_next;
            if delta < 1e-9 {
                break;
            }
        }
        let weights = (0..k).map(|c| w[c * (d + 1)..c * (d + 1) + d].to_vec()).collect();
        let bias = (0..k).map(|c| w[c * (d + 1) + d]).collect();
        Logistic { mean, scale, weights, bias }
    }

    pub fn predict_proba_row(&self, row: &[f64]) -> Vec<f64> {
        let mut p: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| {
                b + w
                    .iter()
                    .zip(row)
                    .enumerate()
                    .map(|(j, (wj, v))| wj * (v - self.mean[j]) / self.scale[j])
                    .sum::<f64>()
            })
            .collect();
        softmax(&mut p);
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_points_are_classified() {
        let xs = [-3.0, -2.0, -1.5, -0.5, 0.5, 1.0, 2.5, 3.0];
        let x = Matrix::from_rows(xs.iter().map(|v| vec![*v]).collect());
        let labels: Vec<usize> = xs.iter().map(|v| usize::from(*v > 0.0)).collect();
        let m = Logistic::fit(&x, &labels, 2, 1.0, 300);
        for (v, l) in xs.iter().zip(&labels) {
            let p = m.predict_proba_row(&[*v]);
            assert_eq!(usize::from(p[1] > p[0]), *l);
            assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
        }
    }
}
