use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::Matrix;

/// Least squares with an optional ridge penalty on the slopes. The
/// intercept is never penalized; rank-deficient designs get the minimum-norm
/// solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub coef: Vec<f64>,
    pub intercept: f64,
}

impl Linear {
    pub fn fit(x: &Matrix, y: &[f64], alpha: f64) -> Linear {
        let (n, d) = (x.rows, x.cols);
        if n == 0 {
            return Linear { coef: vec![0.0; d], intercept: 0.0 };
        }
        let means: Vec<f64> = (0..d).map(|j| (0..n).map(|i| x.get(i, j)).sum::<f64>() / n as f64).collect();
        let y_mean = y.iter().sum::<f64>() / n as f64;
        if d == 0 {
            return Linear { coef: Vec::new(), intercept: y_mean };
        }
        let xc = DMatrix::from_fn(n, d, |i, j| x.get(i, j) - means[j]);
        let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
        let coef = if alpha > 0.0 {
            let a = xc.transpose() * &xc + DMatrix::identity(d, d) * alpha;
            let b = xc.transpose() * yc;
            a.svd(true, true).solve(&b, 1e-12).expect("svd with u and v")
        } else {
            xc.svd(true, true).solve(&yc, 1e-10).expect("svd with u and v")
        };
        let coef: Vec<f64> = coef.iter().copied().collect();
        let intercept = y_mean - coef.iter().zip(&means).map(|(c, m)| c * m).sum::<f64>();
        Linear { coef, intercept }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + self.coef.iter().zip(row).map(|(c, v)| c * v).sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = Matrix::from_rows(vec![vec![1.0], vec![2.0], vec![3.0]]);
        let m = Linear::fit(&x, &[2.0, 4.0, 6.0], 0.0);
        assert!((m.coef[0] - 2.0).abs() < 1e-12);
        assert!(m.intercept.abs() < 1e-12);
    }

    #[test]
    fn duplicated_column_splits_weight() {
        let x = Matrix::from_rows(vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![4.0, 4.0]]);
        let m = Linear::fit(&x, &[2.0, 4.0, 8.0], 0.0);
        assert!((m.coef[0] - 1.0).abs() < 1e-9 && (m.coef[1] - 1.0).abs() < 1e-9);
        assert!((m.predict_row(&[3.0, 3.0]) - 6.0).abs() < 1e-9);
    }
}
