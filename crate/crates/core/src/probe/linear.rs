//! Ordinary least squares with an intercept, minimum-norm when rank deficient.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    /// `(d + 1) x k`; the first row is the intercept.
    pub coefficients: DMatrix<f64>,
    pub rank: usize,
    pub rank_deficient: bool,
}

impl LinearModel {
    pub fn predict(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        augment(x) * &self.coefficients
    }
}

fn augment(x: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols() + 1, |r, c| if c == 0 { 1.0 } else { x[(r, c - 1)] })
}

/// Fit by SVD pseudo-inverse. Singular values below
/// `max(n, d + 1) * eps * sigma_max` count as zero.
pub fn fit(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<LinearModel> {
    if x.nrows() != y.nrows() {
        return Err(Error::LengthMismatch(x.nrows(), y.nrows()));
    }
    if x.nrows() < x.ncols() + 1 {
        return Err(Error::TooFewRecords { needed: x.ncols() + 1, found: x.nrows() });
    }
    let a = augment(x);
    let svd = a.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let tol = (a.nrows().max(a.ncols()) as f64) * f64::EPSILON * sigma_max;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let coefficients = svd.solve(y, tol).map_err(|e| Error::Invariant(format!("least squares: {e}")))?;
    let rank_deficient = rank < a.ncols();
    if rank_deficient {
        log::warn!("linear probe design matrix has rank {rank} < {}; using the minimum-norm solution", a.ncols());
    }
    Ok(LinearModel { coefficients, rank, rank_deficient })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_linear_data_has_zero_residual() {
        let x = DMatrix::from_fn(20, 3, |r, c| ((r * 7 + c * 3) % 11) as f64 + (r as f64).sin());
        let y = DMatrix::from_fn(20, 2, |r, k| 1.5 + 2.0 * x[(r, 0)] - x[(r, 1)] + (k as f64) * x[(r, 2)]);
        let m = fit(&x, &y).unwrap();
        assert!(!m.rank_deficient);
        assert!((m.predict(&x) - &y).abs().max() < 1e-9);
        assert!((m.coefficients[(0, 0)] - 1.5).abs() < 1e-9);
    }

    #[test]
    fn duplicate_column_gives_minimum_norm_split() {
        let x = DMatrix::from_fn(10, 2, |r, _| r as f64);
        let y = DMatrix::from_fn(10, 1, |r, _| 4.0 * r as f64);
        let m = fit(&x, &y).unwrap();
        assert!(m.rank_deficient);
        assert_eq!(m.rank, 2);
        // the minimum-norm solution shares the weight equally
        assert!((m.coefficients[(1, 0)] - 2.0).abs() < 1e-9);
        assert!((m.coefficients[(2, 0)] - 2.0).abs() < 1e-9);
        assert!(m.coefficients[(0, 0)].abs() < 1e-9);
    }

    #[test]
    fn too_few_records() {
        let x = DMatrix::from_element(3, 3, 1.0);
        let y = DMatrix::from_element(3, 1, 1.0);
        assert!(matches!(fit(&x, &y), Err(Error::TooFewRecords { needed: 4, found: 3 })));
    }
}
