//! Known-covariance handling. Every multivariate kernel works on whitened
//! observations, so the covariance enters exactly once, at ingestion.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-9;

/// Observation covariance together with its Cholesky factor.
///
/// With `sigma = C C^T` (C lower triangular), whitening maps `x` to
/// `y = C^{-1} x`, so `|y|^2 = x^T sigma^{-1} x`. The factor `W = C^{-T}`
/// satisfies `W W^T = sigma^{-1}` and `y = W^T x`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    sigma: DMatrix<f64>,
    chol: DMatrix<f64>,
    identity: bool,
}

impl CovarianceModel {
    pub fn identity(dim: usize) -> Self {
        CovarianceModel {
            sigma: DMatrix::identity(dim, dim),
            chol: DMatrix::identity(dim, dim),
            identity: true,
        }
    }

    /// Validates symmetry, factors `sigma`, and precomputes the whitener.
    pub fn new(sigma: DMatrix<f64>) -> Result<Self> {
        let n = sigma.nrows();
        if n == 0 || sigma.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n.max(1),
                got: sigma.ncols(),
            });
        }
        let mut max_dev = 0.0f64;
        for i in 0..n {
            for j in 0..i {
                max_dev = max_dev.max((sigma[(i, j)] - sigma[(j, i)]).abs());
            }
        }
        if max_dev > SYMMETRY_TOL || sigma.iter().any(|v| !v.is_finite()) {
            return Err(Error::Asymmetric {
                max_deviation: max_dev,
            });
        }
        let chol = sigma
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite)?
            .unpack();
        let identity = sigma == DMatrix::identity(n, n);
        Ok(CovarianceModel {
            sigma,
            chol,
            identity,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: rows.iter().map(Vec::len).find(|&l| l != n).unwrap_or(n),
            });
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// Lower-triangular Cholesky factor `C` of sigma.
    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    /// The factor `W = C^{-T}` with `W W^T = sigma^{-1}`.
    pub fn whitener(&self) -> DMatrix<f64> {
        let n = self.dim();
        let inv_c = self
            .chol
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .expect("cholesky factor has a positive diagonal");
        inv_c.transpose()
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    /// Squared ratio of smallest to largest Cholesky pivot; a cheap
    /// reciprocal-condition estimate.
    pub fn pivot_ratio(&self) -> f64 {
        let d = self.chol.diagonal();
        let (lo, hi) = d
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        (lo / hi).powi(2)
    }

    /// `y = C^{-1} x` written into `out`.
    pub fn whiten_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.dim();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
        if out.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: out.len(),
            });
        }
        if self.identity {
            out.copy_from_slice(x);
            return Ok(());
        }
        // forward substitution
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.chol[(i, j)] * out[j];
            }
            out[i] = acc / self.chol[(i, i)];
        }
        Ok(())
    }

    pub fn whiten(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.whiten_into(x, &mut out)?;
        Ok(out)
    }

    /// Mahalanobis form `x^T sigma^{-1} x`.
    pub fn mahalanobis_sq(&self, x: &[f64]) -> Result<f64> {
        Ok(self.whiten(x)?.iter().map(|v| v * v).sum())
    }

    /// `C z`: maps a standard normal vector to one with covariance sigma.
    pub fn color(&self, z: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if z.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: z.len(),
            });
        }
        let v = &self.chol * DVector::from_column_slice(z);
        Ok(v.iter().copied().collect())
    }
}

/// Validates and factors `sigma`; alias of [`CovarianceModel::new`].
pub fn build_whitener(sigma: DMatrix<f64>) -> Result<CovarianceModel> {
    CovarianceModel::new(sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corr2(r: f64) -> CovarianceModel {
        CovarianceModel::from_rows(&[vec![1.0, r], vec![r, 1.0]]).unwrap()
    }

    #[test]
    fn identity_whitener_is_identity() {
        let m = CovarianceModel::new(DMatrix::identity(3, 3)).unwrap();
        assert!(m.is_identity());
        assert_eq!(m.whitener(), DMatrix::identity(3, 3));
        assert_eq!(m.whiten(&[2.0, 3.0, -1.0]).unwrap(), vec![2.0, 3.0, -1.0]);
    }

    #[test]
    fn correlated_pair_matches_hand_inverse() {
        // [[1, .5], [.5, 1]]^{-1} = (4/3) [[1, -.5], [-.5, 1]] so (1,1) -> 4/3.
        let m = corr2(0.5);
        let q = m.mahalanobis_sq(&[1.0, 1.0]).unwrap();
        assert!((q - 4.0 / 3.0).abs() < 1e-14);
        let w = m.whitener();
        let prod = &w * w.transpose();
        let inv = DMatrix::from_row_slice(2, 2, &[4.0 / 3.0, -2.0 / 3.0, -2.0 / 3.0, 4.0 / 3.0]);
        assert!((prod - inv).abs().max() < 1e-14);
    }

    #[test]
    fn rank_deficient_is_rejected() {
        let err = CovarianceModel::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert!(matches!(err, Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn asymmetric_is_rejected() {
        let err = CovarianceModel::from_rows(&[vec![1.0, 0.5], vec![0.4, 1.0]]);
        assert!(matches!(err, Err(Error::Asymmetric { .. })));
    }

    #[test]
    fn wrong_length_is_dimension_mismatch() {
        let m = CovarianceModel::identity(2);
        assert!(matches!(
            m.whiten(&[1.0, 2.0, 3.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn whitened_samples_have_identity_covariance() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let m = CovarianceModel::from_rows(&[
            vec![2.0, 0.6, 0.3],
            vec![0.6, 1.0, -0.2],
            vec![0.3, -0.2, 0.5],
        ])
        .unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 200_000;
        let mut acc = [[0.0f64; 3]; 3];
        for _ in 0..n {
            let z: Vec<f64> = (0..3).map(|_| StandardNormal.sample(&mut rng)).collect();
            let x = m.color(&z).unwrap();
            let y = m.whiten(&x).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    acc[i][j] += y[i] * y[j];
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                // 5 standard errors of a second-moment estimate
                assert!((acc[i][j] / n as f64 - expect).abs() < 5.0 * (2.0 / n as f64).sqrt());
            }
        }
    }

    proptest! {
        #[test]
        fn whitened_norm_is_mahalanobis(
            a in 0.5f64..3.0, b in 0.5f64..3.0, r in -0.9f64..0.9,
            x0 in -5.0f64..5.0, x1 in -5.0f64..5.0,
        ) {
            let c = r * (a * b).sqrt();
            let m = CovarianceModel::from_rows(&[vec![a, c], vec![c, b]]).unwrap();
            let det = a * b - c * c;
            let direct = (b * x0 * x0 - 2.0 * c * x0 * x1 + a * x1 * x1) / det;
            let y = m.whiten(&[x0, x1]).unwrap();
            let q: f64 = y.iter().map(|v| v * v).sum();
            prop_assert!((q - direct).abs() <= 1e-10 * direct.max(1e-300) + 1e-300);
            prop_assert!(q >= 0.0);
            prop_assert_eq!(q == 0.0, x0 == 0.0 && x1 == 0.0);
            // W^T x agrees with the forward substitution
            let wt = m.whitener().transpose() * DVector::from_column_slice(&[x0, x1]);
            prop_assert!((wt[0] - y[0]).abs() < 1e-10 && (wt[1] - y[1]).abs() < 1e-10);
        }
    }
}
