//! Gaussian linear algebra: covariance validation and factorization, joint
//! sampling, and multivariate normal rectangle probabilities.

mod normal;
mod rect;
mod variogram;

pub use normal::{normal_pdf, phid, phinv};
pub use rect::{mvn_rect_prob, mvn_rect_prob_with, RectProb, RectProbConfig};
pub use variogram::{build_increment_cov, CovarianceFn, CovarianceRealization, VariogramSpec};

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::core::RngStream;

/// Practical dimension ceiling for rectangle probabilities; beyond it the
/// sequential-conditioning accuracy guarantees degrade and the call is
/// refused (generic Monte Carlo exponent estimation has no such limit).
pub const RECT_DIMENSION_CEILING: usize = 64;

#[derive(Debug, Error)]
pub enum GaussianError {
    #[error("matrix is not square")]
    NotSquare,
    #[error("matrix is not symmetric: max |C_ij - C_ji| = {max_asym:.3e} exceeds tolerance")]
    NotSymmetric { max_asym: f64 },
    #[error("matrix is not positive semidefinite: min eigenvalue {min_eigenvalue:.6e}")]
    NotPositiveSemiDefinite { min_eigenvalue: f64 },
    #[error("factorization failed even with jitter {max_jitter:.3e} (invalid covariance)")]
    FactorizationFailed { max_jitter: f64 },
    #[error("dimension {dim} exceeds the rectangle-probability ceiling {max}")]
    DimensionCeiling { dim: usize, max: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid variogram: increment covariance failed the PSD check ({0})")]
    InvalidVariogram(String),
}

/// A validated m×m covariance matrix: symmetric to relative tolerance
/// 1e-12 and positive semidefinite (eigenvalues ≥ −1e-10·‖C‖).
#[derive(Debug, Clone)]
pub struct CovarianceMatrix {
    mat: DMatrix<f64>,
}

impl CovarianceMatrix {
    pub fn new(mat: DMatrix<f64>) -> Result<Self, GaussianError> {
        if mat.nrows() != mat.ncols() {
            return Err(GaussianError::NotSquare);
        }
        let m = mat.nrows();
        let scale = mat.iter().fold(0.0_f64, |a, &v| a.max(v.abs()));
        let mut max_asym = 0.0_f64;
        for i in 0..m {
            for j in (i + 1)..m {
                max_asym = max_asym.max((mat[(i, j)] - mat[(j, i)]).abs());
            }
        }
        if max_asym > 1e-12 * scale.max(1e-300) {
            return Err(GaussianError::NotSymmetric { max_asym });
        }
        // symmetrize exactly so downstream factorizations see a clean input
        let mat = (&mat + mat.transpose()) * 0.5;
        if m > 0 && scale > 0.0 {
            let eig = mat.clone().symmetric_eigen();
            let min_eig = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            let norm = eig
                .eigenvalues
                .iter()
                .fold(0.0_f64, |a, &v| a.max(v.abs()));
            if min_eig < -1e-10 * norm {
                return Err(GaussianError::NotPositiveSemiDefinite {
                    min_eigenvalue: min_eig,
                });
            }
        }
        Ok(Self { mat })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, GaussianError> {
        let m = rows.len();
        if rows.iter().any(|r| r.len() != m) {
            return Err(GaussianError::NotSquare);
        }
        let mat = DMatrix::from_fn(m, m, |i, j| rows[i][j]);
        Self::new(mat)
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.mat[(i, j)]
    }
}

/// Lower-triangular factor L with L·Lᵀ = C + εI, where ε is the smallest
/// jitter from the ladder {0, 1e-12, 1e-10, 1e-8}·trace(C)/m that makes the
/// factorization succeed. Exactly-zero diagonal entries (deterministic
/// coordinates) are masked out structurally and never jittered.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    l: DMatrix<f64>,
    jitter: f64,
}

const JITTER_LADDER: [f64; 4] = [0.0, 1e-12, 1e-10, 1e-8];

/// Factorizes a covariance matrix with the jitter ladder; the applied
/// jitter is reported on the factor rather than silently discarded.
pub fn factorize(cov: &CovarianceMatrix) -> Result<CholeskyFactor, GaussianError> {
    let m = cov.dim();
    let c = cov.matrix();
    if m == 0 {
        return Ok(CholeskyFactor {
            l: DMatrix::zeros(0, 0),
            jitter: 0.0,
        });
    }
    // Deterministic coordinates: with a PSD matrix, C_ii = 0 forces the
    // whole row to zero; keep them exact instead of jittering.
    let active: Vec<usize> = (0..m).filter(|&i| c[(i, i)] != 0.0).collect();
    if active.is_empty() {
        return Ok(CholeskyFactor {
            l: DMatrix::zeros(m, m),
            jitter: 0.0,
        });
    }
    let k = active.len();
    let sub = DMatrix::from_fn(k, k, |i, j| c[(active[i], active[j])]);
    let trace: f64 = (0..k).map(|i| sub[(i, i)]).sum();
    let mut max_jitter = 0.0;
    for ladder in JITTER_LADDER {
        let eps = ladder * trace / k as f64;
        max_jitter = eps;
        let jittered = &sub + DMatrix::from_diagonal_element(k, k, eps);
        if let Some(chol) = nalgebra::Cholesky::new(jittered) {
            let lsub = chol.l();
            let mut l = DMatrix::zeros(m, m);
            for i in 0..k {
                for j in 0..=i {
                    l[(active[i], active[j])] = lsub[(i, j)];
                }
            }
            return Ok(CholeskyFactor { l, jitter: eps });
        }
    }
    Err(GaussianError::FactorizationFailed { max_jitter })
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// mean + L·g with g i.i.d. standard normal from the stream.
    pub fn sample(&self, mean: &[f64], stream: &mut RngStream) -> Vec<f64> {
        let m = self.dim();
        debug_assert_eq!(mean.len(), m);
        let g: Vec<f64> = (0..m)
            .map(|_| StandardNormal.sample(stream))
            .collect();
        let mut out = mean.to_vec();
        for i in 0..m {
            let mut acc = 0.0;
            for j in 0..=i {
                acc += self.l[(i, j)] * g[j];
            }
            out[i] += acc;
        }
        out
    }
}

/// One joint draw from N(mean, C). Factorizes on every call; hot paths
/// should hold a [`CholeskyFactor`] instead.
pub fn mvn_sample(
    mean: &[f64],
    cov: &CovarianceMatrix,
    stream: &mut RngStream,
) -> Result<Vec<f64>, GaussianError> {
    if mean.len() != cov.dim() {
        return Err(GaussianError::ShapeMismatch(format!(
            "mean has length {}, covariance dimension {}",
            mean.len(),
            cov.dim()
        )));
    }
    Ok(factorize(cov)?.sample(mean, stream))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::rng_stream;

    #[test]
    fn identity_factorizes_without_jitter() {
        let c = CovarianceMatrix::new(DMatrix::identity(3, 3)).unwrap();
        let f = factorize(&c).unwrap();
        assert_eq!(f.jitter(), 0.0);
        assert!((f.l() - DMatrix::identity(3, 3)).abs().max() < 1e-14);
    }

    #[test]
    fn rank_one_needs_small_jitter_and_reconstructs() {
        let c = CovarianceMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let f = factorize(&c).unwrap();
        assert!(f.jitter() <= 1e-8 * 2.0 / 2.0, "jitter {}", f.jitter());
        let rec = f.l() * f.l().transpose();
        let err = (&rec - c.matrix()).abs().max();
        assert!(err <= 2.0 * f.jitter().max(1e-15), "reconstruction err {err}");
    }

    #[test]
    fn indefinite_matrix_rejected() {
        let err = CovarianceMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap_err();
        assert!(matches!(err, GaussianError::NotPositiveSemiDefinite { .. }));
    }

    #[test]
    fn asymmetric_matrix_rejected() {
        let err = CovarianceMatrix::from_rows(&[vec![1.0, 0.5], vec![0.4, 1.0]]).unwrap_err();
        assert!(matches!(err, GaussianError::NotSymmetric { .. }));
    }

    #[test]
    fn zero_covariance_sample_is_exactly_the_mean() {
        let c = CovarianceMatrix::new(DMatrix::zeros(3, 3)).unwrap();
        let mut s = rng_stream(1, 0);
        let x = mvn_sample(&[2.0, -1.0, 0.5], &c, &mut s).unwrap();
        assert_eq!(x, vec![2.0, -1.0, 0.5]);
    }

    #[test]
    fn zero_diagonal_coordinate_stays_deterministic() {
        let c = CovarianceMatrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 4.0]]).unwrap();
        let f = factorize(&c).unwrap();
        assert_eq!(f.jitter(), 0.0);
        let mut s = rng_stream(1, 0);
        for _ in 0..10 {
            let x = f.sample(&[7.0, 0.0], &mut s);
            assert_eq!(x[0], 7.0);
            assert!(x[1] != 0.0);
        }
    }

    #[test]
    fn mvn_sample_variance_and_correlation() {
        // m=1, C=[[4]]: sample variance within [3.9, 4.1] at 1e5 draws
        let c = CovarianceMatrix::from_rows(&[vec![4.0]]).unwrap();
        let f = factorize(&c).unwrap();
        let mut s = rng_stream(11, 0);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| f.sample(&[0.0], &mut s)[0]).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        assert!((3.9..=4.1).contains(&var), "sample variance {var}");

        // correlation 0.9 within [0.895, 0.905]
        let c2 = CovarianceMatrix::from_rows(&[vec![1.0, 0.9], vec![0.9, 1.0]]).unwrap();
        let f2 = factorize(&c2).unwrap();
        let mut s2 = rng_stream(11, 1);
        let pairs: Vec<Vec<f64>> = (0..n).map(|_| f2.sample(&[0.0, 0.0], &mut s2)).collect();
        let m0 = pairs.iter().map(|v| v[0]).sum::<f64>() / n as f64;
        let m1 = pairs.iter().map(|v| v[1]).sum::<f64>() / n as f64;
        let (mut cov, mut v0, mut v1) = (0.0, 0.0, 0.0);
        for v in &pairs {
            cov += (v[0] - m0) * (v[1] - m1);
            v0 += (v[0] - m0) * (v[0] - m0);
            v1 += (v[1] - m1) * (v[1] - m1);
        }
        let r = cov / (v0.sqrt() * v1.sqrt());
        assert!((0.895..=0.905).contains(&r), "sample correlation {r}");
    }
}
