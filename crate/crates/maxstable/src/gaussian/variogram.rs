//! Variograms, covariance realizations, and the increment Gaussian law.
//!
//! The law of a Brown-Resnick max-stable process depends on its matrix
//! variogram γ_ij(t,s) = Var(Y_i(t) − Y_j(s)) only; any two covariance
//! realizations with the same γ generate the same process. Variogram-only
//! specifications are realized by rooting the field at a reference
//! (component, location) via the polarization identity
//! cov = [γ_ik(t,h) + γ_jk(s,h) − γ_ij(t,s)]/2.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::{CovarianceMatrix, GaussianError};
use crate::core::{BrownResnickConfig, Point};

type PairFn = Arc<dyn Fn(usize, usize, &[f64], &[f64]) -> f64 + Send + Sync>;

fn norm_diff(t: &[f64], s: &[f64]) -> f64 {
    t.iter()
        .zip(s)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// The matrix variogram γ_ij(t,s) of a d-variate Gaussian field over ℝ^p.
#[derive(Clone)]
pub struct VariogramSpec {
    d: usize,
    p: usize,
    stationary: bool,
    gamma: PairFn,
}

impl std::fmt::Debug for VariogramSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VariogramSpec")
            .field("d", &self.d)
            .field("p", &self.p)
            .field("stationary", &self.stationary)
            .finish()
    }
}

impl VariogramSpec {
    /// γ(t,s) = σ·‖t−s‖^ν for a single component (0 < ν ≤ 2).
    pub fn fractional(p: usize, sigma: f64, nu: f64) -> Self {
        assert!(sigma > 0.0 && nu > 0.0 && nu <= 2.0, "need σ > 0, 0 < ν ≤ 2");
        Self {
            d: 1,
            p,
            stationary: true,
            gamma: Arc::new(move |_, _, t, s| sigma * norm_diff(t, s).powf(nu)),
        }
    }

    /// γ_ij(t,s) = σ·‖t − s − δ_i + δ_j‖^ν: components are delayed copies of
    /// one underlying fractional field.
    pub fn delayed(p: usize, sigma: f64, nu: f64, delays: Vec<Point>) -> Self {
        assert!(sigma > 0.0 && nu > 0.0 && nu <= 2.0, "need σ > 0, 0 < ν ≤ 2");
        assert!(delays.iter().all(|v| v.len() == p));
        let d = delays.len();
        Self {
            d,
            p,
            stationary: true,
            gamma: Arc::new(move |i, j, t, s| {
                let shifted_t: Vec<f64> =
                    t.iter().zip(&delays[i]).map(|(a, b)| a - b).collect();
                let shifted_s: Vec<f64> =
                    s.iter().zip(&delays[j]).map(|(a, b)| a - b).collect();
                sigma * norm_diff(&shifted_t, &shifted_s).powf(nu)
            }),
        }
    }

    /// Arbitrary variogram; `stationary` is the caller's declaration that
    /// γ depends on (t, s) only through t − s.
    pub fn custom(d: usize, p: usize, stationary: bool, gamma: PairFn) -> Self {
        Self {
            d,
            p,
            stationary,
            gamma,
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn is_stationary(&self) -> bool {
        self.stationary
    }

    /// γ_ij(t,s) = Var(Y_i(t) − Y_j(s)).
    pub fn gamma(&self, i: usize, j: usize, t: &[f64], s: &[f64]) -> f64 {
        (self.gamma)(i, j, t, s)
    }
}

/// A covariance function cov(Y_i(t), Y_j(s)) of a centered d-variate
/// Gaussian field.
#[derive(Clone)]
pub struct CovarianceFn {
    d: usize,
    p: usize,
    f: PairFn,
}

impl CovarianceFn {
    pub fn new(d: usize, p: usize, f: PairFn) -> Self {
        Self { d, p, f }
    }

    /// cov(Y(t), Y(s)) = (t·s)², d = p = 1: Y(t) = t²·N. Its variogram
    /// (t²−s²)² is not a function of t−s — the planted nonstationary case.
    pub fn product_square() -> Self {
        Self::new(1, 1, Arc::new(|_, _, t, s| (t[0] * t[0]) * (s[0] * s[0])))
    }

    pub fn eval(&self, i: usize, j: usize, t: &[f64], s: &[f64]) -> f64 {
        (self.f)(i, j, t, s)
    }
}

/// A concrete centered Gaussian law realizing a Brown-Resnick model:
/// either an explicit covariance or a variogram rooted at a reference
/// (component, location), so that Y_root(root) ≡ 0.
#[derive(Clone)]
pub enum CovarianceRealization {
    Rooted {
        variogram: VariogramSpec,
        root: Point,
        root_component: usize,
    },
    Explicit(CovarianceFn),
}

impl CovarianceRealization {
    pub fn from_config(cfg: &BrownResnickConfig, p: usize) -> Self {
        match cfg {
            BrownResnickConfig::Fractional { sigma, nu, root } => CovarianceRealization::Rooted {
                variogram: VariogramSpec::fractional(p, *sigma, *nu),
                root: root.clone(),
                root_component: 0,
            },
            BrownResnickConfig::Delayed {
                sigma,
                nu,
                delays,
                root,
                root_component,
            } => CovarianceRealization::Rooted {
                variogram: VariogramSpec::delayed(p, *sigma, *nu, delays.clone()),
                root: root.clone(),
                root_component: *root_component,
            },
            BrownResnickConfig::ProductSquare => {
                CovarianceRealization::Explicit(CovarianceFn::product_square())
            }
        }
    }

    pub fn d(&self) -> usize {
        match self {
            CovarianceRealization::Rooted { variogram, .. } => variogram.d(),
            CovarianceRealization::Explicit(f) => f.d,
        }
    }

    pub fn p(&self) -> usize {
        match self {
            CovarianceRealization::Rooted { variogram, .. } => variogram.p(),
            CovarianceRealization::Explicit(f) => f.p,
        }
    }

    /// cov(Y_i(t), Y_j(s)) of the realized field.
    pub fn cov(&self, i: usize, t: &[f64], j: usize, s: &[f64]) -> f64 {
        match self {
            CovarianceRealization::Rooted {
                variogram,
                root,
                root_component,
            } => {
                let k = *root_component;
                0.5 * (variogram.gamma(i, k, t, root) + variogram.gamma(j, k, s, root)
                    - variogram.gamma(i, j, t, s))
            }
            CovarianceRealization::Explicit(f) => f.eval(i, j, t, s),
        }
    }

    /// γ_ij(t,s) = Var(Y_i(t) − Y_j(s)); for rooted realizations this is the
    /// underlying variogram itself, for explicit covariances it is derived.
    pub fn gamma(&self, i: usize, t: &[f64], j: usize, s: &[f64]) -> f64 {
        match self {
            CovarianceRealization::Rooted { variogram, .. } => variogram.gamma(i, j, t, s),
            CovarianceRealization::Explicit(f) => {
                f.eval(i, i, t, t) + f.eval(j, j, s, s) - 2.0 * f.eval(i, j, t, s)
            }
        }
    }

    /// Var(Y_i(t)) of the realized field.
    pub fn var(&self, i: usize, t: &[f64]) -> f64 {
        self.cov(i, t, i, t)
    }

    pub fn is_stationary_variogram(&self) -> bool {
        match self {
            CovarianceRealization::Rooted { variogram, .. } => variogram.is_stationary(),
            CovarianceRealization::Explicit(_) => false,
        }
    }
}

/// Gaussian law of the increment vector (Y_i(t) − Y_k(h)) over `targets`,
/// anchored at the single (component k, location h): means −γ_ik(t,h)/2
/// (the Brown-Resnick drift), covariances by the polarization identity.
///
/// Errors if the resulting matrix fails the PSD check, which signals an
/// invalid variogram.
pub fn build_increment_cov(
    v: &VariogramSpec,
    anchor: (usize, &[f64]),
    targets: &[(usize, Point)],
) -> Result<(Vec<f64>, CovarianceMatrix), GaussianError> {
    assert!(!targets.is_empty(), "targets must be nonempty");
    let (k, h) = anchor;
    let m = targets.len();
    let gamma_to_anchor: Vec<f64> = targets
        .iter()
        .map(|(i, t)| v.gamma(*i, k, t, h))
        .collect();
    let mean: Vec<f64> = gamma_to_anchor.iter().map(|g| -0.5 * g).collect();
    let mut mat = DMatrix::zeros(m, m);
    for a in 0..m {
        for b in a..m {
            let (i, t) = &targets[a];
            let (j, s) = &targets[b];
            let val = 0.5 * (gamma_to_anchor[a] + gamma_to_anchor[b] - v.gamma(*i, *j, t, s));
            mat[(a, b)] = val;
            mat[(b, a)] = val;
        }
    }
    let cov = CovarianceMatrix::new(mat)
        .map_err(|e| GaussianError::InvalidVariogram(e.to_string()))?;
    Ok((mean, cov))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anchor_target_is_degenerate() {
        let v = VariogramSpec::fractional(1, 1.0, 1.0);
        let (mean, cov) = build_increment_cov(&v, (0, &[0.0]), &[(0, vec![0.0])]).unwrap();
        assert_eq!(mean, vec![0.0]);
        assert_eq!(cov.get(0, 0), 0.0);
    }

    #[test]
    fn brownian_polarization_hand_values() {
        // γ(t,s) = |t−s|, anchor 0, targets {1, 2}:
        // cov = [[1,1],[1,2]], means (−1/2, −1)
        let v = VariogramSpec::fractional(1, 1.0, 1.0);
        let (mean, cov) =
            build_increment_cov(&v, (0, &[0.0]), &[(0, vec![1.0]), (0, vec![2.0])]).unwrap();
        assert_eq!(mean, vec![-0.5, -1.0]);
        assert!((cov.get(0, 0) - 1.0).abs() < 1e-14);
        assert!((cov.get(0, 1) - 1.0).abs() < 1e-14);
        assert!((cov.get(1, 1) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn quadratic_variogram_hand_values() {
        // γ(t,s) = (t−s)², anchor 0, target 3 → variance 9, mean −9/2
        let v = VariogramSpec::fractional(1, 1.0, 2.0);
        let (mean, cov) = build_increment_cov(&v, (0, &[0.0]), &[(0, vec![3.0])]).unwrap();
        assert!((mean[0] + 4.5).abs() < 1e-14);
        assert!((cov.get(0, 0) - 9.0).abs() < 1e-14);
    }

    #[test]
    fn increment_law_ignores_common_gaussian_component() {
        // Two explicit covariances differing by a common centered variable
        // W ~ N(0, 9/4): cov₂ = cov₁ + 9/4. Same γ ⇒ same increment law.
        let base = CovarianceFn::new(
            1,
            1,
            Arc::new(|_, _, t: &[f64], s: &[f64]| {
                0.5 * (t[0].abs() + s[0].abs() - (t[0] - s[0]).abs())
            }),
        );
        let shifted = CovarianceFn::new(
            1,
            1,
            Arc::new(|_, _, t: &[f64], s: &[f64]| {
                0.5 * (t[0].abs() + s[0].abs() - (t[0] - s[0]).abs()) + 2.25
            }),
        );
        let ra = CovarianceRealization::Explicit(base);
        let rb = CovarianceRealization::Explicit(shifted);
        for (t, s) in [(0.3, 1.7), (-1.0, 2.0), (0.0, 5.0)] {
            let ga = ra.gamma(0, &[t], 0, &[s]);
            let gb = rb.gamma(0, &[t], 0, &[s]);
            assert!((ga - gb).abs() < 1e-12, "γ mismatch at ({t},{s})");
        }
    }

    #[test]
    fn rooted_realization_reproduces_its_variogram() {
        let v = VariogramSpec::delayed(1, 1.0, 1.0, vec![vec![0.0], vec![0.5]]);
        let r = CovarianceRealization::Rooted {
            variogram: v.clone(),
            root: vec![0.0],
            root_component: 0,
        };
        for (i, j, t, s) in [(0, 1, 0.7, -0.2), (1, 1, 1.0, 3.0), (0, 0, -1.0, 1.0)] {
            let direct = v.gamma(i, j, &[t], &[s]);
            let derived = r.var(i, &[t]) + r.var(j, &[s]) - 2.0 * r.cov(i, &[t], j, &[s]);
            assert!(
                (direct - derived).abs() < 1e-12,
                "γ_{i}{j}({t},{s}): {direct} vs {derived}"
            );
        }
        // the root itself is degenerate
        assert_eq!(r.var(0, &[0.0]), 0.0);
    }
}
