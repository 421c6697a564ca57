//! Multivariate normal rectangle probabilities by randomized quasi-Monte
//! Carlo with sequential conditioning (Genz's method).
//!
//! The rectangle P(a ≤ X ≤ b), X ~ N(mean, C), is transformed through a
//! variable-reordered Cholesky factor into an integral over the unit cube
//! of dimension m−1, then integrated with a randomly shifted Richtmyer
//! lattice (√prime generators, baker transform). The spread over the
//! random shifts gives the reported standard error; rounds double the
//! lattice size until the error target or the point budget is hit.

use rand::Rng;

use super::normal::{normal_pdf, phid, phinv};
use super::{factorize, CovarianceMatrix, GaussianError, RECT_DIMENSION_CEILING};
use crate::core::{EstimateWithError, RngStream};

/// Tuning knobs for the integrator.
#[derive(Debug, Clone)]
pub struct RectProbConfig {
    /// Stop once stderr ≤ target_rel_err · value.
    pub target_rel_err: f64,
    /// Random lattice shifts per round; the stderr comes from their spread.
    pub shifts: usize,
    /// Lattice points per shift in the first round (doubled each round).
    pub initial_points: usize,
    /// Total integrand-evaluation budget across rounds.
    pub max_points: u64,
}

impl Default for RectProbConfig {
    fn default() -> Self {
        Self {
            target_rel_err: 1e-5,
            shifts: 12,
            initial_points: 256,
            max_points: 1 << 23,
        }
    }
}

/// Result of a rectangle-probability evaluation.
#[derive(Debug, Clone, Copy)]
pub struct RectProb {
    pub value: f64,
    pub stderr: f64,
    /// Integrand evaluations spent.
    pub points_used: u64,
    /// Set when the budget stopped the iteration before the error target.
    pub budget_hit: bool,
    /// Jitter applied by the factorization ladder (0 for clean inputs).
    pub jitter: f64,
}

impl RectProb {
    fn exact(value: f64) -> Self {
        Self {
            value,
            stderr: 0.0,
            points_used: 0,
            budget_hit: false,
            jitter: 0.0,
        }
    }

    pub fn estimate(&self) -> EstimateWithError {
        EstimateWithError {
            value: self.value,
            stderr: self.stderr,
            n_replicates: self.points_used.max(1),
            self_normalized: false,
        }
    }
}

/// P(lower ≤ X ≤ upper) for X ~ N(mean, C) with the default budget.
/// Extended-real bounds are allowed; an empty rectangle returns exactly 0
/// with stderr 0.
pub fn mvn_rect_prob(
    lower: &[f64],
    upper: &[f64],
    mean: &[f64],
    cov: &CovarianceMatrix,
    target_rel_err: f64,
    stream: &mut RngStream,
) -> Result<RectProb, GaussianError> {
    let cfg = RectProbConfig {
        target_rel_err,
        ..RectProbConfig::default()
    };
    mvn_rect_prob_with(lower, upper, mean, cov, &cfg, stream)
}

pub fn mvn_rect_prob_with(
    lower: &[f64],
    upper: &[f64],
    mean: &[f64],
    cov: &CovarianceMatrix,
    cfg: &RectProbConfig,
    stream: &mut RngStream,
) -> Result<RectProb, GaussianError> {
    let m = cov.dim();
    if lower.len() != m || upper.len() != m || mean.len() != m {
        return Err(GaussianError::ShapeMismatch(format!(
            "bounds/mean length must equal covariance dimension {m}"
        )));
    }
    if m > RECT_DIMENSION_CEILING {
        return Err(GaussianError::DimensionCeiling {
            dim: m,
            max: RECT_DIMENSION_CEILING,
        });
    }

    // center, detect empty rectangles, and drop deterministic coordinates
    let mut a = Vec::with_capacity(m);
    let mut b = Vec::with_capacity(m);
    let mut keep = Vec::with_capacity(m);
    for i in 0..m {
        let ai = lower[i] - mean[i];
        let bi = upper[i] - mean[i];
        if !(ai < bi) {
            return Ok(RectProb::exact(0.0)); // empty or zero-measure rectangle
        }
        if cov.get(i, i) == 0.0 {
            // X_i ≡ mean_i: the constraint is a hard indicator
            if ai > 0.0 || bi < 0.0 {
                return Ok(RectProb::exact(0.0));
            }
        } else {
            a.push(ai);
            b.push(bi);
            keep.push(i);
        }
    }
    if keep.is_empty() {
        return Ok(RectProb::exact(1.0));
    }
    if keep.len() == 1 {
        let sd = cov.get(keep[0], keep[0]).sqrt();
        let v = phid(b[0] / sd) - phid(a[0] / sd);
        return Ok(RectProb::exact(v.max(0.0)));
    }

    // jitter ladder on the retained submatrix
    let sub = nalgebra::DMatrix::from_fn(keep.len(), keep.len(), |i, j| {
        cov.get(keep[i], keep[j])
    });
    let subcov = CovarianceMatrix::new(sub.clone())?;
    let jitter = factorize(&subcov)?.jitter();
    let work = &sub + nalgebra::DMatrix::from_diagonal_element(keep.len(), keep.len(), jitter);

    let (l, a, b) = reordered_cholesky(work, a, b);
    let (value, stderr, points_used, budget_hit) = integrate(&l, &a, &b, cfg, stream);
    Ok(RectProb {
        value,
        stderr,
        points_used,
        budget_hit,
        jitter,
    })
}

/// Cholesky factorization with Genz's variable reordering: at each step the
/// remaining variable with the smallest conditional probability mass (given
/// earlier variables at their truncated means) comes next.
fn reordered_cholesky(
    mut c: nalgebra::DMatrix<f64>,
    mut a: Vec<f64>,
    mut b: Vec<f64>,
) -> (nalgebra::DMatrix<f64>, Vec<f64>, Vec<f64>) {
    let m = a.len();
    let mut l = nalgebra::DMatrix::<f64>::zeros(m, m);
    let mut y = vec![0.0_f64; m];
    for k in 0..m {
        let mut best = k;
        let mut best_p = f64::INFINITY;
        let mut best_bounds = (f64::NEG_INFINITY, f64::INFINITY);
        for j in k..m {
            let mut s2 = c[(j, j)];
            let mut mu = 0.0;
            for r in 0..k {
                s2 -= l[(j, r)] * l[(j, r)];
                mu += l[(j, r)] * y[r];
            }
            let sd = s2.max(1e-300).sqrt();
            let at = (a[j] - mu) / sd;
            let bt = (b[j] - mu) / sd;
            let p = phid(bt) - phid(at);
            if p < best_p {
                best_p = p;
                best = j;
                best_bounds = (at, bt);
            }
        }
        if best != k {
            c.swap_rows(k, best);
            c.swap_columns(k, best);
            a.swap(k, best);
            b.swap(k, best);
            l.swap_rows(k, best);
        }
        let mut s2 = c[(k, k)];
        for r in 0..k {
            s2 -= l[(k, r)] * l[(k, r)];
        }
        let lkk = s2.max(1e-300).sqrt();
        l[(k, k)] = lkk;
        for j in (k + 1)..m {
            let mut v = c[(j, k)];
            for r in 0..k {
                v -= l[(k, r)] * l[(j, r)];
            }
            l[(j, k)] = v / lkk;
        }
        // conditional (truncated-normal) mean of variable k for the next steps
        let (at, bt) = best_bounds;
        y[k] = if best_p > 1e-12 {
            (normal_pdf(at) - normal_pdf(bt)) / best_p
        } else {
            // negligible mass: park at the nearer finite bound
            let lo = if at.is_finite() { at } else { bt.min(0.0) };
            let hi = if bt.is_finite() { bt } else { at.max(0.0) };
            0.5 * (lo + hi)
        };
    }
    (l, a, b)
}

// fractional parts of √prime lattice generators (first 64 primes)
const PRIMES: [u32; 64] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191,
    193, 197, 199, 211, 223, 227, 229, 233, 239, 241, 251, 257, 263, 269, 271, 277, 281, 283,
    293, 307, 311,
];

fn integrate(
    l: &nalgebra::DMatrix<f64>,
    a: &[f64],
    b: &[f64],
    cfg: &RectProbConfig,
    stream: &mut RngStream,
) -> (f64, f64, u64, bool) {
    let m = a.len();
    let dim = m - 1;
    let q: Vec<f64> = (0..dim).map(|j| (PRIMES[j] as f64).sqrt().fract()).collect();

    // first conditional factor is constant across points
    let d0 = phid(a[0] / l[(0, 0)]);
    let e0 = phid(b[0] / l[(0, 0)]);
    let f0 = (e0 - d0).max(0.0);

    let shifts = cfg.shifts.max(2);
    let mut n_points = cfg.initial_points.max(8);
    let mut used: u64 = 0;
    let mut ys = vec![0.0_f64; m];
    let mut value;
    let mut stderr;
    loop {
        let mut shift_means = Vec::with_capacity(shifts);
        for _ in 0..shifts {
            let delta: Vec<f64> = (0..dim).map(|_| stream.gen::<f64>()).collect();
            let mut acc = 0.0;
            for k in 1..=n_points {
                let mut f = f0;
                let mut dprev = d0;
                let mut eprev = e0;
                for i in 1..m {
                    let w = (k as f64 * q[i - 1] + delta[i - 1]).fract();
                    let w = (2.0 * w - 1.0).abs(); // baker transform
                    let p = dprev + w * (eprev - dprev);
                    ys[i - 1] = phinv(p.clamp(1e-100, 1.0 - 1e-16));
                    let mut t = 0.0;
                    for j in 0..i {
                        t += l[(i, j)] * ys[j];
                    }
                    let sd = l[(i, i)];
                    let di = phid((a[i] - t) / sd);
                    let ei = phid((b[i] - t) / sd);
                    f *= (ei - di).max(0.0);
                    if f == 0.0 {
                        break;
                    }
                    dprev = di;
                    eprev = ei;
                }
                acc += f;
            }
            shift_means.push(acc / n_points as f64);
        }
        used += (shifts * n_points) as u64;
        value = shift_means.iter().sum::<f64>() / shifts as f64;
        let var = shift_means
            .iter()
            .map(|v| (v - value) * (v - value))
            .sum::<f64>()
            / (shifts as f64 - 1.0);
        stderr = (var / shifts as f64).sqrt();
        if stderr <= cfg.target_rel_err * value.abs() {
            return (value, stderr, used, false);
        }
        if used.saturating_mul(2) > cfg.max_points {
            return (value, stderr, used, true);
        }
        n_points *= 2;
    }
}
