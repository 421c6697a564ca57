//! Smith kernel specifications: named kernels, their masses, the mixing
//! density, and rejection sampling from kernel-tilted location laws.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::SpectralError;
use crate::core::{KernelKind, ModelKind, ModelSpec, NormSpec, RngStream};
use crate::gaussian::normal_pdf;

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

fn kernel_value_1d(kind: &KernelKind, t: f64) -> f64 {
    match kind {
        KernelKind::GaussianDensity { sigma } => normal_pdf(t / sigma) / sigma,
        KernelKind::Box { half_width } => {
            if t.abs() <= *half_width {
                1.0
            } else {
                0.0
            }
        }
        KernelKind::Triangle { half_width } => (1.0 - t.abs() / half_width).max(0.0),
    }
}

/// ∫ K(t)^α dt over ℝ for the named 1-d kernels.
fn kernel_alpha_mass_1d(kind: &KernelKind, alpha: f64) -> f64 {
    match kind {
        KernelKind::GaussianDensity { sigma } => {
            // ∫ (φ(t/σ)/σ)^α dt = σ^{1−α} (2π)^{(1−α)/2} α^{−1/2}
            sigma.powf(1.0 - alpha) * SQRT_2PI.powf(1.0 - alpha) / alpha.sqrt()
        }
        KernelKind::Box { half_width } => 2.0 * half_width,
        KernelKind::Triangle { half_width } => 2.0 * half_width / (alpha + 1.0),
    }
}

/// A d-variate Smith kernel L over ℝ^p with product components drawn from
/// the named registry, carrying the kernel masses c_k = ∫L_k^α,
/// c = ∫‖L‖^α, c_∞ = ∫‖L‖_∞^α (analytic where available, numeric with a
/// recorded quadrature error otherwise) and the rejection window.
#[derive(Clone)]
pub struct SmithKernelSpec {
    kernels: Vec<KernelKind>,
    alpha: f64,
    p: usize,
    mixing_sigma: f64,
    window: f64,
    norm: NormSpec,
    c_k: Vec<f64>,
    c_norm: f64,
    c_sup: f64,
    quadrature_error: f64,
    truncation_bound: f64,
}

impl SmithKernelSpec {
    pub fn new(
        kernels: Vec<KernelKind>,
        alpha: f64,
        p: usize,
        mixing_sigma: f64,
        window: f64,
        norm: NormSpec,
    ) -> Result<Self, SpectralError> {
        if kernels.is_empty() {
            return Err(SpectralError::Unsupported("smith model needs d ≥ 1 kernels".into()));
        }
        if !(alpha > 0.0) {
            return Err(SpectralError::Unsupported("alpha must be positive".into()));
        }
        let d = kernels.len();
        let c_k: Vec<f64> = kernels
            .iter()
            .map(|k| kernel_alpha_mass_1d(k, alpha).powi(p as i32))
            .collect();
        let identical = kernels.iter().all(|k| *k == kernels[0]);
        let (c_norm, c_sup, quadrature_error) = if d == 1 {
            (c_k[0], c_k[0], 0.0)
        } else if identical {
            // ‖(K,…,K)‖ = K·‖(1,…,1)‖ for every norm
            let ones = vec![1.0; d];
            let norm_scale = norm.eval(&ones).powf(alpha);
            (norm_scale * c_k[0], c_k[0], 0.0)
        } else if p == 1 {
            let eval_norm = |t: f64| {
                let vals: Vec<f64> = kernels.iter().map(|k| kernel_value_1d(k, t)).collect();
                norm.eval(&vals).powf(alpha)
            };
            let eval_sup = |t: f64| {
                kernels
                    .iter()
                    .map(|k| kernel_value_1d(k, t))
                    .fold(0.0_f64, f64::max)
                    .powf(alpha)
            };
            let (cn, e1) = simpson(&eval_norm, -window, window);
            let (cs, e2) = simpson(&eval_sup, -window, window);
            (cn, cs, e1.max(e2))
        } else {
            return Err(SpectralError::Unsupported(
                "mixed kernels with p > 1 need analytically supplied masses".into(),
            ));
        };
        // fraction of the tilted-location mass outside the window
        // (∫_{out}‖L‖^α ≤ Σ_k ∫_{out} L_k^α, per-axis union bound for p > 1);
        // exactly 0 for compactly supported kernels inside the window
        let outside_mass: f64 = kernels
            .iter()
            .zip(&c_k)
            .map(|(k, ck)| match k {
                KernelKind::GaussianDensity { sigma } => {
                    let axis_tail = 2.0 * crate::gaussian::phid(-window * alpha.sqrt() / sigma);
                    ck * (p as f64 * axis_tail).min(1.0)
                }
                KernelKind::Box { half_width } | KernelKind::Triangle { half_width } => {
                    if *half_width <= window {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                }
            })
            .sum();
        let truncation_bound = outside_mass / c_norm;
        Ok(Self {
            kernels,
            alpha,
            p,
            mixing_sigma,
            window,
            norm,
            c_k,
            c_norm,
            c_sup,
            quadrature_error,
            truncation_bound,
        })
    }

    pub fn from_model(spec: &ModelSpec) -> Result<Self, SpectralError> {
        match &spec.kind {
            ModelKind::Smith(cfg) => Self::new(
                cfg.kernels.clone(),
                spec.alpha,
                spec.p,
                cfg.mixing_sigma,
                cfg.window,
                NormSpec::Sup,
            ),
            _ => Err(SpectralError::WrongKind { expected: "Smith" }),
        }
    }

    pub fn d(&self) -> usize {
        self.kernels.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn norm(&self) -> &NormSpec {
        &self.norm
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    /// c_k = ∫ L_k^α dλ.
    pub fn component_mass(&self, k: usize) -> f64 {
        self.c_k[k]
    }

    /// c = ∫ ‖L‖^α dλ for the spec's norm.
    pub fn norm_mass(&self) -> f64 {
        self.c_norm
    }

    /// c_∞ = ∫ ‖L‖_∞^α dλ.
    pub fn sup_mass(&self) -> f64 {
        self.c_sup
    }

    /// Recorded quadrature error for numerically computed masses (0 when
    /// all masses are analytic).
    pub fn mass_quadrature_error(&self) -> f64 {
        self.quadrature_error
    }

    /// Upper bound on the tilted-location mass outside the rejection window.
    pub fn truncation_bound(&self) -> f64 {
        self.truncation_bound
    }

    pub fn kernel_value(&self, i: usize, t: &[f64]) -> f64 {
        t.iter()
            .map(|&tr| kernel_value_1d(&self.kernels[i], tr))
            .product()
    }

    /// L(t) as a vector.
    pub fn kernel_vector(&self, t: &[f64]) -> Vec<f64> {
        (0..self.d()).map(|i| self.kernel_value(i, t)).collect()
    }

    /// Mixing density q(t) = ∏_r φ(t_r/σ_q)/σ_q.
    pub fn mixing_density(&self, t: &[f64]) -> f64 {
        t.iter()
            .map(|&tr| normal_pdf(tr / self.mixing_sigma) / self.mixing_sigma)
            .product()
    }

    pub fn draw_mixing(&self, stream: &mut RngStream) -> Vec<f64> {
        (0..self.p)
            .map(|_| self.mixing_sigma * Distribution::<f64>::sample(&StandardNormal, stream))
            .collect()
    }

    /// Builds a rejection sampler for the location law with density
    /// proportional to `target` on the window, proposing from the mixing
    /// density. The envelope constant is bounded numerically on a window
    /// grid and inflated by a safety margin; domination failures observed
    /// at draw time are counted.
    pub(crate) fn rejection_sampler(
        &self,
        target: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    ) -> Result<RejectionSampler, SpectralError> {
        let grid_axis = 4096usize;
        if self.p > 2 {
            return Err(SpectralError::Unsupported(
                "rejection envelopes are bounded numerically only for p ≤ 2".into(),
            ));
        }
        let axis_points = if self.p == 1 { grid_axis } else { 256 };
        let mut sup_ratio = 0.0_f64;
        let mut coords = vec![0usize; self.p];
        let total = axis_points.pow(self.p as u32);
        for flat in 0..total {
            let mut rem = flat;
            for c in coords.iter_mut() {
                *c = rem % axis_points;
                rem /= axis_points;
            }
            let t: Vec<f64> = coords
                .iter()
                .map(|&c| -self.window + (c as f64 + 0.5) * 2.0 * self.window / axis_points as f64)
                .collect();
            let q = self.mixing_density(&t);
            let ratio = target(&t) / q;
            if ratio.is_finite() {
                sup_ratio = sup_ratio.max(ratio);
            } else {
                return Err(SpectralError::RejectionEnvelope(
                    "target/proposal ratio not finite on the window".into(),
                ));
            }
        }
        if sup_ratio <= 0.0 {
            return Err(SpectralError::RejectionEnvelope(
                "target vanishes on the whole window".into(),
            ));
        }
        Ok(RejectionSampler {
            target,
            envelope: sup_ratio * 1.25,
            window: self.window,
            mixing_sigma: self.mixing_sigma,
            p: self.p,
            proposed: AtomicU64::new(0),
            accepted: AtomicU64::new(0),
            domination_violations: AtomicU64::new(0),
        })
    }
}

/// Accept-reject sampler from an unnormalized density on a compact window,
/// proposing from the Gaussian mixing density.
pub(crate) struct RejectionSampler {
    target: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    envelope: f64,
    window: f64,
    mixing_sigma: f64,
    p: usize,
    proposed: AtomicU64,
    accepted: AtomicU64,
    domination_violations: AtomicU64,
}

impl RejectionSampler {
    pub fn draw(&self, stream: &mut RngStream) -> Vec<f64> {
        loop {
            self.proposed.fetch_add(1, Ordering::Relaxed);
            let t: Vec<f64> = (0..self.p)
                .map(|_| self.mixing_sigma * Distribution::<f64>::sample(&StandardNormal, stream))
                .collect();
            let u: f64 = stream.gen();
            if t.iter().any(|v| v.abs() > self.window) {
                continue;
            }
            let q: f64 = t
                .iter()
                .map(|&tr| normal_pdf(tr / self.mixing_sigma) / self.mixing_sigma)
                .product();
            let mut ratio = (self.target)(&t) / (self.envelope * q);
            if ratio > 1.0 {
                self.domination_violations.fetch_add(1, Ordering::Relaxed);
                ratio = 1.0;
            }
            if u < ratio {
                self.accepted.fetch_add(1, Ordering::Relaxed);
                return t;
            }
        }
    }

    pub fn acceptance_rate(&self) -> f64 {
        let p = self.proposed.load(Ordering::Relaxed);
        let a = self.accepted.load(Ordering::Relaxed);
        if p == 0 {
            f64::NAN
        } else {
            a as f64 / p as f64
        }
    }

    #[allow(dead_code)]
    pub fn domination_violations(&self) -> u64 {
        self.domination_violations.load(Ordering::Relaxed)
    }
}

/// Composite Simpson quadrature with one refinement step as the error
/// estimate.
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    fn run(f: &dyn Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
        let h = (b - a) / intervals as f64;
        let mut acc = f(a) + f(b);
        for i in 1..intervals {
            let x = a + i as f64 * h;
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        acc * h / 3.0
    }
    let coarse = run(f, a, b, 4096);
    let fine = run(f, a, b, 8192);
    (fine, (fine - coarse).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_kernel_masses() {
        // α = 1: ∫φ = 1; α = 2: ∫φ² = 1/(2√π)
        let k = KernelKind::GaussianDensity { sigma: 1.0 };
        assert!((kernel_alpha_mass_1d(&k, 1.0) - 1.0).abs() < 1e-14);
        let half_sqrt_pi = 0.5 / std::f64::consts::PI.sqrt();
        assert!((kernel_alpha_mass_1d(&k, 2.0) - half_sqrt_pi).abs() < 1e-14);
    }

    #[test]
    fn box_and_triangle_masses() {
        assert_eq!(kernel_alpha_mass_1d(&KernelKind::Box { half_width: 0.5 }, 3.0), 1.0);
        let tri = kernel_alpha_mass_1d(&KernelKind::Triangle { half_width: 1.0 }, 1.0);
        assert!((tri - 1.0).abs() < 1e-14);
    }

    #[test]
    fn numeric_norm_mass_matches_analytic_for_identical_kernels() {
        // d = 2 identical Gaussian kernels: sup mass must equal c_1
        let spec = SmithKernelSpec::new(
            vec![
                KernelKind::GaussianDensity { sigma: 1.0 },
                KernelKind::GaussianDensity { sigma: 1.0 },
            ],
            1.0,
            1,
            2.0,
            8.0,
            NormSpec::Sup,
        )
        .unwrap();
        assert!((spec.sup_mass() - spec.component_mass(0)).abs() < 1e-12);
        assert!((spec.norm_mass() - spec.component_mass(0)).abs() < 1e-12);
    }

    #[test]
    fn mixed_kernels_numeric_masses() {
        let spec = SmithKernelSpec::new(
            vec![
                KernelKind::GaussianDensity { sigma: 1.0 },
                KernelKind::Box { half_width: 0.25 },
            ],
            1.0,
            1,
            2.0,
            8.0,
            NormSpec::Sup,
        )
        .unwrap();
        // ∫ max(φ(t), 1{|t|≤1/4}) dt = ∫φ + ∫_{|t|≤1/4} (1 − φ(t)) dt
        let phi_part = 1.0;
        let extra = 0.5 - (crate::gaussian::phid(0.25) - crate::gaussian::phid(-0.25));
        let expect = phi_part + extra;
        assert!(
            (spec.sup_mass() - expect).abs() < 1e-8 + spec.mass_quadrature_error(),
            "sup mass {} vs {}",
            spec.sup_mass(),
            expect
        );
    }
}
