//! The shipped model fixtures exercised by the verification and acceptance
//! suites (and addressable from CLI tests).

use crate::core::{
    BrownResnickConfig, CustomKind, KernelKind, ModelKind, ModelSpec, ScalerSpec, SmithConfig,
};

/// Z(t) ≡ 1: unit Fréchet margins, complete dependence across locations.
pub fn unit_frechet() -> ModelSpec {
    ModelSpec::new(1.0, 1, 1, ModelKind::Custom(CustomKind::UnitSpectrum)).unwrap()
}

/// d = 1 Brown-Resnick with Brownian variogram γ(t,s) = |t−s|, rooted at 0.
pub fn br_brownian_d1() -> ModelSpec {
    br_brownian_d1_rooted(0.0)
}

/// Same variogram, rooted at an arbitrary location (the max-stable law must
/// not depend on the rooting).
pub fn br_brownian_d1_rooted(root: f64) -> ModelSpec {
    ModelSpec::new(
        1.0,
        1,
        1,
        ModelKind::BrownResnick(BrownResnickConfig::Fractional {
            sigma: 1.0,
            nu: 1.0,
            root: vec![root],
        }),
    )
    .unwrap()
}

/// Complete-dependence spectrum: a fractional variogram at the smallest
/// positive scale, whose Gaussian part underflows to zero, so Z ≡ 1 at
/// every location exactly (the variogram ≡ 0 limit).
pub fn br_degenerate_dependence() -> ModelSpec {
    ModelSpec::new(
        1.0,
        1,
        1,
        ModelKind::BrownResnick(BrownResnickConfig::Fractional {
            sigma: 1e-300,
            nu: 1.0,
            root: vec![0.0],
        }),
    )
    .unwrap()
}

/// d = 2 stationary Brown-Resnick: both components ride one Brownian field
/// with per-component delays, γ_ij(t,s) = |t − s − δ_i + δ_j|.
pub fn br_delayed_d2() -> ModelSpec {
    ModelSpec::new(
        1.0,
        2,
        1,
        ModelKind::BrownResnick(BrownResnickConfig::Delayed {
            sigma: 1.0,
            nu: 1.0,
            delays: vec![vec![0.0], vec![0.5]],
            root: vec![0.0],
            root_component: 0,
        }),
    )
    .unwrap()
}

/// Planted nonstationary Brown-Resnick: Y(t) = t²·N, γ(t,s) = (t²−s²)².
pub fn br_planted_nonstationary() -> ModelSpec {
    ModelSpec::new(
        1.0,
        1,
        1,
        ModelKind::BrownResnick(BrownResnickConfig::ProductSquare),
    )
    .unwrap()
}

/// d = 1 Smith model with standard Gaussian-density kernel; in one
/// dimension its law coincides with Brown-Resnick under γ(t,s) = (t−s)².
pub fn smith_gaussian_d1() -> ModelSpec {
    ModelSpec::new(
        1.0,
        1,
        1,
        ModelKind::Smith(SmithConfig {
            kernels: vec![KernelKind::GaussianDensity { sigma: 1.0 }],
            mixing_sigma: 2.0,
            window: 8.0,
        }),
    )
    .unwrap()
}

/// Random scaling of a base model by R = factor·U with declared E R^α.
pub fn scaled(base: ModelSpec, alpha_moment: f64) -> ModelSpec {
    let alpha = base.alpha;
    let d = base.d;
    let p = base.p;
    ModelSpec::new(
        alpha,
        d,
        p,
        ModelKind::Scaled {
            base: Box::new(base),
            scaler: ScalerSpec::uniform_with_alpha_moment(alpha, alpha_moment),
        },
    )
    .unwrap()
}
