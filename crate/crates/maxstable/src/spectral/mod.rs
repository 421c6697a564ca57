//! The spectral-process zoo.
//!
//! Every sampler emits joint values Z(t_1),…,Z(t_n) ∈ [0,∞)^{d×n} at the
//! location set it was built for, one [`SampleMatrix`] per draw. Samplers
//! are immutable after construction and drawing is pure given the stream,
//! so replicates parallelize with per-replicate substreams.

mod kernel;
mod mixture;
mod tilt;

pub use kernel::SmithKernelSpec;
pub use mixture::MixtureSampler;
pub use tilt::{BrTiltSampler, GenericTiltSampler, SmithTiltSampler, TiltAnchor, TiltFamily, TiltMode};

use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::core::{
    CoreError, CustomKind, LocationSet, ModelKind, ModelSpec, RngStream, SampleMatrix, ScalerSpec,
};
use crate::gaussian::{factorize, CholeskyFactor, CovarianceMatrix, CovarianceRealization, GaussianError};

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
    #[error("model is not a {expected} model")]
    WrongKind { expected: &'static str },
    #[error("mixing density vanished at a drawn point (misconfigured density)")]
    MixingDensityZero,
    #[error("rejection envelope: {0}")]
    RejectionEnvelope(String),
    #[error("no closed-form tilt: {0}")]
    NoClosedFormTilt(String),
    #[error("tilt anchor is degenerate: the anchor moment is zero")]
    AnchorDegenerate,
    #[error("weighted sampler not allowed here: {0}")]
    WeightedSampler(String),
    #[error("{0}")]
    Unsupported(String),
}

/// A seedable generator of joint spectral values at a fixed location set.
pub trait SpectralSampler: Send + Sync {
    fn d(&self) -> usize;
    fn n(&self) -> usize;
    fn draw(&self, stream: &mut RngStream) -> SampleMatrix;
    /// Weighted samplers emit importance weights ≠ 1 and must be consumed
    /// by self-normalizing estimators.
    fn is_weighted(&self) -> bool {
        false
    }
}

/// Brown-Resnick spectral specification: Z(t) = exp(Y(t) − Var Y(t)/2) for
/// a centered d-variate Gaussian field Y (α = 1). The −Var/2 drift makes
/// E Z_k(t) = 1 per component identically, so the normalization
/// E‖Z(t)‖^α = 1 required of spectral processes holds for the sup norm in
/// d = 1 and the process is normalized componentwise in general.
#[derive(Clone)]
pub struct BrownResnickSpec {
    realization: CovarianceRealization,
}

impl BrownResnickSpec {
    pub fn new(realization: CovarianceRealization) -> Self {
        Self { realization }
    }

    pub fn from_model(spec: &ModelSpec) -> Result<Self, SpectralError> {
        match &spec.kind {
            ModelKind::BrownResnick(cfg) => Ok(Self::new(CovarianceRealization::from_config(
                cfg, spec.p,
            ))),
            _ => Err(SpectralError::WrongKind {
                expected: "Brown-Resnick",
            }),
        }
    }

    pub fn d(&self) -> usize {
        self.realization.d()
    }

    pub fn p(&self) -> usize {
        self.realization.p()
    }

    pub fn realization(&self) -> &CovarianceRealization {
        &self.realization
    }

    /// γ_ij(t,s) = Var(Y_i(t) − Y_j(s)) of the realized field.
    pub fn gamma(&self, i: usize, t: &[f64], j: usize, s: &[f64]) -> f64 {
        self.realization.gamma(i, t, j, s)
    }

    /// The variogram as a standalone spec, for increment-law constructions.
    pub fn variogram_spec(&self) -> crate::gaussian::VariogramSpec {
        let realization = self.realization.clone();
        crate::gaussian::VariogramSpec::custom(
            self.d(),
            self.p(),
            realization.is_stationary_variogram(),
            std::sync::Arc::new(move |i, j, t, s| realization.gamma(i, t, j, s)),
        )
    }
}

/// Joint log-Gaussian sampler for a Brown-Resnick spectrum at fixed
/// locations.
pub struct BrownResnickSampler {
    d: usize,
    n: usize,
    factor: CholeskyFactor,
    drift: Vec<f64>, // −Var(Y_i(t_j))/2, location-major
}

impl BrownResnickSampler {
    pub fn new(spec: &BrownResnickSpec, locs: &LocationSet) -> Result<Self, SpectralError> {
        let d = spec.d();
        let n = locs.n();
        let m = d * n;
        let mut cov = nalgebra::DMatrix::zeros(m, m);
        for j in 0..n {
            for i in 0..d {
                let a = j * d + i;
                for jj in 0..n {
                    for ii in 0..d {
                        let b = jj * d + ii;
                        if b < a {
                            continue;
                        }
                        let v = spec
                            .realization
                            .cov(i, locs.point(j), ii, locs.point(jj));
                        cov[(a, b)] = v;
                        cov[(b, a)] = v;
                    }
                }
            }
        }
        let cov = CovarianceMatrix::new(cov)?;
        let drift = (0..m).map(|a| -0.5 * cov.get(a, a)).collect();
        let factor = factorize(&cov)?;
        Ok(Self {
            d,
            n,
            factor,
            drift,
        })
    }
}

impl SpectralSampler for BrownResnickSampler {
    fn d(&self) -> usize {
        self.d
    }

    fn n(&self) -> usize {
        self.n
    }

    fn draw(&self, stream: &mut RngStream) -> SampleMatrix {
        let m = self.d * self.n;
        let l = self.factor.l();
        let g: Vec<f64> = (0..m).map(|_| StandardNormal.sample(stream)).collect();
        let mut values = Vec::with_capacity(m);
        for a in 0..m {
            let mut y = 0.0;
            for b in 0..=a {
                y += l[(a, b)] * g[b];
            }
            values.push((y + self.drift[a]).exp());
        }
        SampleMatrix::from_raw(self.d, self.n, values, 1.0)
    }
}

/// Smith moving-kernel sampler: Z(t) = (1/q(W))^{1/α} L(t − W), W ~ q.
pub struct SmithSampler {
    spec: SmithKernelSpec,
    locs: LocationSet,
}

impl SmithSampler {
    pub fn new(spec: SmithKernelSpec, locs: &LocationSet) -> Result<Self, SpectralError> {
        if locs.p() != spec.p() {
            return Err(SpectralError::Unsupported(format!(
                "location dimension {} does not match kernel dimension {}",
                locs.p(),
                spec.p()
            )));
        }
        Ok(Self {
            spec,
            locs: locs.clone(),
        })
    }
}

impl SpectralSampler for SmithSampler {
    fn d(&self) -> usize {
        self.spec.d()
    }

    fn n(&self) -> usize {
        self.locs.n()
    }

    fn draw(&self, stream: &mut RngStream) -> SampleMatrix {
        let d = self.spec.d();
        let n = self.locs.n();
        let w = self.spec.draw_mixing(stream);
        let qw = self.spec.mixing_density(&w);
        assert!(
            qw > 0.0,
            "mixing density vanished at a drawn point (misconfigured density)"
        );
        let scale = qw.powf(-1.0 / self.spec.alpha());
        let mut values = Vec::with_capacity(d * n);
        let mut arg = vec![0.0; self.locs.p()];
        for j in 0..n {
            let t = self.locs.point(j);
            for r in 0..arg.len() {
                arg[r] = t[r] - w[r];
            }
            for i in 0..d {
                values.push(scale * self.spec.kernel_value(i, &arg));
            }
        }
        SampleMatrix::from_raw(d, n, values, 1.0)
    }
}

/// Z̃ = R·Z with R an independent nonnegative scaler, one fresh R per
/// replicate. Spectral equivalence requires the declared E R^α = 1; the
/// constructor does not enforce it so that planted violations can be built
/// for the verification suite.
pub struct ScaledSampler {
    base: Box<dyn SpectralSampler>,
    scaler: ScalerSpec,
}

impl ScaledSampler {
    pub fn new(base: Box<dyn SpectralSampler>, scaler: ScalerSpec) -> Self {
        Self { base, scaler }
    }
}

impl SpectralSampler for ScaledSampler {
    fn d(&self) -> usize {
        self.base.d()
    }

    fn n(&self) -> usize {
        self.base.n()
    }

    fn is_weighted(&self) -> bool {
        self.base.is_weighted()
    }

    fn draw(&self, stream: &mut RngStream) -> SampleMatrix {
        let r = self.scaler.draw(stream);
        let z = self.base.draw(stream);
        let values = z.values().iter().map(|v| r * v).collect();
        SampleMatrix::from_raw(z.d(), z.n(), values, z.weight())
    }
}

/// Z(t) ≡ 1: the deterministic unit spectrum (unit Fréchet max-stable
/// process for any α).
pub struct UnitSpectrumSampler {
    d: usize,
    n: usize,
}

impl UnitSpectrumSampler {
    pub fn new(d: usize, n: usize) -> Self {
        Self { d, n }
    }
}

impl SpectralSampler for UnitSpectrumSampler {
    fn d(&self) -> usize {
        self.d
    }

    fn n(&self) -> usize {
        self.n
    }

    fn draw(&self, _stream: &mut RngStream) -> SampleMatrix {
        SampleMatrix::from_raw(self.d, self.n, vec![1.0; self.d * self.n], 1.0)
    }
}

/// Builds the sampler described by a [`ModelSpec`] at the given locations.
pub fn build_sampler(
    spec: &ModelSpec,
    locs: &LocationSet,
) -> Result<Box<dyn SpectralSampler>, SpectralError> {
    match &spec.kind {
        ModelKind::BrownResnick(_) => {
            let br = BrownResnickSpec::from_model(spec)?;
            Ok(Box::new(BrownResnickSampler::new(&br, locs)?))
        }
        ModelKind::Smith(_) => {
            let sk = SmithKernelSpec::from_model(spec)?;
            Ok(Box::new(SmithSampler::new(sk, locs)?))
        }
        ModelKind::Scaled { base, scaler } => {
            let inner = build_sampler(base, locs)?;
            Ok(Box::new(ScaledSampler::new(inner, *scaler)))
        }
        ModelKind::Custom(CustomKind::UnitSpectrum) => {
            Ok(Box::new(UnitSpectrumSampler::new(spec.d, locs.n())))
        }
    }
}
