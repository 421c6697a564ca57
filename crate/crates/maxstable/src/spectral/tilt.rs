//! Tilted spectral processes Θ^\[h\].
//!
//! Three regimes serve the tilted law:
//!
//! - (a) Brown-Resnick + component tilt: exact log-Gaussian increments with
//!   the −Var/2 drift; the anchor component at the anchor location is 1 by
//!   construction.
//! - (b) Smith + either tilt: exact shifted-kernel draws with the tilted
//!   location S drawn by rejection from the mixing density.
//! - (c) generic importance weighting: a base draw Z is normalized by its
//!   anchor value and weighted by ‖Z(h)‖^α / a_h; draws with ‖Z(h)‖ = 0
//!   get weight 0. Downstream estimators self-normalize, so the constant
//!   a_h (pilot-estimated when not supplied) does not bias them.

use std::sync::Arc;

use crate::core::{LocationSet, NormSpec, Point, RngStream, SampleMatrix};
use crate::gaussian::{build_increment_cov, CholeskyFactor, factorize};

use super::kernel::RejectionSampler;
use super::{BrownResnickSpec, SmithKernelSpec, SpectralError, SpectralSampler};

/// Where and how to tilt: anchor location h with either a norm tilt
/// (reweight by ‖Z(h)‖^α) or a single-component tilt (reweight by Z_k^α(h)).
#[derive(Debug, Clone)]
pub struct TiltAnchor {
    pub h: Point,
    pub mode: TiltMode,
}

#[derive(Debug, Clone)]
pub enum TiltMode {
    Norm(NormSpec),
    Component(usize),
}

impl TiltAnchor {
    pub fn norm(h: Point) -> Self {
        Self {
            h,
            mode: TiltMode::Norm(NormSpec::Sup),
        }
    }

    pub fn component(h: Point, k: usize) -> Self {
        Self {
            h,
            mode: TiltMode::Component(k),
        }
    }
}

/// A family of tilted samplers indexed by anchors, with the constants
/// E Z_k^α(h) needed by the tilt decomposition of the exponent.
pub trait TiltFamily: Send + Sync {
    fn d(&self) -> usize;
    fn p(&self) -> usize;
    fn alpha(&self) -> f64;
    fn tilt_at(
        &self,
        anchor: &TiltAnchor,
        locs: &LocationSet,
    ) -> Result<Box<dyn SpectralSampler>, SpectralError>;
    /// E Z_k^α(h): 1 for Brown-Resnick, c_k for Smith.
    fn component_moment(&self, k: usize, h: &[f64]) -> f64;
}

/// Regime (a): exact Brown-Resnick component tilt via Gaussian increments,
/// Θ_i(t) = exp(Y_i(t) − Y_k(h) − Var(Y_i(t) − Y_k(h))/2).
pub struct BrTiltSampler {
    d: usize,
    n: usize,
    factor: CholeskyFactor,
    mean: Vec<f64>,
}

impl BrTiltSampler {
    pub fn new(
        spec: &BrownResnickSpec,
        anchor_component: usize,
        anchor: &[f64],
        locs: &LocationSet,
    ) -> Result<Self, SpectralError> {
        let d = spec.d();
        let n = locs.n();
        if anchor_component >= d {
            return Err(SpectralError::Unsupported(format!(
                "anchor component {anchor_component} out of range for d = {d}"
            )));
        }
        let variogram = spec.variogram_spec();
        let mut targets = Vec::with_capacity(d * n);
        for j in 0..n {
            for i in 0..d {
                targets.push((i, locs.point(j).to_vec()));
            }
        }
        let (mean, cov) = build_increment_cov(&variogram, (anchor_component, anchor), &targets)?;
        let factor = factorize(&cov)?;
        Ok(Self {
            d,
            n,
            factor,
            mean,
        })
    }
}

impl SpectralSampler for BrTiltSampler {
    fn d(&self) -> usize {
        self.d
    }

    fn n(&self) -> usize {
        self.n
    }

    fn draw(&self, stream: &mut RngStream) -> SampleMatrix {
        let g = self.factor.sample(&self.mean, stream);
        let values: Vec<f64> = g.iter().map(|y| y.exp()).collect();
        SampleMatrix::from_raw(self.d, self.n, values, 1.0)
    }
}

/// Regime (b): exact Smith tilts, Θ^\[h\](t) = L(t − h + S)/‖L(S)‖ with S
/// drawn from the ‖L‖^α/c law (component variant uses S_k ~ L_k^α/c_k and
/// normalizes by L_k(S_k)).
pub struct SmithTiltSampler {
    spec: SmithKernelSpec,
    rejection: RejectionSampler,
    mode: TiltMode,
    shifted: Vec<Point>, // t_j − h per location
    d: usize,
}

impl SmithTiltSampler {
    pub fn new(
        spec: &SmithKernelSpec,
        anchor: &TiltAnchor,
        locs: &LocationSet,
    ) -> Result<Self, SpectralError> {
        if locs.p() != spec.p() || anchor.h.len() != spec.p() {
            return Err(SpectralError::Unsupported(
                "location/anchor dimension mismatch".into(),
            ));
        }
        let rejection = match &anchor.mode {
            TiltMode::Norm(norm) => {
                let spec2 = spec.clone();
                let norm = norm.clone();
                let alpha = spec.alpha();
                spec.rejection_sampler(Arc::new(move |t: &[f64]| {
                    norm.eval(&spec2.kernel_vector(t)).powf(alpha)
                }))?
            }
            TiltMode::Component(k) => {
                if *k >= spec.d() {
                    return Err(SpectralError::Unsupported(format!(
                        "component {k} out of range"
                    )));
                }
                if spec.component_mass(*k) <= 0.0 {
                    return Err(SpectralError::AnchorDegenerate);
                }
                let spec2 = spec.clone();
                let alpha = spec.alpha();
                let k = *k;
                spec.rejection_sampler(Arc::new(move |t: &[f64]| {
                    spec2.kernel_value(k, t).powf(alpha)
                }))?
            }
        };
        let shifted = locs
            .points()
            .iter()
            .map(|t| t.iter().zip(&anchor.h).map(|(a, b)| a - b).collect())
            .collect();
        Ok(Self {
            spec: spec.clone(),
            rejection,
            mode: anchor.mode.clone(),
            shifted,
            d: spec.d(),
        })
    }

    /// Fraction of rejection proposals accepted so far.
    pub fn acceptance_rate(&self) -> f64 {
        self.rejection.acceptance_rate()
    }

    /// One draw of the tilted location S (exposed for its law's tests).
    pub fn draw_location(&self, stream: &mut RngStream) -> Vec<f64> {
        self.rejection.draw(stream)
    }
}

impl SpectralSampler for SmithTiltSampler {
    fn d(&self) -> usize {
        self.d
    }

    fn n(&self) -> usize {
        self.shifted.len()
    }

    fn draw(&self, stream: &mut RngStream) -> SampleMatrix {
        let s = self.rejection.draw(stream);
        let denom = match &self.mode {
            TiltMode::Norm(norm) => norm.eval(&self.spec.kernel_vector(&s)),
            TiltMode::Component(k) => self.spec.kernel_value(*k, &s),
        };
        let d = self.d;
        let n = self.shifted.len();
        let mut values = Vec::with_capacity(d * n);
        let mut arg = vec![0.0; s.len()];
        for tj in &self.shifted {
            for r in 0..arg.len() {
                arg[r] = tj[r] + s[r];
            }
            for i in 0..d {
                values.push(self.spec.kernel_value(i, &arg) / denom);
            }
        }
        SampleMatrix::from_raw(d, n, values, 1.0)
    }
}

/// Regime (c): generic importance-weighted tilt over any base sampler.
pub struct GenericTiltSampler {
    base: Box<dyn SpectralSampler>,
    keep: Vec<usize>,
    anchor_col: usize,
    mode: TiltMode,
    alpha: f64,
    a_h: f64,
    a_h_stderr: f64,
}

impl GenericTiltSampler {
    /// `build_base` must produce the base sampler jointly at the requested
    /// locations plus the anchor. `a_h` may be supplied analytically; when
    /// absent it is estimated on a pilot run whose stderr is retained for
    /// reporting (self-normalized consumers are unaffected by a_h).
    pub fn new(
        build_base: &dyn Fn(&LocationSet) -> Result<Box<dyn SpectralSampler>, SpectralError>,
        anchor: &TiltAnchor,
        locs: &LocationSet,
        alpha: f64,
        a_h: Option<f64>,
        pilot: (usize, &mut RngStream),
    ) -> Result<Self, SpectralError> {
        let anchor_set = LocationSet::new(vec![anchor.h.clone()])?;
        let union = locs.union(&anchor_set)?;
        let base = build_base(&union)?;
        let keep: Vec<usize> = locs
            .points()
            .iter()
            .map(|t| union.position(t).expect("location in union"))
            .collect();
        let anchor_col = union.position(&anchor.h).expect("anchor in union");
        let mut sampler = Self {
            base,
            keep,
            anchor_col,
            mode: anchor.mode.clone(),
            alpha,
            a_h: f64::NAN,
            a_h_stderr: 0.0,
        };
        match a_h {
            Some(v) => {
                if !(v > 0.0) {
                    return Err(SpectralError::AnchorDegenerate);
                }
                sampler.a_h = v;
            }
            None => {
                let (n_pilot, stream) = pilot;
                let obs: Vec<f64> = (0..n_pilot.max(2))
                    .map(|_| {
                        let z = sampler.base.draw(stream);
                        sampler.anchor_value(&z).powf(alpha)
                    })
                    .collect();
                let est = crate::core::EstimateWithError::from_observations(&obs);
                if !(est.value > 0.0) {
                    return Err(SpectralError::AnchorDegenerate);
                }
                sampler.a_h = est.value;
                sampler.a_h_stderr = est.stderr;
            }
        }
        Ok(sampler)
    }

    fn anchor_value(&self, z: &SampleMatrix) -> f64 {
        let col = z.location_column(self.anchor_col);
        match &self.mode {
            TiltMode::Norm(norm) => norm.eval(col),
            TiltMode::Component(k) => col[*k],
        }
    }

    /// The anchor normalization constant a_h = E‖Z(h)‖^α in use, with the
    /// pilot stderr (0 when supplied analytically).
    pub fn a_h(&self) -> (f64, f64) {
        (self.a_h, self.a_h_stderr)
    }
}

impl SpectralSampler for GenericTiltSampler {
    fn d(&self) -> usize {
        self.base.d()
    }

    fn n(&self) -> usize {
        self.keep.len()
    }

    fn is_weighted(&self) -> bool {
        true
    }

    fn draw(&self, stream: &mut RngStream) -> SampleMatrix {
        let z = self.base.draw(stream);
        let denom = self.anchor_value(&z);
        let d = z.d();
        let n = self.keep.len();
        if denom == 0.0 {
            // the tilted integrand vanishes on {‖Z(h)‖ = 0}
            return SampleMatrix::from_raw(d, n, vec![0.0; d * n], 0.0);
        }
        let mut values = Vec::with_capacity(d * n);
        for &j in &self.keep {
            for v in z.location_column(j) {
                values.push(v / denom);
            }
        }
        let weight = z.weight() * denom.powf(self.alpha) / self.a_h;
        SampleMatrix::from_raw(d, n, values, weight)
    }
}

impl TiltFamily for BrownResnickSpec {
    fn d(&self) -> usize {
        BrownResnickSpec::d(self)
    }

    fn p(&self) -> usize {
        BrownResnickSpec::p(self)
    }

    fn alpha(&self) -> f64 {
        1.0
    }

    fn tilt_at(
        &self,
        anchor: &TiltAnchor,
        locs: &LocationSet,
    ) -> Result<Box<dyn SpectralSampler>, SpectralError> {
        match &anchor.mode {
            TiltMode::Component(k) => {
                Ok(Box::new(BrTiltSampler::new(self, *k, &anchor.h, locs)?))
            }
            TiltMode::Norm(_) if self.d() == 1 => {
                // every norm of a scalar is the scalar itself
                Ok(Box::new(BrTiltSampler::new(self, 0, &anchor.h, locs)?))
            }
            TiltMode::Norm(_) => Err(SpectralError::NoClosedFormTilt(
                "Brown-Resnick norm tilts with d > 1 have no closed form; use the generic \
                 importance-weighted regime"
                    .into(),
            )),
        }
    }

    fn component_moment(&self, _k: usize, _h: &[f64]) -> f64 {
        1.0
    }
}

impl TiltFamily for SmithKernelSpec {
    fn d(&self) -> usize {
        SmithKernelSpec::d(self)
    }

    fn p(&self) -> usize {
        SmithKernelSpec::p(self)
    }

    fn alpha(&self) -> f64 {
        SmithKernelSpec::alpha(self)
    }

    fn tilt_at(
        &self,
        anchor: &TiltAnchor,
        locs: &LocationSet,
    ) -> Result<Box<dyn SpectralSampler>, SpectralError> {
        Ok(Box::new(SmithTiltSampler::new(self, anchor, locs)?))
    }

    fn component_moment(&self, k: usize, _h: &[f64]) -> f64 {
        self.component_mass(k)
    }
}
