//! The exponent functional −ln P(X(t_j) ≤ x_j, j ≤ n) =
//! E max_{(i,j)} Z_i^α(t_j)/x_ij^α, evaluated by generic Monte Carlo, by
//! the tilt decomposition over infargmax events, and by exact
//! model-specific formulas.
//!
//! Threshold entries x_ij = +∞ remove the pair (i,j) from every max,
//! event, and summation; their terms vanish in the limit.

mod exact;

pub use exact::{br_fidi_exact, smith_fidi, SmithFidiVariant};

use rayon::prelude::*;
use thiserror::Error;

use crate::core::{
    rng_stream, CustomKind, EstimateWithError, LocationSet, ModelKind, ModelSpec, SampleMatrix,
    ThresholdMatrix,
};
use crate::gaussian::GaussianError;
use crate::spectral::{
    build_sampler, BrownResnickSpec, SmithKernelSpec, SpectralError, SpectralSampler, TiltAnchor,
    TiltFamily,
};

#[derive(Debug, Error)]
pub enum FidiError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
    #[error("exact evaluator unavailable for this model kind: {0}")]
    ExactUnavailable(&'static str),
    #[error("tilt decomposition needs the constants E Z_k^α(t_l), unavailable for {0}")]
    MissingConstants(&'static str),
    #[error(
        "joint Gaussian is singular at the requested pairs ({0}); use the Monte Carlo \
         exponent instead"
    )]
    SingularGaussian(String),
    #[error("thresholds are {got_d}×{got_n}, expected {want_d}×{want_n}")]
    ThresholdShape {
        got_d: usize,
        got_n: usize,
        want_d: usize,
        want_n: usize,
    },
}

/// Lexicographically smallest (component, location) pair attaining
/// max Z_i(t_j)/x_ij over the finite-threshold pairs (equivalently the max
/// of Z_i^α/x_ij^α for any α > 0).
pub fn infargmax(z: &SampleMatrix, thresholds: &ThresholdMatrix) -> (usize, usize) {
    let mut best = None;
    let mut best_val = f64::NEG_INFINITY;
    for i in 0..thresholds.d() {
        for j in 0..thresholds.n() {
            let x = thresholds.get(i, j);
            if !x.is_finite() {
                continue;
            }
            let v = z.get(i, j) / x;
            if v > best_val {
                best_val = v;
                best = Some((i, j));
            }
        }
    }
    best.expect("threshold matrix guarantees at least one finite entry")
}

fn check_shape(
    thresholds: &ThresholdMatrix,
    d: usize,
    n: usize,
) -> Result<(), FidiError> {
    if thresholds.d() != d || thresholds.n() != n {
        return Err(FidiError::ThresholdShape {
            got_d: thresholds.d(),
            got_n: thresholds.n(),
            want_d: d,
            want_n: n,
        });
    }
    Ok(())
}

/// H(Z) = max over finite (i,j) of Z_i^α(t_j)/x_ij^α for one draw.
fn threshold_max(z: &SampleMatrix, thresholds: &ThresholdMatrix, alpha: f64) -> f64 {
    let mut best = 0.0_f64;
    for i in 0..thresholds.d() {
        for j in 0..thresholds.n() {
            let x = thresholds.get(i, j);
            if !x.is_finite() {
                continue;
            }
            let v = z.get(i, j) / x;
            if v > best {
                best = v;
            }
        }
    }
    best.powf(alpha)
}

/// Monte Carlo exponent: the mean of max_{(i,j)} Z_i^α(t_j)/x_ij^α over
/// replicates (self-normalized when the sampler is weighted). Replicate k
/// draws from stream k of `seed`.
pub fn exponent_mc(
    sampler: &dyn SpectralSampler,
    thresholds: &ThresholdMatrix,
    alpha: f64,
    n_rep: usize,
    seed: u64,
) -> Result<EstimateWithError, FidiError> {
    check_shape(thresholds, sampler.d(), sampler.n())?;
    let obs: Vec<(f64, f64)> = (0..n_rep)
        .into_par_iter()
        .map(|k| {
            let mut stream = rng_stream(seed, k as u64);
            let z = sampler.draw(&mut stream);
            (z.weight(), threshold_max(&z, thresholds, alpha))
        })
        .collect();
    if sampler.is_weighted() {
        Ok(EstimateWithError::from_weighted_observations(&obs))
    } else {
        let plain: Vec<f64> = obs.iter().map(|(_, h)| *h).collect();
        Ok(EstimateWithError::from_observations(&plain))
    }
}

/// Tilt decomposition of the exponent:
/// Σ_{(k,l)} E Z_k^α(t_l)/x_kl^α · P(infargmax Θ^\[t_l,k\]_i(t_j)/x_ij = (k,l)),
/// one tilted Monte Carlo run per finite-threshold term. Term τ uses the
/// stream block [τ·n_rep, (τ+1)·n_rep) of `seed`, so term errors are
/// independent and combine in quadrature.
pub fn exponent_by_tilts(
    family: &dyn TiltFamily,
    locs: &LocationSet,
    thresholds: &ThresholdMatrix,
    n_rep: usize,
    seed: u64,
) -> Result<EstimateWithError, FidiError> {
    check_shape(thresholds, family.d(), locs.n())?;
    let alpha = family.alpha();
    let pairs = thresholds.finite_pairs();
    let mut value = 0.0;
    let mut var = 0.0;
    for (term, &(k, l)) in pairs.iter().enumerate() {
        let coef =
            family.component_moment(k, locs.point(l)) / thresholds.get(k, l).powf(alpha);
        if coef == 0.0 {
            // zero-mass components contribute nothing; their tilted law is
            // degenerate and is skipped rather than sampled
            continue;
        }
        let anchor = TiltAnchor::component(locs.point(l).to_vec(), k);
        let tilt = family.tilt_at(&anchor, locs)?;
        let weighted = tilt.is_weighted();
        let obs: Vec<(f64, f64)> = (0..n_rep)
            .into_par_iter()
            .map(|r| {
                let mut stream = rng_stream(seed, (term * n_rep + r) as u64);
                let z = tilt.draw(&mut stream);
                let hit = infargmax(&z, thresholds) == (k, l);
                (z.weight(), if hit { 1.0 } else { 0.0 })
            })
            .collect();
        let est = if weighted {
            EstimateWithError::from_weighted_observations(&obs)
        } else {
            let plain: Vec<f64> = obs.iter().map(|(_, h)| *h).collect();
            EstimateWithError::from_observations(&plain)
        };
        value += coef * est.value;
        var += (coef * est.stderr) * (coef * est.stderr);
    }
    Ok(EstimateWithError {
        value,
        stderr: var.sqrt(),
        n_replicates: (pairs.len() * n_rep) as u64,
        self_normalized: false,
    })
}

/// Estimates P(infargmax = (k,l)) for every finite pair under one fixed
/// sampler, each from its own stream block, and returns (Σ probabilities,
/// combined stderr). The events partition the sample space, so the sum is
/// a consistency check that must sit near 1.
pub fn infargmax_partition_check(
    sampler: &dyn SpectralSampler,
    thresholds: &ThresholdMatrix,
    n_rep: usize,
    seed: u64,
) -> (f64, f64) {
    let pairs = thresholds.finite_pairs();
    let mut total = 0.0;
    let mut var = 0.0;
    for (term, &(k, l)) in pairs.iter().enumerate() {
        let obs: Vec<f64> = (0..n_rep)
            .into_par_iter()
            .map(|r| {
                let mut stream = rng_stream(seed, (term * n_rep + r) as u64);
                let z = sampler.draw(&mut stream);
                if infargmax(&z, thresholds) == (k, l) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let est = EstimateWithError::from_observations(&obs);
        total += est.value;
        var += est.stderr * est.stderr;
    }
    (total, var.sqrt())
}

/// How to evaluate an exponent request.
#[derive(Debug, Clone, Copy)]
pub enum Method {
    Mc { n_rep: usize },
    TiltDecomposition { n_rep: usize },
    /// Exact model-specific formula: the Gaussian-rectangle route for
    /// Brown-Resnick (controlled by `target_rel_err`), the kernel
    /// infargmax formula for Smith (controlled by `n_rep`).
    Exact { target_rel_err: f64, n_rep: usize },
}

#[derive(Debug, Clone)]
pub struct ExponentRequest {
    pub spec: ModelSpec,
    pub locs: LocationSet,
    pub thresholds: ThresholdMatrix,
    pub method: Method,
    pub seed: u64,
}

/// Exponent together with the fidi probability and the analytic bounds
/// max coef ≤ exponent ≤ Σ coef (when the model's constants are known).
#[derive(Debug, Clone, serde::Serialize)]
pub struct FidiResult {
    pub method: &'static str,
    pub exponent: f64,
    pub stderr: f64,
    pub probability: f64,
    pub probability_stderr: f64,
    pub n_replicates: u64,
    pub bounds: Option<(f64, f64)>,
}

/// Evaluates P(X(t_j) ≤ x_j ∀j) = exp(−exponent) with first-order error
/// propagation, dispatching on the requested method.
pub fn fidi(request: &ExponentRequest) -> Result<FidiResult, FidiError> {
    let ExponentRequest {
        spec,
        locs,
        thresholds,
        method,
        seed,
    } = request;
    let (est, method_name) = match method {
        Method::Mc { n_rep } => {
            let sampler = build_sampler(spec, locs)?;
            (
                exponent_mc(sampler.as_ref(), thresholds, spec.alpha, *n_rep, *seed)?,
                "mc",
            )
        }
        Method::TiltDecomposition { n_rep } => {
            let family = tilt_family_for(spec)?;
            (
                exponent_by_tilts(family.as_ref(), locs, thresholds, *n_rep, *seed)?,
                "tilts",
            )
        }
        Method::Exact {
            target_rel_err,
            n_rep,
        } => match &spec.kind {
            ModelKind::BrownResnick(_) => {
                let br = BrownResnickSpec::from_model(spec)?;
                (
                    br_fidi_exact(&br, locs, thresholds, *target_rel_err, *seed)?,
                    "exact",
                )
            }
            ModelKind::Smith(_) => {
                let sk = SmithKernelSpec::from_model(spec)?;
                (
                    smith_fidi(
                        &sk,
                        locs,
                        thresholds,
                        *n_rep,
                        SmithFidiVariant::ComponentForm,
                        *seed,
                    )?,
                    "exact",
                )
            }
            ModelKind::Scaled { .. } => return Err(FidiError::ExactUnavailable("scaled")),
            ModelKind::Custom(_) => return Err(FidiError::ExactUnavailable("custom")),
        },
    };
    let probability = (-est.value).exp();
    Ok(FidiResult {
        method: method_name,
        exponent: est.value,
        stderr: est.stderr,
        probability,
        probability_stderr: probability * est.stderr,
        n_replicates: est.n_replicates,
        bounds: exponent_bounds(spec, locs, thresholds),
    })
}

/// max_{(k,l)} E Z_k^α(t_l)/x_kl^α ≤ exponent ≤ Σ_{(k,l)} E Z_k^α(t_l)/x_kl^α,
/// available whenever the component moments are analytic.
pub fn exponent_bounds(
    spec: &ModelSpec,
    locs: &LocationSet,
    thresholds: &ThresholdMatrix,
) -> Option<(f64, f64)> {
    let moment = |k: usize, l: usize| -> Option<f64> {
        match &spec.kind {
            ModelKind::BrownResnick(_) | ModelKind::Custom(CustomKind::UnitSpectrum) => Some(1.0),
            ModelKind::Smith(_) => {
                let sk = SmithKernelSpec::from_model(spec).ok()?;
                let _ = l;
                Some(sk.component_mass(k))
            }
            ModelKind::Scaled { .. } => None,
        }
    };
    let mut lower = 0.0_f64;
    let mut upper = 0.0_f64;
    for (k, l) in thresholds.finite_pairs() {
        let m = moment(k, l)?;
        let _ = locs;
        let coef = m / thresholds.get(k, l).powf(spec.alpha);
        lower = lower.max(coef);
        upper += coef;
    }
    Some((lower, upper))
}

/// The exact tilt family for a model, used by the tilt-decomposition route
/// and the stationarity suite.
pub fn tilt_family_for(spec: &ModelSpec) -> Result<Box<dyn TiltFamily>, FidiError> {
    match &spec.kind {
        ModelKind::BrownResnick(_) => Ok(Box::new(BrownResnickSpec::from_model(spec)?)),
        ModelKind::Smith(_) => Ok(Box::new(SmithKernelSpec::from_model(spec)?)),
        ModelKind::Custom(CustomKind::UnitSpectrum) => Ok(Box::new(UnitTiltFamily {
            d: spec.d,
            p: spec.p,
            alpha: spec.alpha,
        })),
        ModelKind::Scaled { .. } => Err(FidiError::MissingConstants("scaled")),
    }
}

/// Tilting the deterministic unit spectrum returns the unit spectrum.
struct UnitTiltFamily {
    d: usize,
    p: usize,
    alpha: f64,
}

impl TiltFamily for UnitTiltFamily {
    fn d(&self) -> usize {
        self.d
    }

    fn p(&self) -> usize {
        self.p
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn tilt_at(
        &self,
        _anchor: &TiltAnchor,
        locs: &LocationSet,
    ) -> Result<Box<dyn SpectralSampler>, SpectralError> {
        Ok(Box::new(crate::spectral::UnitSpectrumSampler::new(
            self.d,
            locs.n(),
        )))
    }

    fn component_moment(&self, _k: usize, _h: &[f64]) -> f64 {
        1.0
    }
}
