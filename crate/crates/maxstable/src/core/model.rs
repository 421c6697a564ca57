//! Declarative model specifications and the text configuration schema.
//!
//! A [`ModelSpec`] is pure data; the `gaussian` and `spectral` modules turn
//! it into callable variograms and samplers. Specs parse from a TOML
//! document with a `[model]` table (see the repository README for the full
//! schema).

use serde::Deserialize;

use super::{CoreError, Point, RngStream};
use rand::Rng;

/// Declarative description of a max-stable model: homogeneity index α,
/// component count d, index dimension p, and the model kind.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub alpha: f64,
    pub d: usize,
    pub p: usize,
    pub kind: ModelKind,
}

#[derive(Debug, Clone)]
pub enum ModelKind {
    BrownResnick(BrownResnickConfig),
    Smith(SmithConfig),
    Scaled {
        base: Box<ModelSpec>,
        scaler: ScalerSpec,
    },
    Custom(CustomKind),
}

/// Gaussian structure behind a Brown-Resnick model. Variogram-only forms
/// are realized by rooting the Gaussian at `root` (component
/// `root_component`), which leaves the max-stable law unchanged.
#[derive(Debug, Clone)]
pub enum BrownResnickConfig {
    /// γ(t,s) = σ·‖t−s‖^ν for every component pair (d = 1 unless used
    /// through `Delayed`).
    Fractional { sigma: f64, nu: f64, root: Point },
    /// γ_ij(t,s) = σ·‖t − s − δ_i + δ_j‖^ν: components are delayed copies
    /// of one fractional field; stationary for every delay vector.
    Delayed {
        sigma: f64,
        nu: f64,
        delays: Vec<Point>,
        root: Point,
        root_component: usize,
    },
    /// Explicit covariance cov(Y(t), Y(s)) = (t·s)² in d = p = 1
    /// (γ(t,s) = (t²−s²)², not a function of t−s): the planted
    /// nonstationary fixture.
    ProductSquare,
}

/// Smith moving-kernel model built from a named scalar kernel per
/// component. `window` is the half-width of the compact window used for
/// rejection envelopes and numerical kernel masses.
#[derive(Debug, Clone)]
pub struct SmithConfig {
    pub kernels: Vec<KernelKind>,
    pub mixing_sigma: f64,
    pub window: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelKind {
    /// Standard normal density scaled in its argument: L(t) = ∏_r φ(t_r/σ)/σ.
    GaussianDensity { sigma: f64 },
    /// Indicator of the centered box [−w, w]^p.
    Box { half_width: f64 },
    /// ∏_r max(0, 1 − |t_r|/w).
    Triangle { half_width: f64 },
}

/// Nonnegative random scaler R for spectrally equivalent rescaling
/// Z̃ = R·Z. The α-moment E R^α is declared analytically; callers pass
/// scalers with E R^α = 1 for equivalence and deliberately off-1 moments
/// for planted violations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalerSpec {
    Constant(f64),
    /// R = factor · U with U uniform on (0,1): E R^α = factor^α/(α+1).
    ScaledUniform { factor: f64 },
}

impl ScalerSpec {
    /// The uniform scaler with E R^α equal to `moment`.
    pub fn uniform_with_alpha_moment(alpha: f64, moment: f64) -> Self {
        ScalerSpec::ScaledUniform {
            factor: (moment * (alpha + 1.0)).powf(1.0 / alpha),
        }
    }

    pub fn alpha_moment(&self, alpha: f64) -> f64 {
        match self {
            ScalerSpec::Constant(c) => c.powf(alpha),
            ScalerSpec::ScaledUniform { factor } => factor.powf(alpha) / (alpha + 1.0),
        }
    }

    pub fn draw(&self, stream: &mut RngStream) -> f64 {
        match self {
            ScalerSpec::Constant(c) => *c,
            ScalerSpec::ScaledUniform { factor } => factor * stream.gen::<f64>(),
        }
    }
}

/// Registry of custom spectral processes addressable from configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CustomKind {
    /// Z(t) ≡ 1: the deterministic unit spectrum (unit Fréchet process).
    UnitSpectrum,
}

impl ModelSpec {
    pub fn new(alpha: f64, d: usize, p: usize, kind: ModelKind) -> Result<Self, CoreError> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(CoreError::Config(format!("alpha must be positive, got {alpha}")));
        }
        if d == 0 {
            return Err(CoreError::Config("d must be ≥ 1".into()));
        }
        if p == 0 {
            return Err(CoreError::Config("p must be ≥ 1".into()));
        }
        if matches!(kind, ModelKind::BrownResnick(_)) && alpha != 1.0 {
            return Err(CoreError::Config(format!(
                "Brown-Resnick models require alpha = 1, got {alpha}"
            )));
        }
        if let ModelKind::Smith(cfg) = &kind {
            if cfg.kernels.len() != d {
                return Err(CoreError::Config(format!(
                    "smith model needs {d} kernels, got {}",
                    cfg.kernels.len()
                )));
            }
            if !(cfg.mixing_sigma > 0.0) {
                return Err(CoreError::Config("mixing-sigma must be positive".into()));
            }
            if !(cfg.window > 0.0) {
                return Err(CoreError::Config("window must be positive".into()));
            }
        }
        Ok(Self { alpha, d, p, kind })
    }

    /// Parses the TOML configuration schema.
    pub fn from_toml_str(text: &str) -> Result<Self, CoreError> {
        let raw: RawFile =
            toml::from_str(text).map_err(|e| CoreError::Config(e.to_string()))?;
        raw.model.build()
    }
}

#[derive(Deserialize)]
struct RawFile {
    model: RawModel,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    kind: String,
    alpha: f64,
    d: usize,
    p: usize,
    #[serde(rename = "brown-resnick")]
    brown_resnick: Option<RawBrownResnick>,
    smith: Option<RawSmith>,
    scaled: Option<RawScaled>,
    custom: Option<RawCustom>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBrownResnick {
    variogram: String,
    #[serde(default = "one")]
    sigma: f64,
    #[serde(default = "one")]
    nu: f64,
    root: Option<Vec<f64>>,
    delays: Option<Vec<Vec<f64>>>,
    #[serde(rename = "root-component", default)]
    root_component: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSmith {
    kernel: Vec<String>,
    #[serde(rename = "kernel-scale", default = "one")]
    kernel_scale: f64,
    #[serde(rename = "mixing-sigma", default = "two")]
    mixing_sigma: f64,
    #[serde(default = "eight")]
    window: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScaled {
    scaler: String,
    #[serde(rename = "alpha-moment", default = "one")]
    alpha_moment: f64,
    base: Box<RawModel>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCustom {
    name: String,
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

fn eight() -> f64 {
    8.0
}

impl RawModel {
    fn build(self) -> Result<ModelSpec, CoreError> {
        let kind = match self.kind.as_str() {
            "brown-resnick" => {
                let raw = self.brown_resnick.ok_or_else(|| {
                    CoreError::Config("missing [model.brown-resnick] section".into())
                })?;
                let root = raw.root.unwrap_or_else(|| vec![0.0; self.p]);
                if root.len() != self.p {
                    return Err(CoreError::Config("root dimension must equal p".into()));
                }
                let cfg = match raw.variogram.as_str() {
                    "fractional" => BrownResnickConfig::Fractional {
                        sigma: raw.sigma,
                        nu: raw.nu,
                        root,
                    },
                    "delayed" => {
                        let delays = raw.delays.ok_or_else(|| {
                            CoreError::Config("delayed variogram requires delays".into())
                        })?;
                        if delays.len() != self.d || delays.iter().any(|v| v.len() != self.p) {
                            return Err(CoreError::Config(
                                "delays must be d vectors of dimension p".into(),
                            ));
                        }
                        BrownResnickConfig::Delayed {
                            sigma: raw.sigma,
                            nu: raw.nu,
                            delays,
                            root,
                            root_component: raw.root_component,
                        }
                    }
                    "product-square" => BrownResnickConfig::ProductSquare,
                    other => {
                        return Err(CoreError::Config(format!("unknown variogram '{other}'")))
                    }
                };
                ModelKind::BrownResnick(cfg)
            }
            "smith" => {
                let raw = self
                    .smith
                    .ok_or_else(|| CoreError::Config("missing [model.smith] section".into()))?;
                let kernels = raw
                    .kernel
                    .iter()
                    .map(|name| match name.as_str() {
                        "gaussian" => Ok(KernelKind::GaussianDensity {
                            sigma: raw.kernel_scale,
                        }),
                        "box" => Ok(KernelKind::Box {
                            half_width: raw.kernel_scale,
                        }),
                        "triangle" => Ok(KernelKind::Triangle {
                            half_width: raw.kernel_scale,
                        }),
                        other => Err(CoreError::Config(format!("unknown kernel '{other}'"))),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                ModelKind::Smith(SmithConfig {
                    kernels,
                    mixing_sigma: raw.mixing_sigma,
                    window: raw.window,
                })
            }
            "scaled" => {
                let raw = self
                    .scaled
                    .ok_or_else(|| CoreError::Config("missing [model.scaled] section".into()))?;
                let base = raw.base.build()?;
                let scaler = match raw.scaler.as_str() {
                    "constant" => ScalerSpec::Constant(raw.alpha_moment.powf(1.0 / self.alpha)),
                    "uniform" => {
                        ScalerSpec::uniform_with_alpha_moment(self.alpha, raw.alpha_moment)
                    }
                    other => return Err(CoreError::Config(format!("unknown scaler '{other}'"))),
                };
                ModelKind::Scaled {
                    base: Box::new(base),
                    scaler,
                }
            }
            "custom" => {
                let raw = self
                    .custom
                    .ok_or_else(|| CoreError::Config("missing [model.custom] section".into()))?;
                match raw.name.as_str() {
                    "unit-spectrum" => ModelKind::Custom(CustomKind::UnitSpectrum),
                    other => {
                        return Err(CoreError::Config(format!(
                            "unknown custom spectrum '{other}'"
                        )))
                    }
                }
            }
            other => return Err(CoreError::Config(format!("unknown model kind '{other}'"))),
        };
        ModelSpec::new(self.alpha, self.d, self.p, kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brown_resnick_requires_alpha_one() {
        let cfg = BrownResnickConfig::Fractional {
            sigma: 1.0,
            nu: 1.0,
            root: vec![0.0],
        };
        assert!(ModelSpec::new(2.0, 1, 1, ModelKind::BrownResnick(cfg.clone())).is_err());
        assert!(ModelSpec::new(1.0, 1, 1, ModelKind::BrownResnick(cfg)).is_ok());
    }

    #[test]
    fn parse_brown_resnick_toml() {
        let text = r#"
            [model]
            kind = "brown-resnick"
            alpha = 1.0
            d = 1
            p = 1

            [model.brown-resnick]
            variogram = "fractional"
            sigma = 1.0
            nu = 1.0
            root = [0.0]
        "#;
        let spec = ModelSpec::from_toml_str(text).unwrap();
        assert_eq!(spec.d, 1);
        assert!(matches!(
            spec.kind,
            ModelKind::BrownResnick(BrownResnickConfig::Fractional { .. })
        ));
    }

    #[test]
    fn parse_scaled_custom_toml() {
        let text = r#"
            [model]
            kind = "scaled"
            alpha = 1.0
            d = 1
            p = 1

            [model.scaled]
            scaler = "uniform"
            alpha-moment = 1.2

            [model.scaled.base]
            kind = "custom"
            alpha = 1.0
            d = 1
            p = 1

            [model.scaled.base.custom]
            name = "unit-spectrum"
        "#;
        let spec = ModelSpec::from_toml_str(text).unwrap();
        match spec.kind {
            ModelKind::Scaled { scaler, .. } => {
                assert!((scaler.alpha_moment(1.0) - 1.2).abs() < 1e-12);
            }
            _ => panic!("expected scaled model"),
        }
    }

    #[test]
    fn parse_error_carries_field_diagnostics() {
        let text = "[model]\nkind = \"brown-resnick\"\nalpha = 1.0\nd = 1\np = 1\nbogus = 3\n";
        let err = ModelSpec::from_toml_str(text).unwrap_err();
        assert!(err.to_string().contains("bogus"), "got: {err}");
    }

    #[test]
    fn uniform_scaler_moment() {
        let s = ScalerSpec::uniform_with_alpha_moment(1.0, 1.0);
        assert!(matches!(s, ScalerSpec::ScaledUniform { factor } if (factor - 2.0).abs() < 1e-12));
        let s2 = ScalerSpec::uniform_with_alpha_moment(2.0, 1.0);
        assert!((s2.alpha_moment(2.0) - 1.0).abs() < 1e-12);
    }
}
