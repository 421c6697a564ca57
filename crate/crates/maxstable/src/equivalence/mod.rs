//! Statistical verification of the structural identities: equality of
//! E H(Z) across spectral processes for homogeneous H, the stationarity
//! criteria through moment identities and tilted-process comparisons, and
//! zonoid / max-zonoid equivalence of random vectors.
//!
//! Every tester reduces an equality-in-expectation claim to z-scores of
//! independent Monte Carlo estimates and aggregates them under a
//! Bonferroni-corrected critical value, so verdicts double as CI gates.

mod zonoid;

pub use zonoid::{
    augmented_identifiability_test, default_directions, zonoid_test, ZonoidMode,
};

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::core::{
    rng_stream, EstimateWithError, LocationSet, ModelSpec, NormSpec, SampleMatrix,
};
use crate::fidi::FidiError;
use crate::gaussian::phinv;
use crate::spectral::{build_sampler, SpectralError, SpectralSampler, TiltAnchor};

#[derive(Debug, Error)]
pub enum EquivalenceError {
    #[error(transparent)]
    Core(#[from] crate::core::CoreError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Fidi(#[from] FidiError),
    #[error("functional '{name}' is not {degree}-homogeneous (relative error {relative_error:.3e})")]
    HomogeneityViolated {
        name: String,
        degree: f64,
        relative_error: f64,
    },
    #[error("functional '{name}' non-finite on {nonfinite_fraction:.4}% of draws; battery misconfigured for this model")]
    BatteryMisconfigured {
        name: String,
        nonfinite_fraction: f64,
    },
    #[error("test not applicable: {0}")]
    NotApplicable(String),
    #[error("need at least {need} directions, got {got}")]
    InsufficientDirections { got: usize, need: usize },
    #[error("directions do not span the sample space")]
    DirectionsDoNotSpan,
    #[error("max-zonoid directions must be componentwise nonnegative")]
    NegativeDirection,
    #[error("sample sets must be nonempty and of equal dimension")]
    EmptySamples,
}

/// Decision rule: Bonferroni-corrected two-sided z test at a familywise
/// level, with an optional explicit critical value override.
#[derive(Debug, Clone, Copy)]
pub struct DecisionRule {
    pub familywise_level: f64,
    pub z_crit_override: Option<f64>,
}

impl Default for DecisionRule {
    fn default() -> Self {
        Self {
            familywise_level: 1e-3,
            z_crit_override: None,
        }
    }
}

impl DecisionRule {
    pub fn with_z_crit(z: f64) -> Self {
        Self {
            familywise_level: 1e-3,
            z_crit_override: Some(z),
        }
    }

    pub fn z_crit(&self, tests: usize) -> f64 {
        match self.z_crit_override {
            Some(z) => z,
            None => phinv(1.0 - self.familywise_level / (2.0 * tests.max(1) as f64)),
        }
    }
}

/// One named functional on d×n sample matrices with declared homogeneity
/// degree β (0 or α).
#[derive(Clone)]
pub struct Functional {
    pub name: String,
    pub degree: f64,
    eval: Arc<dyn Fn(&SampleMatrix) -> f64 + Send + Sync>,
}

impl Functional {
    pub fn eval(&self, z: &SampleMatrix) -> f64 {
        (self.eval)(z)
    }
}

/// A battery of homogeneous functionals; registration verifies the
/// declared degree numerically on random positive matrices. Degree-0
/// members are clipped at `clip` during estimation with the clipped
/// fraction reported.
pub struct FunctionalBattery {
    members: Vec<Functional>,
    d: usize,
    n: usize,
    clip: f64,
}

impl FunctionalBattery {
    pub fn new(d: usize, n: usize) -> Self {
        Self {
            members: Vec::new(),
            d,
            n,
            clip: 1e6,
        }
    }

    pub fn with_clip(mut self, clip: f64) -> Self {
        self.clip = clip;
        self
    }

    pub fn members(&self) -> &[Functional] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Registers a functional after checking H(c·f) = c^β·H(f) to relative
    /// 1e-10 on random positive matrices.
    pub fn register(
        &mut self,
        name: &str,
        degree: f64,
        eval: Arc<dyn Fn(&SampleMatrix) -> f64 + Send + Sync>,
    ) -> Result<(), EquivalenceError> {
        let mut stream = rng_stream(0xB417E51, self.members.len() as u64);
        for trial in 0..8 {
            let values: Vec<f64> = (0..self.d * self.n)
                .map(|_| (stream.gen::<f64>() * 2.0 - 0.5).exp())
                .collect();
            let f = SampleMatrix::from_raw(self.d, self.n, values.clone(), 1.0);
            let base = eval(&f);
            for c in [0.5, 2.0, 7.3] {
                let scaled_values: Vec<f64> = values.iter().map(|v| c * v).collect();
                let cf = SampleMatrix::from_raw(self.d, self.n, scaled_values, 1.0);
                let got = eval(&cf);
                let want = c.powf(degree) * base;
                let rel = (got - want).abs() / want.abs().max(1e-300);
                if rel > 1e-10 {
                    return Err(EquivalenceError::HomogeneityViolated {
                        name: format!("{name} (trial {trial})"),
                        degree,
                        relative_error: rel,
                    });
                }
            }
        }
        self.members.push(Functional {
            name: name.to_string(),
            degree,
            eval,
        });
        Ok(())
    }

    /// The default battery: sup-norm max and α-sum (degree α), two
    /// randomized weighted maxima (degree α), an anchored tilt product
    /// (degree α), and bounded ratio functionals (degree 0).
    pub fn default_battery(d: usize, n: usize, alpha: f64, seed: u64) -> Self {
        let mut battery = Self::new(d, n);
        battery
            .register(
                "sup_pow_alpha",
                alpha,
                Arc::new(move |z| {
                    z.values().iter().cloned().fold(0.0_f64, f64::max).powf(alpha)
                }),
            )
            .expect("default functional is homogeneous");
        battery
            .register(
                "alpha_sum",
                alpha,
                Arc::new(move |z| z.values().iter().map(|v| v.powf(alpha)).sum()),
            )
            .expect("default functional is homogeneous");
        for (tag, sub_seed) in [("weighted_max_a", 0u64), ("weighted_max_b", 1u64)] {
            let mut s = rng_stream(seed, sub_seed);
            let x: Vec<f64> = (0..d * n)
                .map(|_| (s.gen::<f64>() * 2.0 - 1.0).exp())
                .collect();
            battery
                .register(
                    tag,
                    alpha,
                    Arc::new(move |z| {
                        z.values()
                            .iter()
                            .zip(&x)
                            .map(|(v, xi)| v / xi)
                            .fold(0.0_f64, f64::max)
                            .powf(alpha)
                    }),
                )
                .expect("default functional is homogeneous");
        }
        battery
            .register(
                "anchor_product",
                alpha,
                Arc::new(move |z| {
                    let anchor = NormSpec::Sup.eval(z.location_column(0));
                    if anchor == 0.0 {
                        return 0.0;
                    }
                    let mean_ratio =
                        z.values().iter().sum::<f64>() / (z.values().len() as f64 * anchor);
                    (-mean_ratio).exp() * anchor.powf(alpha)
                }),
            )
            .expect("default functional is homogeneous");
        battery
            .register(
                "max_share",
                0.0,
                Arc::new(|z| {
                    let total: f64 = z.values().iter().sum();
                    if total == 0.0 {
                        return 0.0;
                    }
                    z.values().iter().cloned().fold(0.0_f64, f64::max) / total
                }),
            )
            .expect("default functional is homogeneous");
        battery
            .register(
                "ratio_last_first",
                0.0,
                Arc::new(move |z| {
                    let a = NormSpec::Sup.eval(z.location_column(z.n() - 1));
                    let b = NormSpec::Sup.eval(z.location_column(0));
                    if b == 0.0 {
                        f64::INFINITY
                    } else {
                        a / b
                    }
                }),
            )
            .expect("default functional is homogeneous");
        battery
    }

    /// Bounded degree-0 members only (for the stationarity moment tests).
    pub fn degree_zero(d: usize, n: usize) -> Self {
        let mut battery = Self::new(d, n);
        battery
            .register(
                "max_share",
                0.0,
                Arc::new(|z| {
                    let total: f64 = z.values().iter().sum();
                    if total == 0.0 {
                        return 0.0;
                    }
                    z.values().iter().cloned().fold(0.0_f64, f64::max) / total
                }),
            )
            .expect("degree-0 functional");
        battery
            .register(
                "last_share",
                0.0,
                Arc::new(|z| {
                    let total: f64 = z.values().iter().sum();
                    if total == 0.0 {
                        return 0.0;
                    }
                    NormSpec::Sup.eval(z.location_column(z.n() - 1)) / total
                }),
            )
            .expect("degree-0 functional");
        battery
            .register(
                "last_share_sq",
                0.0,
                Arc::new(|z| {
                    let total: f64 = z.values().iter().sum();
                    if total == 0.0 {
                        return 0.0;
                    }
                    let r = NormSpec::Sup.eval(z.location_column(z.n() - 1)) / total;
                    r * r
                }),
            )
            .expect("degree-0 functional");
        battery
            .register(
                "soft_indicator",
                0.0,
                Arc::new(|z| {
                    let total: f64 = z.values().iter().sum();
                    if total == 0.0 {
                        return 0.0;
                    }
                    let first = NormSpec::Sup.eval(z.location_column(0)) / total;
                    1.0 / (1.0 + (-8.0 * (first - 0.5)).exp())
                }),
            )
            .expect("degree-0 functional");
        battery
    }
}

/// Per-functional comparison detail inside a verdict.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FunctionalReport {
    pub name: String,
    pub a: f64,
    pub a_stderr: f64,
    pub b: f64,
    pub b_stderr: f64,
    pub z: f64,
}

/// z-scores per functional plus the aggregated decision.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EquivalenceVerdict {
    pub reports: Vec<FunctionalReport>,
    pub z_crit: f64,
    pub familywise_level: f64,
    pub consistent: bool,
    pub clipped_fraction: f64,
}

impl EquivalenceVerdict {
    fn from_reports(
        reports: Vec<FunctionalReport>,
        rule: &DecisionRule,
        clipped_fraction: f64,
    ) -> Self {
        let z_crit = rule.z_crit(reports.len());
        let consistent = reports.iter().all(|r| r.z.abs() <= z_crit);
        Self {
            reports,
            z_crit,
            familywise_level: rule.familywise_level,
            consistent,
            clipped_fraction,
        }
    }

    pub fn max_abs_z(&self) -> f64 {
        self.reports.iter().map(|r| r.z.abs()).fold(0.0, f64::max)
    }
}

struct BatteryEstimates {
    estimates: Vec<EstimateWithError>,
    clipped_fraction: f64,
}

/// Estimates E H for every battery member over `n_rep` draws from the
/// stream block starting at `block`·n_rep. Degree-0 members are clipped at
/// the battery cap; a member non-finite on more than 0.1% of draws is a
/// battery misconfiguration.
fn estimate_battery(
    sampler: &dyn SpectralSampler,
    battery: &FunctionalBattery,
    n_rep: usize,
    seed: u64,
    block: u64,
) -> Result<BatteryEstimates, EquivalenceError> {
    let k = battery.len();
    let rows: Vec<(f64, Vec<f64>)> = (0..n_rep)
        .into_par_iter()
        .map(|r| {
            let mut stream = rng_stream(seed, block * n_rep as u64 + r as u64);
            let z = sampler.draw(&mut stream);
            let vals: Vec<f64> = battery.members().iter().map(|m| m.eval(&z)).collect();
            (z.weight(), vals)
        })
        .collect();
    let weighted = sampler.is_weighted();
    let mut estimates = Vec::with_capacity(k);
    let mut clipped = 0usize;
    let mut total = 0usize;
    for (idx, member) in battery.members().iter().enumerate() {
        let mut obs: Vec<(f64, f64)> = Vec::with_capacity(n_rep);
        let mut nonfinite = 0usize;
        for (w, vals) in &rows {
            let mut v = vals[idx];
            if member.degree == 0.0 && v > battery.clip {
                v = battery.clip;
                clipped += 1;
            }
            total += 1;
            if !v.is_finite() {
                nonfinite += 1;
                continue;
            }
            obs.push((*w, v));
        }
        let frac = nonfinite as f64 / n_rep as f64;
        if frac > 0.001 {
            return Err(EquivalenceError::BatteryMisconfigured {
                name: member.name.clone(),
                nonfinite_fraction: 100.0 * frac,
            });
        }
        estimates.push(if weighted {
            EstimateWithError::from_weighted_observations(&obs)
        } else {
            let plain: Vec<f64> = obs.iter().map(|(_, v)| *v).collect();
            EstimateWithError::from_observations(&plain)
        });
    }
    Ok(BatteryEstimates {
        estimates,
        clipped_fraction: clipped as f64 / total.max(1) as f64,
    })
}

/// Tests E H(Z_A) = E H(Z_B) over the battery: spectral equivalence
/// reduced to z-scores of independent estimates.
pub fn functional_equivalence_test(
    sampler_a: &dyn SpectralSampler,
    sampler_b: &dyn SpectralSampler,
    battery: &FunctionalBattery,
    n_rep: usize,
    seed: u64,
    rule: &DecisionRule,
) -> Result<EquivalenceVerdict, EquivalenceError> {
    assert!(!battery.is_empty(), "battery must be nonempty");
    let a = estimate_battery(sampler_a, battery, n_rep, seed, 0)?;
    let b = estimate_battery(sampler_b, battery, n_rep, seed, 1)?;
    let reports: Vec<FunctionalReport> = battery
        .members()
        .iter()
        .zip(a.estimates.iter().zip(&b.estimates))
        .map(|(m, (ea, eb))| FunctionalReport {
            name: m.name.clone(),
            a: ea.value,
            a_stderr: ea.stderr,
            b: eb.value,
            b_stderr: eb.stderr,
            z: ea.z_against(eb),
        })
        .collect();
    Ok(EquivalenceVerdict::from_reports(
        reports,
        rule,
        0.5 * (a.clipped_fraction + b.clipped_fraction),
    ))
}

/// Stationarity criteria for the max-stable process of `spec`:
/// (1) the moment identity E[Z_k^α(h)Γ(Z)] = E[Z_k^α(0)Γ(B^h Z)] per
/// (shift, component, Γ), and (2) the tilted-process criterion
/// Θ^\[h,k\] =_d B^h Θ^\[0,k\] compared through the same degree-0 battery.
pub fn stationarity_test(
    spec: &ModelSpec,
    shifts: &[Vec<f64>],
    components: &[usize],
    battery: &FunctionalBattery,
    locs: &LocationSet,
    n_rep: usize,
    seed: u64,
    rule: &DecisionRule,
) -> Result<EquivalenceVerdict, EquivalenceError> {
    assert!(
        battery.members().iter().all(|m| m.degree == 0.0),
        "stationarity battery must be degree-0"
    );
    let alpha = spec.alpha;
    let mut reports = Vec::new();
    let mut block = 0u64;
    let origin = vec![0.0; locs.p()];

    // family (1): moment identities on the base spectrum; one draw block
    // per side evaluates every (component, member) product
    for h in shifts {
        let shifted = crate::core::shift_locations(locs, h)?;
        let mut union = locs.union(&shifted)?;
        union = union.union(&LocationSet::new(vec![h.clone(), origin.clone()])?)?;
        let sampler = build_sampler(spec, &union)?;
        let loc_cols: Vec<usize> = locs
            .points()
            .iter()
            .map(|t| union.position(t).expect("loc in union"))
            .collect();
        let shifted_cols: Vec<usize> = shifted
            .points()
            .iter()
            .map(|t| union.position(t).expect("shifted loc in union"))
            .collect();
        let h_col = union.position(h).expect("h in union");
        let zero_col = union.position(&origin).expect("origin in union");
        let clip = battery.clip;
        let eval_side = |col: usize, cols: &[usize], blk: u64| -> Vec<Vec<f64>> {
            // per (component, member): the n_rep products Z_k^α(col)·Γ(Z)
            let rows: Vec<Vec<f64>> = (0..n_rep)
                .into_par_iter()
                .map(|r| {
                    let mut stream = rng_stream(seed, blk * n_rep as u64 + r as u64);
                    let z = sampler.draw(&mut stream);
                    let window = z.select_locations(cols);
                    let anchors = z.location_column(col);
                    let mut out =
                        Vec::with_capacity(components.len() * battery.len());
                    for &k in components {
                        let a = anchors[k].powf(alpha);
                        for member in battery.members() {
                            out.push(a * member.eval(&window).min(clip));
                        }
                    }
                    out
                })
                .collect();
            let width = components.len() * battery.len();
            (0..width)
                .map(|c| rows.iter().map(|row| row[c]).collect())
                .collect()
        };
        let lhs_cols = eval_side(h_col, &loc_cols, block);
        let rhs_cols = eval_side(zero_col, &shifted_cols, block + 1);
        block += 2;
        for (ki, &k) in components.iter().enumerate() {
            for (mi, member) in battery.members().iter().enumerate() {
                let idx = ki * battery.len() + mi;
                let lhs = EstimateWithError::from_observations(&lhs_cols[idx]);
                let rhs = EstimateWithError::from_observations(&rhs_cols[idx]);
                reports.push(FunctionalReport {
                    name: format!("moment[h={h:?},k={k},{}]", member.name),
                    a: lhs.value,
                    a_stderr: lhs.stderr,
                    b: rhs.value,
                    b_stderr: rhs.stderr,
                    z: lhs.z_against(&rhs),
                });
            }
        }
    }

    // family (2): tilted-process comparison Θ^[h,k] vs B^h Θ^[0,k]
    let family = crate::fidi::tilt_family_for(spec)?;
    for h in shifts {
        let shifted = crate::core::shift_locations(locs, h)?;
        for &k in components {
            let tilt_h = family.tilt_at(&TiltAnchor::component(h.clone(), k), locs)?;
            let tilt_0 =
                family.tilt_at(&TiltAnchor::component(origin.clone(), k), &shifted)?;
            let a = estimate_battery(tilt_h.as_ref(), battery, n_rep, seed, block)?;
            let b = estimate_battery(tilt_0.as_ref(), battery, n_rep, seed, block + 1)?;
            block += 2;
            for (m, (ea, eb)) in battery
                .members()
                .iter()
                .zip(a.estimates.iter().zip(&b.estimates))
            {
                reports.push(FunctionalReport {
                    name: format!("tilt[h={h:?},k={k},{}]", m.name),
                    a: ea.value,
                    a_stderr: ea.stderr,
                    b: eb.value,
                    b_stderr: eb.stderr,
                    z: ea.z_against(eb),
                });
            }
        }
    }
    Ok(EquivalenceVerdict::from_reports(reports, rule, 0.0))
}

/// Shift-invariant rescaling of a Brown-Resnick spectrum (Z̃ = Z·F(Z) with
/// F degree-0 and invariant under the periodic grid relabelings): the
/// rescaled spectrum generates a grid-stationary max-stable vector, so its
/// exponent must be invariant under cyclic relabeling of (locations,
/// thresholds). The comparison is paired draw-by-draw; estimates are also
/// reported after renormalizing by Ê‖Z̃(t₀)‖^α.
pub fn example1_invariance_test(
    spec: &ModelSpec,
    f_functional: &Functional,
    locs: &LocationSet,
    n_rep: usize,
    seed: u64,
    rule: &DecisionRule,
) -> Result<EquivalenceVerdict, EquivalenceError> {
    if f_functional.degree != 0.0 {
        return Err(EquivalenceError::NotApplicable(
            "F must be 0-homogeneous".into(),
        ));
    }
    let n = locs.n();
    let d = spec.d;
    // registration gate: F invariant under periodic grid relabelings
    let mut gate_stream = rng_stream(0xE1AA17, 0);
    for _ in 0..16 {
        let values: Vec<f64> = (0..d * n)
            .map(|_| (gate_stream.gen::<f64>() * 2.0 - 0.5).exp())
            .collect();
        let z = SampleMatrix::from_raw(d, n, values.clone(), 1.0);
        let base = f_functional.eval(&z);
        for rot in 1..n {
            let cols: Vec<usize> = (0..n).map(|j| (j + rot) % n).collect();
            let zr = z.select_locations(&cols);
            let got = f_functional.eval(&zr);
            let rel = (got - base).abs() / base.abs().max(1e-300);
            if rel > 1e-8 {
                return Err(EquivalenceError::NotApplicable(format!(
                    "F is not invariant under periodic grid shifts (relative change {rel:.3e})"
                )));
            }
        }
    }

    let sampler = build_sampler(spec, locs)?;
    if sampler.is_weighted() {
        return Err(EquivalenceError::NotApplicable(
            "base sampler must be unweighted".into(),
        ));
    }
    let alpha = spec.alpha;
    // fixed randomized thresholds plus the symmetric all-ones matrix
    let mut x_stream = rng_stream(seed, u64::MAX - 1);
    let mut threshold_sets = vec![vec![1.0; d * n]];
    for _ in 0..2 {
        threshold_sets.push(
            (0..d * n)
                .map(|_| (x_stream.gen::<f64>() * 1.6 - 0.8).exp())
                .collect(),
        );
    }

    // paired draws: evaluate every labeling on the same rescaled draw
    let rows: Vec<(f64, Vec<Vec<f64>>)> = (0..n_rep)
        .into_par_iter()
        .map(|r| {
            let mut stream = rng_stream(seed, r as u64);
            let z = sampler.draw(&mut stream);
            let f_val = f_functional.eval(&z).min(1e6);
            let scaled: Vec<f64> = z.values().iter().map(|v| v * f_val).collect();
            let zt = SampleMatrix::from_raw(d, n, scaled, 1.0);
            let kappa_obs = NormSpec::Sup.eval(zt.location_column(0)).powf(alpha);
            let per_x: Vec<Vec<f64>> = threshold_sets
                .iter()
                .map(|x| {
                    (0..n)
                        .map(|rot| {
                            let mut best = 0.0_f64;
                            for j in 0..n {
                                let jj = (j + rot) % n;
                                for i in 0..d {
                                    let v = zt.get(i, jj) / x[j * d + i];
                                    if v > best {
                                        best = v;
                                    }
                                }
                            }
                            best.powf(alpha)
                        })
                        .collect()
                })
                .collect();
            (kappa_obs, per_x)
        })
        .collect();
    let kappa =
        EstimateWithError::from_observations(&rows.iter().map(|(k, _)| *k).collect::<Vec<_>>());
    if !(kappa.value > 0.0) || !kappa.value.is_finite() {
        return Err(EquivalenceError::NotApplicable(format!(
            "E‖Z̃(t₀)‖^α = {} is not in (0, ∞)",
            kappa.value
        )));
    }
    let mut reports = Vec::new();
    for (xi, _) in threshold_sets.iter().enumerate() {
        for rot in 1..n {
            // paired difference of the rotated vs identity labeling
            let diffs: Vec<f64> = rows
                .iter()
                .map(|(_, per_x)| per_x[xi][rot] - per_x[xi][0])
                .collect();
            let base: Vec<f64> = rows.iter().map(|(_, per_x)| per_x[xi][0]).collect();
            let diff_est = EstimateWithError::from_observations(&diffs);
            let base_est = EstimateWithError::from_observations(&base);
            let z = if diff_est.stderr == 0.0 {
                if diff_est.value == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                diff_est.value / diff_est.stderr
            };
            reports.push(FunctionalReport {
                name: format!("exponent[x{xi},rot{rot}] / κ"),
                a: (base_est.value + diff_est.value) / kappa.value,
                a_stderr: diff_est.stderr / kappa.value,
                b: base_est.value / kappa.value,
                b_stderr: base_est.stderr / kappa.value,
                z,
            });
        }
    }
    Ok(EquivalenceVerdict::from_reports(reports, rule, 0.0))
}
