//! Exact model-specific exponent formulas.
//!
//! Brown-Resnick: each finite pair (k,l) contributes
//! (1/x_kl)·P(∀(i,j)≠(k,l): Y_i(t_j) − Y_k(t_l) − γ_ik(t_j,t_l)/2 ≤ ln(x_ij/x_kl)),
//! an (|J|−1)-dimensional Gaussian rectangle evaluated by randomized QMC.
//!
//! Smith: the kernel infargmax decomposition, either in norm form (one
//! expectation per location over the sup-norm-tilted shift S) or in
//! component form (one infargmax probability per finite pair over
//! S_k ~ L_k^α/c_k).

use rayon::prelude::*;

use crate::core::{rng_stream, EstimateWithError, LocationSet, ThresholdMatrix};
use crate::gaussian::{build_increment_cov, factorize, mvn_rect_prob, RECT_DIMENSION_CEILING};
use crate::spectral::{BrownResnickSpec, SmithKernelSpec};

use super::{check_shape, exponent_by_tilts, FidiError};

/// Exact Brown-Resnick fidi via Gaussian rectangle probabilities. Requires
/// the joint Gaussian at the distinct (component, location) pairs to be
/// nonsingular; duplicate pairs are refused with advice to use the Monte
/// Carlo exponent. Term τ draws its QMC shifts from stream τ of `seed`.
pub fn br_fidi_exact(
    spec: &BrownResnickSpec,
    locs: &LocationSet,
    thresholds: &ThresholdMatrix,
    target_rel_err: f64,
    seed: u64,
) -> Result<EstimateWithError, FidiError> {
    check_shape(thresholds, spec.d(), locs.n())?;
    let pairs = thresholds.finite_pairs();
    if pairs.len() > RECT_DIMENSION_CEILING + 1 {
        return Err(FidiError::Gaussian(
            crate::gaussian::GaussianError::DimensionCeiling {
                dim: pairs.len() - 1,
                max: RECT_DIMENSION_CEILING,
            },
        ));
    }
    let variogram = spec.variogram_spec();
    let terms: Vec<Result<(f64, f64, u64), FidiError>> = pairs
        .par_iter()
        .enumerate()
        .map(|(term, &(k, l))| {
            let x_kl = thresholds.get(k, l);
            let others: Vec<(usize, usize)> =
                pairs.iter().copied().filter(|&p| p != (k, l)).collect();
            if others.is_empty() {
                return Ok((1.0 / x_kl, 0.0, 0));
            }
            let targets: Vec<(usize, Vec<f64>)> = others
                .iter()
                .map(|&(i, j)| (i, locs.point(j).to_vec()))
                .collect();
            let (mean, cov) =
                build_increment_cov(&variogram, (k, locs.point(l)), &targets)?;
            // a zero-variance increment duplicates the anchor pair: ties
            // have probability one and the density assumption fails
            if (0..cov.dim()).any(|a| cov.get(a, a) == 0.0) {
                return Err(FidiError::SingularGaussian(format!(
                    "a (component, location) pair duplicates the anchor ({k},{l})"
                )));
            }
            let factor = factorize(&cov)?;
            if factor.jitter() > 0.0 {
                return Err(FidiError::SingularGaussian(format!(
                    "increment covariance for anchor ({k},{l}) needed jitter {:.1e}",
                    factor.jitter()
                )));
            }
            let upper: Vec<f64> = others
                .iter()
                .map(|&(i, j)| (thresholds.get(i, j) / x_kl).ln())
                .collect();
            let lower = vec![f64::NEG_INFINITY; upper.len()];
            let mut stream = rng_stream(seed, term as u64);
            let rect = mvn_rect_prob(&lower, &upper, &mean, &cov, target_rel_err, &mut stream)?;
            Ok((rect.value / x_kl, rect.stderr / x_kl, rect.points_used))
        })
        .collect();
    let mut value = 0.0;
    let mut var = 0.0;
    let mut points = 0u64;
    for term in terms {
        let (v, se, used) = term?;
        value += v;
        var += se * se;
        points += used;
    }
    Ok(EstimateWithError {
        value,
        stderr: var.sqrt(),
        n_replicates: points.max(1),
        self_normalized: false,
    })
}

/// Which of the two Smith decompositions to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmithFidiVariant {
    /// c_∞ Σ_l E[ ‖L(S)/x_l‖_∞^α/‖L(S)‖_∞^α · 1(infargmax_j ‖L(t_j−t_l+S)/x_j‖_∞ = l) ]
    NormForm,
    /// Σ_{(k,l)} c_k/x_kl^α · P(infargmax Θ^\[t_l,k\]_i(t_j)/x_ij = (k,l)),
    /// requiring c_k > 0 (zero-mass components drop out).
    ComponentForm,
}

/// Smith exponent by the kernel infargmax formulas; Monte Carlo over the
/// tilted shift S (norm form) or S_k (component form).
pub fn smith_fidi(
    spec: &SmithKernelSpec,
    locs: &LocationSet,
    thresholds: &ThresholdMatrix,
    n_rep: usize,
    variant: SmithFidiVariant,
    seed: u64,
) -> Result<EstimateWithError, FidiError> {
    match variant {
        SmithFidiVariant::ComponentForm => exponent_by_tilts(spec, locs, thresholds, n_rep, seed),
        SmithFidiVariant::NormForm => smith_fidi_norm_form(spec, locs, thresholds, n_rep, seed),
    }
}

fn smith_fidi_norm_form(
    spec: &SmithKernelSpec,
    locs: &LocationSet,
    thresholds: &ThresholdMatrix,
    n_rep: usize,
    seed: u64,
) -> Result<EstimateWithError, FidiError> {
    check_shape(thresholds, spec.d(), locs.n())?;
    let alpha = spec.alpha();
    let d = spec.d();
    let c_sup = spec.sup_mass();
    // the sup-norm tilted shift law S ~ ‖L‖_∞^α / c_∞
    let spec2 = spec.clone();
    let sampler = spec.rejection_sampler(std::sync::Arc::new(move |t: &[f64]| {
        (0..spec2.d())
            .map(|i| spec2.kernel_value(i, t))
            .fold(0.0_f64, f64::max)
            .powf(spec2.alpha())
    }))?;
    // locations with at least one finite threshold, in order
    let live: Vec<usize> = (0..locs.n())
        .filter(|&j| (0..d).any(|i| thresholds.get(i, j).is_finite()))
        .collect();
    // weighted column sup over finite entries: max_i L_i(u)/x_ij
    let column_value = |u: &[f64], j: usize| -> f64 {
        let mut best = 0.0_f64;
        for i in 0..d {
            let x = thresholds.get(i, j);
            if x.is_finite() {
                let v = spec.kernel_value(i, u) / x;
                if v > best {
                    best = v;
                }
            }
        }
        best
    };
    let mut value = 0.0;
    let mut var = 0.0;
    for (term, &l) in live.iter().enumerate() {
        let t_l = locs.point(l);
        let obs: Vec<f64> = (0..n_rep)
            .into_par_iter()
            .map(|r| {
                let mut stream = rng_stream(seed, (term * n_rep + r) as u64);
                let s = sampler.draw(&mut stream);
                let ls: Vec<f64> = spec.kernel_vector(&s);
                let sup_ls = ls.iter().cloned().fold(0.0_f64, f64::max);
                let ratio = (column_value(&s, l) / sup_ls).powf(alpha);
                // infargmax over live locations of the shifted weighted sup
                let mut best_j = usize::MAX;
                let mut best_val = f64::NEG_INFINITY;
                let mut arg = vec![0.0; s.len()];
                for &j in &live {
                    let tj = locs.point(j);
                    for r in 0..arg.len() {
                        arg[r] = tj[r] - t_l[r] + s[r];
                    }
                    let v = column_value(&arg, j);
                    if v > best_val {
                        best_val = v;
                        best_j = j;
                    }
                }
                if best_j == l {
                    ratio
                } else {
                    0.0
                }
            })
            .collect();
        let est = EstimateWithError::from_observations(&obs);
        value += est.value;
        var += est.stderr * est.stderr;
    }
    Ok(EstimateWithError {
        value: c_sup * value,
        stderr: c_sup * var.sqrt(),
        n_replicates: (live.len() * n_rep) as u64,
        self_normalized: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::NormSpec;
    use crate::fixtures;
    use crate::gaussian::phid;
    use crate::spectral::build_sampler;

    fn brownian() -> BrownResnickSpec {
        BrownResnickSpec::from_model(&fixtures::br_brownian_d1()).unwrap()
    }

    #[test]
    fn single_pair_is_reciprocal_threshold() {
        // n = d = 1: empty conditioning set, probability 1 → exponent 1/x
        let spec = brownian();
        let locs = LocationSet::new_1d(&[0.7]).unwrap();
        let x = ThresholdMatrix::constant(1, 1, 4.0).unwrap();
        let est = br_fidi_exact(&spec, &locs, &x, 1e-6, 1).unwrap();
        assert_eq!(est.value, 0.25);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn husler_reiss_two_location_oracle() {
        // γ(0,4) = 4, x = (1,1): closed form Φ(√γ/2 + ln(x₂/x₁)/√γ)/x₁ +
        // the symmetric term = 2Φ(1), itself validated against 1-D
        // quadrature of E max(Z(0), Z(4)) in `quadrature_oracle_matches`.
        let spec = brownian();
        let locs = LocationSet::new_1d(&[0.0, 4.0]).unwrap();
        let x = ThresholdMatrix::constant(1, 2, 1.0).unwrap();
        let est = br_fidi_exact(&spec, &locs, &x, 1e-6, 2).unwrap();
        let oracle = 2.0 * phid(1.0);
        assert!(
            (est.value - oracle).abs() < 1e-3,
            "exponent {} vs 2Φ(1) = {oracle}",
            est.value
        );
        assert!(est.stderr < 1e-3);
        // and the fidi probability it implies
        let p = (-est.value).exp();
        assert!((p - 0.18587339814818440).abs() < 2e-4, "P = {p}");
    }

    #[test]
    fn quadrature_oracle_matches() {
        // independent oracle: E max(Z(0), Z(4)) with Z(0) ≡ 1 rooted at 0,
        // log Z(4) ~ N(−2, 4): Simpson quadrature over the Gaussian
        let f = |u: f64| {
            let z4 = (2.0 * u - 2.0).exp();
            z4.max(1.0) * crate::gaussian::normal_pdf(u)
        };
        let (a, b, m) = (-12.0_f64, 12.0_f64, 48_000usize);
        let h = (b - a) / m as f64;
        let mut acc = f(a) + f(b);
        for i in 1..m {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
        }
        let quad = acc * h / 3.0;
        let oracle = 2.0 * phid(1.0);
        assert!(
            (quad - oracle).abs() < 1e-8,
            "quadrature {quad} vs closed form {oracle}"
        );
    }

    #[test]
    fn bivariate_closed_form_at_asymmetric_thresholds() {
        // classical two-location closed form with λ = √γ/2:
        // V(x₁,x₂) = Φ(λ + ln(x₂/x₁)/(2λ))/x₁ + Φ(λ + ln(x₁/x₂)/(2λ))/x₂
        let spec = brownian();
        let locs = LocationSet::new_1d(&[0.0, 1.0]).unwrap(); // γ = 1, λ = 1/2
        let (x1, x2) = (1.0, 2.0);
        let x = ThresholdMatrix::new(1, 2, vec![x1, x2]).unwrap();
        let est = br_fidi_exact(&spec, &locs, &x, 1e-7, 89).unwrap();
        let lambda = 0.5_f64;
        let oracle = phid(lambda + (x2 / x1).ln() / (2.0 * lambda)) / x1
            + phid(lambda + (x1 / x2).ln() / (2.0 * lambda)) / x2;
        assert!(
            (est.value - oracle).abs() < 1e-4,
            "exponent {} vs closed form {oracle}",
            est.value
        );
    }

    #[test]
    fn margin_recovery_as_threshold_grows() {
        // x₁ → ∞ recovers the single margin 1/x₂
        let spec = brownian();
        let locs = LocationSet::new_1d(&[0.0, 4.0]).unwrap();
        let x = ThresholdMatrix::new(1, 2, vec![f64::INFINITY, 2.0]).unwrap();
        let est = br_fidi_exact(&spec, &locs, &x, 1e-6, 3).unwrap();
        assert_eq!(est.value, 0.5);
    }

    #[test]
    fn duplicate_locations_refused_with_mc_advice() {
        let spec = brownian();
        let locs = LocationSet::new_1d(&[0.0, 0.0]).unwrap();
        let x = ThresholdMatrix::constant(1, 2, 1.0).unwrap();
        let err = br_fidi_exact(&spec, &locs, &x, 1e-5, 4).unwrap_err();
        assert!(matches!(err, FidiError::SingularGaussian(_)), "{err}");
    }

    #[test]
    fn smith_single_pair_component_form() {
        // n = d = 1: exponent = c₁/x^α exactly up to the indicator being 1
        let spec =
            SmithKernelSpec::from_model(&fixtures::smith_gaussian_d1()).unwrap();
        let locs = LocationSet::new_1d(&[0.0]).unwrap();
        let x = ThresholdMatrix::constant(1, 1, 2.0).unwrap();
        let est = smith_fidi(&spec, &locs, &x, 1000, SmithFidiVariant::ComponentForm, 5)
            .unwrap();
        assert_eq!(est.value, 0.5); // c₁ = 1 for the standard Gaussian kernel
    }

    #[test]
    fn smith_norm_and_component_forms_agree_with_mc() {
        let model = fixtures::smith_gaussian_d1();
        let spec = SmithKernelSpec::from_model(&model).unwrap();
        let locs = LocationSet::new_1d(&[0.0, 1.0]).unwrap();
        let x = ThresholdMatrix::constant(1, 2, 1.0).unwrap();
        let comp =
            smith_fidi(&spec, &locs, &x, 100_000, SmithFidiVariant::ComponentForm, 6).unwrap();
        let norm =
            smith_fidi(&spec, &locs, &x, 100_000, SmithFidiVariant::NormForm, 7).unwrap();
        let sampler = build_sampler(&model, &locs).unwrap();
        let mc = super::super::exponent_mc(sampler.as_ref(), &x, 1.0, 100_000, 8).unwrap();
        for (name, a, b) in [
            ("component vs norm", &comp, &norm),
            ("component vs mc", &comp, &mc),
            ("norm vs mc", &norm, &mc),
        ] {
            let z = a.z_against(b);
            assert!(z.abs() < 3.0, "{name}: z = {z} ({} vs {})", a.value, b.value);
        }
    }

    #[test]
    fn example2_closed_event_form_matches_sampling() {
        // Standard-normal-density kernel at α = 1: the component-form term
        // probabilities are Gaussian rectangle probabilities of
        // Σ_r (t_lr − t_jr)Y_r − (t_jr − t_lr)²/2 ≤ ln(x_j/x_l) with
        // Y ~ N(0, I); evaluate them via mvn_rect_prob and compare the
        // resulting exponent against the S_k-sampling estimate.
        use crate::core::rng_stream;
        use crate::gaussian::CovarianceMatrix;

        let coords = [0.0, 1.0, 2.0];
        let xs = [1.0, 2.0, 0.7];
        let locs = LocationSet::new_1d(&coords).unwrap();
        let x = ThresholdMatrix::new(1, 3, xs.to_vec()).unwrap();

        let mut closed_form = 0.0;
        let mut closed_var = 0.0;
        for l in 0..coords.len() {
            let others: Vec<usize> = (0..coords.len()).filter(|&j| j != l).collect();
            let mean: Vec<f64> = others
                .iter()
                .map(|&j| -(coords[j] - coords[l]).powi(2) / 2.0)
                .collect();
            let rows: Vec<Vec<f64>> = others
                .iter()
                .map(|&j| {
                    others
                        .iter()
                        .map(|&jj| (coords[l] - coords[j]) * (coords[l] - coords[jj]))
                        .collect()
                })
                .collect();
            let cov = CovarianceMatrix::from_rows(&rows).unwrap();
            let upper: Vec<f64> = others.iter().map(|&j| (xs[j] / xs[l]).ln()).collect();
            let lower = vec![f64::NEG_INFINITY; others.len()];
            let mut stream = rng_stream(77, l as u64);
            let rect =
                mvn_rect_prob(&lower, &upper, &mean, &cov, 1e-5, &mut stream).unwrap();
            closed_form += rect.value / xs[l];
            closed_var += (rect.stderr / xs[l]).powi(2);
        }
        let closed = crate::core::EstimateWithError {
            value: closed_form,
            stderr: closed_var.sqrt(),
            n_replicates: 1,
            self_normalized: false,
        };
        let spec = SmithKernelSpec::from_model(&fixtures::smith_gaussian_d1()).unwrap();
        let sampled =
            smith_fidi(&spec, &locs, &x, 200_000, SmithFidiVariant::ComponentForm, 78)
                .unwrap();
        let z = closed.z_against(&sampled);
        assert!(
            z.abs() < 3.0,
            "closed event form {} vs S_k sampling {} (z = {z})",
            closed.value,
            sampled.value
        );
    }

    #[test]
    fn bivariate_components_three_way_agreement() {
        // d = 2 delayed fixture: cross-component increment covariances feed
        // both the exact route (3-dim rectangles) and the tilt route
        use crate::fidi::{exponent_by_tilts, exponent_mc};
        use crate::spectral::build_sampler;
        let model = fixtures::br_delayed_d2();
        let spec = BrownResnickSpec::from_model(&model).unwrap();
        let locs = LocationSet::new_1d(&[0.0, 1.0]).unwrap();
        let x = ThresholdMatrix::new(2, 2, vec![1.0, 1.5, 2.0, 0.8]).unwrap();
        let exact = br_fidi_exact(&spec, &locs, &x, 1e-5, 91).unwrap();
        let sampler = build_sampler(&model, &locs).unwrap();
        let mc = exponent_mc(sampler.as_ref(), &x, 1.0, 200_000, 92).unwrap();
        let tilts = exponent_by_tilts(&spec, &locs, &x, 200_000, 93).unwrap();
        for (name, a, b) in [
            ("mc/exact", &mc, &exact),
            ("tilts/exact", &tilts, &exact),
            ("mc/tilts", &mc, &tilts),
        ] {
            let z = a.z_against(b);
            assert!(z.abs() < 3.0, "{name}: z = {z} ({} vs {})", a.value, b.value);
        }
    }

    #[test]
    fn smith_two_component_mixed_kernels_three_way_agreement() {
        // d = 2 with different kernels per component: numeric norm masses,
        // per-component tilted locations, and the 2×2-pair infargmax all in
        // one cross-check
        use crate::core::{KernelKind, ModelKind, ModelSpec, NormSpec, SmithConfig};
        use crate::fidi::exponent_mc;
        use crate::spectral::build_sampler;
        let spec = SmithKernelSpec::new(
            vec![
                KernelKind::GaussianDensity { sigma: 1.0 },
                KernelKind::Triangle { half_width: 1.0 },
            ],
            1.0,
            1,
            2.0,
            8.0,
            NormSpec::Sup,
        )
        .unwrap();
        let model = ModelSpec::new(
            1.0,
            2,
            1,
            ModelKind::Smith(SmithConfig {
                kernels: vec![
                    KernelKind::GaussianDensity { sigma: 1.0 },
                    KernelKind::Triangle { half_width: 1.0 },
                ],
                mixing_sigma: 2.0,
                window: 8.0,
            }),
        )
        .unwrap();
        let locs = LocationSet::new_1d(&[0.0, 1.0]).unwrap();
        let x = ThresholdMatrix::new(2, 2, vec![1.0, 2.0, 1.5, 0.9]).unwrap();
        let comp =
            smith_fidi(&spec, &locs, &x, 200_000, SmithFidiVariant::ComponentForm, 94).unwrap();
        let norm =
            smith_fidi(&spec, &locs, &x, 200_000, SmithFidiVariant::NormForm, 95).unwrap();
        let sampler = build_sampler(&model, &locs).unwrap();
        let mc = exponent_mc(sampler.as_ref(), &x, 1.0, 200_000, 96).unwrap();
        for (name, a, b) in [
            ("comp/norm", &comp, &norm),
            ("mc/comp", &mc, &comp),
            ("mc/norm", &mc, &norm),
        ] {
            let z = a.z_against(b);
            assert!(z.abs() < 3.0, "{name}: z = {z} ({} vs {})", a.value, b.value);
        }
    }

    #[test]
    fn exponent_monotone_nonincreasing_in_thresholds() {
        let spec = brownian();
        let locs = LocationSet::new_1d(&[0.0, 1.0]).unwrap();
        let lo = ThresholdMatrix::new(1, 2, vec![1.0, 1.0]).unwrap();
        let hi = ThresholdMatrix::new(1, 2, vec![1.5, 1.0]).unwrap();
        let a = br_fidi_exact(&spec, &locs, &lo, 1e-6, 81).unwrap();
        let b = br_fidi_exact(&spec, &locs, &hi, 1e-6, 82).unwrap();
        assert!(
            b.value <= a.value + 3.0 * (a.stderr + b.stderr),
            "raising a threshold must not raise the exponent"
        );
    }

    #[test]
    fn exact_evaluators_shift_invariant_for_stationary_specs() {
        let x = ThresholdMatrix::new(1, 2, vec![1.0, 2.0]).unwrap();
        let br = brownian();
        let a = br_fidi_exact(&br, &LocationSet::new_1d(&[0.0, 1.0]).unwrap(), &x, 1e-6, 83)
            .unwrap();
        let b = br_fidi_exact(&br, &LocationSet::new_1d(&[5.0, 6.0]).unwrap(), &x, 1e-6, 84)
            .unwrap();
        assert!(
            (a.value - b.value).abs() < 3.0 * (a.stderr + b.stderr) + 1e-9,
            "common shift changed the exponent: {} vs {}",
            a.value,
            b.value
        );
        let smith = SmithKernelSpec::from_model(&fixtures::smith_gaussian_d1()).unwrap();
        let a = smith_fidi(
            &smith,
            &LocationSet::new_1d(&[0.0, 1.0]).unwrap(),
            &x,
            200_000,
            SmithFidiVariant::ComponentForm,
            85,
        )
        .unwrap();
        let b = smith_fidi(
            &smith,
            &LocationSet::new_1d(&[5.0, 6.0]).unwrap(),
            &x,
            200_000,
            SmithFidiVariant::ComponentForm,
            86,
        )
        .unwrap();
        let z = a.z_against(&b);
        assert!(z.abs() < 3.0, "smith shift invariance: z = {z}");
    }

    #[test]
    fn exponent_respects_analytic_bounds() {
        use crate::fidi::exponent_bounds;
        let model = fixtures::br_brownian_d1();
        let spec = brownian();
        let locs = LocationSet::new_1d(&[0.0, 1.0]).unwrap();
        let x = ThresholdMatrix::new(1, 2, vec![1.0, 2.0]).unwrap();
        let est = br_fidi_exact(&spec, &locs, &x, 1e-6, 87).unwrap();
        let (lo, hi) = exponent_bounds(&model, &locs, &x).unwrap();
        assert!(
            lo - 3.0 * est.stderr <= est.value && est.value <= hi + 3.0 * est.stderr,
            "exponent {} outside [max coef, Σ coef] = [{lo}, {hi}]",
            est.value
        );
    }

    #[test]
    fn smith_one_d_law_equals_br_quadratic_variogram() {
        // Z(t) = φ(t−W)/q(W) has log-Gaussian structure with
        // γ(t,s) = (t−s)²; the exact BR evaluator on that variogram is an
        // independent oracle for the Smith estimators.
        let smith = SmithKernelSpec::from_model(&fixtures::smith_gaussian_d1()).unwrap();
        let locs = LocationSet::new_1d(&[0.0, 1.0]).unwrap();
        let x = ThresholdMatrix::new(1, 2, vec![1.0, 2.0]).unwrap();
        let comp =
            smith_fidi(&smith, &locs, &x, 200_000, SmithFidiVariant::ComponentForm, 9).unwrap();
        let br = BrownResnickSpec::new(crate::gaussian::CovarianceRealization::Rooted {
            variogram: crate::gaussian::VariogramSpec::fractional(1, 1.0, 2.0),
            root: vec![0.0],
            root_component: 0,
        });
        let exact = br_fidi_exact(&br, &locs, &x, 1e-6, 10).unwrap();
        let z = comp.z_against(&exact);
        assert!(
            z.abs() < 3.0,
            "smith {} vs br-exact {} (z = {z})",
            comp.value,
            exact.value
        );
        let _ = NormSpec::Sup;
    }
}
