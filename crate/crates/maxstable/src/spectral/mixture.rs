//! Spectral reconstruction from a family of tilted processes on a finite
//! grid: Z_W(t) = Θ^\[W\](t) / (Σ_s ‖Θ^\[W\](s)‖^α p(s))^{1/α} with W drawn
//! from the pmf p. The stationary variant reuses the single tilt
//! Θ = Θ^\[0\] and shifts: Z_W(t) = Θ(t−W) / (Σ_s ‖Θ(s−W)‖^α p(s))^{1/α}.

use rand::Rng;

use crate::core::{shift_locations, LocationSet, NormSpec, RngStream, SampleMatrix};

use super::{SpectralError, SpectralSampler, TiltAnchor, TiltFamily, TiltMode};

pub struct MixtureSampler {
    /// per grid atom: tilted sampler evaluated jointly at grid ∪ locs
    /// (anchored variant) or at (grid ∪ locs) − W (stationary variant)
    tilts: Vec<Box<dyn SpectralSampler>>,
    pmf: Vec<f64>,
    cumulative: Vec<f64>,
    grid_cols: Vec<usize>,
    loc_cols: Vec<usize>,
    alpha: f64,
    norm: NormSpec,
    weighted: bool,
    d: usize,
}

impl MixtureSampler {
    /// Anchored variant: one tilt Θ^\[W\] per grid atom W.
    pub fn new_anchored(
        family: &dyn TiltFamily,
        mode: &TiltMode,
        grid: &LocationSet,
        pmf: &[f64],
        locs: &LocationSet,
        alpha: f64,
        norm: NormSpec,
    ) -> Result<Self, SpectralError> {
        let pmf = validate_pmf(grid, pmf)?;
        let union = grid.union(locs)?;
        let mut tilts = Vec::with_capacity(grid.n());
        for w in grid.points() {
            let anchor = TiltAnchor {
                h: w.clone(),
                mode: mode.clone(),
            };
            tilts.push(family.tilt_at(&anchor, &union)?);
        }
        Self::assemble(tilts, pmf, grid, locs, &union, alpha, norm)
    }

    /// Stationary variant: a single origin tilt evaluated at shifted
    /// locations per atom.
    pub fn new_stationary(
        family: &dyn TiltFamily,
        mode: &TiltMode,
        grid: &LocationSet,
        pmf: &[f64],
        locs: &LocationSet,
        alpha: f64,
        norm: NormSpec,
    ) -> Result<Self, SpectralError> {
        let pmf = validate_pmf(grid, pmf)?;
        let union = grid.union(locs)?;
        let origin = TiltAnchor {
            h: vec![0.0; grid.p()],
            mode: mode.clone(),
        };
        let mut tilts = Vec::with_capacity(grid.n());
        for w in grid.points() {
            let shifted = shift_locations(&union, w)?;
            tilts.push(family.tilt_at(&origin, &shifted)?);
        }
        Self::assemble(tilts, pmf, grid, locs, &union, alpha, norm)
    }

    fn assemble(
        tilts: Vec<Box<dyn SpectralSampler>>,
        pmf: Vec<f64>,
        grid: &LocationSet,
        locs: &LocationSet,
        union: &LocationSet,
        alpha: f64,
        norm: NormSpec,
    ) -> Result<Self, SpectralError> {
        let grid_cols: Vec<usize> = grid
            .points()
            .iter()
            .map(|t| union.position(t).expect("grid point in union"))
            .collect();
        let loc_cols: Vec<usize> = locs
            .points()
            .iter()
            .map(|t| union.position(t).expect("location in union"))
            .collect();
        let mut cumulative = Vec::with_capacity(pmf.len());
        let mut acc = 0.0;
        for &p in &pmf {
            acc += p;
            cumulative.push(acc);
        }
        let weighted = tilts.iter().any(|t| t.is_weighted());
        let d = tilts[0].d();
        Ok(Self {
            tilts,
            pmf,
            cumulative,
            grid_cols,
            loc_cols,
            alpha,
            norm,
            weighted,
            d,
        })
    }
}

fn validate_pmf(grid: &LocationSet, pmf: &[f64]) -> Result<Vec<f64>, SpectralError> {
    if pmf.len() != grid.n() {
        return Err(SpectralError::Unsupported(
            "pmf length must match the grid".into(),
        ));
    }
    if pmf.iter().any(|&p| !(p > 0.0)) {
        return Err(SpectralError::Unsupported(
            "pmf must be strictly positive on the grid".into(),
        ));
    }
    let total: f64 = pmf.iter().sum();
    Ok(pmf.iter().map(|p| p / total).collect())
}

impl SpectralSampler for MixtureSampler {
    fn d(&self) -> usize {
        self.d
    }

    fn n(&self) -> usize {
        self.loc_cols.len()
    }

    fn is_weighted(&self) -> bool {
        self.weighted
    }

    fn draw(&self, stream: &mut RngStream) -> SampleMatrix {
        let u: f64 = stream.gen();
        let atom = self
            .cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.cumulative.len() - 1);
        let theta = self.tilts[atom].draw(stream);
        let d = theta.d();
        if theta.weight() == 0.0 {
            return SampleMatrix::from_raw(d, self.loc_cols.len(), vec![0.0; d * self.loc_cols.len()], 0.0);
        }
        let mut normalizer = 0.0;
        for (g, &col) in self.grid_cols.iter().enumerate() {
            let v = self.norm.eval(theta.location_column(col));
            normalizer += v.powf(self.alpha) * self.pmf[g];
        }
        assert!(
            normalizer > 0.0,
            "mixture normalizer vanished; ‖Θ^[W](W)‖ = 1 should prevent this"
        );
        let scale = normalizer.powf(-1.0 / self.alpha);
        let mut values = Vec::with_capacity(d * self.loc_cols.len());
        for &col in &self.loc_cols {
            for v in theta.location_column(col) {
                values.push(v * scale);
            }
        }
        SampleMatrix::from_raw(d, self.loc_cols.len(), values, theta.weight())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::rng_stream;
    use crate::gaussian::{CovarianceRealization, VariogramSpec};
    use crate::spectral::BrownResnickSpec;

    fn brownian_spec() -> BrownResnickSpec {
        BrownResnickSpec::new(CovarianceRealization::Rooted {
            variogram: VariogramSpec::fractional(1, 1.0, 1.0),
            root: vec![0.0],
            root_component: 0,
        })
    }

    #[test]
    fn single_atom_grid_is_the_tilt_itself() {
        // T₀ = {0}, p(0) = 1: Z_W = Θ^[0]/‖Θ^[0](0)‖ = Θ^[0] exactly
        let spec = brownian_spec();
        let grid = LocationSet::new_1d(&[0.0]).unwrap();
        let locs = LocationSet::new_1d(&[0.0, 1.0]).unwrap();
        let mix = MixtureSampler::new_anchored(
            &spec,
            &TiltMode::Component(0),
            &grid,
            &[1.0],
            &locs,
            1.0,
            NormSpec::Sup,
        )
        .unwrap();
        let mut s = rng_stream(4, 0);
        for _ in 0..100 {
            let z = mix.draw(&mut s);
            // anchor column of the underlying tilt is exactly 1, so the
            // normalizer is exactly 1 and the first location passes through
            assert_eq!(z.get(0, 0), 1.0);
            assert_eq!(z.weight(), 1.0);
        }
    }

    #[test]
    fn stationary_variant_reproduces_stationary_exponent_and_flags_planted() {
        use crate::core::ThresholdMatrix;
        use crate::fidi::exponent_mc;
        use crate::spectral::build_sampler;

        let grid = LocationSet::new_1d(&[0.0, 1.0]).unwrap();
        let locs = LocationSet::new_1d(&[0.0, 1.0, 2.0]).unwrap();
        let x = ThresholdMatrix::constant(1, 3, 1.0).unwrap();
        let n_rep = 100_000;

        // stationary Brown-Resnick: the shifted-tilt reconstruction is a
        // spectral process of the same X
        let model = crate::fixtures::br_brownian_d1();
        let spec = BrownResnickSpec::from_model(&model).unwrap();
        let mix = MixtureSampler::new_stationary(
            &spec,
            &TiltMode::Component(0),
            &grid,
            &[0.5, 0.5],
            &locs,
            1.0,
            NormSpec::Sup,
        )
        .unwrap();
        let mix_est = exponent_mc(&mix, &x, 1.0, n_rep, 61).unwrap();
        let direct = build_sampler(&model, &locs).unwrap();
        let dir_est = exponent_mc(direct.as_ref(), &x, 1.0, n_rep, 62).unwrap();
        let z = mix_est.z_against(&dir_est);
        assert!(z.abs() < 3.0, "stationary reconstruction drifted: z = {z}");

        // planted nonstationary model: the reconstruction must NOT
        // reproduce the exponent (the criterion is an if-and-only-if)
        let planted_model = crate::fixtures::br_planted_nonstationary();
        let planted = BrownResnickSpec::from_model(&planted_model).unwrap();
        let mix = MixtureSampler::new_stationary(
            &planted,
            &TiltMode::Component(0),
            &grid,
            &[0.5, 0.5],
            &locs,
            1.0,
            NormSpec::Sup,
        )
        .unwrap();
        let mix_est = exponent_mc(&mix, &x, 1.0, n_rep, 63).unwrap();
        let direct = build_sampler(&planted_model, &locs).unwrap();
        let dir_est = exponent_mc(direct.as_ref(), &x, 1.0, n_rep, 64).unwrap();
        let z = mix_est.z_against(&dir_est);
        assert!(
            z.abs() > 3.0,
            "planted nonstationarity must break the reconstruction: z = {z}"
        );
    }

    #[test]
    fn two_atom_grid_atom_moment_is_one() {
        // E‖Z_W(h)‖^α = 1 at every grid atom (telescoping identity)
        let spec = brownian_spec();
        let grid = LocationSet::new_1d(&[0.0, 1.0]).unwrap();
        let locs = LocationSet::new_1d(&[0.0, 1.0]).unwrap();
        let mix = MixtureSampler::new_anchored(
            &spec,
            &TiltMode::Component(0),
            &grid,
            &[0.5, 0.5],
            &locs,
            1.0,
            NormSpec::Sup,
        )
        .unwrap();
        let mut s = rng_stream(4, 1);
        let n = 200_000;
        let mut at0 = Vec::with_capacity(n);
        let mut at1 = Vec::with_capacity(n);
        for _ in 0..n {
            let z = mix.draw(&mut s);
            at0.push(z.get(0, 0));
            at1.push(z.get(0, 1));
        }
        for (name, obs) in [("h=0", at0), ("h=1", at1)] {
            let est = crate::core::EstimateWithError::from_observations(&obs);
            assert!(
                (est.value - 1.0).abs() < 3.0 * est.stderr,
                "{name}: E‖Z_W‖ = {} ± {}",
                est.value,
                est.stderr
            );
        }
    }
}
