//! Domain types shared by every other module.
//!
//! # Index conventions
//!
//! A joint observation of the d-variate process at n locations is a d×n
//! matrix. Throughout the crate such matrices are stored **location-major**:
//! a flat buffer of n blocks of d, so entry `(component i, location j)`
//! lives at `j * d + i`. CSV and binary emissions follow the same order.

mod io;
mod model;
mod rng;

pub use io::{parse_locations_csv, parse_thresholds_csv};
pub use model::{
    BrownResnickConfig, CustomKind, KernelKind, ModelKind, ModelSpec, ScalerSpec, SmithConfig,
};
pub use rng::{rng_stream, RngStream};

use thiserror::Error;

/// Errors from constructing or combining core domain types.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("location set must contain at least one point")]
    EmptyLocationSet,
    #[error("point {index} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("shift vector has dimension {got}, expected {expected}")]
    ShiftDimensionMismatch { got: usize, expected: usize },
    #[error("threshold matrix must be d×n with d ≥ 1, n ≥ 1")]
    EmptyThresholds,
    #[error("threshold entry ({i},{j}) = {value} is not strictly positive")]
    NonPositiveThreshold { i: usize, j: usize, value: f64 },
    #[error("threshold matrix has no finite entry")]
    AllThresholdsInfinite,
    #[error("sample matrix entry ({i},{j}) = {value} is not finite and nonnegative")]
    InvalidSampleValue { i: usize, j: usize, value: f64 },
    #[error("sample weight {0} is negative or non-finite")]
    InvalidWeight(f64),
    #[error("model configuration: {0}")]
    Config(String),
    #[error("csv parse error at line {line}: {msg}")]
    Csv { line: usize, msg: String },
}

/// A point of the index space ℝ^p.
pub type Point = Vec<f64>;

/// An ordered list of n points in ℝ^p at which the process is observed.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationSet {
    points: Vec<Point>,
    p: usize,
}

impl LocationSet {
    pub fn new(points: Vec<Point>) -> Result<Self, CoreError> {
        if points.is_empty() {
            return Err(CoreError::EmptyLocationSet);
        }
        let p = points[0].len();
        for (index, pt) in points.iter().enumerate() {
            if pt.len() != p {
                return Err(CoreError::DimensionMismatch {
                    index,
                    got: pt.len(),
                    expected: p,
                });
            }
        }
        Ok(Self { points, p })
    }

    /// Convenience constructor for a one-dimensional index space.
    pub fn new_1d(coords: &[f64]) -> Result<Self, CoreError> {
        Self::new(coords.iter().map(|&t| vec![t]).collect())
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j]
    }

    /// Index of `point` in the set, comparing coordinates exactly.
    pub fn position(&self, point: &[f64]) -> Option<usize> {
        self.points.iter().position(|q| q.as_slice() == point)
    }

    /// Indices of points that appear more than once (exact coordinate
    /// equality). Duplicates are legal but degrade exact evaluators, so
    /// callers use this for degeneracy warnings.
    pub fn duplicate_indices(&self) -> Vec<usize> {
        let mut dup = Vec::new();
        for j in 1..self.points.len() {
            if self.points[..j].iter().any(|q| q == &self.points[j]) {
                dup.push(j);
            }
        }
        dup
    }

    /// Ordered union of `self` and `other` (self first, new points after,
    /// exact-duplicate points inserted once).
    pub fn union(&self, other: &LocationSet) -> Result<Self, CoreError> {
        if other.p != self.p {
            return Err(CoreError::ShiftDimensionMismatch {
                got: other.p,
                expected: self.p,
            });
        }
        let mut points = self.points.clone();
        for q in &other.points {
            if !points.iter().any(|r| r == q) {
                points.push(q.clone());
            }
        }
        Self::new(points)
    }
}

/// The shift operator on location sets: `B^h X(t) = X(t−h)`, realized by
/// evaluating at shifted locations `{t_1 − h, …, t_n − h}` in order.
pub fn shift_locations(locs: &LocationSet, h: &[f64]) -> Result<LocationSet, CoreError> {
    if h.len() != locs.p() {
        return Err(CoreError::ShiftDimensionMismatch {
            got: h.len(),
            expected: locs.p(),
        });
    }
    let points = locs
        .points()
        .iter()
        .map(|t| t.iter().zip(h).map(|(a, b)| a - b).collect())
        .collect();
    LocationSet::new(points)
}

/// The d×n levels x_{ij} > 0 at which fidi's and exponents are evaluated.
/// `+∞` entries mean "no constraint at that (component, location)".
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdMatrix {
    x: Vec<f64>, // location-major, j*d + i
    d: usize,
    n: usize,
}

impl ThresholdMatrix {
    pub fn new(d: usize, n: usize, entries: Vec<f64>) -> Result<Self, CoreError> {
        if d == 0 || n == 0 || entries.len() != d * n {
            return Err(CoreError::EmptyThresholds);
        }
        let mut any_finite = false;
        for j in 0..n {
            for i in 0..d {
                let v = entries[j * d + i];
                if !(v > 0.0) {
                    return Err(CoreError::NonPositiveThreshold { i, j, value: v });
                }
                if v.is_finite() {
                    any_finite = true;
                }
            }
        }
        if !any_finite {
            return Err(CoreError::AllThresholdsInfinite);
        }
        Ok(Self { x: entries, d, n })
    }

    /// All entries equal to `x`.
    pub fn constant(d: usize, n: usize, x: f64) -> Result<Self, CoreError> {
        Self::new(d, n, vec![x; d * n])
    }

    /// d=1 row of per-location thresholds.
    pub fn row(xs: &[f64]) -> Result<Self, CoreError> {
        Self::new(1, xs.len(), xs.to_vec())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.x[j * self.d + i]
    }

    /// The pairs (i, j) with finite threshold, in lexicographic (i, j) order.
    pub fn finite_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for i in 0..self.d {
            for j in 0..self.n {
                if self.get(i, j).is_finite() {
                    pairs.push((i, j));
                }
            }
        }
        pairs
    }

    /// Entrywise scaling by `c > 0`.
    pub fn scaled(&self, c: f64) -> ThresholdMatrix {
        ThresholdMatrix {
            x: self.x.iter().map(|v| v * c).collect(),
            d: self.d,
            n: self.n,
        }
    }
}

/// One realisation of (Z(t_1),…,Z(t_n)): a d×n matrix of nonnegative values
/// together with an importance weight (1 for unweighted samplers).
#[derive(Debug, Clone)]
pub struct SampleMatrix {
    values: Vec<f64>, // location-major, j*d + i
    d: usize,
    n: usize,
    weight: f64,
}

impl SampleMatrix {
    pub fn new(d: usize, n: usize, values: Vec<f64>, weight: f64) -> Result<Self, CoreError> {
        assert_eq!(values.len(), d * n, "sample matrix dimension mismatch");
        for j in 0..n {
            for i in 0..d {
                let v = values[j * d + i];
                if !v.is_finite() || v < 0.0 {
                    return Err(CoreError::InvalidSampleValue { i, j, value: v });
                }
            }
        }
        if !weight.is_finite() || weight < 0.0 {
            return Err(CoreError::InvalidWeight(weight));
        }
        Ok(Self {
            values,
            d,
            n,
            weight,
        })
    }

    /// Unchecked construction for hot sampling loops; callers guarantee
    /// finite nonnegative entries.
    pub(crate) fn from_raw(d: usize, n: usize, values: Vec<f64>, weight: f64) -> Self {
        debug_assert_eq!(values.len(), d * n);
        Self {
            values,
            d,
            n,
            weight,
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.d + i]
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The column of component values at location j.
    pub fn location_column(&self, j: usize) -> &[f64] {
        &self.values[j * self.d..(j + 1) * self.d]
    }

    /// Restriction to a subset of location indices, preserving the weight.
    pub fn select_locations(&self, keep: &[usize]) -> SampleMatrix {
        let mut values = Vec::with_capacity(keep.len() * self.d);
        for &j in keep {
            values.extend_from_slice(self.location_column(j));
        }
        SampleMatrix::from_raw(self.d, keep.len(), values, self.weight)
    }
}

/// A Monte Carlo value with its standard error and replicate count.
///
/// For unweighted estimators `stderr` is the sample standard deviation over
/// replicates divided by √n. For self-normalized weighted estimators it is
/// the delta-method value and `self_normalized` is set.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EstimateWithError {
    pub value: f64,
    pub stderr: f64,
    pub n_replicates: u64,
    pub self_normalized: bool,
}

impl EstimateWithError {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            stderr: 0.0,
            n_replicates: 1,
            self_normalized: false,
        }
    }

    /// Plain-mean estimate from unweighted observations.
    pub fn from_observations(obs: &[f64]) -> Self {
        let n = obs.len() as f64;
        let mean = obs.iter().sum::<f64>() / n;
        let var = if obs.len() > 1 {
            obs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            value: mean,
            stderr: (var / n).sqrt(),
            n_replicates: obs.len() as u64,
            self_normalized: false,
        }
    }

    /// Self-normalized estimate Σ w_r v_r / Σ w_r with delta-method stderr
    /// √(Σ w_r²(v_r − v̂)²) / Σ w_r.
    pub fn from_weighted_observations(obs: &[(f64, f64)]) -> Self {
        let wsum: f64 = obs.iter().map(|(w, _)| w).sum();
        if wsum <= 0.0 {
            return Self {
                value: f64::NAN,
                stderr: f64::INFINITY,
                n_replicates: obs.len() as u64,
                self_normalized: true,
            };
        }
        let value = obs.iter().map(|(w, v)| w * v).sum::<f64>() / wsum;
        let ss: f64 = obs.iter().map(|(w, v)| (w * (v - value)).powi(2)).sum();
        Self {
            value,
            stderr: ss.sqrt() / wsum,
            n_replicates: obs.len() as u64,
            self_normalized: true,
        }
    }

    /// z-score of the difference of two independent estimates. Zero spread
    /// with zero difference reports z = 0; zero spread with a nonzero
    /// difference reports +∞.
    pub fn z_against(&self, other: &EstimateWithError) -> f64 {
        let diff = self.value - other.value;
        let se = (self.stderr * self.stderr + other.stderr * other.stderr).sqrt();
        if se == 0.0 {
            if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            diff / se
        }
    }
}

/// A norm on ℝ^d used for tilting; all inputs in this crate are nonnegative.
#[derive(Clone)]
pub enum NormSpec {
    /// sup-norm `max_i |x_i|` (the default everywhere tilting is involved)
    Sup,
    /// `(Σ |x_i|^α)^{1/α}`, α > 0 (a norm for α ≥ 1)
    LAlpha(f64),
    /// `Σ |x_i|`
    L1,
    /// Any positive 1-homogeneous norm evaluation.
    Custom(std::sync::Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for NormSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NormSpec::Sup => write!(f, "Sup"),
            NormSpec::LAlpha(a) => write!(f, "LAlpha({a})"),
            NormSpec::L1 => write!(f, "L1"),
            NormSpec::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl NormSpec {
    pub fn eval(&self, v: &[f64]) -> f64 {
        match self {
            NormSpec::Sup => v.iter().fold(0.0_f64, |m, x| m.max(x.abs())),
            NormSpec::LAlpha(alpha) => {
                v.iter().map(|x| x.abs().powf(*alpha)).sum::<f64>().powf(1.0 / alpha)
            }
            NormSpec::L1 => v.iter().map(|x| x.abs()).sum(),
            NormSpec::Custom(f) => f(v),
        }
    }
}
