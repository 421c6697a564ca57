//! Simulation, exact finite-dimensional evaluation, and statistical
//! verification of multivariate max-stable processes.
//!
//! The library is organised around the de Haan construction
//! `X(t) = max_i Γ_i^{-1/α} Z⁽ⁱ⁾(t)` of a d-variate max-stable process
//! observed at finitely many locations:
//!
//! - [`core`]: domain types (location sets, thresholds, sample matrices,
//!   norms), the deterministic RNG-stream contract, and the model
//!   configuration schema.
//! - [`gaussian`]: covariance factorization, joint Gaussian sampling, and
//!   multivariate normal rectangle probabilities (randomized QMC with
//!   sequential conditioning).
//! - [`spectral`]: the spectral-process zoo — Brown-Resnick, Smith,
//!   randomly scaled, tilted, and mixture-reconstructed samplers.
//! - [`simulate`]: Poisson-cascade simulation of the max-stable process
//!   itself, plus max-stability diagnostics.
//! - [`fidi`]: the exponent functional `-ln P(X(t_j) ≤ x_j)` by generic
//!   Monte Carlo, by tilt decomposition, and by exact model formulas.
//! - [`equivalence`]: statistical verification of spectral equivalence,
//!   stationarity criteria, and zonoid / max-zonoid equivalence.
//! - [`fixtures`]: the shipped model fixtures used by the verification
//!   and acceptance suites.

pub mod core;
pub mod equivalence;
pub mod fidi;
pub mod fixtures;
pub mod gaussian;
pub mod simulate;
pub mod spectral;

pub use crate::core::{
    EstimateWithError, LocationSet, ModelSpec, NormSpec, RngStream, SampleMatrix, ThresholdMatrix,
};
