//! Polynomial×Gaussian test functions, closed under 𝒜, 𝒦 and the Fourier
//! transform, so that every quadrature path has an exact reference.

mod gausspoly;
mod poly;
mod spacetime;

pub use gausspoly::{GaussPoly, GaussPolyJson, TermJson, DEFAULT_DEGREE_CAP, IMAG_TOLERANCE};
pub use poly::Poly;
pub use spacetime::SpaceTimeGaussPoly;

use crate::error::Result;
use crate::model::ModelSpec;

pub fn apply_a_exact(f: &GaussPoly, model: &ModelSpec) -> Result<GaussPoly> {
    f.apply_a(model)
}

pub fn apply_k_exact(u: &SpaceTimeGaussPoly, model: &ModelSpec) -> Result<SpaceTimeGaussPoly> {
    u.apply_k(model)
}

pub fn fourier_exact(f: &GaussPoly) -> Result<GaussPoly> {
    f.fourier()
}
