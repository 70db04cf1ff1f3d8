//! Numerics for hypoelliptic operators 𝒜u = tr(Q∇²u) + ⟨BX, ∇u⟩ and
//! 𝒦 = 𝒜 − ∂_t: Hörmander's Gaussian kernel, the semigroups Pₜ and P^𝒦_τ,
//! the fractional powers (−𝒜)ˢ, (−𝒦)ˢ and their extension problems.
//!
//! Test functions are polynomial×Gaussian ([`GaussPoly`]), a class closed
//! under 𝒜, Pₜ and the Fourier transform, so most quantities have an exact
//! counterpart to check the quadratures against.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod covariance;
pub mod error;
pub mod extension;
pub mod fractional;
pub mod funcspace;
pub mod kernels;
pub mod matfun;
pub mod model;
pub mod quadrature;
pub mod semigroup;
pub mod special;

pub use covariance::{gramian_c, gramian_k, hypo_report, lyapunov_residual, GramianPair, HypoReport};
pub use error::{Error, Result};
pub use extension::{dtn_k, extend_a, extend_k, pde_residual, Dtn, ExtensionField, Sweep};
pub use fractional::{frac_a, frac_heat_oracle, frac_k, Balakrishnan};
pub use funcspace::{GaussPoly, GaussPolyJson, Poly, SpaceTimeGaussPoly};
pub use kernels::{
    bessel_heat_kernel, hormander_kernel, poisson_space_kernel, poisson_time_kernel, FractionalParams, KernelForm,
};
pub use matfun::{chol_logdet, kalman_rank, mat_exp, SpdFactor, SquareMatrix};
pub use model::ModelSpec;
pub use num_complex::Complex64;
pub use quadrature::QuadratureConfig;
pub use semigroup::{apply_pk, apply_pt, resolvent_apply, Increment};
