//! Inputs shared by the benchmarks.

use hypokernel::{GaussPoly, ModelSpec, SpaceTimeGaussPoly};

/// Kolmogorov models with n velocity–position blocks, N = 2n.
pub fn kolmogorov(n: usize) -> ModelSpec {
    ModelSpec::kolmogorov(n)
}

/// e^{−|X|²} in N variables.
pub fn unit_gaussian(dim: usize) -> GaussPoly {
    GaussPoly::isotropic(vec![0.0; dim], 1.0).expect("valid Gaussian")
}

/// e^{−|X|²}e^{−t²}.
pub fn space_time_gaussian(dim: usize) -> SpaceTimeGaussPoly {
    let time = GaussPoly::isotropic(vec![0.0], 1.0).expect("valid Gaussian");
    SpaceTimeGaussPoly::from_tensor(&unit_gaussian(dim), &time).expect("matching dimensions")
}
