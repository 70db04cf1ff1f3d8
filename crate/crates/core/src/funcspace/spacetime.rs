use super::gausspoly::GaussPoly;
use crate::error::{check_dim, invalid, Result};
use crate::model::ModelSpec;

/// Test function u(X, t) on ℝ^{N+1}.
///
/// `Stationary(f)` is u(X, t) = f(X). `Joint(g)` is a polynomial×Gaussian in
/// the N + 1 variables (X, t), with t last.
#[derive(Debug, Clone, PartialEq)]
pub enum SpaceTimeGaussPoly {
    Stationary(GaussPoly),
    Joint(GaussPoly),
}

impl SpaceTimeGaussPoly {
    pub fn stationary(f: GaussPoly) -> Self {
        Self::Stationary(f)
    }

    /// u(X, t) = f(X)·h(t) for a one-variable h.
    pub fn from_tensor(f: &GaussPoly, h: &GaussPoly) -> Result<Self> {
        check_dim(1, h.dim())?;
        Ok(Self::Joint(f.tensor(h)?))
    }

    pub fn joint(g: GaussPoly) -> Result<Self> {
        if g.dim() < 2 {
            return invalid("a space-time function needs at least two variables");
        }
        Ok(Self::Joint(g))
    }

    pub fn space_dim(&self) -> usize {
        match self {
            Self::Stationary(f) => f.dim(),
            Self::Joint(g) => g.dim() - 1,
        }
    }

    pub fn eval(&self, x: &[f64], t: f64) -> Result<f64> {
        match self {
            Self::Stationary(f) => f.eval(x),
            Self::Joint(g) => {
                check_dim(g.dim() - 1, x.len())?;
                let mut xt = x.to_vec();
                xt.push(t);
                g.eval(&xt)
            }
        }
    }

    /// The spatial function Y ↦ u(Y, t).
    pub fn slice(&self, t: f64) -> Result<GaussPoly> {
        match self {
            Self::Stationary(f) => Ok(f.clone()),
            Self::Joint(g) => g.slice_last(t),
        }
    }

    /// (X, t) ↦ u(X, t − τ).
    pub fn time_shift(&self, tau: f64) -> Result<Self> {
        match self {
            Self::Stationary(_) => Ok(self.clone()),
            Self::Joint(g) => {
                let mut v = vec![0.0; g.dim()];
                v[g.dim() - 1] = tau;
                Ok(Self::Joint(g.translate(&v)?))
            }
        }
    }

    /// 𝒦u = 𝒜u − ∂_t u, exact.
    pub fn apply_k(&self, model: &ModelSpec) -> Result<Self> {
        match self {
            Self::Stationary(f) => Ok(Self::Stationary(f.apply_a(model)?)),
            Self::Joint(g) => Ok(Self::Joint(g.apply_k_joint(model)?)),
        }
    }
}
