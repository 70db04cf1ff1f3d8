use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Coefficients (Q, B) of 𝒜u = tr(Q∇²u) + ⟨BX, ∇u⟩.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelJson", into = "ModelJson")]
pub struct ModelSpec {
    q: DMatrix<f64>,
    b: DMatrix<f64>,
    trace_b: f64,
}

/// Row-major JSON form of a [`ModelSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelJson {
    pub q: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 {
        return invalid("matrix has no rows");
    }
    let m = rows[0].len();
    if rows.iter().any(|r| r.len() != m) {
        return invalid("matrix rows have unequal lengths");
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(a: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect()).collect()
}

impl TryFrom<ModelJson> for ModelSpec {
    type Error = Error;
    fn try_from(m: ModelJson) -> Result<Self> {
        ModelSpec::new(matrix_from_rows(&m.q)?, matrix_from_rows(&m.b)?)
    }
}

impl From<ModelSpec> for ModelJson {
    fn from(m: ModelSpec) -> Self {
        ModelJson { q: matrix_to_rows(&m.q), b: matrix_to_rows(&m.b) }
    }
}

impl ModelSpec {
    pub fn new(q: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        let n = q.nrows();
        if n == 0 || !q.is_square() {
            return invalid("Q must be a nonempty square matrix");
        }
        if b.shape() != (n, n) {
            return invalid(format!("B must be {n}x{n}, got {}x{}", b.nrows(), b.ncols()));
        }
        if q.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return invalid("model coefficients must be finite");
        }
        for i in 0..n {
            for j in 0..i {
                if (q[(i, j)] - q[(j, i)]).abs() > 1e-12 {
                    return invalid(format!("Q is not symmetric at ({i}, {j})"));
                }
            }
        }
        let q = crate::matfun::symmetrize(&q);
        let min_eig = q.clone().symmetric_eigen().eigenvalues.min();
        if min_eig < -1e-12 {
            return invalid(format!("Q is not positive semidefinite (eigenvalue {min_eig:e})"));
        }
        let trace_b = b.trace();
        Ok(Self { q, b, trace_b })
    }

    /// Q = I, B = 0.
    pub fn heat(n: usize) -> Self {
        Self::new(DMatrix::identity(n, n), DMatrix::zeros(n, n)).expect("heat model is valid")
    }

    /// N = 2n with Q = diag(I_n, 0) and B = [[0, 0], [I_n, 0]].
    pub fn kolmogorov(n: usize) -> Self {
        let mut q = DMatrix::zeros(2 * n, 2 * n);
        let mut b = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            q[(i, i)] = 1.0;
            b[(n + i, i)] = 1.0;
        }
        Self::new(q, b).expect("Kolmogorov model is valid")
    }

    /// Q = I, B = −I.
    pub fn ornstein_uhlenbeck(n: usize) -> Self {
        Self::new(DMatrix::identity(n, n), -DMatrix::<f64>::identity(n, n)).expect("Ornstein-Uhlenbeck model is valid")
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn trace_b(&self) -> f64 {
        self.trace_b
    }

    /// Model on ℝ^{N+1} whose last coordinate carries no diffusion or drift.
    pub fn extended(&self) -> Self {
        let n = self.dim();
        let mut q = DMatrix::zeros(n + 1, n + 1);
        let mut b = DMatrix::zeros(n + 1, n + 1);
        q.view_mut((0, 0), (n, n)).copy_from(&self.q);
        b.view_mut((0, 0), (n, n)).copy_from(&self.b);
        Self { q, b, trace_b: self.trace_b }
    }
}
