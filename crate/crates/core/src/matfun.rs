//! Dense small-matrix kernels: exponential, Cholesky with log-determinant,
//! and the Kalman rank of the diffusion/drift pair.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::model::ModelSpec;

pub type SquareMatrix = DMatrix<f64>;

/// Relative cutoff applied to the pivots of the column-pivoted factorization.
pub const RANK_THRESHOLD: f64 = 1e-10;

/// Relative pivot floor for [`chol_logdet`].
pub const PIVOT_THRESHOLD: f64 = 1e-14;

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [17_297_280.0, 8_648_640.0, 1_995_840.0, 277_200.0, 25_200.0, 1512.0, 56.0, 1.0];
const PADE9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];
const THETA: [f64; 5] = [
    1.495_585_217_958_292e-2,
    2.539_398_330_063_23e-1,
    9.504_178_996_162_932e-1,
    2.097_847_961_257_068,
    5.371_920_351_148_152,
];

pub fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

fn pade_low(a: &DMatrix<f64>, b: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let a2 = a * a;
    let mut even = DMatrix::identity(n, n) * b[0];
    let mut odd = DMatrix::identity(n, n) * b[1];
    let mut power = DMatrix::identity(n, n);
    for k in 1..b.len() / 2 {
        power = &power * &a2;
        even += &power * b[2 * k];
        odd += &power * b[2 * k + 1];
    }
    (a * odd, even)
}

fn pade13(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let b = &PADE13;
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]) + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1];
    let u = a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]) + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    (u, v)
}

/// exp(tA) by scaling and squaring with a diagonal Padé approximant
/// (degree 3, 5, 7, 9 or 13, chosen from the 1-norm of tA).
pub fn mat_exp(a: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return invalid("mat_exp requires a square matrix");
    }
    if a.iter().any(|v| !v.is_finite()) || !t.is_finite() {
        return invalid("mat_exp requires finite input");
    }
    let a = a * t;
    let norm = norm1(&a);
    let (u, v, squarings) = if norm <= THETA[0] {
        let (u, v) = pade_low(&a, &PADE3);
        (u, v, 0)
    } else if norm <= THETA[1] {
        let (u, v) = pade_low(&a, &PADE5);
        (u, v, 0)
    } else if norm <= THETA[2] {
        let (u, v) = pade_low(&a, &PADE7);
        (u, v, 0)
    } else if norm <= THETA[3] {
        let (u, v) = pade_low(&a, &PADE9);
        (u, v, 0)
    } else {
        let s = (norm / THETA[4]).log2().ceil().max(0.0) as i32;
        if s > 1000 {
            return Err(Error::Overflow(format!("matrix exponential of norm {norm:e}")));
        }
        let scaled = &a * 2f64.powi(-s);
        let (u, v) = pade13(&scaled);
        (u, v, s)
    };
    let denom = &v - &u;
    let numer = &v + &u;
    let mut result = denom.lu().solve(&numer).ok_or_else(|| Error::Overflow("singular Padé denominator".into()))?;
    for _ in 0..squarings {
        result = &result * &result;
    }
    if result.iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow(format!("matrix exponential of norm {norm:e}")));
    }
    Ok(result)
}

/// Cholesky factorization of a symmetric positive-definite matrix.
///
/// The matrix is first equilibrated by its diagonal, M = D S D, and S is
/// factored; pivots of S at or below `PIVOT_THRESHOLD·‖S‖_F` are rejected.
/// Equilibration keeps the factor accurate for the strongly anisotropic
/// Gramians of degenerate models, whose diagonal spans many decades.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdFactor {
    matrix: DMatrix<f64>,
    scale: DVector<f64>,
    lower_scaled: DMatrix<f64>,
    log_det: f64,
}

pub fn chol_logdet(m: &DMatrix<f64>) -> Result<SpdFactor> {
    SpdFactor::new(m)
}

impl SpdFactor {
    pub fn new(m: &DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return invalid("Cholesky requires a square matrix");
        }
        let n = m.nrows();
        let max_abs = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if m.iter().any(|v| !v.is_finite()) {
            return invalid("Cholesky requires finite entries");
        }
        for i in 0..n {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-10 * max_abs.max(f64::MIN_POSITIVE) {
                    return invalid(format!("matrix is not symmetric at ({i}, {j})"));
                }
            }
        }
        let mut scale = DVector::zeros(n);
        for i in 0..n {
            let d = m[(i, i)];
            if !(d > 0.0) {
                return Err(Error::NotPositiveDefinite { index: i, pivot: d, threshold: 0.0 });
            }
            scale[i] = d.sqrt();
        }
        let mut s = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                s[(i, j)] = 0.5 * (m[(i, j)] + m[(j, i)]) / (scale[i] * scale[j]);
            }
        }
        let threshold = PIVOT_THRESHOLD * s.norm();
        let mut l = DMatrix::zeros(n, n);
        let mut log_det = 0.0;
        for j in 0..n {
            let mut pivot = s[(j, j)];
            for k in 0..j {
                pivot -= l[(j, k)] * l[(j, k)];
            }
            if !(pivot > threshold) {
                return Err(Error::NotPositiveDefinite { index: j, pivot, threshold });
            }
            let ljj = pivot.sqrt();
            l[(j, j)] = ljj;
            log_det += 2.0 * ljj.ln() + 2.0 * scale[j].ln();
            for i in (j + 1)..n {
                let mut v = s[(i, j)];
                for k in 0..j {
                    v -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = v / ljj;
            }
        }
        Ok(Self { matrix: m.clone(), scale, lower_scaled: l, log_det })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn dim(&self) -> usize {
        self.scale.len()
    }

    /// Lower factor L with L Lᵀ = M.
    pub fn lower(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.scale) * &self.lower_scaled
    }

    fn forward(&self, b: &mut [f64]) {
        let n = self.dim();
        let l = &self.lower_scaled;
        for i in 0..n {
            let mut v = b[i] / self.scale[i];
            for k in 0..i {
                v -= l[(i, k)] * b[k];
            }
            b[i] = v / l[(i, i)];
        }
    }

    fn backward(&self, b: &mut [f64]) {
        let n = self.dim();
        let l = &self.lower_scaled;
        for i in (0..n).rev() {
            let mut v = b[i];
            for k in (i + 1)..n {
                v -= l[(k, i)] * b[k];
            }
            b[i] = v / l[(i, i)];
        }
        for i in 0..n {
            b[i] /= self.scale[i];
        }
    }

    /// M⁻¹ b.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.as_slice().to_vec();
        self.forward(&mut x);
        self.backward(&mut x);
        DVector::from_vec(x)
    }

    pub fn solve_complex(&self, b: &[Complex64]) -> Vec<Complex64> {
        let mut re: Vec<f64> = b.iter().map(|z| z.re).collect();
        let mut im: Vec<f64> = b.iter().map(|z| z.im).collect();
        self.forward(&mut re);
        self.backward(&mut re);
        self.forward(&mut im);
        self.backward(&mut im);
        re.into_iter().zip(im).map(|(r, i)| Complex64::new(r, i)).collect()
    }

    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(b.nrows(), b.ncols());
        for j in 0..b.ncols() {
            let col = self.solve(&b.column(j).into_owned());
            out.set_column(j, &col);
        }
        out
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.dim();
        symmetrize(&self.solve_matrix(&DMatrix::identity(n, n)))
    }

    /// ⟨M⁻¹ v, v⟩ computed as |L⁻¹ v|².
    pub fn inv_quad_form(&self, v: &DVector<f64>) -> f64 {
        let mut x = v.as_slice().to_vec();
        self.forward(&mut x);
        x.iter().map(|y| y * y).sum()
    }

    /// Bilinear ⟨M⁻¹ v, v⟩ for a complex vector (no conjugation).
    pub fn inv_bilinear_complex(&self, v: &[Complex64]) -> Complex64 {
        let x = self.solve_complex(v);
        x.iter().zip(v).map(|(a, b)| a * b).sum()
    }
}

/// Symmetric square root of a positive-semidefinite matrix; eigenvalues
/// below zero are clipped.
pub fn psd_sqrt(q: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = symmetrize(q).symmetric_eigen();
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// Rank of [Q^{1/2} | B Q^{1/2} | … | B^{N−1} Q^{1/2}] by column-pivoted QR.
pub fn kalman_rank(model: &ModelSpec) -> usize {
    let n = model.dim();
    let root = psd_sqrt(model.q());
    let mut block = DMatrix::zeros(n, n * n);
    let mut power = root;
    for k in 0..n {
        block.view_mut((0, k * n), (n, n)).copy_from(&power);
        power = model.b() * power;
    }
    let largest = block.column_iter().map(|c| c.norm()).fold(0.0f64, f64::max);
    if largest == 0.0 {
        return 0;
    }
    let r = block.col_piv_qr().r();
    let cutoff = RANK_THRESHOLD * largest;
    (0..n.min(r.ncols())).filter(|&i| r[(i, i)].abs() > cutoff).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let z = DMatrix::zeros(3, 3);
        assert_eq!(mat_exp(&z, 2.5).unwrap(), DMatrix::identity(3, 3));
    }

    #[test]
    fn exp_of_nilpotent_terminates() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
        for &t in &[0.01, 1.0, 7.5, 300.0] {
            let e = mat_exp(&a, t).unwrap();
            let expected = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, t, 1.0]);
            assert!(max_diff(&e, &expected) <= 1e-13 * t.max(1.0), "t={t}");
        }
    }

    #[test]
    fn exp_of_minus_identity() {
        let a = -DMatrix::<f64>::identity(3, 3);
        let e = mat_exp(&a, 1.0).unwrap();
        assert!(max_diff(&e, &(DMatrix::identity(3, 3) * (-1.0f64).exp())) < 1e-15);
    }

    #[test]
    fn exp_rotation() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let t = 20.0;
        let e = mat_exp(&a, t).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
        assert!(max_diff(&e, &expected) < 1e-12);
    }

    #[test]
    fn exp_overflow_detected() {
        let a = DMatrix::from_row_slice(1, 1, &[1.0]);
        assert!(matches!(mat_exp(&a, 1e4), Err(Error::Overflow(_))));
    }

    #[test]
    fn cholesky_identity() {
        let f = chol_logdet(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(f.lower(), DMatrix::identity(3, 3));
        assert_eq!(f.log_det(), 0.0);
    }

    #[test]
    fn cholesky_kolmogorov_gramian() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -0.5, -0.5, 1.0 / 3.0]);
        let f = chol_logdet(&m).unwrap();
        assert!((f.log_det() - (1.0f64 / 12.0).ln()).abs() < 1e-14);
        let l = f.lower();
        assert!(max_diff(&(&l * l.transpose()), &m) < 1e-15);
    }

    #[test]
    fn cholesky_rejects_singular() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(chol_logdet(&m), Err(Error::NotPositiveDefinite { index: 1, .. })));
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(chol_logdet(&m), Err(Error::NotPositiveDefinite { .. })));
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(chol_logdet(&m), Err(Error::Invalid(_))));
    }

    #[test]
    fn cholesky_anisotropic_solve() {
        // Kolmogorov C(t) at t = 1e-4: entries span twelve decades
        let t = 1e-4f64;
        let m = DMatrix::from_row_slice(2, 2, &[t, -t * t / 2.0, -t * t / 2.0, t.powi(3) / 3.0]);
        let f = chol_logdet(&m).unwrap();
        assert!((f.log_det() - (t.powi(4) / 12.0).ln()).abs() < 1e-12);
        let x = DVector::from_vec(vec![0.3, -1.7]);
        let b = &m * &x;
        let y = f.solve(&b);
        assert!((&y - &x).norm() < 1e-9 * x.norm());
    }

    #[test]
    fn kalman_examples() {
        let heat = ModelSpec::heat(2);
        assert_eq!(kalman_rank(&heat), 2);
        let kol = ModelSpec::kolmogorov(1);
        assert_eq!(kalman_rank(&kol), 2);
        let degenerate =
            ModelSpec::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]), DMatrix::zeros(2, 2)).unwrap();
        assert_eq!(kalman_rank(&degenerate), 1);
        let zero = ModelSpec::new(DMatrix::zeros(2, 2), DMatrix::identity(2, 2)).unwrap();
        assert_eq!(kalman_rank(&zero), 0);
        assert_eq!(kalman_rank(&ModelSpec::kolmogorov(2)), 4);
    }
}
