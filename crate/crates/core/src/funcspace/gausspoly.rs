use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::poly::Poly;
use crate::error::{check_dim, invalid, Error, Result};
use crate::matfun::{symmetrize, SpdFactor};
use crate::model::{matrix_from_rows, matrix_to_rows, ModelSpec};

pub const DEFAULT_DEGREE_CAP: usize = 16;

/// Imaginary residue, relative to the evaluation's magnitude bound, that is
/// truncated when a real value is requested.
pub const IMAG_TOLERANCE: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// f(X) = amplitude · p(X − c) · exp(−⟨M(X − c), X − c⟩) with M real SPD.
///
/// The center c, amplitude and coefficients of p may be complex; the
/// quadratic form is the bilinear (unconjugated) one, so the class is closed
/// under the Fourier transform. Functions built from real data stay real.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussPoly {
    center: Vec<Complex64>,
    shape: DMatrix<f64>,
    amplitude: Complex64,
    poly: Poly,
    degree_cap: usize,
}

fn solve_complex(m: &DMatrix<f64>, b: &[Complex64]) -> Result<Vec<Complex64>> {
    let lu = m.clone().lu();
    let re_b = nalgebra::DVector::from_iterator(b.len(), b.iter().map(|z| z.re));
    let im_b = nalgebra::DVector::from_iterator(b.len(), b.iter().map(|z| z.im));
    let (Some(x), Some(y)) = (lu.solve(&re_b), lu.solve(&im_b)) else {
        return invalid("singular linear map");
    };
    Ok(x.iter().zip(y.iter()).map(|(a, b)| Complex64::new(*a, *b)).collect())
}

fn mat_vec(m: &DMatrix<f64>, v: &[Complex64]) -> Vec<Complex64> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| v[j] * m[(i, j)]).sum()).collect()
}

fn bilinear(m: &DMatrix<f64>, u: &[Complex64], v: &[Complex64]) -> Complex64 {
    mat_vec(m, v).iter().zip(u).map(|(a, b)| a * b).sum()
}

impl GaussPoly {
    pub fn new(center: Vec<f64>, shape: DMatrix<f64>, amplitude: f64, poly: Poly) -> Result<Self> {
        Self::new_complex(center.into_iter().map(re).collect(), shape, re(amplitude), poly)
    }

    pub fn new_complex(center: Vec<Complex64>, shape: DMatrix<f64>, amplitude: Complex64, poly: Poly) -> Result<Self> {
        let n = center.len();
        if n == 0 {
            return invalid("GaussPoly needs at least one variable");
        }
        check_dim(n, shape.nrows())?;
        check_dim(n, shape.ncols())?;
        check_dim(n, poly.nvars())?;
        for i in 0..n {
            for j in 0..i {
                if (shape[(i, j)] - shape[(j, i)]).abs() > 1e-12 {
                    return invalid(format!("shape is not symmetric at ({i}, {j})"));
                }
            }
        }
        let shape = symmetrize(&shape);
        SpdFactor::new(&shape)?;
        if !poly.all_finite()
            || !amplitude.re.is_finite()
            || !amplitude.im.is_finite()
            || center.iter().any(|c| !c.re.is_finite() || !c.im.is_finite())
        {
            return invalid("GaussPoly data must be finite");
        }
        let out = Self { center, shape, amplitude, poly, degree_cap: DEFAULT_DEGREE_CAP };
        out.check_cap(out.poly.degree())?;
        Ok(out)
    }

    /// exp(−⟨M(X − c), X − c⟩).
    pub fn gaussian(center: Vec<f64>, shape: DMatrix<f64>) -> Result<Self> {
        let n = center.len();
        Self::new(center, shape, 1.0, Poly::one(n))
    }

    /// exp(−α|X − c|²).
    pub fn isotropic(center: Vec<f64>, alpha: f64) -> Result<Self> {
        let n = center.len();
        Self::gaussian(center, DMatrix::identity(n, n) * alpha)
    }

    /// Same function with a different polynomial (expressed in X − c).
    pub fn with_poly(&self, poly: Poly) -> Result<Self> {
        check_dim(self.dim(), poly.nvars())?;
        self.check_cap(poly.degree())?;
        Ok(Self { poly, ..self.clone() })
    }

    pub fn with_degree_cap(mut self, cap: usize) -> Result<Self> {
        self.degree_cap = cap;
        self.check_cap(self.poly.degree())?;
        Ok(self)
    }

    fn check_cap(&self, degree: usize) -> Result<()> {
        if degree > self.degree_cap {
            return Err(Error::DegreeCap { degree, cap: self.degree_cap });
        }
        Ok(())
    }

    fn rebuild(&self, center: Vec<Complex64>, shape: DMatrix<f64>, amplitude: Complex64, poly: Poly) -> Result<Self> {
        let out = Self { center, shape: symmetrize(&shape), amplitude, poly, degree_cap: self.degree_cap };
        out.check_cap(out.poly.degree())?;
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[Complex64] {
        &self.center
    }

    pub fn shape(&self) -> &DMatrix<f64> {
        &self.shape
    }

    pub fn amplitude(&self) -> Complex64 {
        self.amplitude
    }

    pub fn poly(&self) -> &Poly {
        &self.poly
    }

    pub fn degree(&self) -> usize {
        self.poly.degree()
    }

    pub fn degree_cap(&self) -> usize {
        self.degree_cap
    }

    /// True when the polynomial factor is a constant.
    pub fn is_pure_gaussian(&self) -> bool {
        self.poly.degree() == 0
    }

    /// Real center, if the imaginary parts vanish.
    pub fn real_center(&self) -> Option<Vec<f64>> {
        self.center.iter().all(|c| c.im == 0.0).then(|| self.center.iter().map(|c| c.re).collect())
    }

    /// Value and the roundoff scale |amp|·Σ|c_α y^α|·|e^{−q}|.
    pub fn eval_with_bound(&self, x: &[f64]) -> (Complex64, f64) {
        let y: Vec<Complex64> = x.iter().zip(&self.center).map(|(xi, ci)| re(*xi) - ci).collect();
        let q = bilinear(&self.shape, &y, &y);
        let g = (-q).exp();
        let (p, bound) = self.poly.eval_with_bound(&y);
        let v = self.amplitude * p * g;
        (v, self.amplitude.norm() * bound * g.norm())
    }

    pub fn eval_complex(&self, x: &[f64]) -> Complex64 {
        self.eval_with_bound(x).0
    }

    /// Real value; an imaginary part above the roundoff scale is an error.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        let (v, bound) = self.eval_with_bound(x);
        if v.im.abs() > IMAG_TOLERANCE * bound.max(f64::MIN_POSITIVE) {
            return Err(Error::NonReal(v.im));
        }
        Ok(v.re)
    }

    /// Upper bound on sup|f| from sup r^k e^{−λr²} = (k/2eλ)^{k/2}, λ = λ_min(M).
    pub fn sup_bound(&self) -> f64 {
        let lambda = self.shape.clone().symmetric_eigen().eigenvalues.min();
        let b: Vec<Complex64> = self.center.iter().map(|c| re(c.im)).collect();
        let b_norm = b.iter().map(|v| v.re * v.re).sum::<f64>().sqrt();
        let growth = bilinear(&self.shape, &b, &b).re.exp();
        let mut total = 0.0;
        for (e, c) in self.poly.terms() {
            let k: i32 = e.iter().map(|&v| i32::from(v)).sum();
            let term = if k == 0 {
                1.0
            } else {
                let kf = f64::from(k);
                2f64.powi(k - 1) * ((kf / (2.0 * std::f64::consts::E * lambda)).powf(0.5 * kf) + b_norm.powi(k))
            };
            total += c.norm() * term;
        }
        self.amplitude.norm() * growth * total
    }

    /// Polynomial of ∂_i f, i.e. ∂_i p − 2(My)_i p.
    fn d_poly(&self, p: &Poly, i: usize) -> Poly {
        let row: Vec<Complex64> = (0..self.dim()).map(|j| re(self.shape[(i, j)])).collect();
        let my = Poly::linear(&row, ZERO);
        p.partial(i).sub(&my.mul(p).scale(re(2.0)))
    }

    pub fn partial(&self, i: usize) -> Result<Self> {
        if i >= self.dim() {
            return invalid(format!("partial index {i} out of range"));
        }
        self.with_poly(self.d_poly(&self.poly, i))
    }

    /// Polynomial of tr(Q∇²f) + ⟨BX, ∇f⟩ for coefficients acting on the
    /// leading block of variables.
    fn generator_poly(&self, q: &DMatrix<f64>, b: &DMatrix<f64>) -> Poly {
        let n = self.dim();
        let k = q.nrows();
        let grads: Vec<Poly> = (0..k).map(|i| self.d_poly(&self.poly, i)).collect();
        let mut out = Poly::zero(n);
        for i in 0..k {
            for j in 0..k {
                if q[(i, j)] != 0.0 {
                    out = out.add(&self.d_poly(&grads[j], i).scale(re(q[(i, j)])));
                }
            }
            let mut row = vec![ZERO; n];
            let mut offset = ZERO;
            for j in 0..k {
                row[j] = re(b[(i, j)]);
                offset += self.center[j] * b[(i, j)];
            }
            if row.iter().any(|c| c.norm() != 0.0) {
                out = out.add(&Poly::linear(&row, offset).mul(&grads[i]));
            }
        }
        out
    }

    /// 𝒜f = tr(Q∇²f) + ⟨BX, ∇f⟩, exact; same center and shape.
    pub fn apply_a(&self, model: &ModelSpec) -> Result<Self> {
        check_dim(self.dim(), model.dim())?;
        self.with_poly(self.generator_poly(model.q(), model.b()))
    }

    /// 𝒦u = 𝒜u − ∂_t u where the last variable is t.
    pub(crate) fn apply_k_joint(&self, model: &ModelSpec) -> Result<Self> {
        check_dim(self.dim(), model.dim() + 1)?;
        let t = self.dim() - 1;
        let p = self.generator_poly(model.q(), model.b()).sub(&self.d_poly(&self.poly, t));
        self.with_poly(p)
    }

    fn same_gaussian(&self, other: &Self) -> Result<()> {
        if self.center != other.center || self.shape != other.shape {
            return invalid("linear combination requires identical center and shape");
        }
        Ok(())
    }

    /// α f + β g for f, g sharing center and shape.
    pub fn lin_comb(&self, alpha: Complex64, other: &Self, beta: Complex64) -> Result<Self> {
        self.same_gaussian(other)?;
        let p = self.poly.scale(alpha * self.amplitude).add(&other.poly.scale(beta * other.amplitude));
        self.rebuild(self.center.clone(), self.shape.clone(), ONE, p)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.lin_comb(ONE, other, ONE)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.lin_comb(ONE, other, -ONE)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self { amplitude: self.amplitude * s, ..self.clone() }
    }

    /// Amplitude folded into the polynomial.
    pub fn normalized(&self) -> Self {
        Self { amplitude: ONE, poly: self.poly.scale(self.amplitude), ..self.clone() }
    }

    /// X ↦ f(−X).
    pub fn reflect(&self) -> Self {
        let n = self.dim();
        let minus: Vec<Vec<Complex64>> =
            (0..n).map(|i| (0..n).map(|j| if i == j { -ONE } else { ZERO }).collect()).collect();
        Self {
            center: self.center.iter().map(|c| -c).collect(),
            poly: self.poly.compose_affine(&minus, &vec![ZERO; n]),
            ..self.clone()
        }
    }

    /// Pointwise complex conjugate.
    pub fn conj(&self) -> Self {
        Self {
            center: self.center.iter().map(|c| c.conj()).collect(),
            amplitude: self.amplitude.conj(),
            poly: self.poly.conj(),
            ..self.clone()
        }
    }

    /// X ↦ f(X − v).
    pub fn translate(&self, v: &[f64]) -> Result<Self> {
        check_dim(self.dim(), v.len())?;
        Ok(Self { center: self.center.iter().zip(v).map(|(c, vi)| c + vi).collect(), ..self.clone() })
    }

    /// X ↦ f(AX) for invertible A.
    pub fn compose_linear(&self, a: &DMatrix<f64>) -> Result<Self> {
        let n = self.dim();
        check_dim(n, a.nrows())?;
        check_dim(n, a.ncols())?;
        let center = solve_complex(a, &self.center)?;
        let shape = a.transpose() * &self.shape * a;
        SpdFactor::new(&symmetrize(&shape))?;
        let rows: Vec<Vec<Complex64>> = (0..n).map(|i| (0..n).map(|j| re(a[(i, j)])).collect()).collect();
        let poly = self.poly.compose_affine(&rows, &vec![ZERO; n]);
        self.rebuild(center, shape, self.amplitude, poly)
    }

    fn product_parts(
        &self,
        center2: &[Complex64],
        shape2: &DMatrix<f64>,
        amplitude2: Complex64,
        poly2: &Poly,
    ) -> Result<Self> {
        let shape = &self.shape + shape2;
        let factor = SpdFactor::new(&symmetrize(&shape))?;
        let mut rhs = mat_vec(&self.shape, &self.center);
        for (r, v) in rhs.iter_mut().zip(mat_vec(shape2, center2)) {
            *r += v;
        }
        let center = factor.solve_complex(&rhs);
        let constant = bilinear(&self.shape, &self.center, &self.center) + bilinear(shape2, center2, center2)
            - bilinear(&shape, &center, &center);
        let d1: Vec<Complex64> = center.iter().zip(&self.center).map(|(c, c1)| c - c1).collect();
        let d2: Vec<Complex64> = center.iter().zip(center2).map(|(c, c2)| c - c2).collect();
        let poly = self.poly.shift(&d1).mul(&poly2.shift(&d2));
        let amplitude = self.amplitude * amplitude2 * (-constant).exp();
        self.rebuild(center, shape, amplitude, poly)
    }

    /// Pointwise product.
    pub fn product(&self, other: &Self) -> Result<Self> {
        check_dim(self.dim(), other.dim())?;
        self.product_parts(&other.center, &other.shape, other.amplitude, &other.poly)
    }

    /// Pointwise product with exp(−⟨PX, X⟩) for symmetric positive-semidefinite P.
    pub fn mul_gaussian(&self, p: &DMatrix<f64>) -> Result<Self> {
        let n = self.dim();
        check_dim(n, p.nrows())?;
        self.product_parts(&vec![ZERO; n], p, ONE, &Poly::one(n))
    }

    /// f̂(ξ) = ∫ f(X) e^{−2πi⟨X, ξ⟩} dX, exact.
    pub fn fourier(&self) -> Result<Self> {
        let n = self.dim();
        let factor = SpdFactor::new(&self.shape)?;
        let s = factor.inverse() * (PI * PI);
        // ∂^α of exp(−⟨Sξ, ξ⟩), as polynomials, built by recursion on α
        let mut derivs: BTreeMap<Vec<u16>, Poly> = BTreeMap::new();
        derivs.insert(vec![0; n], Poly::one(n));
        let d_s = |p: &Poly, i: usize| {
            let row: Vec<Complex64> = (0..n).map(|j| re(s[(i, j)])).collect();
            p.partial(i).sub(&Poly::linear(&row, ZERO).mul(p).scale(re(2.0)))
        };
        let mut q = Poly::zero(n);
        let unit = Complex64::new(0.0, 1.0 / (2.0 * PI));
        for (alpha, coeff) in self.poly.terms() {
            let mut current = vec![0u16; n];
            for i in 0..n {
                for _ in 0..alpha[i] {
                    let mut next = current.clone();
                    next[i] += 1;
                    if !derivs.contains_key(&next) {
                        let p = d_s(&derivs[&current], i);
                        derivs.insert(next.clone(), p);
                    }
                    current = next;
                }
            }
            let order: u32 = alpha.iter().map(|&k| u32::from(k)).sum();
            q = q.add(&derivs[alpha].scale(coeff * unit.powu(order)));
        }
        let mc = mat_vec(&self.shape, &self.center);
        let d: Vec<Complex64> = mc.iter().map(|v| v * Complex64::new(0.0, -1.0 / PI)).collect();
        let cmc: Complex64 = mc.iter().zip(&self.center).map(|(a, b)| a * b).sum();
        let amplitude = self.amplitude * re(PI.powf(0.5 * n as f64) * (-0.5 * factor.log_det()).exp()) * (-cmc).exp();
        self.rebuild(d.clone(), s, amplitude, q.shift(&d))
    }

    /// Inverse transform, f(X) = ∫ g(ξ) e^{2πi⟨X, ξ⟩} dξ.
    pub fn inverse_fourier(&self) -> Result<Self> {
        Ok(self.fourier()?.reflect())
    }

    /// ∫ f dX.
    pub fn integral(&self) -> Result<Complex64> {
        let n = self.dim();
        Ok(self.fourier()?.eval_complex(&vec![0.0; n]))
    }

    /// ∫ |f|² dX.
    pub fn l2_norm_sq(&self) -> Result<f64> {
        Ok(self.product(&self.conj())?.integral()?.re)
    }

    /// Restriction to last variable = `value`, a function of the first N − 1.
    pub fn slice_last(&self, value: f64) -> Result<Self> {
        let n = self.dim();
        if n < 2 {
            return invalid("cannot slice a one-variable function");
        }
        let k = n - 1;
        let m_xx = self.shape.view((0, 0), (k, k)).into_owned();
        let m_xt: Vec<Complex64> = (0..k).map(|i| re(self.shape[(i, k)])).collect();
        let m_tt = self.shape[(k, k)];
        let yt = re(value) - self.center[k];
        let factor = SpdFactor::new(&m_xx)?;
        let w = factor.solve_complex(&m_xt);
        let schur = re(m_tt) - w.iter().zip(&m_xt).map(|(a, b)| a * b).sum::<Complex64>();
        let offset: Vec<Complex64> = w.iter().map(|wi| wi * yt).collect();
        let center = self.center[..k].iter().zip(&offset).map(|(c, o)| c - o).collect();
        let minus: Vec<Complex64> = offset.iter().map(|o| -o).collect();
        let poly = self.poly.fix_last(yt).shift(&minus);
        let amplitude = self.amplitude * (-schur * yt * yt).exp();
        self.rebuild(center, m_xx, amplitude, poly)
    }

    /// Tensor product f(X)·h(s) as a function of (X, s).
    pub fn tensor(&self, h: &Self) -> Result<Self> {
        let n = self.dim();
        let m = h.dim();
        let mut shape = DMatrix::zeros(n + m, n + m);
        shape.view_mut((0, 0), (n, n)).copy_from(&self.shape);
        shape.view_mut((n, n), (m, m)).copy_from(&h.shape);
        let center = self.center.iter().chain(&h.center).copied().collect();
        let poly = self.poly.embed(n + m, 0).mul(&h.poly.embed(n + m, n));
        let out = Self {
            center,
            shape,
            amplitude: self.amplitude * h.amplitude,
            poly,
            degree_cap: self.degree_cap.max(h.degree_cap),
        };
        out.check_cap(out.degree())?;
        Ok(out)
    }

    pub fn to_json(&self) -> Result<GaussPolyJson> {
        let center =
            self.real_center().ok_or_else(|| Error::NonReal(self.center.iter().fold(0.0, |m, c| m.max(c.im.abs()))))?;
        let mut terms = Vec::new();
        for (e, c) in self.poly.terms() {
            let v = c * self.amplitude;
            if v.im != 0.0 {
                return Err(Error::NonReal(v.im));
            }
            terms.push(TermJson { powers: e.clone(), coeff: v.re });
        }
        Ok(GaussPolyJson { center, shape: matrix_to_rows(&self.shape), amplitude: 1.0, terms: Some(terms) })
    }
}

/// Real polynomial×Gaussian as read from configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussPolyJson {
    pub center: Vec<f64>,
    pub shape: Vec<Vec<f64>>,
    #[serde(default = "one")]
    pub amplitude: f64,
    /// Polynomial in X − center; omitted means the constant 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<Vec<TermJson>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermJson {
    pub powers: Vec<u16>,
    pub coeff: f64,
}

fn one() -> f64 {
    1.0
}

impl TryFrom<&GaussPolyJson> for GaussPoly {
    type Error = Error;
    fn try_from(j: &GaussPolyJson) -> Result<Self> {
        let n = j.center.len();
        let poly = match &j.terms {
            None => Poly::one(n),
            Some(terms) => Poly::from_terms(n, terms.iter().map(|t| (t.powers.clone(), re(t.coeff))))?,
        };
        GaussPoly::new(j.center.clone(), matrix_from_rows(&j.shape)?, j.amplitude, poly)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn laplacian_of_gaussian() {
        let f = GaussPoly::isotropic(vec![0.0], PI).unwrap();
        let af = f.apply_a(&ModelSpec::heat(1)).unwrap();
        assert!(close(af.eval(&[0.0]).unwrap(), -2.0 * PI, 1e-15));
        let x = 0.7;
        let expected = (4.0 * PI * PI * x * x - 2.0 * PI) * (-PI * x * x).exp();
        assert!(close(af.eval(&[x]).unwrap(), expected, 1e-14));
    }

    #[test]
    fn pure_drift() {
        // f = X e^{−X²}, Q = 0, B = 1: 𝒜f = X f′ = (X − 2X³) e^{−X²}
        let f = GaussPoly::new(vec![0.0], DMatrix::from_element(1, 1, 1.0), 1.0, Poly::var(1, 0)).unwrap();
        let model = ModelSpec::new(DMatrix::zeros(1, 1), DMatrix::from_element(1, 1, 1.0)).unwrap();
        let af = f.apply_a(&model).unwrap();
        assert!(close(af.eval(&[1.0]).unwrap(), -(-1.0f64).exp(), 1e-15));
    }

    #[test]
    fn kolmogorov_at_origin() {
        let f = GaussPoly::isotropic(vec![0.0, 0.0], 1.0).unwrap();
        let af = f.apply_a(&ModelSpec::kolmogorov(1)).unwrap();
        assert!(close(af.eval(&[0.0, 0.0]).unwrap(), -2.0, 1e-15));
    }

    #[test]
    fn fourier_examples() {
        let f = GaussPoly::isotropic(vec![0.0, 0.0], PI).unwrap();
        let g = f.fourier().unwrap();
        for xi in [[0.0, 0.0], [0.3, -1.2]] {
            let expected = (-PI * (xi[0] * xi[0] + xi[1] * xi[1])).exp();
            assert!(close(g.eval(&xi).unwrap(), expected, 1e-14));
        }
        // X e^{−πX²} ↦ −iξ e^{−πξ²}
        let f = GaussPoly::new(vec![0.0], DMatrix::from_element(1, 1, PI), 1.0, Poly::var(1, 0)).unwrap();
        let g = f.fourier().unwrap();
        let xi = 0.8;
        let v = g.eval_complex(&[xi]);
        assert!(v.re.abs() < 1e-15);
        assert!(close(v.im, -xi * (-PI * xi * xi).exp(), 1e-14));
    }

    #[test]
    fn fourier_of_shifted_gaussian() {
        // e^{−π(X−c)²} ↦ e^{−2πicξ} e^{−πξ²}
        let c = 0.6;
        let f = GaussPoly::isotropic(vec![c], PI).unwrap();
        let g = f.fourier().unwrap();
        let xi = -0.35;
        let expected = Complex64::new(0.0, -2.0 * PI * c * xi).exp() * (-PI * xi * xi).exp();
        assert!((g.eval_complex(&[xi]) - expected).norm() < 1e-14);
    }

    #[test]
    fn product_and_slice() {
        let f = GaussPoly::new(vec![0.3], DMatrix::from_element(1, 1, 0.7), 2.0, Poly::var(1, 0)).unwrap();
        let g = GaussPoly::isotropic(vec![-0.4], 1.3).unwrap();
        let fg = f.product(&g).unwrap();
        for x in [-1.0, 0.2, 0.9] {
            let expected = f.eval(&[x]).unwrap() * g.eval(&[x]).unwrap();
            assert!(close(fg.eval(&[x]).unwrap(), expected, 1e-13));
        }
        let shape = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 0.8]);
        let poly = Poly::var(2, 0).mul(&Poly::var(2, 1)).add(&Poly::one(2));
        let u = GaussPoly::new(vec![0.1, -0.2], shape, 1.5, poly).unwrap();
        let s = u.slice_last(0.45).unwrap();
        for x in [-0.5, 0.0, 1.1] {
            assert!(close(s.eval(&[x]).unwrap(), u.eval(&[x, 0.45]).unwrap(), 1e-13));
        }
    }

    #[test]
    fn integral_and_compose() {
        // ∫ e^{−X²} dX = √π, ∫ X² e^{−X²} dX = √π/2
        let f = GaussPoly::isotropic(vec![0.4], 1.0).unwrap();
        assert!(close(f.integral().unwrap().re, PI.sqrt(), 1e-14));
        let f = GaussPoly::new(vec![0.0], DMatrix::from_element(1, 1, 1.0), 1.0, Poly::var(1, 0).pow(2)).unwrap();
        assert!(close(f.integral().unwrap().re, 0.5 * PI.sqrt(), 1e-14));

        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 2.0]);
        let g =
            GaussPoly::new(vec![0.2, -0.1], DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.5]), 1.0, Poly::var(2, 1))
                .unwrap();
        let h = g.compose_linear(&a).unwrap();
        let x = [0.3, 0.7];
        let ax = [x[0], 0.5 * x[0] + 2.0 * x[1]];
        assert!(close(h.eval(&x).unwrap(), g.eval(&ax).unwrap(), 1e-14));
    }

    #[test]
    fn degree_cap_enforced() {
        let f = GaussPoly::new(vec![0.0], DMatrix::from_element(1, 1, 1.0), 1.0, Poly::var(1, 0).pow(16)).unwrap();
        assert!(matches!(f.apply_a(&ModelSpec::heat(1)), Err(Error::DegreeCap { degree: 18, cap: 16 })));
        let f = f.with_degree_cap(20).unwrap();
        assert_eq!(f.apply_a(&ModelSpec::heat(1)).unwrap().degree(), 18);
    }

    #[test]
    fn json_round_trip() {
        let json = r#"{"center":[0.5,0.0],"shape":[[1.0,0.0],[0.0,2.0]],"terms":[{"powers":[1,0],"coeff":3.0}]}"#;
        let parsed: GaussPolyJson = serde_json::from_str(json).unwrap();
        let f = GaussPoly::try_from(&parsed).unwrap();
        assert!(close(f.eval(&[1.5, 0.0]).unwrap(), 3.0 * (-1.0f64).exp(), 1e-15));
        assert_eq!(f.to_json().unwrap(), parsed);
        assert!(serde_json::from_str::<GaussPolyJson>(r#"{"center":[0],"shape":[[1]],"bogus":1}"#).is_err());
    }
}
