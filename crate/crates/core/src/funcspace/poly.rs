use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{check_dim, Result};

type Exponent = Vec<u16>;

/// Sparse multivariate polynomial with complex coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Exponent, Complex64>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Self { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: Complex64) -> Self {
        Self::monomial(nvars, vec![0; nvars], c)
    }

    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, Complex64::new(1.0, 0.0))
    }

    pub fn monomial(nvars: usize, powers: Vec<u16>, c: Complex64) -> Self {
        assert_eq!(powers.len(), nvars, "exponent length must equal nvars");
        let mut p = Self::zero(nvars);
        p.add_term(powers, c);
        p
    }

    /// The coordinate polynomial y_i.
    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        Self::monomial(nvars, e, Complex64::new(1.0, 0.0))
    }

    /// Σ_j a_j y_j + b.
    pub fn linear(a: &[Complex64], b: Complex64) -> Self {
        let n = a.len();
        let mut p = Self::constant(n, b);
        for (j, &aj) in a.iter().enumerate() {
            let mut e = vec![0; n];
            e[j] = 1;
            p.add_term(e, aj);
        }
        p
    }

    pub fn from_terms(nvars: usize, terms: impl IntoIterator<Item = (Vec<u16>, Complex64)>) -> Result<Self> {
        let mut p = Self::zero(nvars);
        for (e, c) in terms {
            check_dim(nvars, e.len())?;
            p.add_term(e, c);
        }
        Ok(p)
    }

    pub fn add_term(&mut self, powers: Vec<u16>, c: Complex64) {
        if c == Complex64::new(0.0, 0.0) {
            return;
        }
        let entry = self.terms.entry(powers).or_insert(Complex64::new(0.0, 0.0));
        *entry += c;
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u16>, &Complex64)> {
        self.terms.iter()
    }

    pub fn coeff(&self, powers: &[u16]) -> Complex64 {
        self.terms.get(powers).copied().unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.values().all(|c| c.norm() == 0.0)
    }

    /// Total degree; 0 for the zero polynomial.
    pub fn degree(&self) -> usize {
        self.terms.keys().map(|e| e.iter().map(|&k| k as usize).sum()).max().unwrap_or(0)
    }

    pub fn all_finite(&self) -> bool {
        self.terms.values().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.norm()))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut p = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            p.add_term(e.clone(), c * s);
        }
        p
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.nvars, other.nvars);
        let mut p = self.clone();
        for (e, c) in &other.terms {
            p.add_term(e.clone(), *c);
        }
        p
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.nvars, other.nvars);
        let mut p = Self::zero(self.nvars);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let e: Vec<u16> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                p.add_term(e, c1 * c2);
            }
        }
        p
    }

    pub fn pow(&self, k: u16) -> Self {
        let mut out = Self::one(self.nvars);
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    pub fn partial(&self, i: usize) -> Self {
        let mut p = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[i] > 0 {
                let mut d = e.clone();
                d[i] -= 1;
                p.add_term(d, c * f64::from(e[i]));
            }
        }
        p
    }

    /// Value and the magnitude bound Σ|c_α||y^α| used to judge roundoff.
    pub fn eval_with_bound(&self, y: &[Complex64]) -> (Complex64, f64) {
        debug_assert_eq!(y.len(), self.nvars);
        let mut sum = Complex64::new(0.0, 0.0);
        let mut bound = 0.0;
        for (e, c) in &self.terms {
            let mut m = *c;
            for (yi, &k) in y.iter().zip(e) {
                if k > 0 {
                    m *= yi.powu(u32::from(k));
                }
            }
            sum += m;
            bound += m.norm();
        }
        (sum, bound)
    }

    pub fn eval(&self, y: &[Complex64]) -> Complex64 {
        self.eval_with_bound(y).0
    }

    /// q(x) = p(A x + d) for A of shape nvars × m.
    pub fn compose_affine(&self, a: &[Vec<Complex64>], d: &[Complex64]) -> Self {
        assert_eq!(a.len(), self.nvars);
        assert_eq!(d.len(), self.nvars);
        let m = a.first().map_or(0, |r| r.len());
        let forms: Vec<Poly> = a.iter().zip(d).map(|(row, &di)| Poly::linear(row, di)).collect();
        let mut powers: Vec<Vec<Poly>> = forms.iter().map(|f| vec![Poly::one(f.nvars), f.clone()]).collect();
        let mut out = Self::zero(m);
        for (e, c) in &self.terms {
            let mut term = Self::constant(m, *c);
            for (i, &k) in e.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                while powers[i].len() <= k as usize {
                    let next = powers[i].last().unwrap().mul(&forms[i]);
                    powers[i].push(next);
                }
                term = term.mul(&powers[i][k as usize]);
            }
            out = out.add(&term);
        }
        out
    }

    /// q(y) = p(y + d).
    pub fn shift(&self, d: &[Complex64]) -> Self {
        let n = self.nvars;
        let id: Vec<Vec<Complex64>> =
            (0..n).map(|i| (0..n).map(|j| Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0)).collect()).collect();
        self.compose_affine(&id, d)
    }

    /// Same polynomial viewed in `nvars` variables, old variable j becoming
    /// variable `offset + j`.
    pub fn embed(&self, nvars: usize, offset: usize) -> Self {
        assert!(offset + self.nvars <= nvars);
        let mut p = Self::zero(nvars);
        for (e, c) in &self.terms {
            let mut f = vec![0; nvars];
            f[offset..offset + self.nvars].copy_from_slice(e);
            p.add_term(f, *c);
        }
        p
    }

    /// Fix the last variable at `value`, leaving a polynomial in nvars − 1.
    pub fn fix_last(&self, value: Complex64) -> Self {
        let n = self.nvars - 1;
        let mut p = Self::zero(n);
        for (e, c) in &self.terms {
            p.add_term(e[..n].to_vec(), c * value.powu(u32::from(e[n])));
        }
        p
    }

    pub fn conj(&self) -> Self {
        let mut p = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            p.add_term(e.clone(), c.conj());
        }
        p
    }

    /// Drop terms with |c| ≤ tol.
    pub fn prune(&self, tol: f64) -> Self {
        let mut p = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            if c.norm() > tol {
                p.add_term(e.clone(), *c);
            }
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn arithmetic_and_eval() {
        // (y0 + 2 y1)(y0 − 1) at (3, 1) = 5 · 2
        let p = Poly::linear(&[c(1.0), c(2.0)], c(0.0));
        let q = Poly::linear(&[c(1.0), c(0.0)], c(-1.0));
        let r = p.mul(&q);
        assert_eq!(r.degree(), 2);
        assert_eq!(r.eval(&[c(3.0), c(1.0)]), c(10.0));
        assert_eq!(r.partial(0).eval(&[c(3.0), c(1.0)]), c(7.0));
        assert!(r.sub(&r).is_zero());
    }

    #[test]
    fn shift_and_compose() {
        // p(y) = y², p(y + 1) = y² + 2y + 1
        let p = Poly::var(1, 0).pow(2);
        let q = p.shift(&[c(1.0)]);
        assert_eq!(q.coeff(&[1]), c(2.0));
        assert_eq!(q.coeff(&[0]), c(1.0));
        // p(2x0 − x1) at (1, 3) = 1
        let r = p.compose_affine(&[vec![c(2.0), c(-1.0)]], &[c(0.0)]);
        assert_eq!(r.nvars(), 2);
        assert_eq!(r.eval(&[c(1.0), c(3.0)]), c(1.0));
    }

    #[test]
    fn embed_and_fix() {
        let p = Poly::var(1, 0).mul(&Poly::var(1, 0));
        let e = p.embed(3, 2);
        assert_eq!(e.eval(&[c(5.0), c(7.0), c(2.0)]), c(4.0));
        let f = e.fix_last(c(3.0));
        assert_eq!(f.nvars(), 2);
        assert_eq!(f.eval(&[c(1.0), c(1.0)]), c(9.0));
    }
}
