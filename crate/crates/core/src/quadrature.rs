//! Adaptive Gauss–Kronrod integration, Gauss–Hermite and Gauss–Legendre rules,
//! and tensorized Gaussian expectations.

use std::collections::HashMap;
use std::ops::{AddAssign, Mul};
use std::sync::{Arc, OnceLock, RwLock};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Tolerances and node counts shared by every integral in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    /// Gauss–Hermite nodes per dimension.
    pub gh_nodes: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdiv: usize,
    /// Time at which Balakrishnan-type integrals switch from the graded
    /// near-zero treatment to the tail substitution.
    pub balakrishnan_split: f64,
    /// Tail integrands whose bound falls below this value are truncated.
    pub tail_cut: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            gh_nodes: 40,
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_subdiv: 2000,
            balakrishnan_split: 1.0,
            tail_cut: 1e-16,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gh_nodes < 2 {
            return invalid(format!("gh_nodes must be >= 2, got {}", self.gh_nodes));
        }
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0 && self.tail_cut > 0.0) {
            return invalid("tolerances must be positive");
        }
        if !(self.balakrishnan_split > 0.0) || !self.balakrishnan_split.is_finite() {
            return invalid("balakrishnan_split must be a positive finite number");
        }
        if self.max_subdiv == 0 {
            return invalid("max_subdiv must be positive");
        }
        Ok(())
    }

    /// Doubled node counts and halved tolerances, used for self-convergence checks.
    pub fn refined(&self) -> Self {
        Self {
            gh_nodes: self.gh_nodes * 2,
            abs_tol: self.abs_tol * 0.5,
            rel_tol: self.rel_tol * 0.5,
            max_subdiv: self.max_subdiv * 2,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn qk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);
    let mut res_k = f_center * WGK[7];
    let mut res_g = f_center * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[7] * (f_center - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let abs_half = half.abs();
    res_asc *= abs_half;
    res_abs *= abs_half;
    let value = res_k * half;
    let mut error = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    if !value.is_finite() {
        error = f64::INFINITY;
    }
    Panel { a, b, value, error }
}

/// Globally adaptive 15-point Gauss–Kronrod integration on a finite interval.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_subdiv: usize,
) -> Result<Integral> {
    if a == b {
        return Ok(Integral { value: 0.0, error: 0.0, evaluations: 0 });
    }
    let mut panels = vec![qk15(&mut f, a, b)];
    let mut evaluations = 15;
    loop {
        let (value, error) = panels.iter().fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
        if !value.is_finite() {
            return Err(Error::QuadratureNotConverged { subdivisions: panels.len(), estimate: value, error });
        }
        // requests below the 15-point roundoff floor are met at that floor
        let target = abs_tol.max(rel_tol * value.abs()).max(100.0 * f64::EPSILON * value.abs());
        if error <= target {
            return Ok(Integral { value, error, evaluations });
        }
        if panels.len() >= max_subdiv {
            return Err(Error::QuadratureNotConverged { subdivisions: panels.len(), estimate: value, error });
        }
        let worst =
            panels.iter().enumerate().max_by(|x, y| x.1.error.total_cmp(&y.1.error)).map(|(i, _)| i).unwrap_or(0);
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a.min(p.b) || mid >= p.a.max(p.b) {
            // interval exhausted at machine resolution
            return Err(Error::QuadratureNotConverged { subdivisions: panels.len() + 1, estimate: value, error });
        }
        panels.push(qk15(&mut f, p.a, mid));
        panels.push(qk15(&mut f, mid, p.b));
        evaluations += 30;
    }
}

/// ∫_a^∞ f via the map x = a + (1 − u)/u on (0, 1].
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_subdiv: usize,
) -> Result<Integral> {
    integrate(
        |u| {
            let x = a + (1.0 - u) / u;
            let v = f(x) / (u * u);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        abs_tol,
        rel_tol,
        max_subdiv,
    )
}

/// ∫_{−∞}^{∞} f, split at zero.
pub fn integrate_real_line<F: FnMut(f64) -> f64>(
    mut f: F,
    abs_tol: f64,
    rel_tol: f64,
    max_subdiv: usize,
) -> Result<Integral> {
    let right = integrate_to_infinity(&mut f, 0.0, abs_tol * 0.5, rel_tol, max_subdiv)?;
    let left = integrate_to_infinity(|x| f(-x), 0.0, abs_tol * 0.5, rel_tol, max_subdiv)?;
    Ok(Integral {
        value: left.value + right.value,
        error: left.error + right.error,
        evaluations: left.evaluations + right.evaluations,
    })
}

impl QuadratureConfig {
    pub fn integrate<F: FnMut(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Result<Integral> {
        integrate(f, a, b, self.abs_tol, self.rel_tol, self.max_subdiv)
    }

    pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(&self, f: F, a: f64) -> Result<Integral> {
        integrate_to_infinity(f, a, self.abs_tol, self.rel_tol, self.max_subdiv)
    }
}

/// Nodes and weights of a one-dimensional Gaussian rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn cached_rule(
    cache: &'static OnceLock<RwLock<HashMap<usize, Arc<Rule>>>>,
    n: usize,
    build: fn(usize) -> Rule,
) -> Arc<Rule> {
    let lock = cache.get_or_init(|| RwLock::new(HashMap::new()));
    if let Some(rule) = lock.read().unwrap_or_else(|e| e.into_inner()).get(&n) {
        return Arc::clone(rule);
    }
    let rule = Arc::new(build(n));
    lock.write().unwrap_or_else(|e| e.into_inner()).entry(n).or_insert_with(|| Arc::clone(&rule)).clone()
}

/// Gauss–Hermite rule for ∫ g(x) e^{−x²} dx.
pub fn gauss_hermite(n: usize) -> Arc<Rule> {
    static CACHE: OnceLock<RwLock<HashMap<usize, Arc<Rule>>>> = OnceLock::new();
    cached_rule(&CACHE, n, build_gauss_hermite)
}

fn build_gauss_hermite(n: usize) -> Rule {
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let m = n.div_ceil(2);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    // ascending order
    x.reverse();
    w.reverse();
    Rule { nodes: x, weights: w }
}

/// Gauss–Legendre rule on [−1, 1].
pub fn gauss_legendre(n: usize) -> Arc<Rule> {
    static CACHE: OnceLock<RwLock<HashMap<usize, Arc<Rule>>>> = OnceLock::new();
    cached_rule(&CACHE, n, build_gauss_legendre)
}

fn build_gauss_legendre(n: usize) -> Rule {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    Rule { nodes: x, weights: w }
}

/// Largest dimension accepted by the tensorized Gauss–Hermite rule.
pub const MAX_TENSOR_DIM: usize = 6;

/// E[g(mean + L·W)] for W ~ N(0, I), with `chol` the lower factor L of the
/// covariance, by a tensor product of `nodes`-point Gauss–Hermite rules.
pub fn gaussian_expectation<G: FnMut(&DVector<f64>) -> f64>(
    mean: &DVector<f64>,
    chol: &DMatrix<f64>,
    nodes: usize,
    g: G,
) -> Result<f64> {
    tensor_expectation(mean, chol, nodes, g)
}

/// E[g(mean + L W)] for complex-valued g.
pub fn gaussian_expectation_complex<G: FnMut(&DVector<f64>) -> Complex64>(
    mean: &DVector<f64>,
    chol: &DMatrix<f64>,
    nodes: usize,
    g: G,
) -> Result<Complex64> {
    tensor_expectation(mean, chol, nodes, g)
}

fn tensor_expectation<T, G>(mean: &DVector<f64>, chol: &DMatrix<f64>, nodes: usize, mut g: G) -> Result<T>
where
    T: Copy + Default + AddAssign + Mul<f64, Output = T>,
    G: FnMut(&DVector<f64>) -> T,
{
    let n = mean.len();
    if n > MAX_TENSOR_DIM {
        return invalid(format!("tensorized Gauss-Hermite is limited to dimension <= {MAX_TENSOR_DIM}, got {n}"));
    }
    let rule = gauss_hermite(nodes);
    let scale = std::f64::consts::PI.powf(-0.5 * n as f64);
    let sqrt2 = std::f64::consts::SQRT_2;
    let mut idx = vec![0usize; n];
    let mut w = DVector::zeros(n);
    let mut point = DVector::zeros(n);
    let mut total = T::default();
    loop {
        let mut weight = scale;
        for (k, &i) in idx.iter().enumerate() {
            w[k] = sqrt2 * rule.nodes[i];
            weight *= rule.weights[i];
        }
        point.copy_from(mean);
        point.gemv(1.0, chol, &w, 1.0);
        total += g(&point) * weight;
        // odometer increment
        let mut k = 0;
        loop {
            if k == n {
                return Ok(total);
            }
            idx[k] += 1;
            if idx[k] < nodes {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gk_polynomial_and_smooth() {
        let r = integrate(|x| x * x, 0.0, 3.0, 1e-14, 1e-14, 100).unwrap();
        assert!((r.value - 9.0).abs() < 1e-13);
        let r = integrate(|x| x.sin(), 0.0, std::f64::consts::PI, 1e-14, 1e-14, 100).unwrap();
        assert!((r.value - 2.0).abs() < 1e-13);
    }

    #[test]
    fn gk_endpoint_singularity() {
        // ∫_0^1 x^{-1/2} dx = 2
        let r = integrate(|x| x.powf(-0.5), 0.0, 1.0, 1e-11, 1e-11, 2000).unwrap();
        assert!((r.value - 2.0).abs() < 1e-9, "{}", r.value);
    }

    #[test]
    fn semi_infinite() {
        let r = integrate_to_infinity(|x| (-x).exp(), 0.0, 1e-13, 1e-13, 500).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        let r = integrate_to_infinity(|x| 1.0 / (1.0 + x * x), 0.0, 1e-12, 1e-12, 500).unwrap();
        assert!((r.value - std::f64::consts::FRAC_PI_2).abs() < 1e-11);
    }

    #[test]
    fn not_converged_reports_error() {
        let r = integrate(|x| (1.0 / x).sin() / x, 1e-6, 1.0, 1e-14, 1e-14, 10);
        assert!(matches!(r, Err(Error::QuadratureNotConverged { .. })));
    }

    #[test]
    fn hermite_moments() {
        for n in [2, 5, 10, 40, 80] {
            let rule = gauss_hermite(n);
            let sum_w: f64 = rule.weights.iter().sum();
            assert!((sum_w - std::f64::consts::PI.sqrt()).abs() < 1e-13, "n={n}");
            // ∫ x² e^{-x²} = √π / 2
            let m2: f64 = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * x * x).sum();
            assert!((m2 - 0.5 * std::f64::consts::PI.sqrt()).abs() < 1e-13, "n={n}");
            assert!(rule.nodes.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn legendre_exactness() {
        let rule = gauss_legendre(12);
        let m: f64 = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * x.powi(10)).sum();
        assert!((m - 2.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn tensor_expectation_second_moment() {
        let mean = DVector::from_vec(vec![1.0, -2.0]);
        let chol = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 2.0]);
        // E[x0 * x1] = mean0*mean1 + cov01 = -2 + 0.5
        let v = gaussian_expectation(&mean, &chol, 6, |p| p[0] * p[1]).unwrap();
        assert!((v + 1.5).abs() < 1e-13);
        let big = DVector::zeros(7);
        assert!(gaussian_expectation(&big, &DMatrix::identity(7, 7), 2, |_| 1.0).is_err());
    }
}
