//! Pointwise kernels: Hörmander's fundamental solution, the explicit
//! Kolmogorov kernel, the Bessel heat kernel, the profile g⁽ᵃ⁾, the Neumann
//! fundamental solution and the Poisson kernels. All are assembled in log
//! space and exponentiated last.

use std::cell::RefCell;
use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::covariance::GramianPair;
use crate::error::{check_dim, domain, Error, Result};
use crate::matfun::{symmetrize, SpdFactor};
use crate::model::ModelSpec;
use crate::quadrature::{self, Integral, QuadratureConfig};
use crate::special::{bessel_i_scaled, ln_bessel_i_reduced, ln_gamma};

/// s ∈ (0, 1) and a = 1 − 2s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FractionalParams {
    s: f64,
    a: f64,
}

impl FractionalParams {
    pub fn new(s: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return domain(format!("s must lie in (0, 1), got {s}"));
        }
        Ok(Self { s, a: 1.0 - 2.0 * s })
    }

    pub fn from_a(a: f64) -> Result<Self> {
        if !(a > -1.0 && a < 1.0) {
            return domain(format!("a must lie in (-1, 1), got {a}"));
        }
        Ok(Self { s: (1.0 - a) / 2.0, a })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn a(&self) -> f64 {
        self.a
    }
}

fn check_a(a: f64) -> Result<()> {
    FractionalParams::from_a(a).map(|_| ())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelForm {
    /// Written with K(t) and Y − e^{tB}X.
    K,
    /// Written with C(t) and X − e^{−tB}Y.
    C,
}

fn half_ln_4pi(n: usize) -> f64 {
    0.5 * n as f64 * (4.0 * PI).ln()
}

/// ln p(X, Y, t) from a precomputed Gramian pair.
pub fn ln_hormander_kernel_with(
    pair: &GramianPair,
    model: &ModelSpec,
    x: &[f64],
    y: &[f64],
    form: KernelForm,
) -> Result<f64> {
    let n = model.dim();
    check_dim(n, x.len())?;
    check_dim(n, y.len())?;
    let t = pair.t;
    let xv = DVector::from_column_slice(x);
    let yv = DVector::from_column_slice(y);
    match form {
        KernelForm::K => {
            let f = pair.k_factor()?;
            let r = yv - &pair.exp_tb * xv;
            Ok(-half_ln_4pi(n) - 0.5 * (n as f64 * t.ln() + f.log_det()) - f.inv_quad_form(&r) / (4.0 * t))
        }
        KernelForm::C => {
            let f = pair.c_factor()?;
            let w = xv - &pair.exp_minus_tb * yv;
            Ok(-half_ln_4pi(n) - t * model.trace_b() - 0.5 * f.log_det() - f.inv_quad_form(&w) / 4.0)
        }
    }
}

pub fn hormander_kernel_with(
    pair: &GramianPair,
    model: &ModelSpec,
    x: &[f64],
    y: &[f64],
    form: KernelForm,
) -> Result<f64> {
    Ok(ln_hormander_kernel_with(pair, model, x, y, form)?.exp())
}

/// p(X, Y, t), the fundamental solution of 𝒦 with pole at (Y, 0).
pub fn hormander_kernel(model: &ModelSpec, x: &[f64], y: &[f64], t: f64, form: KernelForm) -> Result<f64> {
    let pair = GramianPair::new(model, t)?;
    hormander_kernel_with(&pair, model, x, y, form)
}

pub fn ln_hormander_kernel(model: &ModelSpec, x: &[f64], y: &[f64], t: f64, form: KernelForm) -> Result<f64> {
    let pair = GramianPair::new(model, t)?;
    ln_hormander_kernel_with(&pair, model, x, y, form)
}

/// ∇_X p = −½ C(t)⁻¹(X − e^{−tB}Y)·p.
pub fn hormander_kernel_grad_x(model: &ModelSpec, x: &[f64], y: &[f64], t: f64) -> Result<Vec<f64>> {
    let pair = GramianPair::new(model, t)?;
    let p = hormander_kernel_with(&pair, model, x, y, KernelForm::C)?;
    let w = DVector::from_column_slice(x) - &pair.exp_minus_tb * DVector::from_column_slice(y);
    let g = pair.c_factor()?.solve(&w) * (-0.5 * p);
    Ok(g.as_slice().to_vec())
}

/// c_n = (√3 / 2π)ⁿ, fixed by ∫ p d(w, y) = 1.
pub fn kolmogorov_constant(n: usize) -> f64 {
    (3f64.sqrt() / (2.0 * PI)).powi(n as i32)
}

fn check_kolmogorov_args(v: &[f64], x: &[f64], w: &[f64], y: &[f64], t: f64) -> Result<usize> {
    let n = v.len();
    if n == 0 {
        return domain("n must be at least 1");
    }
    for s in [x, w, y] {
        check_dim(n, s.len())?;
    }
    if !(t > 0.0) {
        return domain(format!("t must be positive, got {t}"));
    }
    Ok(n)
}

/// Explicit kernel of Δ_v + ⟨v, ∇_x⟩ − ∂_t on ℝ^{2n}, from (v, x) to (w, y):
/// c_n t^{−2n} exp{−(|w−v|²/t − 3⟨w−v, y−x−tv⟩/t² + 3|y−x−tv|²/t³)}.
pub fn kolmogorov_kernel_explicit(v: &[f64], x: &[f64], w: &[f64], y: &[f64], t: f64) -> Result<f64> {
    let n = check_kolmogorov_args(v, x, w, y, t)?;
    let mut dv2 = 0.0;
    let mut cross = 0.0;
    let mut dx2 = 0.0;
    for i in 0..n {
        let dv = w[i] - v[i];
        let dx = y[i] - x[i] - t * v[i];
        dv2 += dv * dv;
        cross += dv * dx;
        dx2 += dx * dx;
    }
    let exponent = dv2 / t - 3.0 * cross / (t * t) + 3.0 * dx2 / (t * t * t);
    Ok((kolmogorov_constant(n).ln() - 2.0 * n as f64 * t.ln() - exponent).exp())
}

/// The classical display read literally:
/// c_n t^{−2n} exp{−(1/t)(|v−w|² + (3/t)⟨v−w, y−x−tv⟩ + (3/t²)|x−y+tv|²)}.
pub fn kolmogorov_kernel_literal(v: &[f64], x: &[f64], w: &[f64], y: &[f64], t: f64) -> Result<f64> {
    let n = check_kolmogorov_args(v, x, w, y, t)?;
    let mut a = 0.0;
    let mut b = 0.0;
    let mut c = 0.0;
    for i in 0..n {
        let d = v[i] - w[i];
        a += d * d;
        b += d * (y[i] - x[i] - t * v[i]);
        let e = x[i] - y[i] + t * v[i];
        c += e * e;
    }
    let exponent = (a + 3.0 * b / t + 3.0 * c / (t * t)) / t;
    Ok((kolmogorov_constant(n).ln() - 2.0 * n as f64 * t.ln() - exponent).exp())
}

/// Comparison of the explicit kernel against the literal display and the
/// general formula over a set of points (v, x, w, y, t).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KolmogorovDiscrepancy {
    pub n: usize,
    pub constant: f64,
    pub points: usize,
    pub max_rel_explicit_vs_general: f64,
    pub max_rel_literal_vs_explicit: f64,
    pub literal_agrees: bool,
}

pub type KolmogorovPoint = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, f64);

pub fn kolmogorov_discrepancy_report(n: usize, points: &[KolmogorovPoint]) -> Result<KolmogorovDiscrepancy> {
    let model = ModelSpec::kolmogorov(n);
    let mut general_err = 0.0f64;
    let mut literal_err = 0.0f64;
    for (v, x, w, y, t) in points {
        let explicit = kolmogorov_kernel_explicit(v, x, w, y, *t)?;
        let literal = kolmogorov_kernel_literal(v, x, w, y, *t)?;
        let from: Vec<f64> = v.iter().chain(x).copied().collect();
        let to: Vec<f64> = w.iter().chain(y).copied().collect();
        let general = hormander_kernel(&model, &from, &to, *t, KernelForm::K)?;
        general_err = general_err.max((explicit - general).abs() / general.abs().max(f64::MIN_POSITIVE));
        literal_err = literal_err.max((literal - explicit).abs() / explicit.abs().max(f64::MIN_POSITIVE));
    }
    Ok(KolmogorovDiscrepancy {
        n,
        constant: kolmogorov_constant(n),
        points: points.len(),
        max_rel_explicit_vs_general: general_err,
        max_rel_literal_vs_explicit: literal_err,
        literal_agrees: literal_err <= 1e-8,
    })
}

/// Heat kernel of 𝓑_z⁽ᵃ⁾ = ∂²_z + (a/z)∂_z with Neumann condition, relative to ζᵃdζ:
/// (2t)^{−(a+1)/2} x^{(1−a)/2} I_{(a−1)/2}(x) e^{−(z²+ζ²)/4t}, x = zζ/2t.
pub fn bessel_heat_kernel(a: f64, z: f64, zeta: f64, t: f64) -> Result<f64> {
    Ok(ln_bessel_heat_kernel(a, z, zeta, t)?.exp())
}

pub fn ln_bessel_heat_kernel(a: f64, z: f64, zeta: f64, t: f64) -> Result<f64> {
    check_a(a)?;
    if !(z >= 0.0 && zeta >= 0.0 && t > 0.0) {
        return domain(format!("bessel_heat_kernel needs z, zeta >= 0 and t > 0 (z={z}, zeta={zeta}, t={t})"));
    }
    let nu = 0.5 * (a - 1.0);
    let x = z * zeta / (2.0 * t);
    let prefactor = -0.5 * (a + 1.0) * (2.0 * t).ln();
    // x^{−ν}I_ν(x)e^{−(z²+ζ²)/4t}; for large x the e^{x} growth is cancelled exactly
    let body = if x > 30.0 {
        -nu * x.ln() + bessel_i_scaled(nu, x)?.ln() - (z - zeta).powi(2) / (4.0 * t)
    } else {
        ln_bessel_i_reduced(nu, x)? - (z * z + zeta * zeta) / (4.0 * t)
    };
    Ok(prefactor + body)
}

/// g⁽ᵃ⁾(z, t) = z^{1−a} t^{−(3−a)/2} e^{−z²/4t} / (2^{1−a} Γ((1−a)/2)).
pub fn g_profile(a: f64, z: f64, t: f64) -> Result<f64> {
    Ok(ln_g_profile(a, z, t)?.exp())
}

pub fn ln_g_profile(a: f64, z: f64, t: f64) -> Result<f64> {
    check_a(a)?;
    if !(z > 0.0 && t > 0.0) {
        return domain(format!("g_profile needs z > 0 and t > 0 (z={z}, t={t})"));
    }
    Ok((1.0 - a) * z.ln()
        - 0.5 * (3.0 - a) * t.ln()
        - z * z / (4.0 * t)
        - (1.0 - a) * std::f64::consts::LN_2
        - ln_gamma(0.5 * (1.0 - a)))
}

/// ∂_t g⁽ᵃ⁾ in closed form: (z²/4t² − (3−a)/2t)·g.
pub fn g_profile_dt(a: f64, z: f64, t: f64) -> Result<f64> {
    Ok((z * z / (4.0 * t * t) - 0.5 * (3.0 - a) / t) * g_profile(a, z, t)?)
}

/// 𝒢⁽ᵃ⁾(X, t, z; Y, τ, ζ) = p(X, Y, t−τ)·p⁽ᵃ⁾(z, ζ, t−τ); ζ = 0 is allowed.
#[allow(clippy::too_many_arguments)]
pub fn neumann_g(model: &ModelSpec, a: f64, x: &[f64], t: f64, z: f64, y: &[f64], tau: f64, zeta: f64) -> Result<f64> {
    if !(t > tau) {
        return domain(format!("neumann_g needs t > tau (t={t}, tau={tau})"));
    }
    let h = t - tau;
    let ln = ln_hormander_kernel(model, x, y, h, KernelForm::K)? + ln_bessel_heat_kernel(a, z, zeta, h)?;
    Ok(ln.exp())
}

/// P_z⁽ᵃ⁾(X, Y, t) = g⁽ᵃ⁾(z, t)·p(X, Y, t).
pub fn poisson_time_kernel(model: &ModelSpec, a: f64, x: &[f64], y: &[f64], t: f64, z: f64) -> Result<f64> {
    let ln = ln_g_profile(a, z, t)? + ln_hormander_kernel(model, x, y, t, KernelForm::K)?;
    Ok(ln.exp())
}

/// Dyadic panels of the near-origin integral in the spatial Poisson kernel.
const NEAR_PANELS: i32 = 48;

/// 𝒫⁽ᵃ⁾(X, Y, z) = ∫₀^∞ P_z⁽ᵃ⁾(X, Y, t) dt.
///
/// With t = z²/4u the integral is Γ((1−a)/2)⁻¹ ∫₀^∞ u^{−(1+a)/2} e^{−u} p(X, Y, z²/4u) du.
/// On (0, 1] the substitution u = w^{2/(1−a)} removes the power singularity;
/// (1, ∞) is mapped to a finite interval.
pub fn poisson_space_kernel(
    model: &ModelSpec,
    a: f64,
    x: &[f64],
    y: &[f64],
    z: f64,
    quad: &QuadratureConfig,
) -> Result<f64> {
    check_a(a)?;
    if !(z > 0.0) {
        return domain(format!("poisson_space_kernel needs z > 0, got {z}"));
    }
    check_dim(model.dim(), x.len())?;
    check_dim(model.dim(), y.len())?;
    let failure = RefCell::new(None);
    let kernel_at = |u: f64| -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        match ln_hormander_kernel(model, x, y, z * z / (4.0 * u), KernelForm::K) {
            Ok(l) => (l - u).exp(),
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    };
    // In w = u^{1/m} the mass sits near w ~ (z/|X − Y|)^{2/m}, which can be far
    // below any initial node; dyadic panels make every scale visible.
    let m = 2.0 / (1.0 - a);
    let mut near = Ok(Integral { value: 0.0, error: 0.0, evaluations: 0 });
    for k in 0..=NEAR_PANELS {
        let hi = 0.5f64.powi(k);
        let lo = if k == NEAR_PANELS { 0.0 } else { 0.5 * hi };
        let panel = quadrature::integrate(
            |w| if w <= 0.0 { 0.0 } else { m * kernel_at(w.powf(m)) },
            lo,
            hi,
            quad.abs_tol / (NEAR_PANELS + 1) as f64,
            quad.rel_tol,
            quad.max_subdiv,
        );
        near = near.and_then(|acc| {
            let p = panel?;
            Ok(Integral {
                value: acc.value + p.value,
                error: acc.error + p.error,
                evaluations: acc.evaluations + p.evaluations,
            })
        });
    }
    let far = quadrature::integrate_to_infinity(
        |u| u.powf(-0.5 * (1.0 + a)) * kernel_at(u),
        1.0,
        quad.abs_tol,
        quad.rel_tol,
        quad.max_subdiv,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let (near, far) = (near?, far?);
    Ok((near.value + far.value) * (-ln_gamma(0.5 * (1.0 - a))).exp())
}

/// Covariance inflation of the reference Gaussian in the mass diagnostics, so
/// the quadrature ratio is a genuine Gaussian rather than a constant.
pub const REFERENCE_INFLATION: f64 = 1.25;

/// ∫ exp(ln_f(Y))dY by Gauss–Hermite under N(mean, cov).
fn gh_ratio_integral<F: FnMut(&[f64]) -> Result<f64>>(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    nodes: usize,
    mut ln_f: F,
) -> Result<f64> {
    let n = mean.len();
    let factor = SpdFactor::new(&symmetrize(cov))?;
    let chol =
        Cholesky::new(symmetrize(cov)).ok_or(Error::NotPositiveDefinite { index: 0, pivot: 0.0, threshold: 0.0 })?;
    let ln_norm = 0.5 * n as f64 * (2.0 * PI).ln() + 0.5 * factor.log_det();
    let mut failure = None;
    let v = quadrature::gaussian_expectation(mean, &chol.l(), nodes, |y| {
        let r = y - mean;
        let ln_q = -ln_norm - 0.5 * factor.inv_quad_form(&r);
        match ln_f(y.as_slice()) {
            Ok(l) => (l - ln_q).exp(),
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        }
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// ∫p(X, Y, t)dY, which equals 1.
pub fn kernel_mass_y(model: &ModelSpec, x: &[f64], t: f64, nodes: usize) -> Result<f64> {
    check_dim(model.dim(), x.len())?;
    let pair = GramianPair::new(model, t)?;
    let mean = &pair.exp_tb * DVector::from_column_slice(x);
    let cov = &pair.k * (2.0 * t * REFERENCE_INFLATION);
    gh_ratio_integral(&mean, &cov, nodes, |y| ln_hormander_kernel_with(&pair, model, x, y, KernelForm::K))
}

/// ∫p(X, Y, t)dX, which equals e^{−t·trB}.
pub fn kernel_mass_x(model: &ModelSpec, y: &[f64], t: f64, nodes: usize) -> Result<f64> {
    check_dim(model.dim(), y.len())?;
    let pair = GramianPair::new(model, t)?;
    let mean = &pair.exp_minus_tb * DVector::from_column_slice(y);
    let cov = &pair.c * (2.0 * REFERENCE_INFLATION);
    gh_ratio_integral(&mean, &cov, nodes, |x| ln_hormander_kernel_with(&pair, model, x, y, KernelForm::C))
}

/// |∫p(X, Z, t)p(Z, Y, s)dZ − p(X, Y, t + s)| / p(X, Y, t + s).
pub fn chapman_kolmogorov_residual(
    model: &ModelSpec,
    x: &[f64],
    y: &[f64],
    t: f64,
    s: f64,
    nodes: usize,
) -> Result<f64> {
    check_dim(model.dim(), x.len())?;
    check_dim(model.dim(), y.len())?;
    let first = GramianPair::new(model, t)?;
    let second = GramianPair::new(model, s)?;
    // Z ↦ p(X, Z, t) is N(e^{tB}X, 2tK(t)); Z ↦ p(Z, Y, s) is proportional to N(e^{−sB}Y, 2C(s))
    let p1 = first.k_factor()?.inverse() / (2.0 * t);
    let p2 = second.c_factor()?.inverse() / 2.0;
    let m1 = &first.exp_tb * DVector::from_column_slice(x);
    let m2 = &second.exp_minus_tb * DVector::from_column_slice(y);
    let precision = SpdFactor::new(&symmetrize(&(&p1 + &p2)))?;
    let mean = precision.solve(&(&p1 * m1 + &p2 * m2));
    let cov = precision.inverse() * REFERENCE_INFLATION;
    let value = gh_ratio_integral(&mean, &cov, nodes, |z| {
        Ok(ln_hormander_kernel_with(&first, model, x, z, KernelForm::K)?
            + ln_hormander_kernel_with(&second, model, z, y, KernelForm::C)?)
    })?;
    let direct = hormander_kernel(model, x, y, t + s, KernelForm::K)?;
    Ok((value - direct).abs() / direct)
}
