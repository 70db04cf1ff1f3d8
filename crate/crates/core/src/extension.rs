//! Extension problems for 𝒦 and 𝒜 with weight z^a, a = 1 − 2s: the solution
//! by subordination, the Dirichlet-to-Neumann map and finite-difference
//! residuals of the extended equation.
//!
//! With τ = z²/4v the subordinator g⁽ᵃ⁾(z, τ)dτ becomes the Gamma(s, 1) law of
//! v, so U(X, t, z) = E[P^𝒦_{z²/4v}u(X, t)] and U − u is an average of the
//! increment Δ.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::Serialize;

use crate::covariance::GramianPair;
use crate::error::{check_dim, domain, invalid, Error, Result};
use crate::fractional::{lower_gamma, pt_increment, singular_integral, truncation_point};
use crate::funcspace::{GaussPoly, SpaceTimeGaussPoly};
use crate::kernels::{ln_g_profile, ln_hormander_kernel_with, poisson_time_kernel, FractionalParams, KernelForm};
use crate::matfun::{symmetrize, SpdFactor};
use crate::model::ModelSpec;
use crate::quadrature::{self, QuadratureConfig};
use crate::semigroup::Increment;
use crate::special::gamma;

/// Upper end of the Gamma variable v; the mass beyond it is below e^{−45}.
const GAMMA_VARIABLE_MAX: f64 = 45.0;

/// Default relative central-difference step of [`pde_residual`].
pub const DEFAULT_FD_STEP: f64 = 1e-3;

fn check_z(z: f64) -> Result<()> {
    if !(z >= 0.0) || !z.is_finite() {
        return domain(format!("extension variable must be nonnegative and finite, got {z}"));
    }
    Ok(())
}

fn sup_of(u: &SpaceTimeGaussPoly) -> f64 {
    match u {
        SpaceTimeGaussPoly::Stationary(f) => f.sup_bound(),
        SpaceTimeGaussPoly::Joint(g) => g.sup_bound(),
    }
}

/// U − u = E[Δ(z²/4v)], v ~ Gamma(s, 1), for an increment τ ↦ Δ(τ).
///
/// With v = w^{1/s} the density becomes e^{−w^{1/s}}/Γ(1+s) on w > 0. Times
/// past `truncation` contribute limit·(their probability) exactly, `limit`
/// being the value Δ approaches as τ → ∞.
pub fn extension_from_increment<F: FnMut(f64) -> Result<f64>>(
    mut delta: F,
    s: f64,
    z: f64,
    limit: f64,
    truncation: f64,
    quad: &QuadratureConfig,
) -> Result<f64> {
    FractionalParams::new(s)?;
    check_z(z)?;
    if z == 0.0 {
        return Ok(0.0);
    }
    let c = 0.25 * z * z;
    let w_max = GAMMA_VARIABLE_MAX.powf(s);
    let w_min = (c / truncation).powf(s).min(w_max);
    let mut failure: Option<Error> = None;
    let body = quadrature::integrate(
        |w| {
            let v = w.powf(1.0 / s);
            match delta(c / v) {
                Ok(d) => (-v).exp() * d,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        w_min,
        w_max,
        quad.abs_tol,
        quad.rel_tol,
        quad.max_subdiv,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    // ∫₀^{w_min} e^{−w^{1/s}}dw = s·γ(s, w_min^{1/s})
    let tail = limit * s * lower_gamma(s, w_min.powf(1.0 / s));
    Ok((body?.value + tail) / gamma(1.0 + s))
}

/// U(X, t, z) solving the extension problem for 𝒦 with weight z^a and
/// boundary value u; U(X, t, 0) = u(X, t).
pub fn extend_k(
    u: &SpaceTimeGaussPoly,
    model: &ModelSpec,
    x: &[f64],
    t: f64,
    z: f64,
    a: f64,
    quad: &QuadratureConfig,
) -> Result<f64> {
    let s = FractionalParams::from_a(a)?.s();
    check_z(z)?;
    let increment = Increment::new(u, model, x, t, quad)?;
    let base = increment.base_value();
    if z == 0.0 {
        return Ok(base);
    }
    let truncation = truncation_point(s, sup_of(u), model, quad);
    Ok(base + extension_from_increment(|tau| increment.value(tau), s, z, -base, truncation, quad)?)
}

/// U(X, z) for the stationary problem 𝒜U + 𝓑_zU = 0 with boundary value φ,
/// by subordination of Pₜ; U(X, 0) = φ(X).
pub fn extend_a(phi: &GaussPoly, model: &ModelSpec, x: &[f64], z: f64, a: f64, quad: &QuadratureConfig) -> Result<f64> {
    let s = FractionalParams::from_a(a)?.s();
    check_z(z)?;
    let (base, delta) = pt_increment(phi, model, x, quad)?;
    if z == 0.0 {
        return Ok(base);
    }
    let truncation = truncation_point(s, phi.sup_bound(), model, quad);
    Ok(base + extension_from_increment(delta, s, z, -base, truncation, quad)?)
}

/// ∫∫P_z⁽ᵃ⁾(X, Y, τ)u(Y, t − τ)dYdτ evaluated from the kernel itself.
///
/// For each τ the Y-integral is a Gauss–Hermite rule under the Gaussian
/// whose precision is the sum of those of p(X, ·, τ) and of the Gaussian
/// factor of u(·, t − τ); the ratio is polynomial, so the rule is exact.
pub fn extend_k_kernel_route(
    u: &SpaceTimeGaussPoly,
    model: &ModelSpec,
    x: &[f64],
    t: f64,
    z: f64,
    a: f64,
    quad: &QuadratureConfig,
) -> Result<f64> {
    let s = FractionalParams::from_a(a)?.s();
    check_dim(model.dim(), u.space_dim())?;
    check_dim(model.dim(), x.len())?;
    if !(z > 0.0) {
        return domain(format!("the kernel route needs z > 0, got {z}"));
    }
    let n = model.dim();
    let c = 0.25 * z * z;
    let truncation = truncation_point(s, sup_of(u), model, quad);
    let ln_norm = 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    let inner = |tau: f64| -> Result<f64> {
        let f = u.slice(t - tau)?;
        let center = f.real_center().ok_or_else(|| Error::Invalid("the kernel route needs a real center".into()))?;
        let pair = GramianPair::new(model, tau)?;
        let k_factor = pair.k_factor()?;
        let mean = &pair.exp_tb * DVector::from_column_slice(x);
        let p_precision = k_factor.inverse() / (2.0 * tau);
        let m2 = f.shape() * 2.0;
        let precision = SpdFactor::new(&symmetrize(&(&p_precision + &m2)))?;
        let rhs = &p_precision * &mean + &m2 * DVector::from_vec(center);
        let mu = precision.solve(&rhs);
        let cov = symmetrize(&precision.inverse());
        let chol = Cholesky::new(cov).ok_or(Error::NotPositiveDefinite { index: 0, pivot: 0.0, threshold: 0.0 })?;
        let l: DMatrix<f64> = chol.l();
        let nodes = (f.degree() / 2 + 2).min(quad.gh_nodes.max(2));
        let ln_g = ln_g_profile(a, z, tau)?;
        let mut failure: Option<Error> = None;
        let e = quadrature::gaussian_expectation(&mu, &l, nodes, |y| {
            let ys = y.as_slice();
            let r = y - &mu;
            let ln_q = -ln_norm + 0.5 * precision.log_det() - 0.5 * r.dot(&(precision.matrix() * &r));
            let ln_p = match ln_hormander_kernel_with(&pair, model, x, ys, KernelForm::K) {
                Ok(v) => v,
                Err(err) => {
                    failure.get_or_insert(err);
                    return 0.0;
                }
            };
            match f.eval(ys) {
                Ok(v) => v * (ln_g + ln_p - ln_q).exp(),
                Err(err) => {
                    failure.get_or_insert(err);
                    0.0
                }
            }
        })?;
        match failure {
            Some(err) => Err(err),
            None => Ok(e),
        }
    };
    // τ = c·w^{−1/s}, |dτ/dw| = (c/s)·w^{−1/s−1}
    let w_max = GAMMA_VARIABLE_MAX.powf(s);
    let w_min = (c / truncation).powf(s).min(w_max);
    let mut failure: Option<Error> = None;
    let total = quadrature::integrate(
        |w| {
            let tau = c * w.powf(-1.0 / s);
            match inner(tau) {
                Ok(v) => v * (c / s) * w.powf(-1.0 / s - 1.0),
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        w_min,
        w_max,
        quad.abs_tol,
        quad.rel_tol,
        quad.max_subdiv,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(total?.value)
}

/// The weighted conormal derivative −(2^{−a}Γ((1−a)/2)/Γ((1+a)/2))·z^a∂_zU and
/// its two integrals J₁ = ∫τ^{−1−s}e^{−z²/4τ}Δdτ, J₂ = ∫τ^{−2−s}e^{−z²/4τ}Δdτ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Dtn {
    pub s: f64,
    pub z: f64,
    pub value: f64,
    pub j1: f64,
    pub j2: f64,
    pub quadrature_error: f64,
}

/// The DtN quotient (−sJ₁ + (z²/4)J₂)/Γ(1−s), from z^a∂_zU differentiated under
/// the integral. As z → 0 it tends to the Balakrishnan value.
pub fn dtn_from_increment<F: FnMut(f64) -> Result<f64>>(
    mut delta: F,
    s: f64,
    z: f64,
    limit: f64,
    truncation: f64,
    quad: &QuadratureConfig,
) -> Result<Dtn> {
    FractionalParams::new(s)?;
    if !(z > 0.0) || !z.is_finite() {
        return domain(format!("the DtN quotient needs z > 0, got {z}"));
    }
    let c = 0.25 * z * z;
    let (n1, f1) = singular_integral(&mut delta, s, &|tau| (-c / tau).exp(), truncation, quad)?;
    let (n2, f2) = singular_integral(&mut delta, s, &|tau| (-c / tau).exp() / tau, truncation, quad)?;
    let y = c / truncation;
    let j1 = n1.value + f1.value + limit * c.powf(-s) * lower_gamma(s, y);
    let j2 = n2.value + f2.value + limit * c.powf(-1.0 - s) * lower_gamma(1.0 + s, y);
    let g = gamma(1.0 - s);
    Ok(Dtn {
        s,
        z,
        value: (-s * j1 + c * j2) / g,
        j1,
        j2,
        quadrature_error: (s * (n1.error + f1.error) + c * (n2.error + f2.error)) / g,
    })
}

pub fn dtn_k_report(
    u: &SpaceTimeGaussPoly,
    model: &ModelSpec,
    x: &[f64],
    t: f64,
    s: f64,
    z: f64,
    quad: &QuadratureConfig,
) -> Result<Dtn> {
    FractionalParams::new(s)?;
    let increment = Increment::new(u, model, x, t, quad)?;
    let truncation = truncation_point(s, sup_of(u), model, quad);
    dtn_from_increment(|tau| increment.value(tau), s, z, -increment.base_value(), truncation, quad)
}

/// −(2^{−a}Γ((1−a)/2)/Γ((1+a)/2))·z^a∂_zU(X, t, z), a = 1 − 2s.
pub fn dtn_k(
    u: &SpaceTimeGaussPoly,
    model: &ModelSpec,
    x: &[f64],
    t: f64,
    s: f64,
    z: f64,
    quad: &QuadratureConfig,
) -> Result<f64> {
    Ok(dtn_k_report(u, model, x, t, s, z, quad)?.value)
}

/// z-grid 0.2·2^{−k}, k = 0, …, 4.
pub fn default_z_grid() -> Vec<f64> {
    (0..5).map(|k| 0.2 * 0.5f64.powi(k)).collect()
}

/// Least-squares slope of ln y against ln x.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return invalid("a slope needs at least two paired values");
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return domain("log-log slope needs positive data");
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub z: f64,
    pub value: f64,
    pub reference: f64,
    pub abs_err: f64,
}

/// Errors along a z-grid and their empirical order in z.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sweep {
    pub points: Vec<SweepPoint>,
    pub order: f64,
}

impl Sweep {
    fn from_points(points: Vec<SweepPoint>) -> Result<Self> {
        let zs: Vec<f64> = points.iter().map(|p| p.z).collect();
        let errs: Vec<f64> = points.iter().map(|p| p.abs_err).collect();
        Ok(Self { order: loglog_slope(&zs, &errs)?, points })
    }

    pub fn final_error(&self) -> f64 {
        self.points.last().map_or(f64::NAN, |p| p.abs_err)
    }

    pub fn is_decreasing(&self) -> bool {
        self.points.windows(2).all(|w| w[1].abs_err < w[0].abs_err)
    }
}

/// sup over the X-grid of |U(X, t, z) − u(X, t)| for each z.
pub fn dirichlet_sweep(
    u: &SpaceTimeGaussPoly,
    model: &ModelSpec,
    xs: &[Vec<f64>],
    t: f64,
    a: f64,
    zs: &[f64],
    quad: &QuadratureConfig,
) -> Result<Sweep> {
    let s = FractionalParams::from_a(a)?.s();
    let truncation = truncation_point(s, sup_of(u), model, quad);
    let increments = xs.iter().map(|x| Increment::new(u, model, x, t, quad)).collect::<Result<Vec<_>>>()?;
    let mut points = Vec::with_capacity(zs.len());
    for &z in zs {
        let mut worst = 0.0f64;
        for inc in &increments {
            let d = extension_from_increment(|tau| inc.value(tau), s, z, -inc.base_value(), truncation, quad)?;
            worst = worst.max(d.abs());
        }
        points.push(SweepPoint { z, value: worst, reference: 0.0, abs_err: worst });
    }
    Sweep::from_points(points)
}

/// |DtN(z) − (−𝒦)ˢu| at one point for each z.
pub fn dtn_sweep(
    u: &SpaceTimeGaussPoly,
    model: &ModelSpec,
    x: &[f64],
    t: f64,
    s: f64,
    zs: &[f64],
    quad: &QuadratureConfig,
) -> Result<Sweep> {
    let reference = crate::fractional::frac_k(u, model, x, t, s, quad)?;
    let points = zs
        .iter()
        .map(|&z| {
            let value = dtn_k(u, model, x, t, s, z, quad)?;
            Ok(SweepPoint { z, value, reference, abs_err: (value - reference).abs() })
        })
        .collect::<Result<Vec<_>>>()?;
    Sweep::from_points(points)
}

/// A function of (X, t, z) expected to solve the extended equation.
#[derive(Debug, Clone)]
pub enum ExtensionField<'a> {
    ExtendK {
        u: &'a SpaceTimeGaussPoly,
        quad: QuadratureConfig,
    },
    /// Time-independent; the ∂_t term is absent.
    ExtendA {
        phi: &'a GaussPoly,
        quad: QuadratureConfig,
    },
    /// (X, t, z) ↦ P_z⁽ᵃ⁾(X, Y, t) with pole Y.
    PoissonTimeKernel {
        y: Vec<f64>,
    },
}

impl ExtensionField<'_> {
    pub fn eval(&self, model: &ModelSpec, a: f64, x: &[f64], t: f64, z: f64) -> Result<f64> {
        match self {
            Self::ExtendK { u, quad } => extend_k(u, model, x, t, z, a, quad),
            Self::ExtendA { phi, quad } => extend_a(phi, model, x, z, a, quad),
            Self::PoissonTimeKernel { y } => poisson_time_kernel(model, a, x, y, t, z),
        }
    }

    fn has_time(&self) -> bool {
        !matches!(self, Self::ExtendA { .. })
    }
}

/// |𝒜U + ∂²_zU + (a/z)∂_zU − ∂_tU| divided by the sum of the magnitudes of
/// those terms, all by central differences with relative step `h`.
pub fn pde_residual(
    model: &ModelSpec,
    a: f64,
    field: &ExtensionField<'_>,
    x: &[f64],
    t: f64,
    z: f64,
    h: f64,
) -> Result<f64> {
    FractionalParams::from_a(a)?;
    check_dim(model.dim(), x.len())?;
    if !(z > 0.0) || !(h > 0.0) {
        return domain(format!("residual needs z > 0 and h > 0 (z={z}, h={h})"));
    }
    let n = model.dim();
    let f = |x: &[f64], t: f64, z: f64| field.eval(model, a, x, t, z);
    let u0 = f(x, t, z)?;
    let steps: Vec<f64> = x.iter().map(|v| h * v.abs().max(1.0)).collect();
    let shifted = |i: usize, d: f64| {
        let mut y = x.to_vec();
        y[i] += d;
        y
    };
    let mut plus = vec![f64::NAN; n];
    let mut minus = vec![f64::NAN; n];
    let mut terms = Vec::new();
    let q = model.q();
    let bx = model.b() * DVector::from_column_slice(x);
    let mut need = vec![false; n];
    for i in 0..n {
        need[i] = bx[i] != 0.0 || q[(i, i)] != 0.0;
    }
    for i in (0..n).filter(|&i| need[i]) {
        plus[i] = f(&shifted(i, steps[i]), t, z)?;
        minus[i] = f(&shifted(i, -steps[i]), t, z)?;
    }
    let mut trace = 0.0;
    for i in 0..n {
        for j in 0..n {
            let qij = q[(i, j)];
            if qij == 0.0 {
                continue;
            }
            let d2 = if i == j {
                (plus[i] - 2.0 * u0 + minus[i]) / (steps[i] * steps[i])
            } else {
                let mut y = x.to_vec();
                let mut corner = |si: f64, sj: f64| -> Result<f64> {
                    y.copy_from_slice(x);
                    y[i] += si * steps[i];
                    y[j] += sj * steps[j];
                    f(&y, t, z)
                };
                (corner(1.0, 1.0)? - corner(1.0, -1.0)? - corner(-1.0, 1.0)? + corner(-1.0, -1.0)?)
                    / (4.0 * steps[i] * steps[j])
            };
            trace += qij * d2;
        }
    }
    terms.push(trace);
    for i in 0..n {
        if bx[i] != 0.0 {
            terms.push(bx[i] * (plus[i] - minus[i]) / (2.0 * steps[i]));
        }
    }
    let hz = h * z;
    let (zp, zm) = (f(x, t, z + hz)?, f(x, t, z - hz)?);
    terms.push((zp - 2.0 * u0 + zm) / (hz * hz));
    terms.push(a / z * (zp - zm) / (2.0 * hz));
    if field.has_time() {
        let ht = h * t.abs().max(1.0);
        terms.push(-(f(x, t + ht, z)? - f(x, t - ht, z)?) / (2.0 * ht));
    }
    let residual: f64 = terms.iter().sum();
    let scale: f64 = terms.iter().map(|v| v.abs()).sum();
    if scale == 0.0 {
        return Ok(residual.abs());
    }
    Ok(residual.abs() / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractional::frac_a;
    use std::f64::consts::PI;

    fn q() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn harmonic_extension_of_gaussian() {
        // U(0, 1) = ∫ e^{−πy²}/(π(1 + y²))dy
        let m = ModelSpec::heat(1);
        let phi = GaussPoly::isotropic(vec![0.0], PI).unwrap();
        let u = extend_a(&phi, &m, &[0.0], 1.0, 0.0, &q()).unwrap();
        let reference =
            quadrature::integrate_real_line(|y| (-PI * y * y).exp() / (PI * (1.0 + y * y)), 1e-14, 1e-13, 2000)
                .unwrap()
                .value;
        assert!(rel(u, reference) < 1e-9, "{u} vs {reference}");
    }

    #[test]
    fn constant_data_stays_constant() {
        let ext = extension_from_increment(|_| Ok(0.0), 0.4, 0.7, 0.0, 1e12, &q()).unwrap();
        assert_eq!(ext, 0.0);
        let d = dtn_from_increment(|_| Ok(0.0), 0.4, 0.7, 0.0, 1e12, &q()).unwrap();
        assert_eq!(d.value, 0.0);
    }

    #[test]
    fn stationary_consistency() {
        let m = ModelSpec::kolmogorov(1);
        let phi = GaussPoly::isotropic(vec![0.1, 0.0], 0.8).unwrap();
        let x = [0.2, -0.3];
        let ua = extend_a(&phi, &m, &x, 0.5, 0.2, &q()).unwrap();
        let uk = extend_k(&SpaceTimeGaussPoly::stationary(phi), &m, &x, 0.7, 0.5, 0.2, &q()).unwrap();
        assert!(rel(uk, ua) < 1e-7);
    }

    #[test]
    fn routes_agree() {
        let m = ModelSpec::kolmogorov(1);
        let space = GaussPoly::isotropic(vec![0.0, 0.0], 1.0).unwrap();
        let time = GaussPoly::isotropic(vec![0.0], 1.0).unwrap();
        let u = SpaceTimeGaussPoly::from_tensor(&space, &time).unwrap();
        let x = [0.3, 0.1];
        let a = extend_k(&u, &m, &x, 0.2, 0.6, 0.0, &q()).unwrap();
        let b = extend_k_kernel_route(&u, &m, &x, 0.2, 0.6, 0.0, &q()).unwrap();
        assert!(rel(a, b) < 1e-6, "{a} vs {b}");
    }

    #[test]
    fn dtn_matches_poisson_multiplier() {
        // s = 1/2 on the heat model: the quotient has multiplier 2π|ξ|e^{−2πz|ξ|}
        let m = ModelSpec::heat(1);
        let f = GaussPoly::isotropic(vec![0.0], PI).unwrap();
        let u = SpaceTimeGaussPoly::stationary(f.clone());
        let frac = frac_a(&f, &m, &[0.0], 0.5, &q()).unwrap();
        let mut errors = Vec::new();
        for z in [0.1, 0.05] {
            let d = dtn_k(&u, &m, &[0.0], 0.0, 0.5, z, &q()).unwrap();
            let oracle = quadrature::integrate_to_infinity(
                |xi| 4.0 * PI * xi * (-2.0 * PI * z * xi - PI * xi * xi).exp(),
                0.0,
                1e-14,
                1e-13,
                2000,
            )
            .unwrap()
            .value;
            assert!(rel(d, oracle) < 1e-9, "z={z}: {d} vs {oracle}");
            errors.push((d - frac).abs());
        }
        assert!((errors[0] / errors[1] - 2.0).abs() < 0.2);
    }

    #[test]
    fn kernel_residual_is_small() {
        let m = ModelSpec::heat(1);
        let field = ExtensionField::PoissonTimeKernel { y: vec![0.2] };
        let r = pde_residual(&m, 0.3, &field, &[0.5], 0.7, 0.6, DEFAULT_FD_STEP).unwrap();
        assert!(r < 1e-4, "{r}");
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [0.1, 0.2, 0.4];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(1.5)).collect();
        assert!((loglog_slope(&xs, &ys).unwrap() - 1.5).abs() < 1e-12);
    }
}
