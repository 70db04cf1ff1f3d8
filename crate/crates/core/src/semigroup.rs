//! The semigroup Pₜ and the evolutive semigroup P^𝒦_τ acting on
//! polynomial×Gaussian functions, their exact oracles, the resolvent and the
//! rate probe.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::covariance::GramianPair;
use crate::error::{check_dim, domain, invalid, Error, Result};
use crate::funcspace::{GaussPoly, SpaceTimeGaussPoly, IMAG_TOLERANCE};
use crate::matfun::{psd_sqrt, symmetrize, SpdFactor};
use crate::model::ModelSpec;
use crate::quadrature::{self, gauss_legendre, QuadratureConfig};

/// Nodes of the Gauss–Legendre rule used in the Duhamel form of Pₜf − f.
const DUHAMEL_NODES: usize = 32;

fn real_part(v: Complex64, scale: f64) -> Result<f64> {
    if v.im.abs() > IMAG_TOLERANCE * scale.max(v.re.abs()).max(f64::MIN_POSITIVE) {
        return Err(Error::NonReal(v.im));
    }
    Ok(v.re)
}

/// E[f(Y)] for Y ~ N(mean, cov), cov positive semidefinite.
///
/// The Gaussian factor of f is merged with the law of Y, so the remaining
/// integrand is the polynomial factor alone and a tensor Gauss–Hermite rule
/// with ⌊deg/2⌋ + 1 ≤ `max_nodes` nodes per dimension integrates it exactly.
/// Any center of f, real or complex, is supported.
pub fn gaussian_poly_expectation(
    f: &GaussPoly,
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    max_nodes: usize,
) -> Result<f64> {
    let n = f.dim();
    check_dim(n, mean.len())?;
    let shape_factor = SpdFactor::new(f.shape())?;
    let d = shape_factor.inverse() * 0.5;
    let log_det_d = -(n as f64) * std::f64::consts::LN_2 - shape_factor.log_det();
    let sum = symmetrize(&(cov + &d));
    let sum_factor = SpdFactor::new(&sum)?;
    let c = f.center();
    let diff: Vec<Complex64> = c.iter().zip(mean.iter()).map(|(ci, mi)| ci - mi).collect();
    let solved = sum_factor.solve_complex(&diff);
    let kappa: Complex64 = 0.5 * solved.iter().zip(&diff).map(|(a, b)| a * b).sum::<Complex64>();
    // μ − c = (m − c) + Σ(Σ + D)⁻¹(c − m)
    let base: Vec<Complex64> = (0..n)
        .map(|i| {
            let shift: Complex64 = (0..n).map(|j| solved[j] * cov[(i, j)]).sum();
            -diff[i] + shift
        })
        .collect();
    // S = Σ(Σ + D)⁻¹D, written as a difference from the smaller of Σ and D
    let s = if cov.trace() <= d.trace() {
        cov - cov * sum_factor.solve_matrix(cov)
    } else {
        &d - &d * sum_factor.solve_matrix(&d)
    };
    let root = psd_sqrt(&symmetrize(&s));
    let nodes = (f.degree() / 2 + 1).clamp(2, max_nodes.max(2));
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    let poly = f.poly();
    let zero = DVector::zeros(n);
    let mut bound = 0.0;
    let e = quadrature::gaussian_expectation_complex(&zero, &root, nodes, |w| {
        for i in 0..n {
            y[i] = base[i] + w[i];
        }
        let (v, b) = poly.eval_with_bound(&y);
        bound = f64::max(bound, b);
        v
    })?;
    let prefactor = f.amplitude() * (-0.5 * (sum_factor.log_det() - log_det_d) - kappa).exp();
    real_part(prefactor * e, prefactor.norm() * bound)
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return domain(format!("time must be nonnegative and finite, got {t}"));
    }
    Ok(())
}

/// Pₜf(X) with a precomputed Gramian pair.
pub fn apply_pt_with(pair: &GramianPair, f: &GaussPoly, x: &[f64], quad: &QuadratureConfig) -> Result<f64> {
    check_dim(f.dim(), x.len())?;
    let mean = &pair.exp_tb * DVector::from_column_slice(x);
    let cov = &pair.k * (2.0 * pair.t);
    gaussian_poly_expectation(f, &mean, &cov, quad.gh_nodes)
}

/// Pₜf(X) = E[f(e^{tB}X + W)], W ~ N(0, 2tK(t)); P₀f = f.
pub fn apply_pt(f: &GaussPoly, model: &ModelSpec, x: &[f64], t: f64, quad: &QuadratureConfig) -> Result<f64> {
    check_time(t)?;
    check_dim(model.dim(), f.dim())?;
    if t == 0.0 {
        return f.eval(x);
    }
    apply_pt_with(&GramianPair::new(model, t)?, f, x, quad)
}

/// Closed form of Pₜf(X) for a pure Gaussian f:
/// amp·det(I + 2ΣM)^{−1/2}·exp(−⟨(M⁻¹ + 2Σ)⁻¹(m − c), m − c⟩), m = e^{tB}X, Σ = 2tK(t).
pub fn apply_pt_gauss_exact(f: &GaussPoly, model: &ModelSpec, x: &[f64], t: f64) -> Result<f64> {
    if !f.is_pure_gaussian() {
        return invalid("the closed-form oracle needs a constant polynomial factor");
    }
    check_dim(model.dim(), f.dim())?;
    check_dim(model.dim(), x.len())?;
    check_time(t)?;
    if t == 0.0 {
        return f.eval(x);
    }
    let pair = GramianPair::new(model, t)?;
    let sigma = &pair.k * (2.0 * t);
    let m_factor = SpdFactor::new(f.shape())?;
    let inner = SpdFactor::new(&symmetrize(&(m_factor.inverse() + &sigma * 2.0)))?;
    // det(I + 2ΣM) = det(M⁻¹ + 2Σ)·det M
    let log_det = inner.log_det() + m_factor.log_det();
    let mean = &pair.exp_tb * DVector::from_column_slice(x);
    let r: Vec<Complex64> = mean.iter().zip(f.center()).map(|(m, c)| Complex64::new(*m, 0.0) - c).collect();
    let q = inner.inv_bilinear_complex(&r);
    let amp = f.amplitude() * f.poly().coeff(&vec![0; f.dim()]);
    let v = amp * (-0.5 * log_det - q).exp();
    real_part(v, v.norm())
}

/// Pₜf as a polynomial×Gaussian, through the transform identity
/// (Pₜf)^(ξ) = e^{−t·trB} e^{−4π²⟨C(t)ξ, ξ⟩} f̂(e^{−tB★}ξ).
pub fn pt_image_exact(f: &GaussPoly, model: &ModelSpec, t: f64) -> Result<GaussPoly> {
    check_dim(model.dim(), f.dim())?;
    check_time(t)?;
    if t == 0.0 {
        return Ok(f.clone());
    }
    let pair = GramianPair::new(model, t)?;
    let transformed = f
        .fourier()?
        .compose_linear(&pair.exp_minus_tb.transpose())?
        .mul_gaussian(&(&pair.c * (4.0 * PI * PI)))?
        .scale(Complex64::new((-t * model.trace_b()).exp(), 0.0));
    transformed.inverse_fourier()
}

/// Pₜf(X) by the transform route; an oracle independent of Gauss–Hermite.
pub fn apply_pt_fourier(f: &GaussPoly, model: &ModelSpec, x: &[f64], t: f64) -> Result<f64> {
    pt_image_exact(f, model, t)?.eval(x)
}

/// P^𝒦_τu as a space-time polynomial×Gaussian.
pub fn pk_image_exact(u: &SpaceTimeGaussPoly, model: &ModelSpec, tau: f64) -> Result<SpaceTimeGaussPoly> {
    match u {
        SpaceTimeGaussPoly::Stationary(f) => Ok(SpaceTimeGaussPoly::Stationary(pt_image_exact(f, model, tau)?)),
        SpaceTimeGaussPoly::Joint(g) => {
            let image = pt_image_exact(g, &model.extended(), tau)?;
            SpaceTimeGaussPoly::Joint(image).time_shift(tau)
        }
    }
}

/// P^𝒦_τu(X, t) = P_τ[u(·, t − τ)](X).
pub fn apply_pk(
    u: &SpaceTimeGaussPoly,
    model: &ModelSpec,
    x: &[f64],
    t: f64,
    tau: f64,
    quad: &QuadratureConfig,
) -> Result<f64> {
    check_dim(model.dim(), u.space_dim())?;
    check_time(tau)?;
    apply_pt(&u.slice(t - tau)?, model, x, tau, quad)
}

/// τ ↦ P^𝒦_τu(X, t) − u(X, t) at a fixed point, free of cancellation at small τ.
///
/// Up to a time scale set by the data the Duhamel form
/// Δ(τ) = τ∫₀¹ P^𝒦_{τθ}(𝒦u)(X, t)dθ is integrated by Gauss–Legendre;
/// beyond it the difference is taken directly.
#[derive(Debug, Clone)]
pub struct Increment {
    model: ModelSpec,
    u: SpaceTimeGaussPoly,
    ku: SpaceTimeGaussPoly,
    x: Vec<f64>,
    t: f64,
    u0: f64,
    duhamel_max: f64,
    quad: QuadratureConfig,
}

impl Increment {
    pub fn new(u: &SpaceTimeGaussPoly, model: &ModelSpec, x: &[f64], t: f64, quad: &QuadratureConfig) -> Result<Self> {
        check_dim(model.dim(), u.space_dim())?;
        check_dim(model.dim(), x.len())?;
        let lifted = match u {
            SpaceTimeGaussPoly::Stationary(f) => {
                let cap = f.degree_cap().max(f.degree() + 2);
                SpaceTimeGaussPoly::Stationary(f.clone().with_degree_cap(cap)?)
            }
            SpaceTimeGaussPoly::Joint(g) => {
                let cap = g.degree_cap().max(g.degree() + 2);
                SpaceTimeGaussPoly::Joint(g.clone().with_degree_cap(cap)?)
            }
        };
        let ku = lifted.apply_k(model)?;
        let (shape, joint) = match u {
            SpaceTimeGaussPoly::Stationary(f) => (f.shape().clone(), false),
            SpaceTimeGaussPoly::Joint(g) => (g.shape().clone(), true),
        };
        let m = shape.norm();
        let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut rate = 4.0 * model.q().norm() * m + model.b().norm() * (1.0 + 2.0 * xnorm * m.sqrt());
        if joint {
            rate += 2.0 * m.sqrt();
        }
        let duhamel_max = if rate > 0.0 { (1.0 / rate).min(quad.balakrishnan_split) } else { quad.balakrishnan_split };
        Ok(Self {
            model: model.clone(),
            u0: u.eval(x, t)?,
            u: u.clone(),
            ku,
            x: x.to_vec(),
            t,
            duhamel_max,
            quad: *quad,
        })
    }

    /// u(X, t).
    pub fn base_value(&self) -> f64 {
        self.u0
    }

    /// 𝒦u(X, t).
    pub fn generator_value(&self) -> Result<f64> {
        self.ku.eval(&self.x, self.t)
    }

    pub fn duhamel_max(&self) -> f64 {
        self.duhamel_max
    }

    pub fn value(&self, tau: f64) -> Result<f64> {
        check_time(tau)?;
        if tau == 0.0 {
            return Ok(0.0);
        }
        if tau > self.duhamel_max {
            return Ok(apply_pk(&self.u, &self.model, &self.x, self.t, tau, &self.quad)? - self.u0);
        }
        let rule = gauss_legendre(DUHAMEL_NODES);
        let mut sum = 0.0;
        for (node, weight) in rule.nodes.iter().zip(&rule.weights) {
            let s = 0.5 * tau * (node + 1.0);
            sum += weight * apply_pk(&self.ku, &self.model, &self.x, self.t, s, &self.quad)?;
        }
        Ok(0.5 * tau * sum)
    }
}

/// R(λ)f(X) = ∫₀^∞ e^{−λt}Pₜf(X)dt for Re λ > 0.
///
/// Since ‖Pₜf‖_∞ ≤ ‖f‖_∞, the integral is truncated at the T where
/// e^{−Re λ·T}·sup|f|/Re λ falls below `tail_cut`.
pub fn resolvent_apply(
    f: &GaussPoly,
    model: &ModelSpec,
    lambda: Complex64,
    x: &[f64],
    quad: &QuadratureConfig,
) -> Result<Complex64> {
    if !(lambda.re > 0.0) {
        return domain(format!("resolvent needs Re(lambda) > 0, got {lambda}"));
    }
    check_dim(model.dim(), x.len())?;
    let bound = f.sup_bound();
    let horizon = ((bound / (lambda.re * quad.tail_cut)).ln() / lambda.re).max(1.0 / lambda.re);
    let mut failure = None;
    let mut pt = |t: f64| -> f64 {
        match apply_pt(f, model, x, t, quad) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        }
    };
    let re = quadrature::integrate(
        |t| (-lambda.re * t).exp() * (lambda.im * t).cos() * pt(t),
        0.0,
        horizon,
        quad.abs_tol,
        quad.rel_tol,
        quad.max_subdiv,
    );
    let im = if lambda.im == 0.0 {
        Ok(quadrature::Integral { value: 0.0, error: 0.0, evaluations: 0 })
    } else {
        quadrature::integrate(
            |t| -(-lambda.re * t).exp() * (lambda.im * t).sin() * pt(t),
            0.0,
            horizon,
            quad.abs_tol,
            quad.rel_tol,
            quad.max_subdiv,
        )
    };
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(Complex64::new(re?.value, im?.value))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateEntry {
    pub t: f64,
    pub sup_increment: f64,
    pub bound: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub sup_generator: f64,
    pub entries: Vec<RateEntry>,
    /// Log-log slope of sup|Pₜf − f| between the two smallest times.
    pub small_time_slope: Option<f64>,
    pub passed: bool,
}

pub const RATE_TOLERANCE: f64 = 1e-6;

/// Checks sup|Pₜf − f| ≤ sup|𝒜f|·t + tolerance over the grid (sup-norm case,
/// where the factor max{1, e^{−trB/p}} equals 1).
pub fn rate_check(
    f: &GaussPoly,
    model: &ModelSpec,
    t_grid: &[f64],
    x_grid: &[Vec<f64>],
    quad: &QuadratureConfig,
) -> Result<RateReport> {
    if t_grid.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
        return domain("rate_check times must lie in (0, 1]");
    }
    if x_grid.is_empty() {
        return domain("rate_check needs at least one point");
    }
    let cap = f.degree_cap().max(f.degree() + 2);
    let af = f.clone().with_degree_cap(cap)?.apply_a(model)?;
    let mut sup_generator = 0.0f64;
    for x in x_grid {
        sup_generator = sup_generator.max(af.eval(x)?.abs());
    }
    let u = SpaceTimeGaussPoly::stationary(f.clone());
    let increments: Vec<Increment> =
        x_grid.iter().map(|x| Increment::new(&u, model, x, 0.0, quad)).collect::<Result<_>>()?;
    let mut entries = Vec::new();
    for &t in t_grid {
        let mut sup = 0.0f64;
        for inc in &increments {
            sup = sup.max(inc.value(t)?.abs());
        }
        let bound = sup_generator * t;
        entries.push(RateEntry { t, sup_increment: sup, bound, margin: bound + RATE_TOLERANCE - sup });
    }
    let mut sorted = entries.clone();
    sorted.sort_by(|a, b| a.t.total_cmp(&b.t));
    let small_time_slope = (sorted.len() >= 2 && sorted[0].sup_increment > 0.0 && sorted[1].sup_increment > 0.0)
        .then(|| (sorted[1].sup_increment.ln() - sorted[0].sup_increment.ln()) / (sorted[1].t.ln() - sorted[0].t.ln()));
    let passed = entries.iter().all(|e| e.margin >= 0.0);
    Ok(RateReport { sup_generator, entries, small_time_slope, passed })
}
