//! Verification suites: named checks with a measured value, a tolerance and
//! a verdict. Checks run in parallel and are reported in a fixed order.

use std::f64::consts::PI;

use hypokernel::covariance::gramian_c_quadrature;
use hypokernel::extension::{
    default_z_grid, dtn_from_increment, dtn_sweep, extend_k_kernel_route, extension_from_increment, loglog_slope,
    DEFAULT_FD_STEP,
};
use hypokernel::fractional::frac_k_report;
use hypokernel::kernels::{
    bessel_heat_kernel, chapman_kolmogorov_residual, hormander_kernel, kernel_mass_x, kernel_mass_y,
    kolmogorov_discrepancy_report, poisson_space_kernel, KolmogorovPoint,
};
use hypokernel::quadrature::{integrate_real_line, integrate_to_infinity};
use hypokernel::semigroup::{apply_pt_fourier, apply_pt_gauss_exact, pk_image_exact, pt_image_exact, rate_check};
use hypokernel::special::gamma;
use hypokernel::{
    apply_pk, apply_pt, extend_a, extend_k, frac_a, frac_heat_oracle, frac_k, hypo_report, lyapunov_residual, mat_exp,
    pde_residual, resolvent_apply, Complex64, ExtensionField, GaussPoly, GramianPair, Increment, KernelForm, ModelSpec,
    QuadratureConfig, Result, SpaceTimeGaussPoly,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;

/// The suite orders used when the configuration does not fix s.
pub const DEFAULT_ORDERS: [f64; 3] = [0.25, 0.5, 0.75];

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Kernels,
    Semigroup,
    Fractional,
    Extension,
    All,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Kernels => "kernels",
            Suite::Semigroup => "semigroup",
            Suite::Fractional => "fractional",
            Suite::Extension => "extension",
            Suite::All => "all",
        }
    }

    pub fn members(self) -> Vec<Suite> {
        match self {
            Suite::All => vec![Suite::Kernels, Suite::Semigroup, Suite::Fractional, Suite::Extension],
            s => vec![s],
        }
    }

    /// Suites built on the kernel or on fractional powers need a hypoelliptic model.
    pub fn needs_hypoellipticity(self) -> bool {
        !matches!(self, Suite::Semigroup)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    pub fn at_most(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self { name: name.into(), measured, tolerance, passed: measured <= tolerance, note: None }
    }

    pub fn at_least(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self { name: name.into(), measured, tolerance, passed: measured >= tolerance, note: None }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    fn errored(name: impl Into<String>, error: &hypokernel::Error) -> Self {
        Self {
            name: name.into(),
            measured: f64::NAN,
            tolerance: f64::NAN,
            passed: false,
            note: Some(error.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<Check>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub dim: usize,
    pub is_hypoelliptic: bool,
    pub suites: Vec<SuiteReport>,
    pub passed: bool,
}

/// Everything a check needs, derived once from the configuration.
pub struct Context {
    pub model: ModelSpec,
    pub quad: QuadratureConfig,
    pub f: GaussPoly,
    pub u: SpaceTimeGaussPoly,
    pub orders: Vec<f64>,
}

impl Context {
    pub fn from_config(config: &RunConfig) -> Result<Self> {
        Ok(Self {
            model: config.model.clone(),
            quad: config.quadrature,
            f: config.space_function()?,
            u: config.space_time_function()?,
            orders: config.order().map_or_else(|| DEFAULT_ORDERS.to_vec(), |s| vec![s]),
        })
    }

    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn is_heat(&self) -> bool {
        self.model == ModelSpec::heat(self.dim())
    }

    fn kolmogorov_blocks(&self) -> Option<usize> {
        let n = self.dim();
        (n.is_multiple_of(2) && self.model == ModelSpec::kolmogorov(n / 2)).then_some(n / 2)
    }

    /// Gauss–Hermite nodes per dimension with at most ~2·10⁵ tensor points.
    fn gh_nodes(&self) -> usize {
        let cap = (2e5f64).powf(1.0 / self.dim() as f64).floor() as usize;
        self.quad.gh_nodes.min(cap).max(2)
    }

    fn sup_u(&self) -> f64 {
        match &self.u {
            SpaceTimeGaussPoly::Stationary(f) => f.sup_bound(),
            SpaceTimeGaussPoly::Joint(g) => g.sup_bound(),
        }
    }
}

/// Deterministic points of the Halton sequence, scaled to [−1, 1]^dim.
pub fn halton(index: usize, dim: usize) -> Vec<f64> {
    const PRIMES: [usize; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    (0..dim)
        .map(|d| {
            let base = PRIMES[d % PRIMES.len()];
            let (mut i, mut f, mut r) = (index + 1, 1.0, 0.0);
            while i > 0 {
                f /= base as f64;
                r += f * (i % base) as f64;
                i /= base;
            }
            2.0 * r - 1.0
        })
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

type CheckFn = Box<dyn Fn(&Context) -> Result<Vec<Check>> + Send + Sync>;

fn run(name: &'static str, checks: Vec<(&'static str, CheckFn)>, ctx: &Context) -> SuiteReport {
    let results: Vec<Vec<Check>> = checks
        .par_iter()
        .map(|(label, check)| check(ctx).unwrap_or_else(|e| vec![Check::errored(*label, &e)]))
        .collect();
    let checks: Vec<Check> = results.into_iter().flatten().collect();
    let passed = checks.iter().all(|c| c.passed);
    SuiteReport { suite: name.into(), checks, passed }
}

fn one(check: Check) -> Result<Vec<Check>> {
    Ok(vec![check])
}

fn kernel_checks() -> Vec<(&'static str, CheckFn)> {
    vec![
        (
            "kalman_rank",
            Box::new(|c: &Context| {
                let r = hypo_report(&c.model, &hypokernel::covariance::DEFAULT_SAMPLE_TIMES)?;
                let mut check = Check::at_least("kalman_rank", r.kalman_rank as f64, c.dim() as f64);
                check.passed = r.is_hypoelliptic && r.kalman_rank == c.dim();
                one(check)
            }),
        ),
        (
            "det_k",
            Box::new(|c: &Context| {
                let mut worst = 0.0f64;
                if let Some(n) = c.kolmogorov_blocks() {
                    for t in [0.1, 1.0, 10.0] {
                        let det = GramianPair::new(&c.model, t)?.k_factor()?.log_det().exp();
                        worst = worst.max(rel(det, (t * t / 12.0).powi(n as i32)));
                    }
                    return one(Check::at_most("det_k_closed_form", worst, 1e-10));
                }
                for t in [0.1, 1.0] {
                    let det = GramianPair::new(&c.model, t)?.k_factor()?.log_det().exp();
                    let cq = gramian_c_quadrature(&c.model, t, 1e-14, 1e-13)?;
                    let e = mat_exp(c.model.b(), t)?;
                    let k = &e * cq * e.transpose() / t;
                    worst = worst.max(rel(det, k.determinant()));
                }
                one(Check::at_most("det_k_quadrature", worst, 1e-8))
            }),
        ),
        (
            "kernel_forms",
            Box::new(|c: &Context| {
                let n = c.dim();
                let mut worst = 0.0f64;
                for i in 0..50 {
                    let (x, y) = (halton(2 * i, n), halton(2 * i + 1, n));
                    let t = [0.1, 0.5, 1.0][i % 3];
                    let k = hormander_kernel(&c.model, &x, &y, t, KernelForm::K)?;
                    let cf = hormander_kernel(&c.model, &x, &y, t, KernelForm::C)?;
                    if k > 1e-200 {
                        worst = worst.max(rel(cf, k));
                    }
                }
                one(Check::at_most("kernel_forms", worst, 1e-10))
            }),
        ),
        (
            "chapman_kolmogorov",
            Box::new(|c: &Context| {
                let n = c.dim();
                let mut worst = 0.0f64;
                for i in 0..5 {
                    let (x, y) = (halton(2 * i, n), halton(2 * i + 1, n));
                    worst = worst.max(chapman_kolmogorov_residual(&c.model, &x, &y, 0.3, 0.6, c.gh_nodes())?);
                }
                one(Check::at_most("chapman_kolmogorov", worst, 1e-6))
            }),
        ),
        (
            "mass",
            Box::new(|c: &Context| {
                let n = c.dim();
                let (mut wy, mut wx) = (0.0f64, 0.0f64);
                for t in [0.1, 1.0] {
                    for i in 0..3 {
                        let p = halton(i, n);
                        wy = wy.max((kernel_mass_y(&c.model, &p, t, c.gh_nodes())? - 1.0).abs());
                        let expected = (-t * c.model.trace_b()).exp();
                        wx = wx.max((kernel_mass_x(&c.model, &p, t, c.gh_nodes())? - expected).abs());
                    }
                }
                Ok(vec![Check::at_most("mass_over_y", wy, 1e-8), Check::at_most("mass_over_x", wx, 1e-8)])
            }),
        ),
        (
            "lyapunov",
            Box::new(|c: &Context| {
                let r = lyapunov_residual(&c.model, 0.1)?.max(lyapunov_residual(&c.model, 1.0)?);
                one(Check::at_most("lyapunov_residual", r, 1e-10))
            }),
        ),
        (
            "kolmogorov_explicit",
            Box::new(|c: &Context| {
                let Some(n) = c.kolmogorov_blocks() else { return Ok(vec![]) };
                let points: Vec<KolmogorovPoint> = (0..20)
                    .map(|i| {
                        let p = halton(i, 4 * n + 1);
                        let t = 0.2 + 0.9 * (p[4 * n] + 1.0);
                        (p[..n].to_vec(), p[n..2 * n].to_vec(), p[2 * n..3 * n].to_vec(), p[3 * n..4 * n].to_vec(), t)
                    })
                    .collect();
                let r = kolmogorov_discrepancy_report(n, &points)?;
                let note = if r.literal_agrees {
                    "literal reading of the displayed kernel agrees".to_string()
                } else {
                    format!("literal reading disagrees: max rel {:e}", r.max_rel_literal_vs_explicit)
                };
                one(Check::at_most("kolmogorov_explicit", r.max_rel_explicit_vs_general, 1e-8).with_note(note))
            }),
        ),
        ("bessel", Box::new(|c: &Context| bessel_checks(&c.quad))),
        (
            "poisson_mass",
            Box::new(|c: &Context| {
                if c.dim() != 1 {
                    return Ok(vec![]);
                }
                // the kernel decays like |Y|^{a−2}, so the inner integral must be
                // accurate relative to its own size far out
                let inner = QuadratureConfig { abs_tol: 1e-200, ..c.quad };
                let mut worst = 0.0f64;
                for a in [0.0, -0.5] {
                    let mut failure = None;
                    let mass = integrate_real_line(
                        |y| {
                            poisson_space_kernel(&c.model, a, &[0.2], &[y], 0.8, &inner).unwrap_or_else(|e| {
                                failure.get_or_insert(e);
                                0.0
                            })
                        },
                        1e-11,
                        1e-11,
                        c.quad.max_subdiv,
                    )?;
                    if let Some(e) = failure {
                        return Err(e);
                    }
                    worst = worst.max((mass.value - 1.0).abs());
                }
                one(Check::at_most("poisson_kernel_mass", worst, 1e-7))
            }),
        ),
        (
            "cauchy",
            Box::new(|c: &Context| {
                let v = poisson_space_kernel(&ModelSpec::heat(1), 0.0, &[0.0], &[1.0], 1.0, &c.quad)?;
                one(Check::at_most("cauchy_kernel", rel(v, 1.0 / (2.0 * PI)), 1e-6))
            }),
        ),
    ]
}

/// ∫₀^∞ h(ζ)ζ^a dζ with ζ = w^{1/(1+a)}, which turns the weight into dw/(1+a).
fn weighted_half_line<F: FnMut(f64) -> f64>(mut h: F, a: f64, quad: &QuadratureConfig) -> Result<f64> {
    let p = 1.0 / (1.0 + a);
    Ok(integrate_to_infinity(|w| h(w.powf(p)) * p, 0.0, quad.abs_tol, quad.rel_tol, quad.max_subdiv)?.value)
}

fn bessel_checks(quad: &QuadratureConfig) -> Result<Vec<Check>> {
    let mut mass = 0.0f64;
    let mut reproducing = 0.0f64;
    let mut profile = 0.0f64;
    for a in [-0.5, 0.0, 0.5] {
        let m = weighted_half_line(|zeta| bessel_heat_kernel(a, 0.7, zeta, 0.4).unwrap_or(f64::NAN), a, quad)?;
        mass = mass.max((m - 1.0).abs());
        let (z, zeta, t, s) = (0.6, 1.1, 0.3, 0.5);
        let lhs = weighted_half_line(
            |xi| {
                bessel_heat_kernel(a, z, xi, t).unwrap_or(f64::NAN)
                    * bessel_heat_kernel(a, xi, zeta, s).unwrap_or(f64::NAN)
            },
            a,
            quad,
        )?;
        reproducing = reproducing.max(rel(lhs, bessel_heat_kernel(a, z, zeta, t + s)?));
        // ∫₀^∞ z^{1−a}t^{−(3−a)/2}e^{−z²/4t}dt = 2^{1−a}Γ((1−a)/2), here at z = 1
        let integral = integrate_to_infinity(
            |t| if t == 0.0 { 0.0 } else { t.powf(-(3.0 - a) / 2.0) * (-1.0 / (4.0 * t)).exp() },
            0.0,
            1e-15,
            1e-14,
            quad.max_subdiv,
        )?
        .value;
        profile = profile.max(rel(integral, 2f64.powf(1.0 - a) * gamma((1.0 - a) / 2.0)));
    }
    Ok(vec![
        Check::at_most("bessel_kernel_mass", mass, 1e-8),
        Check::at_most("bessel_reproducing", reproducing, 1e-6),
        Check::at_most("profile_normalization", profile, 1e-10),
    ])
}

fn gaussian_part(f: &GaussPoly) -> Result<GaussPoly> {
    let center =
        f.real_center().ok_or_else(|| hypokernel::Error::Invalid("test function needs a real center".into()))?;
    GaussPoly::gaussian(center, f.shape().clone())
}

fn semigroup_checks() -> Vec<(&'static str, CheckFn)> {
    vec![
        (
            "gaussian_oracle",
            Box::new(|c: &Context| {
                let g = gaussian_part(&c.f)?;
                let mut worst = 0.0f64;
                for t in [0.1, 1.0] {
                    for i in 0..5 {
                        let x = halton(i, c.dim());
                        let exact = apply_pt_gauss_exact(&g, &c.model, &x, t)?;
                        worst = worst.max(rel(apply_pt(&g, &c.model, &x, t, &c.quad)?, exact));
                    }
                }
                one(Check::at_most("gaussian_oracle", worst, 1e-10))
            }),
        ),
        (
            "fourier_route",
            Box::new(|c: &Context| {
                let mut worst = 0.0f64;
                for t in [0.1, 1.0] {
                    for i in 0..5 {
                        let x = halton(i, c.dim());
                        let a = apply_pt(&c.f, &c.model, &x, t, &c.quad)?;
                        worst = worst.max((a - apply_pt_fourier(&c.f, &c.model, &x, t)?).abs() / c.f.sup_bound());
                    }
                }
                one(Check::at_most("fourier_route", worst, 1e-10).with_note("error relative to the sup bound of f"))
            }),
        ),
        (
            "semigroup_law",
            Box::new(|c: &Context| {
                let (s, t) = (0.3, 0.5);
                let image = pt_image_exact(&c.f, &c.model, t)?;
                let mut worst = 0.0f64;
                for i in 0..5 {
                    let x = halton(i, c.dim());
                    let lhs = apply_pt(&image, &c.model, &x, s, &c.quad)?;
                    let rhs = apply_pt(&c.f, &c.model, &x, s + t, &c.quad)?;
                    worst = worst.max((lhs - rhs).abs() / rhs.abs().max(1e-3 * c.f.sup_bound()));
                }
                one(Check::at_most("semigroup_law", worst, 1e-7))
            }),
        ),
        (
            "rate_lemma",
            Box::new(|c: &Context| {
                let grid: Vec<Vec<f64>> = (0..9).map(|i| halton(i, c.dim())).collect();
                let r = rate_check(&c.f, &c.model, &[1e-3, 1e-2, 1e-1], &grid, &c.quad)?;
                let margin = r.entries.iter().map(|e| e.margin).fold(f64::INFINITY, f64::min);
                one(Check::at_least("rate_lemma_margin", margin, 0.0))
            }),
        ),
        (
            "resolvent",
            Box::new(|c: &Context| {
                let lambda = Complex64::new(1.0, 0.0);
                let af = c.f.apply_a(&c.model)?;
                let g = c.f.scale(lambda).sub(&af)?;
                let (mut identity, mut sup) = (0.0f64, 0.0f64);
                for i in 0..3 {
                    let x = halton(i, c.dim());
                    let rg = resolvent_apply(&g, &c.model, lambda, &x, &c.quad)?;
                    identity = identity.max((rg.re - c.f.eval(&x)?).abs());
                    sup = sup.max(resolvent_apply(&c.f, &c.model, lambda, &x, &c.quad)?.norm());
                }
                Ok(vec![
                    Check::at_most("resolvent_identity", identity, 1e-6),
                    Check::at_most("resolvent_bound", sup, c.f.sup_bound() / lambda.re + 1e-6),
                ])
            }),
        ),
        (
            "evolutive",
            Box::new(|c: &Context| {
                if matches!(c.u, SpaceTimeGaussPoly::Stationary(_)) {
                    return Ok(vec![]);
                }
                let mut worst = 0.0f64;
                for (i, tau) in [0.2, 0.7].into_iter().enumerate() {
                    let x = halton(i, c.dim());
                    let exact = pk_image_exact(&c.u, &c.model, tau)?.eval(&x, 0.3)?;
                    let v = apply_pk(&c.u, &c.model, &x, 0.3, tau, &c.quad)?;
                    worst = worst.max((v - exact).abs() / exact.abs().max(1e-3 * c.sup_u()));
                }
                one(Check::at_most("evolutive_semigroup", worst, 1e-10))
            }),
        ),
    ]
}

/// τ ↦ ∫p(X, Y, τ)dY − 1. Below the split the rate bound |Pτ1 − 1| ≤ τ‖𝒜1‖ = 0
/// gives the increment exactly; past it the mass is integrated.
fn constant_increment(c: &Context, x: Vec<f64>) -> impl FnMut(f64) -> Result<f64> + '_ {
    move |tau| {
        if tau <= c.quad.balakrishnan_split {
            return Ok(0.0);
        }
        Ok(kernel_mass_y(&c.model, &x, tau, c.gh_nodes())? - 1.0)
    }
}

fn fractional_checks() -> Vec<(&'static str, CheckFn)> {
    vec![
        (
            "constant_input",
            Box::new(|c: &Context| {
                let mut worst = 0.0f64;
                for &s in &c.orders {
                    let x = halton(0, c.dim());
                    let t = hypokernel::fractional::truncation_point(s, 1.0, &c.model, &c.quad);
                    let r = hypokernel::fractional::balakrishnan(constant_increment(c, x), s, 0.0, 1.0, t, &c.quad)?;
                    worst = worst.max(r.value.abs());
                }
                one(Check::at_most("constant_input", worst, 1e-10))
            }),
        ),
        (
            "heat_oracle",
            Box::new(|c: &Context| {
                if !c.is_heat() || c.dim() > 2 {
                    return Ok(vec![]);
                }
                let mut checks = Vec::new();
                let mut worst = 0.0f64;
                for s in DEFAULT_ORDERS {
                    for i in 0..3 {
                        let x = halton(i, c.dim());
                        let a = frac_a(&c.f, &c.model, &x, s, &c.quad)?;
                        worst = worst.max((a - frac_heat_oracle(&c.f, &x, s, &c.quad)?).abs());
                    }
                }
                checks.push(Check::at_most("heat_multiplier_oracle", worst, 1e-4));
                if c.dim() == 1 {
                    let g = GaussPoly::isotropic(vec![0.0], PI)?;
                    let v = frac_a(&g, &c.model, &[0.0], 0.5, &c.quad)?;
                    checks.push(Check::at_most("half_power_of_normalized_gaussian", (v - 2.0).abs(), 1e-4));
                }
                Ok(checks)
            }),
        ),
        (
            "time_independent",
            Box::new(|c: &Context| {
                let mut worst = 0.0f64;
                let x = halton(1, c.dim());
                for &s in &c.orders {
                    let a = frac_a(&c.f, &c.model, &x, s, &c.quad)?;
                    let k = frac_k(&SpaceTimeGaussPoly::stationary(c.f.clone()), &c.model, &x, 0.4, s, &c.quad)?;
                    worst = worst.max(rel(k, a));
                }
                one(Check::at_most("time_independent_consistency", worst, 1e-8))
            }),
        ),
        (
            "self_convergence",
            Box::new(|c: &Context| {
                let mut worst = 0.0f64;
                let x = halton(2, c.dim());
                for &s in &c.orders {
                    let coarse = frac_k(&c.u, &c.model, &x, 0.1, s, &c.quad)?;
                    let fine = frac_k(&c.u, &c.model, &x, 0.1, s, &c.quad.refined())?;
                    worst = worst.max(rel(coarse, fine));
                }
                one(Check::at_most("self_convergence", worst, 1e-7))
            }),
        ),
        (
            "maximum_principle",
            Box::new(|c: &Context| {
                let g = gaussian_part(&c.f)?;
                let center = g.real_center().unwrap_or_default();
                let mut least = f64::INFINITY;
                for &s in &c.orders {
                    least = least.min(frac_a(&g, &c.model, &center, s, &c.quad)?);
                }
                let mut check = Check::at_least("positive_at_maximum", least, 0.0);
                check.passed = least > 0.0;
                one(check)
            }),
        ),
        (
            "tail_bound",
            Box::new(|c: &Context| {
                let mut worst = 0.0f64;
                let x = halton(0, c.dim());
                for &s in &c.orders {
                    let r = frac_k_report(&c.u, &c.model, &x, 0.0, s, &c.quad)?;
                    worst = worst.max(rel(r.tail_bound, 2.0 * c.sup_u() * r.truncation.powf(-s) / s));
                }
                one(Check::at_most("tail_bound_formula", worst, 1e-14))
            }),
        ),
    ]
}

fn extension_checks() -> Vec<(&'static str, CheckFn)> {
    vec![
        (
            "constant_data",
            Box::new(|c: &Context| {
                let s = c.orders[0];
                let x = halton(0, c.dim());
                let t = hypokernel::fractional::truncation_point(s, 1.0, &c.model, &c.quad);
                let mut worst = 0.0f64;
                for z in [0.1, 1.0] {
                    // the increment vanishes identically, so its limit is 0
                    let d = extension_from_increment(|tau| mass_increment(c, &x, tau), s, z, 0.0, t, &c.quad)?;
                    worst = worst.max(d.abs());
                }
                let dtn = dtn_from_increment(|tau| mass_increment(c, &x, tau), s, 0.2, 0.0, t, &c.quad)?;
                Ok(vec![
                    Check::at_most("constant_extension", worst, 1e-9),
                    Check::at_most("constant_dtn", dtn.value.abs(), 1e-9),
                ])
            }),
        ),
        (
            "route_agreement",
            Box::new(|c: &Context| {
                let a = 1.0 - 2.0 * c.orders[0];
                let x = halton(3, c.dim());
                let v = extend_k(&c.u, &c.model, &x, 0.2, 0.6, a, &c.quad)?;
                let w = extend_k_kernel_route(&c.u, &c.model, &x, 0.2, 0.6, a, &c.quad)?;
                one(Check::at_most("route_agreement", rel(w, v), 1e-6))
            }),
        ),
        (
            "stationary_consistency",
            Box::new(|c: &Context| {
                let a = 1.0 - 2.0 * c.orders[0];
                let x = halton(4, c.dim());
                let ua = extend_a(&c.f, &c.model, &x, 0.5, a, &c.quad)?;
                let uk = extend_k(&SpaceTimeGaussPoly::stationary(c.f.clone()), &c.model, &x, 0.7, 0.5, a, &c.quad)?;
                one(Check::at_most("stationary_consistency", rel(uk, ua), 1e-7))
            }),
        ),
        ("dirichlet", Box::new(dirichlet_checks)),
        (
            "dtn",
            Box::new(|c: &Context| {
                let x = halton(0, c.dim());
                let mut checks = Vec::new();
                for &s in &c.orders {
                    let a = 1.0 - 2.0 * s;
                    let sweep = dtn_sweep(&c.u, &c.model, &x, 0.1, s, &default_z_grid(), &c.quad)?;
                    let mut decreasing =
                        Check::at_least(format!("dtn_decreasing_s{s}"), sweep.is_decreasing() as u8 as f64, 1.0);
                    decreasing.passed = sweep.is_decreasing();
                    checks.push(decreasing);
                    checks.push(Check::at_most(format!("dtn_final_error_s{s}"), sweep.final_error(), 1e-3));
                    checks.push(Check::at_least(format!("dtn_order_s{s}"), sweep.order, (1.0 - a).min(1.0 + a) - 0.2));
                }
                Ok(checks)
            }),
        ),
        (
            "pde_residual",
            Box::new(|c: &Context| {
                let a = 1.0 - 2.0 * c.orders[0];
                let n = c.dim();
                let kernel = ExtensionField::PoissonTimeKernel { y: halton(5, n).iter().map(|v| 0.3 * v).collect() };
                let rk = pde_residual(&c.model, a, &kernel, &halton(6, n), 0.5, 0.5, DEFAULT_FD_STEP)?;
                let field = ExtensionField::ExtendK { u: &c.u, quad: c.quad };
                let ru = pde_residual(&c.model, a, &field, &halton(7, n), 0.1, 0.5, DEFAULT_FD_STEP)?;
                let mut checks = vec![
                    Check::at_most("pde_residual_kernel", rk, 1e-4),
                    Check::at_most("pde_residual_extend_k", ru, 1e-3),
                ];
                if c.is_heat() && n == 1 {
                    let phi = GaussPoly::isotropic(vec![0.0], PI)?;
                    let u = extend_a(&phi, &c.model, &[0.0], 1.0, 0.0, &c.quad)?;
                    let cauchy = integrate_real_line(
                        |y| (-PI * y * y).exp() / (PI * (1.0 + y * y)),
                        1e-14,
                        1e-13,
                        c.quad.max_subdiv,
                    )?
                    .value;
                    checks.push(Check::at_most("harmonic_extension", rel(u, cauchy), 1e-5));
                    let field = ExtensionField::ExtendA { phi: &phi, quad: c.quad };
                    let ra = pde_residual(&c.model, 0.0, &field, &[0.3], 0.0, 0.7, DEFAULT_FD_STEP)?;
                    checks.push(Check::at_most("pde_residual_extend_a", ra, 1e-4));
                }
                Ok(checks)
            }),
        ),
        (
            "mean_value_bound",
            Box::new(|c: &Context| {
                if c.model.trace_b() < 0.0 {
                    return Ok(vec![]);
                }
                let a = 1.0 - 2.0 * c.orders[0];
                let mut sup = 0.0f64;
                for i in 0..3 {
                    for z in [0.1, 0.5, 1.0] {
                        sup = sup.max(extend_k(&c.u, &c.model, &halton(i, c.dim()), 0.1, z, a, &c.quad)?.abs());
                    }
                }
                one(Check::at_most("mean_value_bound", sup, c.sup_u() + 1e-8))
            }),
        ),
        (
            "smoothness",
            Box::new(|c: &Context| {
                let a = 1.0 - 2.0 * c.orders[0];
                let x = halton(1, c.dim());
                let fine = c.quad.refined();
                let curvature = |z: f64, q: &QuadratureConfig| -> Result<f64> {
                    let h = 0.05 * z;
                    let u = |z| extend_k(&c.u, &c.model, &x, 0.1, z, a, q);
                    Ok((u(z + h)? - 2.0 * u(z)? + u(z - h)?) / (h * h))
                };
                let mut change = 0.0f64;
                let mut largest = 0.0f64;
                for z in [0.1, 0.5, 1.0, 2.0] {
                    let (k1, k2) = (curvature(z, &c.quad)?, curvature(z, &fine)?);
                    largest = largest.max(k1.abs());
                    change = change.max((k1 - k2).abs() / k1.abs().max(1.0));
                }
                let mut check = Check::at_most("curvature_stability", change, 1e-6);
                check.passed &= largest.is_finite();
                one(check.with_note(format!("max |d2U/dz2| = {largest:e}")))
            }),
        ),
    ]
}

fn mass_increment(c: &Context, x: &[f64], tau: f64) -> Result<f64> {
    Ok(kernel_mass_y(&c.model, x, tau, c.gh_nodes())? - 1.0)
}

/// Dirichlet traces over an X-grid: sup, ℓ¹ and ℓ² norms of U − u per z,
/// each with its observed order. The ℓᵖ norms are discrete proxies for the
/// continuum norms.
fn dirichlet_checks(c: &Context) -> Result<Vec<Check>> {
    let zs = default_z_grid();
    let grid: Vec<Vec<f64>> = (0..3).map(|i| halton(i, c.dim())).collect();
    let increments =
        grid.iter().map(|x| Increment::new(&c.u, &c.model, x, 0.1, &c.quad)).collect::<Result<Vec<_>>>()?;
    let mut checks = Vec::new();
    for &s in &c.orders {
        let a = 1.0 - 2.0 * s;
        let truncation = hypokernel::fractional::truncation_point(s, c.sup_u(), &c.model, &c.quad);
        let (mut sup, mut l1, mut l2) = (Vec::new(), Vec::new(), Vec::new());
        for &z in &zs {
            let errs = increments
                .iter()
                .map(|inc| {
                    extension_from_increment(|tau| inc.value(tau), s, z, -inc.base_value(), truncation, &c.quad)
                        .map(f64::abs)
                })
                .collect::<Result<Vec<_>>>()?;
            sup.push(errs.iter().cloned().fold(0.0, f64::max));
            l1.push(errs.iter().sum::<f64>());
            l2.push(errs.iter().map(|e| e * e).sum::<f64>().sqrt());
        }
        for (label, data) in [("sup", &sup), ("l1", &l1), ("l2", &l2)] {
            let order = loglog_slope(&zs, data)?;
            let mut check = Check::at_most(format!("dirichlet_order_{label}_s{s}"), (order - (1.0 - a)).abs(), 0.15);
            if label != "sup" {
                check = check.with_note("discrete norm over the X-grid, a proxy for the continuum norm");
            }
            checks.push(check);
        }
    }
    Ok(checks)
}

/// Runs the requested suites. Suites that need a hypoelliptic model are
/// expected to have been gated by the caller.
pub fn verify(config: &RunConfig, suite: Suite) -> Result<VerifyReport> {
    let ctx = Context::from_config(config)?;
    let report = hypo_report(&ctx.model, &hypokernel::covariance::DEFAULT_SAMPLE_TIMES)?;
    let suites: Vec<SuiteReport> = suite
        .members()
        .into_iter()
        .map(|s| {
            let checks = match s {
                Suite::Kernels => kernel_checks(),
                Suite::Semigroup => semigroup_checks(),
                Suite::Fractional => fractional_checks(),
                Suite::Extension => extension_checks(),
                Suite::All => unreachable!("expanded by members"),
            };
            run(s.name(), checks, &ctx)
        })
        .collect();
    let passed = suites.iter().all(|s| s.passed);
    Ok(VerifyReport { dim: ctx.dim(), is_hypoelliptic: report.is_hypoelliptic, suites, passed })
}
