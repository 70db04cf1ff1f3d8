//! Fractional powers (−𝒜)ˢ and (−𝒦)ˢ by the Balakrishnan formula
//! −(s/Γ(1−s))∫₀^∞ τ^{−1−s}[P_τu − u]dτ, and a Fourier-multiplier oracle for
//! the heat model.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{check_dim, domain, Error, Result};
use crate::funcspace::{GaussPoly, SpaceTimeGaussPoly};
use crate::model::ModelSpec;
use crate::quadrature::{self, QuadratureConfig};
use crate::semigroup::{apply_pt, Increment};
use crate::special::gamma;

/// Largest |Re λ(B)|·τ at which the far part is sampled; beyond it e^{±τB} may overflow.
const MAX_DRIFT_EXPONENT: f64 = 300.0;
/// Largest truncation point for drifts without exponential growth.
const MAX_TRUNCATION: f64 = 1e12;

/// Breakdown of one Balakrishnan evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Balakrishnan {
    pub s: f64,
    /// The fractional power, including the −s/Γ(1−s) prefactor.
    pub value: f64,
    /// ∫₀^split τ^{−1−s}Δ(τ)dτ.
    pub near: f64,
    /// ∫_split^T τ^{−1−s}Δ(τ)dτ plus the exact tail of the limit of Δ.
    pub far: f64,
    /// Truncation point T of the far integral.
    pub truncation: f64,
    /// 2·sup|u|·T^{−s}/s, a bound on the discarded part of the far integral.
    pub tail_bound: f64,
    pub quadrature_error: f64,
    pub evaluations: usize,
}

pub(crate) fn check_order(s: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return domain(format!("fractional order must lie in (0, 1), got {s}"));
    }
    Ok(())
}

/// Truncation point of the far integral: the tail bound falls below the
/// absolute tolerance, unless the growth rate of e^{τB} caps it first.
pub fn truncation_point(s: f64, sup_bound: f64, model: &ModelSpec, quad: &QuadratureConfig) -> f64 {
    let split = quad.balakrishnan_split;
    let wanted = (2.0 * sup_bound.max(f64::MIN_POSITIVE) / (s * quad.abs_tol)).powf(1.0 / s);
    let b = model.b();
    let abscissa = b.complex_eigenvalues().iter().fold(0.0f64, |m, l| m.max(l.re.abs()));
    let cap = if abscissa > 1e-8 * b.norm() && abscissa > 0.0 { MAX_DRIFT_EXPONENT / abscissa } else { MAX_TRUNCATION };
    wanted.min(cap).max(split)
}

/// γ(s, y) = ∫₀^y x^{s−1}e^{−x}dx by its power series.
pub(crate) fn lower_gamma(s: f64, y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let mut term = 1.0;
    let mut sum = 1.0 / s;
    for k in 1..500 {
        term *= -y / k as f64;
        let next = term / (s + k as f64);
        sum += next;
        if next.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    y.powf(s) * sum
}

/// ∫₀^T τ^{−1−s}w(τ)Δ(τ)dτ, graded near 0 and mapped to a bounded interval past `split`.
pub(crate) fn singular_integral(
    delta: &mut dyn FnMut(f64) -> Result<f64>,
    s: f64,
    weight: &dyn Fn(f64) -> f64,
    truncation: f64,
    quad: &QuadratureConfig,
) -> Result<(quadrature::Integral, quadrature::Integral)> {
    let split = quad.balakrishnan_split;
    let mut failure: Option<Error> = None;
    let mut eval = |tau: f64| {
        let w = weight(tau);
        if w == 0.0 {
            return 0.0;
        }
        match delta(tau) {
            Ok(v) => w * v,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        }
    };
    // τ = split·w^{1/(1−s)}: the transformed integrand tends to split^{1−s}𝒦u/(1−s)
    let near_scale = split.powf(-s) / (1.0 - s);
    let near = quadrature::integrate(
        |w| {
            if w == 0.0 {
                return 0.0;
            }
            let tau = split * w.powf(1.0 / (1.0 - s));
            near_scale * w.powf(-1.0 / (1.0 - s)) * eval(tau)
        },
        0.0,
        1.0,
        quad.abs_tol,
        quad.rel_tol,
        quad.max_subdiv,
    );
    // τ = split·v^{−1/s} maps (split, T] onto [v_min, 1) with unit Jacobian weight
    let far_scale = split.powf(-s) / s;
    let far = if truncation > split {
        quadrature::integrate(
            |v| far_scale * eval(split * v.powf(-1.0 / s)),
            (split / truncation).powf(s),
            1.0,
            quad.abs_tol,
            quad.rel_tol,
            quad.max_subdiv,
        )
    } else {
        Ok(quadrature::Integral { value: 0.0, error: 0.0, evaluations: 0 })
    };
    if let Some(e) = failure {
        return Err(e);
    }
    Ok((near?, far?))
}

/// The Balakrishnan integral of an increment τ ↦ Δ(τ) = P_τu − u at a point.
///
/// `limit` is the value Δ approaches as τ → ∞ (−u at the point for decaying
/// data, 0 for constants); limit·∫_T^∞τ^{−1−s}dτ is added exactly and only
/// ∫_T^∞τ^{−1−s}(Δ − limit)dτ is discarded.
pub fn balakrishnan<F: FnMut(f64) -> Result<f64>>(
    mut delta: F,
    s: f64,
    limit: f64,
    sup_bound: f64,
    truncation: f64,
    quad: &QuadratureConfig,
) -> Result<Balakrishnan> {
    check_order(s)?;
    quad.validate()?;
    let (near, far) = singular_integral(&mut delta, s, &|_| 1.0, truncation, quad)?;
    let far_value = far.value + limit * truncation.powf(-s) / s;
    let prefactor = -s / gamma(1.0 - s);
    Ok(Balakrishnan {
        s,
        value: prefactor * (near.value + far_value),
        near: near.value,
        far: far_value,
        truncation,
        tail_bound: 2.0 * sup_bound * truncation.powf(-s) / s,
        quadrature_error: s / gamma(1.0 - s) * (near.error + far.error),
        evaluations: near.evaluations + far.evaluations,
    })
}

/// (−𝒦)ˢu(X, t) with its quadrature breakdown.
pub fn frac_k_report(
    u: &SpaceTimeGaussPoly,
    model: &ModelSpec,
    x: &[f64],
    t: f64,
    s: f64,
    quad: &QuadratureConfig,
) -> Result<Balakrishnan> {
    check_order(s)?;
    let increment = Increment::new(u, model, x, t, quad)?;
    let sup = match u {
        SpaceTimeGaussPoly::Stationary(f) => f.sup_bound(),
        SpaceTimeGaussPoly::Joint(g) => g.sup_bound(),
    };
    let truncation = truncation_point(s, sup, model, quad);
    balakrishnan(|tau| increment.value(tau), s, -increment.base_value(), sup, truncation, quad)
}

/// (−𝒦)ˢu(X, t) for 0 < s < 1.
pub fn frac_k(
    u: &SpaceTimeGaussPoly,
    model: &ModelSpec,
    x: &[f64],
    t: f64,
    s: f64,
    quad: &QuadratureConfig,
) -> Result<f64> {
    Ok(frac_k_report(u, model, x, t, s, quad)?.value)
}

/// τ ↦ Pτf(X) − f(X), in Duhamel form τ∫₀¹P_{τθ}(𝒜f)dθ below the Duhamel
/// scale, computed with Pₜ directly rather than through the evolutive semigroup.
pub(crate) fn pt_increment<'a>(
    f: &'a GaussPoly,
    model: &'a ModelSpec,
    x: &'a [f64],
    quad: &'a QuadratureConfig,
) -> Result<(f64, impl Fn(f64) -> Result<f64> + 'a)> {
    check_dim(model.dim(), f.dim())?;
    check_dim(model.dim(), x.len())?;
    let probe = Increment::new(&SpaceTimeGaussPoly::stationary(f.clone()), model, x, 0.0, quad)?;
    let duhamel_max = probe.duhamel_max();
    let lifted = f.clone().with_degree_cap(f.degree_cap().max(f.degree() + 2))?;
    let af = lifted.apply_a(model)?;
    let base = f.eval(x)?;
    let rule = quadrature::gauss_legendre(32);
    let delta = move |tau: f64| -> Result<f64> {
        if tau > duhamel_max {
            return Ok(apply_pt(f, model, x, tau, quad)? - base);
        }
        let mut sum = 0.0;
        for (node, weight) in rule.nodes.iter().zip(&rule.weights) {
            sum += weight * apply_pt(&af, model, x, 0.5 * tau * (node + 1.0), quad)?;
        }
        Ok(0.5 * tau * sum)
    };
    Ok((base, delta))
}

/// (−𝒜)ˢf(X) with its quadrature breakdown.
pub fn frac_a_report(
    f: &GaussPoly,
    model: &ModelSpec,
    x: &[f64],
    s: f64,
    quad: &QuadratureConfig,
) -> Result<Balakrishnan> {
    check_order(s)?;
    let (base, delta) = pt_increment(f, model, x, quad)?;
    let sup = f.sup_bound();
    let truncation = truncation_point(s, sup, model, quad);
    balakrishnan(delta, s, -base, sup, truncation, quad)
}

/// (−𝒜)ˢf(X) for 0 < s < 1.
pub fn frac_a(f: &GaussPoly, model: &ModelSpec, x: &[f64], s: f64, quad: &QuadratureConfig) -> Result<f64> {
    Ok(frac_a_report(f, model, x, s, quad)?.value)
}

fn multiplier_integrand(fhat: &GaussPoly, xi: &[f64], x: &[f64], s: f64) -> f64 {
    let r2: f64 = xi.iter().map(|v| v * v).sum();
    let phase: f64 = 2.0 * PI * xi.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    let v = fhat.eval_complex(xi) * Complex64::from_polar(1.0, phase);
    (4.0 * PI * PI * r2).powf(s) * v.re
}

/// (−Δ)ˢf(X) = ∫(4π²|ξ|²)ˢ f̂(ξ)e^{2πi⟨X,ξ⟩}dξ for N ∈ {1, 2}, any s ≥ 0.
///
/// The transform is exact; the integral is adaptive in |ξ| and, for N = 2,
/// a periodic trapezoid rule in the angle refined until it settles.
pub fn frac_heat_oracle(f: &GaussPoly, x: &[f64], s: f64, quad: &QuadratureConfig) -> Result<f64> {
    check_dim(f.dim(), x.len())?;
    if !(s >= 0.0) || !s.is_finite() {
        return domain(format!("multiplier exponent must be nonnegative, got {s}"));
    }
    let fhat = f.fourier()?;
    let (abs, rel, max) = (quad.abs_tol, quad.rel_tol, quad.max_subdiv);
    match f.dim() {
        1 => {
            let pos =
                quadrature::integrate_to_infinity(|r| multiplier_integrand(&fhat, &[r], x, s), 0.0, abs, rel, max)?;
            let neg =
                quadrature::integrate_to_infinity(|r| multiplier_integrand(&fhat, &[-r], x, s), 0.0, abs, rel, max)?;
            Ok(pos.value + neg.value)
        }
        2 => {
            let angular = |r: f64| -> f64 {
                let mut n = 32;
                let mut prev = f64::NAN;
                loop {
                    let h = 2.0 * PI / n as f64;
                    let sum: f64 = (0..n)
                        .map(|k| {
                            let th = k as f64 * h;
                            multiplier_integrand(&fhat, &[r * th.cos(), r * th.sin()], x, s)
                        })
                        .sum::<f64>()
                        * h;
                    if (sum - prev).abs() <= 1e-15 * sum.abs().max(1e-300) || n >= 1 << 14 {
                        return sum;
                    }
                    prev = sum;
                    n *= 2;
                }
            };
            Ok(quadrature::integrate_to_infinity(|r| r * angular(r), 0.0, abs, rel, max)?.value)
        }
        n => domain(format!("the multiplier oracle covers dimensions 1 and 2, got {n}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::apply_a_exact;
    use nalgebra::DMatrix;

    fn q() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn half_laplacian_of_normalized_gaussian() {
        let m = ModelSpec::heat(1);
        let f = GaussPoly::isotropic(vec![0.0], PI).unwrap();
        let v = frac_a(&f, &m, &[0.0], 0.5, &q()).unwrap();
        assert!((v - 2.0).abs() < 1e-8, "{v}");
        let o = frac_heat_oracle(&f, &[0.0], 0.5, &q()).unwrap();
        assert!((o - 2.0).abs() < 1e-10, "{o}");
    }

    #[test]
    fn oracle_endpoints() {
        let f = GaussPoly::isotropic(vec![0.3], 1.7).unwrap();
        let lap = -apply_a_exact(&f, &ModelSpec::heat(1)).unwrap().eval(&[0.1]).unwrap();
        assert!(rel(frac_heat_oracle(&f, &[0.1], 1.0, &q()).unwrap(), lap) < 1e-8);
        let near_zero = frac_heat_oracle(&f, &[0.1], 0.01, &q()).unwrap();
        assert!(rel(near_zero, f.eval(&[0.1]).unwrap()) < 2e-2);
    }

    #[test]
    fn heat_agrees_with_oracle() {
        let m = ModelSpec::heat(2);
        let shape = DMatrix::from_row_slice(2, 2, &[1.2, 0.3, 0.3, 0.8]);
        let f = GaussPoly::gaussian(vec![0.1, -0.2], shape).unwrap();
        for s in [0.25, 0.5, 0.75] {
            let x = [0.4, 0.1];
            let a = frac_a(&f, &m, &x, s, &q()).unwrap();
            let o = frac_heat_oracle(&f, &x, s, &q()).unwrap();
            assert!((a - o).abs() < 1e-8, "s={s}: {a} vs {o}");
        }
    }

    #[test]
    fn positive_at_maximum_and_tail_formula() {
        let m = ModelSpec::kolmogorov(1);
        let f = GaussPoly::isotropic(vec![0.0, 0.0], 1.0).unwrap();
        let r = frac_a_report(&f, &m, &[0.0, 0.0], 0.4, &q()).unwrap();
        assert!(r.value > 0.0);
        let expected = 2.0 * f.sup_bound() * r.truncation.powf(-0.4) / 0.4;
        assert!(rel(r.tail_bound, expected) < 1e-14);
    }

    #[test]
    fn time_independent_consistency() {
        let m = ModelSpec::kolmogorov(1);
        let f = GaussPoly::isotropic(vec![0.2, -0.1], 0.7).unwrap();
        let x = [0.3, 0.5];
        let a = frac_a(&f, &m, &x, 0.6, &q()).unwrap();
        let k = frac_k(&SpaceTimeGaussPoly::stationary(f), &m, &x, 1.3, 0.6, &q()).unwrap();
        assert!(rel(k, a) < 1e-8);
    }

    #[test]
    fn joint_input_self_converges() {
        let m = ModelSpec::kolmogorov(1);
        let space = GaussPoly::isotropic(vec![0.0, 0.0], 1.0).unwrap();
        let time = GaussPoly::isotropic(vec![0.0], 1.0).unwrap();
        let u = SpaceTimeGaussPoly::from_tensor(&space, &time).unwrap();
        let coarse = frac_k(&u, &m, &[0.0, 0.0], 0.0, 0.3, &q()).unwrap();
        let fine = frac_k(&u, &m, &[0.0, 0.0], 0.0, 0.3, &q().refined()).unwrap();
        assert!(rel(coarse, fine) < 1e-7, "{coarse} vs {fine}");
        assert!(coarse > 0.0);
    }

    #[test]
    fn lower_gamma_series() {
        // γ(1, y) = 1 − e^{−y}, γ(1/2, y) = √π·erf(√y)
        assert!((lower_gamma(1.0, 0.3) - (1.0 - (-0.3f64).exp())).abs() < 1e-15);
        assert!((lower_gamma(0.5, 1.0) - PI.sqrt() * 0.842_700_792_949_714_9).abs() < 1e-14);
    }

    #[test]
    fn rejects_order_outside_unit_interval() {
        let f = GaussPoly::isotropic(vec![0.0], 1.0).unwrap();
        assert!(matches!(frac_a(&f, &ModelSpec::heat(1), &[0.0], 1.5, &q()), Err(Error::Domain(_))));
    }
}
