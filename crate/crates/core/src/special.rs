//! Gamma function and modified Bessel functions of the first kind.

use std::f64::consts::PI;

use crate::error::{domain, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn lanczos_sum(x: f64) -> f64 {
    let mut acc = LANCZOS_COEFFS[0];
    for (i, c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    acc
}

/// Euler's gamma function (Lanczos approximation, reflection below 1/2).
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        PI / ((PI * x).sin() * gamma(1.0 - x))
    } else {
        let x = x - 1.0;
        let t = x + LANCZOS_G + 0.5;
        (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * lanczos_sum(x)
    }
}

/// Natural log of |Γ(x)|.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        (PI / (PI * x).sin()).abs().ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let t = x + LANCZOS_G + 0.5;
        0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + lanczos_sum(x).ln()
    }
}

/// Crossover between the ascending series and the large-argument expansion.
const BESSEL_SERIES_MAX: f64 = 30.0;

fn check_order(nu: f64) -> Result<()> {
    if !(nu > -1.0) || !nu.is_finite() {
        return domain(format!("Bessel order must satisfy nu > -1, got {nu}"));
    }
    Ok(())
}

/// Σ_k (x²/4)^k / (k! Γ(k+ν+1)), so that I_ν(x) = (x/2)^ν · sum.
fn ascending_sum(nu: f64, x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = (-ln_gamma(nu + 1.0)).exp();
    let mut sum = term;
    for k in 1..500 {
        let kf = k as f64;
        term *= q / (kf * (kf + nu));
        sum += term;
        if term <= sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Σ_k (−1)^k a_k(ν) / x^k from the Hankel expansion, so that
/// I_ν(x) ≈ e^x / √(2πx) · sum for large x.
fn asymptotic_sum(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..200 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        term *= -(mu - odd * odd) / (8.0 * kf * x);
        if term.abs() >= prev {
            // the series is asymptotic; stop at the smallest term
            break;
        }
        sum += term;
        prev = term.abs();
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// Modified Bessel function of the first kind I_ν(x), ν > −1, x ≥ 0.
pub fn bessel_i(nu: f64, x: f64) -> Result<f64> {
    check_order(nu)?;
    if x < 0.0 {
        return domain(format!("bessel_i requires x >= 0, got {x}"));
    }
    if x == 0.0 {
        return Ok(if nu == 0.0 {
            1.0
        } else if nu > 0.0 {
            0.0
        } else {
            f64::INFINITY
        });
    }
    if x <= BESSEL_SERIES_MAX {
        Ok((0.5 * x).powf(nu) * ascending_sum(nu, x))
    } else {
        Ok(bessel_i_scaled(nu, x)? * x.exp())
    }
}

/// e^{−x} I_ν(x), finite for all x ≥ 0 with ν ≥ 0.
pub fn bessel_i_scaled(nu: f64, x: f64) -> Result<f64> {
    check_order(nu)?;
    if x < 0.0 {
        return domain(format!("bessel_i_scaled requires x >= 0, got {x}"));
    }
    if x <= BESSEL_SERIES_MAX {
        return Ok(bessel_i(nu, x)? * (-x).exp());
    }
    Ok(asymptotic_sum(nu, x) / (2.0 * PI * x).sqrt())
}

/// ln(x^{−ν} I_ν(x)); finite at x = 0 where it equals −ν ln 2 − ln Γ(ν+1).
pub fn ln_bessel_i_reduced(nu: f64, x: f64) -> Result<f64> {
    check_order(nu)?;
    if x < 0.0 {
        return domain(format!("ln_bessel_i_reduced requires x >= 0, got {x}"));
    }
    if x <= BESSEL_SERIES_MAX {
        Ok(-nu * std::f64::consts::LN_2 + ascending_sum(nu, x).ln())
    } else {
        Ok(-nu * x.ln() + x - 0.5 * (2.0 * PI * x).ln() + asymptotic_sum(nu, x).ln())
    }
}
