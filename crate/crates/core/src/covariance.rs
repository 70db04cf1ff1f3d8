//! Gramians C(t) = ∫₀ᵗ e^{−sB}Qe^{−sB★}ds and K(t) = (1/t)∫₀ᵗ e^{sB}Qe^{sB★}ds,
//! their structural identities, and the hypoellipticity report.

use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, RwLock};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::matfun::{kalman_rank, mat_exp, norm1, symmetrize, SpdFactor};
use crate::model::ModelSpec;
use crate::quadrature;

pub const DEFAULT_SAMPLE_TIMES: [f64; 5] = [1e-3, 1e-2, 0.1, 1.0, 10.0];

/// Largest ‖A‖₁·t₀ at which the block exponential is evaluated directly.
const VAN_LOAN_STEP: f64 = 0.5;

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return domain(format!("time must be positive and finite, got {t}"));
    }
    Ok(())
}

/// (∫₀ᵗ e^{sA}Qe^{sA★}ds, e^{tA}).
///
/// The block exponential of [[−A, Q], [0, A★]] is taken at t₀ = t/2ᵏ with
/// ‖A‖t₀ small, then W(2τ) = W(τ) + e^{τA}W(τ)e^{τA★} is applied k times.
/// Every doubling adds positive-semidefinite terms, so no cancellation occurs.
fn gramian_with_exp(a: &DMatrix<f64>, q: &DMatrix<f64>, t: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    let scale = norm1(a) * t;
    let k = if scale > VAN_LOAN_STEP { (scale / VAN_LOAN_STEP).log2().ceil() as i32 } else { 0 };
    let t0 = t / 2f64.powi(k);
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&(-a));
    h.view_mut((0, n), (n, n)).copy_from(q);
    h.view_mut((n, n), (n, n)).copy_from(&a.transpose());
    let f = mat_exp(&h, t0)?;
    let f12 = f.view((0, n), (n, n)).into_owned();
    let f22 = f.view((n, n), (n, n)).into_owned();
    let mut e = f22.transpose();
    let mut w = symmetrize(&(&e * f12));
    for _ in 0..k {
        w = symmetrize(&(&w + &e * &w * e.transpose()));
        e = &e * &e;
    }
    if w.iter().chain(e.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Overflow(format!("Gramian at t = {t:e}")));
    }
    Ok((w, e))
}

/// C(t).
pub fn gramian_c(model: &ModelSpec, t: f64) -> Result<DMatrix<f64>> {
    check_time(t)?;
    Ok(gramian_with_exp(&(-model.b()), model.q(), t)?.0)
}

/// K(t), from the forward Gramian tK(t) = ∫₀ᵗ e^{sB}Qe^{sB★}ds.
pub fn gramian_k(model: &ModelSpec, t: f64) -> Result<DMatrix<f64>> {
    check_time(t)?;
    Ok(gramian_with_exp(model.b(), model.q(), t)?.0 / t)
}

/// C(t) by entrywise adaptive Gauss–Kronrod integration; an independent
/// cross-check of the block-exponential route.
pub fn gramian_c_quadrature(model: &ModelSpec, t: f64, abs_tol: f64, rel_tol: f64) -> Result<DMatrix<f64>> {
    check_time(t)?;
    let n = model.dim();
    let integrand = |s: f64| -> Result<DMatrix<f64>> {
        let e = mat_exp(model.b(), -s)?;
        Ok(&e * model.q() * e.transpose())
    };
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut failure = None;
            let r = quadrature::integrate(
                |s| match integrand(s) {
                    Ok(m) => m[(i, j)],
                    Err(e) => {
                        failure = Some(e);
                        f64::NAN
                    }
                },
                0.0,
                t,
                abs_tol,
                rel_tol,
                2000,
            );
            if let Some(e) = failure {
                return Err(e);
            }
            let v = r?.value;
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    Ok(c)
}

/// C(t), K(t) and e^{tB} at one time, with Cholesky factors when positive definite.
#[derive(Debug, Clone)]
pub struct GramianPair {
    pub t: f64,
    pub c: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub exp_tb: DMatrix<f64>,
    /// e^{−tB}.
    pub exp_minus_tb: DMatrix<f64>,
    c_factor: std::result::Result<SpdFactor, Error>,
    k_factor: std::result::Result<SpdFactor, Error>,
}

impl GramianPair {
    pub fn new(model: &ModelSpec, t: f64) -> Result<Self> {
        check_time(t)?;
        let (c, exp_minus_tb) = gramian_with_exp(&(-model.b()), model.q(), t)?;
        let (tk, exp_tb) = gramian_with_exp(model.b(), model.q(), t)?;
        let k = tk / t;
        let c_factor = SpdFactor::new(&c);
        let k_factor = SpdFactor::new(&k);
        Ok(Self { t, c, k, exp_tb, exp_minus_tb, c_factor, k_factor })
    }

    pub fn c_factor(&self) -> Result<&SpdFactor> {
        self.c_factor.as_ref().map_err(Clone::clone)
    }

    pub fn k_factor(&self) -> Result<&SpdFactor> {
        self.k_factor.as_ref().map_err(Clone::clone)
    }

    pub fn is_nonsingular(&self) -> bool {
        self.c_factor.is_ok() && self.k_factor.is_ok()
    }

    /// ‖tK(t) − e^{tB}C(t)e^{tB★}‖_F / ‖tK(t)‖_F.
    pub fn kc_residual(&self) -> f64 {
        let tk = &self.k * self.t;
        let rhs = &self.exp_tb * &self.c * self.exp_tb.transpose();
        (&tk - rhs).norm() / tk.norm().max(f64::MIN_POSITIVE)
    }
}

/// Read-concurrent memo of [`GramianPair`]s keyed by model and time.
#[derive(Debug, Default)]
pub struct GramianCache {
    entries: RwLock<HashMap<(u64, u64), Arc<GramianPair>>>,
}

fn model_key(model: &ModelSpec) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    model.dim().hash(&mut h);
    for v in model.q().iter().chain(model.b().iter()) {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

impl GramianCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, model: &ModelSpec, t: f64) -> Result<Arc<GramianPair>> {
        let key = (model_key(model), t.to_bits());
        if let Some(p) = self.entries.read().expect("cache lock").get(&key) {
            return Ok(Arc::clone(p));
        }
        let pair = Arc::new(GramianPair::new(model, t)?);
        self.entries.write().expect("cache lock").entry(key).or_insert_with(|| Arc::clone(&pair));
        Ok(pair)
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypoReport {
    pub dim: usize,
    pub kalman_rank: usize,
    pub is_hypoelliptic: bool,
    /// (t, λ_min(K(t))) samples; diagnostics only.
    pub sampled_min_eig_k: Vec<(f64, f64)>,
    pub trace_b: f64,
    pub lp_contractive: bool,
}

/// Hypoellipticity is decided by the Kalman rank; the λ_min(K(t)) samples
/// corroborate but cannot certify "for every t > 0".
pub fn hypo_report(model: &ModelSpec, sample_times: &[f64]) -> Result<HypoReport> {
    if sample_times.is_empty() {
        return domain("sample_times must be nonempty");
    }
    let mut samples = Vec::with_capacity(sample_times.len());
    for &t in sample_times {
        let k = gramian_k(model, t)?;
        let min_eig = k.symmetric_eigen().eigenvalues.min();
        samples.push((t, min_eig));
    }
    let rank = kalman_rank(model);
    Ok(HypoReport {
        dim: model.dim(),
        kalman_rank: rank,
        is_hypoelliptic: rank == model.dim(),
        sampled_min_eig_k: samples,
        trace_b: model.trace_b(),
        lp_contractive: model.trace_b() >= 0.0,
    })
}

/// ‖e^{−tB}Qe^{−tB★} − Q + BC(t) + C(t)B★‖_F / (1 + ‖Q‖_F).
pub fn lyapunov_residual(model: &ModelSpec, t: f64) -> Result<f64> {
    let (c, e) = gramian_with_exp(&(-model.b()), model.q(), t)?;
    let b = model.b();
    let lhs = &e * model.q() * e.transpose();
    let r = lhs - model.q() + b * &c + &c * b.transpose();
    Ok(r.norm() / (1.0 + model.q().norm()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs() / y.abs().max(f64::MIN_POSITIVE)).fold(0.0, f64::max)
    }

    fn kolmogorov_c(t: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[t, -t * t / 2.0, -t * t / 2.0, t.powi(3) / 3.0])
    }

    fn kolmogorov_k(t: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[1.0, t / 2.0, t / 2.0, t * t / 3.0])
    }

    #[test]
    fn heat_gramians() {
        let m = ModelSpec::heat(3);
        let c = gramian_c(&m, 2.5).unwrap();
        assert!((c - DMatrix::identity(3, 3) * 2.5).norm() < 1e-14);
        let k = gramian_k(&m, 2.5).unwrap();
        assert!((k - DMatrix::identity(3, 3)).norm() < 1e-14);
    }

    #[test]
    fn kolmogorov_closed_forms_entrywise() {
        let m = ModelSpec::kolmogorov(1);
        for &t in &[1e-5, 1e-3, 0.1, 1.0, 10.0, 1e3] {
            let c = gramian_c(&m, t).unwrap();
            let k = gramian_k(&m, t).unwrap();
            assert!(max_rel(&c, &kolmogorov_c(t)) < 1e-12, "C at t={t}: {c}");
            assert!(max_rel(&k, &kolmogorov_k(t)) < 1e-12, "K at t={t}: {k}");
            let det = SpdFactor::new(&k).unwrap().log_det().exp();
            assert!((det / (t * t / 12.0) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn ou_closed_forms() {
        let m = ModelSpec::ornstein_uhlenbeck(2);
        let c = gramian_c(&m, 1.0).unwrap();
        let e2 = 1f64.exp().powi(2);
        assert!((c[(0, 0)] / ((e2 - 1.0) / 2.0) - 1.0).abs() < 1e-14);
        assert!((c[(1, 1)] / ((e2 - 1.0) / 2.0) - 1.0).abs() < 1e-14);
        let k = gramian_k(&m, 1.0).unwrap();
        assert!((k[(0, 0)] - (1.0 - 1.0 / e2) / 2.0).abs() < 1e-15);
        assert_eq!(k[(0, 1)], 0.0);
    }

    #[test]
    fn quadrature_cross_check() {
        let q = DMatrix::identity(3, 3);
        let b = DMatrix::from_row_slice(3, 3, &[-1.0, 0.4, 0.0, -0.3, -0.8, 0.2, 0.1, 0.0, -1.5]);
        let m = ModelSpec::new(q, b).unwrap();
        let c = gramian_c(&m, 2.0).unwrap();
        let cq = gramian_c_quadrature(&m, 2.0, 1e-13, 1e-13).unwrap();
        assert!((&c - &cq).norm() <= 1e-11 * c.norm());
        assert!(lyapunov_residual(&m, 2.0).unwrap() < 1e-9);
    }

    #[test]
    fn kc_identity_and_lyapunov() {
        for m in [ModelSpec::kolmogorov(2), ModelSpec::ornstein_uhlenbeck(2), ModelSpec::heat(1)] {
            for &t in &DEFAULT_SAMPLE_TIMES {
                let p = GramianPair::new(&m, t).unwrap();
                assert!(p.kc_residual() < 1e-9, "t={t}");
                // the normalization is absolute, so terms of size e^{2t} cancel
                let bound = 1e-10 * (-2.0 * m.trace_b() / m.dim() as f64 * t).exp().max(1.0);
                assert!(lyapunov_residual(&m, t).unwrap() < bound, "t={t}");
            }
        }
        assert_eq!(lyapunov_residual(&ModelSpec::heat(2), 0.7).unwrap(), 0.0);
    }

    #[test]
    fn small_time_expansion_is_third_order() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.5]);
        let b = DMatrix::from_row_slice(2, 2, &[0.3, -1.0, 0.7, 0.1]);
        let m = ModelSpec::new(q.clone(), b.clone()).unwrap();
        let times = [1e-3, 1e-4, 1e-5];
        let errs: Vec<f64> = times
            .iter()
            .map(|&t| {
                let c = gramian_c(&m, t).unwrap();
                let approx = &q * t - (&b * &q + &q * b.transpose()) * (t * t / 2.0);
                (c - approx).norm()
            })
            .collect();
        for w in 0..2 {
            let slope = (errs[w].ln() - errs[w + 1].ln()) / (times[w].ln() - times[w + 1].ln());
            assert!((slope - 3.0).abs() < 0.05, "slope {slope}");
        }
    }

    #[test]
    fn reports() {
        let r = hypo_report(&ModelSpec::kolmogorov(1), &DEFAULT_SAMPLE_TIMES).unwrap();
        assert!(r.is_hypoelliptic && r.lp_contractive);
        assert!(r.sampled_min_eig_k.iter().all(|&(_, l)| l > 0.0));
        let r = hypo_report(&ModelSpec::ornstein_uhlenbeck(2), &DEFAULT_SAMPLE_TIMES).unwrap();
        assert!(r.is_hypoelliptic && !r.lp_contractive);
        let degenerate =
            ModelSpec::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]), DMatrix::zeros(2, 2)).unwrap();
        let r = hypo_report(&degenerate, &DEFAULT_SAMPLE_TIMES).unwrap();
        assert!(!r.is_hypoelliptic);
        assert_eq!(r.kalman_rank, 1);
        assert!(GramianPair::new(&degenerate, 1.0).unwrap().c_factor().is_err());
    }

    #[test]
    fn cache_reuses_pairs() {
        let cache = GramianCache::new();
        let m = ModelSpec::kolmogorov(1);
        let a = cache.get(&m, 0.5).unwrap();
        let b = cache.get(&m, 0.5).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        cache.get(&ModelSpec::heat(2), 0.5).unwrap();
        assert_eq!(cache.len(), 2);
    }
}
