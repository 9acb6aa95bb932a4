//! Exact finite-N and manifold-limit values for ensemble statistics.

use crate::error::{Error, Result};
use crate::fluctuation::FieldObservable;
use crate::grid::{Grid, SpectralLaplacian};
use crate::manifold::{neumaier_sum, ManifoldModel, TestFunction};

/// E[Y_t(f) Y_0(g)] = (ρ(1−ρ)/N) Σ_i f(p_i) (S_t g)(p_i), exact at finite N
/// by duality with a single random walk.
pub fn covariance_oracle_finite_n(spec: &SpectralLaplacian, f: &[f64], g: &[f64], t: f64, rho: f64) -> Result<f64> {
    let n = spec.n() as f64;
    Ok(rho * (1.0 - rho) / n * spec.semigroup_bilinear(f, g, t)?)
}

/// ρ(1−ρ) e^{−λ_f t} ∫ f g dV̄ for eigenfunctions.
pub fn covariance_oracle_limit(m: &ManifoldModel, f: &TestFunction, g: &TestFunction, t: f64, rho: f64) -> Result<f64> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::NegativeTime(t));
    }
    let lambda = f
        .eigenvalue()
        .ok_or_else(|| Error::NotEigenfunction(f.name().to_string()))?;
    if g.eigenvalue().is_none() {
        return Err(Error::NotEigenfunction(g.name().to_string()));
    }
    let inner = match (f.index(), g.index()) {
        (Some(a), Some(b)) if a == b => f.l2_norm_sq().unwrap_or(1.0),
        (Some(_), Some(_)) => 0.0,
        _ => m.integrate(|p| f.value(p) * g.value(p)),
    };
    Ok(rho * (1.0 - rho) * (-lambda * t).exp() * inner)
}

/// E[(∫_0^T Y_s(h) ds)²] under the stationary process, exact at finite N:
/// (2ρ(1−ρ)/N) Σ_k ĥ_k² (e^{μ_k T} − 1 − μ_k T)/μ_k².
pub fn integrated_field_second_moment(spec: &SpectralLaplacian, h: &[f64], horizon: f64, rho: f64) -> Result<f64> {
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::NegativeTime(horizon));
    }
    let c = spec.coefficients(h)?;
    let terms = c.iter().zip(spec.eigenvalues()).map(|(ck, &mu)| {
        let mu = mu.min(0.0);
        let x = mu * horizon;
        // (e^x − 1 − x)/μ² = T² (e^x − 1 − x)/x², with a series near 0
        let kernel = if x.abs() < 1e-4 {
            horizon * horizon * (0.5 + x / 6.0 + x * x / 24.0)
        } else {
            (x.exp_m1() - x) / (mu * mu)
        };
        ck * ck * kernel
    });
    Ok(2.0 * rho * (1.0 - rho) / spec.n() as f64 * neumaier_sum(terms))
}

/// Upper bound T² ρ(1−ρ) E_f(N)² on the replacement error.
pub fn replacement_bound(grid: &Grid, f: &TestFunction, horizon: f64, rho: f64) -> f64 {
    let e = grid.laplacian_error(f);
    horizon * horizon * rho * (1.0 - rho) * e * e
}

/// Exact mean of Γ under ν_ρ.
pub fn gamma_mean_oracle(obs: &FieldObservable) -> f64 {
    obs.gamma_mean()
}

/// Exact variance of Γ = (1/N) Σ_e w_e X_e under ν_ρ, where X_e indicates
/// differing endpoint values. With q = 2ρ(1−ρ), each X_e has variance
/// q(1−q); two edges sharing one vertex have covariance ρ(1−ρ) − q²;
/// disjoint edges are independent.
pub fn gamma_variance_oracle(grid: &Grid, obs: &FieldObservable) -> f64 {
    let rho = obs.rho();
    let q = 2.0 * rho * (1.0 - rho);
    let k2 = rho * (1.0 - rho) - q * q;
    let w = obs.edge_weights();
    let diag = q * (1.0 - q) * neumaier_sum(w.iter().map(|x| x * x));
    let shared = neumaier_sum((0..grid.n()).map(|v| {
        let nb = grid.neighbors(v);
        let s = neumaier_sum(nb.iter().map(|&(_, e)| w[e as usize]));
        let s2 = neumaier_sum(nb.iter().map(|&(_, e)| w[e as usize].powi(2)));
        s * s - s2
    }));
    let n = grid.n() as f64;
    (diag + k2 * shared) / (n * n)
}
