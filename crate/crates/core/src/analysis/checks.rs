//! Pass/fail comparisons.

use serde::Serialize;

use super::ensemble::{Ensemble, EnsembleStat, OracleKind, Quantity};
use super::stats::{covariance_estimate, skewness_kurtosis};
use crate::fluctuation::FieldObservable;

/// A single verdict with everything needed to recompute it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    /// The identity or limit statement being checked.
    pub claim: String,
    pub estimate: f64,
    pub oracle: f64,
    pub tolerance: f64,
    pub detail: String,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, claim: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            claim: claim.into(),
            estimate: f64::NAN,
            oracle: f64::NAN,
            tolerance: f64::NAN,
            detail: String::new(),
            pass: false,
        }
    }

    /// |estimate − oracle| <= tolerance.
    pub fn absolute(mut self, estimate: f64, oracle: f64, tolerance: f64) -> Self {
        self.estimate = estimate;
        self.oracle = oracle;
        self.tolerance = tolerance;
        self.pass = (estimate - oracle).abs() <= tolerance;
        self
    }

    /// |estimate − oracle| <= tolerance·|oracle|.
    pub fn relative(mut self, estimate: f64, oracle: f64, tolerance: f64) -> Self {
        self.estimate = estimate;
        self.oracle = oracle;
        self.tolerance = tolerance;
        self.pass = (estimate - oracle).abs() <= tolerance * oracle.abs();
        self
    }

    /// |z| <= k for an ensemble statistic.
    pub fn z_within(mut self, stat: &EnsembleStat, k: f64) -> Self {
        self.estimate = stat.estimate;
        self.oracle = stat.oracle.unwrap_or(f64::NAN);
        self.tolerance = k * stat.se;
        self.pass = stat.within(k);
        self.detail = format!("se = {:.3e}, z = {:.3}", stat.se, stat.z.unwrap_or(f64::NAN));
        self
    }

    /// estimate <= oracle (+ slack).
    pub fn upper(mut self, estimate: f64, bound: f64, slack: f64) -> Self {
        self.estimate = estimate;
        self.oracle = bound;
        self.tolerance = slack;
        self.pass = estimate <= bound + slack;
        self
    }

    pub fn flag(mut self, pass: bool, detail: impl Into<String>) -> Self {
        self.pass = pass;
        self.detail = detail.into();
        self
    }

    pub fn detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

/// Nonincreasing trend across a ladder, tolerating a single inversion no
/// larger than one standard error of the difference.
pub fn trend_nonincreasing(means: &[f64], ses: &[f64]) -> bool {
    let mut inversions = 0;
    for k in 1..means.len() {
        let up = means[k] - means[k - 1];
        if up > 0.0 {
            inversions += 1;
            let se = (ses[k].powi(2) + ses[k - 1].powi(2)).sqrt();
            if inversions > 1 || !(up <= se) {
                return false;
            }
        }
    }
    true
}

/// Strictly decreasing sequence.
pub fn strictly_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0])
}

/// Finite-N martingale checks for one test function.
#[derive(Debug, Clone, Serialize)]
pub struct MartingaleReport {
    pub f: String,
    /// E[M_t] = 0 at every t
    pub mean_m: Vec<EnsembleStat>,
    /// E[M_t² − ∫Γ] = 0 at every t
    pub mean_n: Vec<EnsembleStat>,
    /// E[∫_0^T Γ]/T against −(2ρ(1−ρ)/N) Σ f𝓛f
    pub gamma_rate: EnsembleStat,
    /// Ĉov(M_T − M_s, M_s) = 0 with s the middle sample
    pub increment_cov: EnsembleStat,
    pub pass: bool,
}

pub fn martingale_test(ens: &Ensemble, f: usize, obs: &FieldObservable, k: f64) -> MartingaleReport {
    let name = obs.name();
    let last = ens.times.len() - 1;
    let horizon = ens.times[last];
    let mut mean_m = Vec::new();
    let mut mean_n = Vec::new();
    for (idx, &t) in ens.times.iter().enumerate().skip(1) {
        mean_m.push(EnsembleStat::new("E[M_t]", name, t, ens.mean(f, idx, Quantity::M)).with_oracle(0.0, OracleKind::ExactFiniteN));
        mean_n.push(EnsembleStat::new("E[M_t^2 - G_t]", name, t, ens.mean(f, idx, Quantity::N)).with_oracle(0.0, OracleKind::ExactFiniteN));
    }
    let rate: Vec<f64> = ens.values(f, last, Quantity::Gamma).iter().map(|g| g / horizon).collect();
    let gamma_rate = EnsembleStat::new("E[G_T]/T", name, horizon, super::stats::mean_estimate(&rate))
        .with_oracle(obs.gamma_mean(), OracleKind::ExactFiniteN);
    let mid = last / 2;
    let m_t = ens.values(f, last, Quantity::M);
    let m_s = ens.values(f, mid, Quantity::M);
    let inc: Vec<f64> = m_t.iter().zip(&m_s).map(|(a, b)| a - b).collect();
    let increment_cov = EnsembleStat::new("cov(M_T - M_s, M_s)", name, horizon, covariance_estimate(&inc, &m_s))
        .with_g(name, ens.times[mid])
        .with_oracle(0.0, OracleKind::ExactFiniteN);
    let pass = mean_m.iter().chain(&mean_n).all(|s| s.within(k) || trivially_zero(s))
        && (gamma_rate.within(k) || trivially_zero(&gamma_rate))
        && (increment_cov.within(k) || trivially_zero(&increment_cov));
    MartingaleReport {
        f: name.to_string(),
        mean_m,
        mean_n,
        gamma_rate,
        increment_cov,
        pass,
    }
}

/// A statistic that is identically zero (e.g. for constant f) has no
/// standard error but matches its oracle exactly.
fn trivially_zero(s: &EnsembleStat) -> bool {
    s.replicas >= 2 && s.se == 0.0 && s.estimate.abs() < 1e-12 && s.oracle == Some(0.0)
}

/// Skewness and excess-kurtosis bounds 4√(6/R) and 4√(24/R).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Normality {
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub skew_bound: f64,
    pub kurt_bound: f64,
    pub pass: bool,
}

pub fn normality_check(xs: &[f64]) -> Normality {
    let r = xs.len() as f64;
    let (skewness, excess_kurtosis) = skewness_kurtosis(xs);
    let skew_bound = 4.0 * (6.0 / r).sqrt();
    let kurt_bound = 4.0 * (24.0 / r).sqrt();
    Normality {
        skewness,
        excess_kurtosis,
        skew_bound,
        kurt_bound,
        pass: skewness.abs() < skew_bound && excess_kurtosis.abs() < kurt_bound,
    }
}

/// ½ Σ |p − q|.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::ensemble::{simulate_ensemble, EnsembleConfig};
    use crate::grid::{build_grid, Bandwidth};
    use crate::manifold::{ManifoldModel, TestFunction};

    #[test]
    fn trend_rules() {
        assert!(trend_nonincreasing(&[3.0, 2.0, 1.0], &[0.1; 3]));
        assert!(trend_nonincreasing(&[3.0, 3.05, 1.0], &[0.1; 3]));
        assert!(!trend_nonincreasing(&[3.0, 3.5, 1.0], &[0.1; 3]));
        assert!(!trend_nonincreasing(&[3.0, 3.05, 3.1], &[0.1; 3]));
        assert!(strictly_decreasing(&[3.0, 2.0, 1.0]));
        assert!(!strictly_decreasing(&[3.0, 3.0]));
    }

    #[test]
    fn check_builders() {
        assert!(Check::new("a", "x").absolute(1.0, 1.05, 0.1).pass);
        assert!(!Check::new("a", "x").relative(1.0, 1.05, 0.02).pass);
        assert!(Check::new("a", "x").upper(1.0, 0.9, 0.2).pass);
        assert_eq!(total_variation(&[0.5, 0.5], &[0.25, 0.75]), 0.25);
    }

    #[test]
    fn constant_function_is_identically_zero() {
        let m = ManifoldModel::circle();
        let g = build_grid(&m, 80, Bandwidth::Auto, 3).unwrap();
        let obs = vec![FieldObservable::new(&g, &TestFunction::constant(1.0), 0.5).unwrap()];
        let cfg = EnsembleConfig {
            rho: 0.5,
            horizon: 0.5,
            sample_times: EnsembleConfig::uniform_times(0.5, 4),
            replicas: 20,
            seed: 1,
            threads: None,
            track_gamma: true,
        };
        let e = simulate_ensemble(&g, &obs, &cfg).unwrap();
        let r = martingale_test(&e, 0, &obs[0], 4.0);
        assert!(r.pass);
        assert!(r.mean_m.iter().all(|s| s.estimate.abs() < 1e-12));
        assert_eq!(r.gamma_rate.estimate, 0.0);
    }

    #[test]
    fn martingale_holds_on_small_grid() {
        let m = ManifoldModel::circle();
        let g = build_grid(&m, 150, Bandwidth::Auto, 5).unwrap();
        let obs = vec![FieldObservable::new(&g, &m.eigenfunction(&[1]).unwrap(), 0.5).unwrap()];
        let cfg = EnsembleConfig {
            rho: 0.5,
            horizon: 1.0,
            sample_times: EnsembleConfig::uniform_times(1.0, 4),
            replicas: 2000,
            seed: 9,
            threads: None,
            track_gamma: true,
        };
        let e = simulate_ensemble(&g, &obs, &cfg).unwrap();
        let r = martingale_test(&e, 0, &obs[0], 4.5);
        assert!(r.pass, "{r:#?}");
    }
}
