//! Replica ensembles. Replica r draws its initial configuration and its
//! trajectory from stream r of the master seed, and results are collected in
//! replica order, so output is identical for any worker count.

use rayon::prelude::*;
use serde::Serialize;

use super::stats::{covariance_estimate, mean_estimate, Estimate};
use crate::error::{Error, Result};
use crate::fluctuation::{FieldObservable, FieldTracker, FieldTrajectory};
use crate::grid::{Grid, SpectralLaplacian};
use crate::rng::replica_rng;
use crate::sep::{init_bernoulli, run, Configuration, EdgeSampler, Event, Observer, ObserverResult};

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub rho: f64,
    pub horizon: f64,
    pub sample_times: Vec<f64>,
    pub replicas: usize,
    pub seed: u64,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
    /// Track the carré du champ integral (O(deg) per event).
    pub track_gamma: bool,
}

impl EnsembleConfig {
    /// K + 1 equally spaced times 0 = t_0 < … < t_K = T.
    pub fn uniform_times(horizon: f64, k: usize) -> Vec<f64> {
        let k = k.max(1);
        (0..=k).map(|i| horizon * i as f64 / k as f64).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::Density(self.rho));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::NegativeTime(self.horizon));
        }
        if self.replicas == 0 {
            return Err(Error::Invalid {
                what: "replicas",
                reason: "need at least one replica".into(),
            });
        }
        if self.sample_times.is_empty() {
            return Err(Error::Invalid {
                what: "sample times",
                reason: "need at least one sampling time".into(),
            });
        }
        Ok(())
    }
}

/// Per-replica trajectories for a set of test functions.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub times: Vec<f64>,
    pub names: Vec<String>,
    /// `runs[replica][function]`
    pub runs: Vec<Vec<FieldTrajectory>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Y,
    M,
    N,
    Drift,
    Gamma,
    Replacement,
}

impl Ensemble {
    pub fn replicas(&self) -> usize {
        self.runs.len()
    }

    /// Index of the sampling time equal to `t` (within 1e-12).
    pub fn time_index(&self, t: f64) -> Result<usize> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-12 * (1.0 + t.abs()))
            .ok_or_else(|| Error::Invalid {
                what: "time",
                reason: format!("{t} is not a sampling time"),
            })
    }

    pub fn function_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Values across replicas of one quantity at sample k.
    pub fn values(&self, f: usize, k: usize, q: Quantity) -> Vec<f64> {
        self.runs
            .iter()
            .map(|r| {
                let t = &r[f];
                match q {
                    Quantity::Y => t.y[k],
                    Quantity::M => t.m[k],
                    Quantity::N => t.n[k],
                    Quantity::Drift => t.drift[k],
                    Quantity::Gamma => t.gamma[k],
                    Quantity::Replacement => t.replacement[k],
                }
            })
            .collect()
    }

    pub fn mean(&self, f: usize, k: usize, q: Quantity) -> Estimate {
        mean_estimate(&self.values(f, k, q))
    }

    /// Ĉov(Y_{t+s}(f), Y_s(g)).
    pub fn field_covariance(&self, f: usize, g: usize, t: f64, s: f64) -> Result<Estimate> {
        let a = self.time_index(t + s)?;
        let b = self.time_index(s)?;
        Ok(covariance_estimate(&self.values(f, a, Quantity::Y), &self.values(g, b, Quantity::Y)))
    }
}

fn with_pool<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::Invalid {
                    what: "threads",
                    reason: e.to_string(),
                })?;
            Ok(pool.install(job))
        }
        None => Ok(job()),
    }
}

/// Runs `cfg.replicas` independent stationary trajectories and records every
/// observable at the sampling times.
pub fn simulate_ensemble(grid: &Grid, obs: &[FieldObservable], cfg: &EnsembleConfig) -> Result<Ensemble> {
    cfg.validate()?;
    let sampler = EdgeSampler::new(grid)?;
    let n = grid.n();
    let runs = with_pool(cfg.threads, || {
        (0..cfg.replicas as u64)
            .into_par_iter()
            .map(|r| {
                let mut rng = replica_rng(cfg.seed, r);
                let mut eta = init_bernoulli(n, cfg.rho, &mut rng)?;
                let mut tracker = FieldTracker::new(grid, obs, cfg.track_gamma);
                run(&mut eta, &sampler, cfg.horizon, &cfg.sample_times, &mut [&mut tracker], &mut rng)?;
                Ok(tracker.finish())
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(Ensemble {
        times: cfg.sample_times.clone(),
        names: obs.iter().map(|o| o.name().to_string()).collect(),
        runs,
    })
}

struct Conservation {
    count: usize,
}

impl Observer for Conservation {
    fn start(&mut self, cfg: &Configuration) -> ObserverResult {
        self.count = cfg.count();
        Ok(())
    }

    fn on_event(&mut self, cfg: &Configuration, _ev: &Event, _t: f64) -> ObserverResult {
        if cfg.count() != self.count || cfg.popcount() != self.count {
            return Err(format!("particle count changed from {} to {}", self.count, cfg.popcount()).into());
        }
        Ok(())
    }
}

/// Final configurations of stationary trajectories on [0, T]. Fails if any
/// event changes the particle count.
pub fn simulate_final_states(grid: &Grid, rho: f64, horizon: f64, replicas: usize, seed: u64, threads: Option<usize>) -> Result<Vec<Configuration>> {
    let sampler = EdgeSampler::new(grid)?;
    let n = grid.n();
    with_pool(threads, || {
        (0..replicas as u64)
            .into_par_iter()
            .map(|r| {
                let mut rng = replica_rng(seed, r);
                let mut eta = init_bernoulli(n, rho, &mut rng)?;
                let mut cons = Conservation { count: 0 };
                run(&mut eta, &sampler, horizon, &[], &mut [&mut cons], &mut rng)?;
                Ok(eta)
            })
            .collect::<Result<Vec<_>>>()
    })?
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    FiniteNDuality,
    ManifoldLimit,
    BruteForce,
    /// Exact finite-N identity other than duality (martingale means, Γ moments).
    ExactFiniteN,
    /// One-sided upper bound.
    Bound,
}

/// One ensemble estimate paired with an oracle value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleStat {
    pub quantity: String,
    pub f: String,
    pub g: Option<String>,
    pub t: f64,
    pub s: Option<f64>,
    pub estimate: f64,
    pub se: f64,
    pub replicas: usize,
    pub oracle: Option<f64>,
    pub oracle_kind: Option<OracleKind>,
    pub z: Option<f64>,
}

impl EnsembleStat {
    pub fn new(quantity: &str, f: &str, t: f64, est: Estimate) -> Self {
        EnsembleStat {
            quantity: quantity.to_string(),
            f: f.to_string(),
            g: None,
            t,
            s: None,
            estimate: est.value,
            se: est.se,
            replicas: est.count,
            oracle: None,
            oracle_kind: None,
            z: None,
        }
    }

    pub fn with_g(mut self, g: &str, s: f64) -> Self {
        self.g = Some(g.to_string());
        self.s = Some(s);
        self
    }

    pub fn with_oracle(mut self, value: f64, kind: OracleKind) -> Self {
        self.oracle = Some(value);
        self.oracle_kind = Some(kind);
        self.z = (self.replicas >= 2 && self.se > 0.0).then(|| (self.estimate - value) / self.se);
        self
    }

    pub fn within(&self, k: f64) -> bool {
        self.z.is_some_and(|z| z.abs() <= k)
    }
}

/// Covariance table Ĉov(Y_{t+s}(f), Y_s(g)) against the duality oracle.
pub fn covariance_stats(
    ens: &Ensemble,
    spec: &SpectralLaplacian,
    obs: &[FieldObservable],
    pairs: &[(usize, usize)],
    ts: &[f64],
    ss: &[f64],
) -> Result<Vec<EnsembleStat>> {
    let mut out = Vec::new();
    for &(f, g) in pairs {
        for &s in ss {
            for &t in ts {
                let est = ens.field_covariance(f, g, t, s)?;
                let rho = obs[f].rho();
                let oracle = super::oracles::covariance_oracle_finite_n(spec, obs[f].f(), obs[g].f(), t, rho)?;
                out.push(
                    EnsembleStat::new("cov(Y_{t+s}(f), Y_s(g))", obs[f].name(), t, est)
                        .with_g(obs[g].name(), s)
                        .with_oracle(oracle, OracleKind::FiniteNDuality),
                );
            }
        }
    }
    Ok(out)
}
