//! Experiment configuration (TOML).
//!
//! ```toml
//! name = "covariance-decay"
//! seed = 2
//! replicas = 4000
//! functions = [[1], [2]]
//! suites = ["covariance"]
//!
//! [manifold]
//! kind = "circle"            # circle | torus (with dim = 1 or 2) | sphere
//!
//! [grid]
//! sizes = [2000]             # strictly increasing N-ladder
//! seed = 1
//! bandwidth = "auto"         # or { scale = 2.25 } or { fixed = 0.05 }
//!
//! [dynamics]
//! rho = 0.5
//! horizon = 2.5
//! samples = 50               # K: uniform times 0, T/K, ..., T
//! # times = [0.0, 0.5, 2.5]  # explicit times instead of `samples`
//!
//! [checks]
//! z = 4.0
//! ```

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sepfluct::analysis::MAX_BRUTE_FORCE_N;
use sepfluct::grid::DEFAULT_DENSE_CAP;
use sepfluct::{Bandwidth, ManifoldModel};

pub const DEFAULT_REPLICAS: usize = 4000;
pub const DEFAULT_SAMPLES: usize = 50;

/// A check family that can be enabled in a config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Variance,
    Covariance,
    Martingale,
    LaplacianConvergence,
    BruteForce,
    Replacement,
    GammaMean,
    GammaVariance,
    Tightness,
}

impl Suite {
    pub const ALL: [Suite; 9] = [
        Suite::Variance,
        Suite::Covariance,
        Suite::Martingale,
        Suite::LaplacianConvergence,
        Suite::BruteForce,
        Suite::Replacement,
        Suite::GammaMean,
        Suite::GammaVariance,
        Suite::Tightness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Variance => "variance",
            Suite::Covariance => "covariance",
            Suite::Martingale => "martingale",
            Suite::LaplacianConvergence => "laplacian-convergence",
            Suite::BruteForce => "brute-force",
            Suite::Replacement => "replacement",
            Suite::GammaMean => "gamma-mean",
            Suite::GammaVariance => "gamma-variance",
            Suite::Tightness => "tightness",
        }
    }

    /// Needs simulated trajectories on every ladder grid.
    pub fn needs_ensemble(self) -> bool {
        matches!(
            self,
            Suite::Variance | Suite::Covariance | Suite::Martingale | Suite::BruteForce | Suite::Replacement | Suite::Tightness
        )
    }

    /// Needs the dense eigendecomposition of every ladder grid.
    pub fn needs_spectrum(self) -> bool {
        matches!(self, Suite::Covariance | Suite::BruteForce | Suite::Replacement | Suite::Tightness)
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ManifoldSpec {
    Circle,
    Torus { dim: usize },
    Sphere,
}

impl ManifoldSpec {
    pub fn model(&self) -> sepfluct::Result<ManifoldModel> {
        match *self {
            ManifoldSpec::Circle => Ok(ManifoldModel::circle()),
            ManifoldSpec::Torus { dim } => ManifoldModel::flat_torus(dim),
            ManifoldSpec::Sphere => Ok(ManifoldModel::sphere2()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandwidthSpec {
    #[default]
    Auto,
    /// ε = A (ln N / N)^{1/(d+4)} with a custom A.
    Scale(f64),
    Fixed(f64),
}

impl BandwidthSpec {
    pub fn rule(&self) -> Bandwidth {
        match *self {
            BandwidthSpec::Auto => Bandwidth::Auto,
            BandwidthSpec::Scale(a) => Bandwidth::Scaled(a),
            BandwidthSpec::Fixed(e) => Bandwidth::Fixed(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub sizes: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub bandwidth: BandwidthSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dynamics {
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
}

impl Default for Dynamics {
    fn default() -> Self {
        Dynamics {
            rho: default_rho(),
            horizon: default_horizon(),
            samples: default_samples(),
            times: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSettings {
    /// Tolerance in standard errors for every statistical comparison.
    #[serde(default = "default_z")]
    pub z: f64,
    /// Lags t for Ĉov(Y_{t+s}(f), Y_s(g)); defaults to sample times at 0, T/4, T/2, T.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lags: Option<Vec<f64>>,
    /// Start times s for the covariance table.
    #[serde(default = "default_offsets")]
    pub offsets: Vec<f64>,
    /// Grid seeds averaged by the laplacian-convergence and gamma-variance suites.
    #[serde(default = "default_trend_seeds")]
    pub trend_seeds: u64,
    /// ν_ρ configurations per grid in the gamma-variance suite.
    #[serde(default = "default_gamma_configs")]
    pub gamma_configs: usize,
    /// Total-variation tolerance for the brute-force law comparison.
    #[serde(default = "default_tv")]
    pub tv_tolerance: f64,
}

impl Default for CheckSettings {
    fn default() -> Self {
        CheckSettings {
            z: default_z(),
            lags: None,
            offsets: default_offsets(),
            trend_seeds: default_trend_seeds(),
            gamma_configs: default_gamma_configs(),
            tv_tolerance: default_tv(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    /// Master seed for the replica streams.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Also write per-replica trajectories as CSV.
    #[serde(default)]
    pub trajectories: bool,
    /// Eigenfunction multi-indices.
    pub functions: Vec<Vec<i32>>,
    pub suites: Vec<Suite>,
    pub manifold: ManifoldSpec,
    pub grid: GridSpec,
    #[serde(default)]
    pub dynamics: Dynamics,
    #[serde(default)]
    pub checks: CheckSettings,
}

fn default_name() -> String {
    "experiment".into()
}
fn default_replicas() -> usize {
    DEFAULT_REPLICAS
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}
fn default_rho() -> f64 {
    0.5
}
fn default_horizon() -> f64 {
    1.0
}
fn default_samples() -> usize {
    DEFAULT_SAMPLES
}
fn default_z() -> f64 {
    4.0
}
fn default_offsets() -> Vec<f64> {
    vec![0.0]
}
fn default_trend_seeds() -> u64 {
    20
}
fn default_gamma_configs() -> usize {
    100
}
fn default_tv() -> f64 {
    0.02
}

/// One failed invariant, located by its dotted field path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("malformed config: {0}")]
    Syntax(String),
    #[error("invalid config:\n{}", .0.iter().map(|v| format!("  {v}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Violation>),
}

impl ConfigError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            ConfigError::Invalid(v) => v,
            _ => &[],
        }
    }
}

/// Command-line or environment overrides applied before validation.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replicas: Option<usize>,
    pub threads: Option<usize>,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Parses TOML text without validating.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(r) = o.replicas {
            self.replicas = r;
        }
        if let Some(t) = o.threads {
            self.threads = Some(t);
        }
        if let Some(p) = &o.output {
            self.output = p.clone();
        }
    }

    /// Sampling times: explicit list or K + 1 uniform points on [0, T].
    pub fn sample_times(&self) -> Vec<f64> {
        match &self.dynamics.times {
            Some(t) => t.clone(),
            None => sepfluct::analysis::EnsembleConfig::uniform_times(self.dynamics.horizon, self.dynamics.samples),
        }
    }

    pub fn covariance_lags(&self) -> Vec<f64> {
        if let Some(l) = &self.checks.lags {
            return l.clone();
        }
        let times = self.sample_times();
        let k = times.len() - 1;
        let idx: BTreeSet<usize> = [0, k / 4, k / 2, k].into_iter().collect();
        idx.into_iter().map(|i| times[i] - times[0]).collect()
    }

    pub fn has(&self, s: Suite) -> bool {
        self.suites.contains(&s)
    }

    /// Every invariant violation, not just the first.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut v = Vec::new();
        let mut bad = |path: &str, message: String| {
            v.push(Violation {
                path: path.to_string(),
                message,
            })
        };

        let model = self.manifold.model();
        if let Err(e) = &model {
            bad("manifold.dim", e.to_string());
        }
        // TOML integers are signed 64-bit.
        for (path, seed) in [("seed", self.seed), ("grid.seed", self.grid.seed)] {
            if seed > i64::MAX as u64 {
                bad(path, format!("must be below 2^63, got {seed}"));
            }
        }
        if self.replicas < 1 {
            bad("replicas", "must be at least 1".into());
        }
        if self.threads == Some(0) {
            bad("threads", "must be at least 1".into());
        }
        if self.functions.is_empty() {
            bad("functions", "list at least one eigenfunction index".into());
        }
        if let Ok(m) = &model {
            for (k, idx) in self.functions.iter().enumerate() {
                if let Err(e) = m.eigenfunction(idx) {
                    bad(&format!("functions[{k}]"), e.to_string());
                }
            }
        }
        if self.suites.is_empty() {
            bad("suites", "enable at least one suite".into());
        }
        let mut seen = BTreeSet::new();
        for (k, s) in self.suites.iter().enumerate() {
            if !seen.insert(*s) {
                bad(&format!("suites[{k}]"), format!("duplicate suite {s}"));
            }
        }

        let sizes = &self.grid.sizes;
        if sizes.is_empty() {
            bad("grid.sizes", "list at least one grid size".into());
        }
        if sizes.windows(2).any(|w| w[1] <= w[0]) {
            bad("grid.sizes", format!("must be strictly increasing, got {sizes:?}"));
        }
        if sizes.first().is_some_and(|&n| n < 2) {
            bad("grid.sizes", "grids need at least 2 points".into());
        }
        match self.grid.bandwidth {
            BandwidthSpec::Auto => {}
            BandwidthSpec::Scale(a) if a > 0.0 && a.is_finite() => {}
            BandwidthSpec::Fixed(e) if e > 0.0 && e.is_finite() => {}
            BandwidthSpec::Scale(a) => bad("grid.bandwidth.scale", format!("must be positive, got {a}")),
            BandwidthSpec::Fixed(e) => bad("grid.bandwidth.fixed", format!("must be positive, got {e}")),
        }
        let max_n = sizes.iter().copied().max().unwrap_or(0);
        if self.suites.iter().any(|s| s.needs_spectrum()) && max_n > DEFAULT_DENSE_CAP {
            bad(
                "grid.sizes",
                format!("suites covariance/brute-force/replacement/tightness need N <= {DEFAULT_DENSE_CAP}, got {max_n}"),
            );
        }
        if self.has(Suite::BruteForce) && max_n > MAX_BRUTE_FORCE_N {
            bad("grid.sizes", format!("suite brute-force needs N <= {MAX_BRUTE_FORCE_N}, got {max_n}"));
        }

        let d = &self.dynamics;
        if !(d.rho > 0.0 && d.rho < 1.0) {
            bad("dynamics.rho", format!("must lie in (0, 1), got {}", d.rho));
        }
        if !(d.horizon >= 0.0 && d.horizon.is_finite()) {
            bad("dynamics.horizon", format!("must be finite and >= 0, got {}", d.horizon));
        }
        if d.samples < 1 {
            bad("dynamics.samples", "must be at least 1".into());
        }
        if let Some(times) = &d.times {
            if times.is_empty() {
                bad("dynamics.times", "list at least one time".into());
            }
            if times.windows(2).any(|w| w[1] <= w[0]) {
                bad("dynamics.times", "must be strictly increasing".into());
            }
            if times.iter().any(|&t| !(t >= 0.0 && t <= d.horizon)) {
                bad("dynamics.times", format!("must lie in [0, {}]", d.horizon));
            }
            if self.has(Suite::Tightness) {
                bad("dynamics.times", "suite tightness needs uniform sampling; use dynamics.samples".into());
            }
        }

        let c = &self.checks;
        if !(c.z > 0.0 && c.z.is_finite()) {
            bad("checks.z", format!("must be positive, got {}", c.z));
        }
        if c.trend_seeds < 1 {
            bad("checks.trend_seeds", "must be at least 1".into());
        }
        if c.gamma_configs < 2 {
            bad("checks.gamma_configs", "need at least 2 configurations for a variance".into());
        }
        if !(c.tv_tolerance > 0.0) {
            bad("checks.tv_tolerance", format!("must be positive, got {}", c.tv_tolerance));
        }
        if self.has(Suite::Covariance) || self.has(Suite::BruteForce) {
            let times = self.sample_times();
            let on_grid = |t: f64| times.iter().any(|&s| (s - t).abs() <= 1e-12 * (1.0 + t.abs()));
            for &s in &c.offsets {
                if !on_grid(s) {
                    bad("checks.offsets", format!("{s} is not a sampling time"));
                }
                for &t in &self.covariance_lags() {
                    if !on_grid(t + s) {
                        bad("checks.lags", format!("lag {t} at offset {s} is not a sampling time"));
                    }
                }
            }
        }

        if v.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(v))
        }
    }
}

/// Parses and validates TOML text.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let cfg = ExperimentConfig::from_toml(text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads, applies overrides, then validates.
pub fn load_config(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let mut cfg = ExperimentConfig::from_toml(&text)?;
    cfg.apply(overrides);
    cfg.validate()?;
    Ok(cfg)
}
