//! Ensemble statistics, exact oracles and pass/fail checks.
//!
//! Oracles come in two tiers. Finite-N identities (duality covariance, Dynkin
//! martingale moments, Γ mean and variance, brute-force chain) are exact and
//! serve as pass/fail ground truth. Manifold limits are N → ∞ statements and
//! are checked as trends across a ladder of grid sizes.

pub mod bruteforce;
pub mod checks;
pub mod ensemble;
pub mod oracles;
pub mod stats;

pub use bruteforce::{BruteForceModel, BruteForceObservable, MAX_BRUTE_FORCE_N};
pub use checks::{martingale_test, normality_check, total_variation, trend_nonincreasing, Check, MartingaleReport};
pub use ensemble::{
    covariance_stats, simulate_ensemble, simulate_final_states, Ensemble, EnsembleConfig, EnsembleStat, OracleKind,
    Quantity,
};
pub use oracles::{
    covariance_oracle_finite_n, covariance_oracle_limit, gamma_mean_oracle, gamma_variance_oracle,
    integrated_field_second_moment, replacement_bound,
};
pub use stats::Estimate;
