//! Replica statistics. All reductions run in index order with compensated
//! summation, so results do not depend on how replicas were scheduled.

use serde::Serialize;

pub use crate::manifold::neumaier_sum;

/// Estimate with its standard error over `count` replicas. The standard
/// error is NaN when `count < 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
    pub count: usize,
}

impl Estimate {
    pub fn se_defined(&self) -> bool {
        self.count >= 2 && self.se.is_finite()
    }

    /// (value − target) / se, if the standard error is defined and positive.
    pub fn z(&self, target: f64) -> Option<f64> {
        (self.se_defined() && self.se > 0.0).then(|| (self.value - target) / self.se)
    }

    /// |value − target| <= k·se.
    pub fn within(&self, target: f64, k: f64) -> bool {
        match self.z(target) {
            Some(z) => z.abs() <= k,
            None => self.se_defined() && self.value == target,
        }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    neumaier_sum(xs.iter().copied()) / xs.len() as f64
}

/// Unbiased sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    neumaier_sum(xs.iter().map(|x| (x - m).powi(2))) / (n - 1) as f64
}

/// Sample mean with standard error s/√R.
pub fn mean_estimate(xs: &[f64]) -> Estimate {
    let n = xs.len();
    let se = if n >= 2 {
        (sample_variance(xs) / n as f64).sqrt()
    } else {
        f64::NAN
    };
    Estimate {
        value: mean(xs),
        se,
        count: n,
    }
}

/// Unbiased sample covariance with a jackknife standard error.
pub fn covariance_estimate(xs: &[f64], ys: &[f64]) -> Estimate {
    assert_eq!(xs.len(), ys.len());
    let r = xs.len();
    if r < 3 {
        let value = if r == 2 {
            (xs[0] - xs[1]) * (ys[0] - ys[1]) / 2.0
        } else {
            f64::NAN
        };
        return Estimate {
            value,
            se: f64::NAN,
            count: r,
        };
    }
    let rf = r as f64;
    let sx = neumaier_sum(xs.iter().copied());
    let sy = neumaier_sum(ys.iter().copied());
    let sxy = neumaier_sum(xs.iter().zip(ys).map(|(x, y)| x * y));
    let value = (sxy - sx * sy / rf) / (rf - 1.0);
    // leave-one-out covariances in O(R)
    let loo: Vec<f64> = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let m = rf - 1.0;
            ((sxy - x * y) - (sx - x) * (sy - y) / m) / (m - 1.0)
        })
        .collect();
    let lm = mean(&loo);
    let se = ((rf - 1.0) / rf * neumaier_sum(loo.iter().map(|c| (c - lm).powi(2)))).sqrt();
    Estimate {
        value,
        se,
        count: r,
    }
}

/// Sample skewness g₁ and excess kurtosis g₂ (moment estimators).
pub fn skewness_kurtosis(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = mean(xs);
    let m2 = neumaier_sum(xs.iter().map(|x| (x - m).powi(2))) / n;
    let m3 = neumaier_sum(xs.iter().map(|x| (x - m).powi(3))) / n;
    let m4 = neumaier_sum(xs.iter().map(|x| (x - m).powi(4))) / n;
    (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replica_rng;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn single_replica_has_no_se() {
        let e = mean_estimate(&[1.5]);
        assert_eq!(e.value, 1.5);
        assert!(!e.se_defined());
        assert_eq!(e.z(0.0), None);
        assert!(!covariance_estimate(&[1.0], &[2.0]).se_defined());
    }

    #[test]
    fn covariance_matches_direct_formula() {
        let mut rng = replica_rng(3, 0);
        let xs: Vec<f64> = (0..500).map(|_| rng.gen::<f64>()).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * 0.5 + rng.gen::<f64>()).collect();
        let e = covariance_estimate(&xs, &ys);
        let mx = mean(&xs);
        let my = mean(&ys);
        let direct: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / 499.0;
        assert!((e.value - direct).abs() < 1e-12);
        // Var(U)/2 = 1/24
        assert!((e.value - 1.0 / 24.0).abs() < 4.0 * e.se);
        assert!(e.se > 0.0);
    }

    #[test]
    fn jackknife_se_for_variance_is_calibrated() {
        // For Gaussian data Var(s²) = 2σ⁴/(R−1).
        let mut rng = replica_rng(4, 0);
        let xs: Vec<f64> = (0..20_000)
            .map(|_| {
                let u: f64 = rng.gen();
                let v: f64 = rng.gen();
                (-2.0 * (1.0 - u).ln()).sqrt() * (std::f64::consts::TAU * v).cos()
            })
            .collect();
        let e = covariance_estimate(&xs, &xs);
        let theory = (2.0 / 19_999.0f64).sqrt();
        assert!((e.se / theory - 1.0).abs() < 0.1);
        let (s, k) = skewness_kurtosis(&xs);
        assert!(s.abs() < 4.0 * (6.0 / 20_000.0f64).sqrt());
        assert!(k.abs() < 4.0 * (24.0 / 20_000.0f64).sqrt());
    }

    proptest! {
        #[test]
        fn z_recomputable(xs in prop::collection::vec(-5.0f64..5.0, 3..100), target in -1.0f64..1.0) {
            let e = mean_estimate(&xs);
            prop_assume!(e.se > 0.0);
            let z = e.z(target).unwrap();
            prop_assert!((z * e.se + target - e.value).abs() < 1e-9);
        }

        #[test]
        fn sum_is_order_insensitive(xs in prop::collection::vec(-1e6f64..1e6, 1..200)) {
            let a = neumaier_sum(xs.iter().copied());
            let b = neumaier_sum(xs.iter().rev().copied());
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
    }
}
