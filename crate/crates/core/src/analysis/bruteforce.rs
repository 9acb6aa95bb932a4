//! Exact expectations for small grids from the full continuous-time Markov
//! chain on {0,1}^N.
//!
//! The generator acts on functions of the configuration as
//! (Qh)(η) = Σ_{i<j} c_ij (h(η^{ij}) − h(η)). It is symmetric, so product
//! Bernoulli(ρ) is reversible and e^{tQ} is computed by a Taylor series with
//! scaling, independently of the grid eigensolver.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::manifold::neumaier_sum;
use crate::sep::Configuration;

pub const MAX_BRUTE_FORCE_N: usize = 10;

#[derive(Debug, Clone)]
pub struct BruteForceModel {
    n: usize,
    rho: f64,
    edges: Vec<(usize, usize, f64)>,
    nu: Vec<f64>,
    /// max_η Σ_e c_e, an upper bound on half the row 1-norm
    rate_bound: f64,
}

/// Observable for [`BruteForceModel::expectation`].
#[derive(Debug, Clone)]
pub enum BruteForceObservable<'a> {
    /// E[(η_t(i) − ρ)(η_0(j) − ρ)]
    TwoPoint { i: usize, j: usize },
    /// E[Y_t(f) Y_0(g)]
    YCovariance { f: &'a [f64], g: &'a [f64] },
    /// E[M_t]
    MeanM { f: &'a [f64] },
    /// E[M_t²]
    SecondMomentM { f: &'a [f64] },
    /// E[∫_0^t Γ ds]
    MeanG { f: &'a [f64] },
}

impl BruteForceModel {
    pub fn new(grid: &Grid, rho: f64) -> Result<Self> {
        let n = grid.n();
        if n > MAX_BRUTE_FORCE_N {
            return Err(Error::StateSpace {
                n,
                max: MAX_BRUTE_FORCE_N,
            });
        }
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::Density(rho));
        }
        let edges: Vec<(usize, usize, f64)> = grid
            .edges()
            .iter()
            .map(|e| (e.i as usize, e.j as usize, e.weight))
            .collect();
        let nu = (0..1u64 << n)
            .map(|s| {
                let k = s.count_ones() as i32;
                rho.powi(k) * (1.0 - rho).powi(n as i32 - k)
            })
            .collect();
        let rate_bound = edges.iter().map(|e| e.2).sum();
        Ok(BruteForceModel {
            n,
            rho,
            edges,
            nu,
            rate_bound,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn states(&self) -> usize {
        1 << self.n
    }

    /// Product Bernoulli(ρ) weights indexed by state (bit i = site i).
    pub fn stationary(&self) -> &[f64] {
        &self.nu
    }

    /// Dense generator, row-major over states.
    pub fn generator_dense(&self) -> Vec<f64> {
        let s = self.states();
        let mut q = vec![0.0; s * s];
        for eta in 0..s {
            for &(i, j, c) in &self.edges {
                if (eta >> i & 1) != (eta >> j & 1) {
                    let to = eta ^ (1 << i) ^ (1 << j);
                    q[eta * s + to] += c;
                    q[eta * s + eta] -= c;
                }
            }
        }
        q
    }

    /// (Qh)(η)
    pub fn apply(&self, h: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; h.len()];
        for (eta, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &(i, j, c) in &self.edges {
                if (eta >> i & 1) != (eta >> j & 1) {
                    acc += c * (h[eta ^ (1 << i) ^ (1 << j)] - h[eta]);
                }
            }
            *o = acc;
        }
        out
    }

    /// e^{tQ} h
    pub fn expm_apply(&self, h: &[f64], t: f64) -> Result<Vec<f64>> {
        check_time(t)?;
        let s = self.states();
        let mut x = h.to_vec();
        x.push(0.0);
        let out = taylor_expmv(
            |v| {
                let mut w = self.apply(&v[..s]);
                w.push(0.0);
                w
            },
            2.0 * self.rate_bound,
            t,
            x,
        );
        Ok(out[..s].to_vec())
    }

    /// Φ₁b = ∫_0^t e^{rQ} b dr, through the augmented generator [[Q, b], [0, 0]].
    pub fn phi1_apply(&self, b: &[f64], t: f64) -> Result<Vec<f64>> {
        check_time(t)?;
        let s = self.states();
        let bn = inf_norm(b);
        let mut x = vec![0.0; s + 1];
        x[s] = 1.0;
        let out = taylor_expmv(
            |v| {
                let mut w = self.apply(&v[..s]);
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi += bi * v[s];
                }
                w.push(0.0);
                w
            },
            2.0 * self.rate_bound + bn,
            t,
            x,
        );
        Ok(out[..s].to_vec())
    }

    /// Φ₂b = ∫_0^t (t − r) e^{rQ} b dr, through
    /// [[Q, b, 0], [0, 0, 1], [0, 0, 0]].
    pub fn phi2_apply(&self, b: &[f64], t: f64) -> Result<Vec<f64>> {
        check_time(t)?;
        let s = self.states();
        let bn = inf_norm(b);
        let mut x = vec![0.0; s + 2];
        x[s + 1] = 1.0;
        let out = taylor_expmv(
            |v| {
                let mut w = self.apply(&v[..s]);
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi += bi * v[s];
                }
                w.push(v[s + 1]);
                w.push(0.0);
                w
            },
            2.0 * self.rate_bound + bn + 1.0,
            t,
            x,
        );
        Ok(out[..s].to_vec())
    }

    /// Y(f) as a function on states.
    pub fn field_vector(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                actual: f.len(),
            });
        }
        let sq = (self.n as f64).sqrt();
        Ok((0..self.states())
            .map(|eta| {
                neumaier_sum(
                    f.iter()
                        .enumerate()
                        .map(|(i, fi)| fi * (((eta >> i) & 1) as f64 - self.rho)),
                ) / sq
            })
            .collect())
    }

    /// ⟨ν, a·b⟩
    fn nu_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        neumaier_sum(self.nu.iter().zip(a).zip(b).map(|((n, a), b)| n * a * b))
    }

    pub fn expectation(&self, obs: &BruteForceObservable<'_>, t: f64) -> Result<f64> {
        check_time(t)?;
        match *obs {
            BruteForceObservable::TwoPoint { i, j } => {
                if i >= self.n || j >= self.n {
                    return Err(Error::Invalid {
                        what: "site index",
                        reason: format!("({i}, {j}) on {} sites", self.n),
                    });
                }
                let site = |k: usize| -> Vec<f64> {
                    (0..self.states())
                        .map(|eta| ((eta >> k) & 1) as f64 - self.rho)
                        .collect()
                };
                let ei = site(i);
                let ej = site(j);
                let st = self.expm_apply(&ei, t)?;
                Ok(self.nu_inner(&ej, &st))
            }
            BruteForceObservable::YCovariance { f, g } => {
                let pf = self.field_vector(f)?;
                let pg = self.field_vector(g)?;
                let st = self.expm_apply(&pf, t)?;
                Ok(self.nu_inner(&pg, &st))
            }
            BruteForceObservable::MeanM { f } => {
                let phi = self.field_vector(f)?;
                let psi = self.apply(&phi);
                let ones = vec![1.0; self.states()];
                let a = self.nu_inner(&ones, &self.expm_apply(&phi, t)?);
                let b = self.nu_inner(&ones, &phi);
                let c = self.nu_inner(&ones, &self.phi1_apply(&psi, t)?);
                Ok(a - b - c)
            }
            BruteForceObservable::SecondMomentM { f } => {
                let phi = self.field_vector(f)?;
                let psi = self.apply(&phi);
                let ea2 = 2.0 * self.nu_inner(&phi, &phi) - 2.0 * self.nu_inner(&phi, &self.expm_apply(&phi, t)?);
                let eab = self.nu_inner(&psi, &self.phi1_apply(&phi, t)?)
                    - self.nu_inner(&phi, &self.phi1_apply(&psi, t)?);
                let eb2 = 2.0 * self.nu_inner(&psi, &self.phi2_apply(&psi, t)?);
                Ok(ea2 - 2.0 * eab + eb2)
            }
            BruteForceObservable::MeanG { f } => {
                let phi = self.field_vector(f)?;
                let phi_sq: Vec<f64> = phi.iter().map(|p| p * p).collect();
                let q_sq = self.apply(&phi_sq);
                let q_phi = self.apply(&phi);
                let gamma: Vec<f64> = q_sq
                    .iter()
                    .zip(&phi)
                    .zip(&q_phi)
                    .map(|((a, p), b)| a - 2.0 * p * b)
                    .collect();
                let ones = vec![1.0; self.states()];
                Ok(t * self.nu_inner(&ones, &gamma))
            }
        }
    }

    /// Law of η_t started from the law `p0`. Q is symmetric, so the row
    /// vector p e^{tQ} equals e^{tQ} p.
    pub fn evolve_distribution(&self, p0: &[f64], t: f64) -> Result<Vec<f64>> {
        self.expm_apply(p0, t)
    }

    /// Law of η_t started from ν_ρ.
    pub fn distribution_at(&self, t: f64) -> Result<Vec<f64>> {
        self.evolve_distribution(&self.nu.clone(), t)
    }

    /// Law of η_t started from a fixed configuration.
    pub fn distribution_from(&self, start: &Configuration, t: f64) -> Result<Vec<f64>> {
        let mut p = vec![0.0; self.states()];
        p[start.to_index() as usize] = 1.0;
        self.evolve_distribution(&p, t)
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::NegativeTime(t));
    }
    Ok(())
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// e^{tA} x for an operator with ‖A‖ ≤ beta, by s = ⌈tβ⌉ Taylor steps of
/// size h = t/s, each truncated once the next term drops below 1e-17
/// relative.
fn taylor_expmv<F: Fn(&[f64]) -> Vec<f64>>(apply: F, beta: f64, t: f64, mut x: Vec<f64>) -> Vec<f64> {
    if t == 0.0 {
        return x;
    }
    let steps = (t * beta).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    for _ in 0..steps {
        let mut term = x.clone();
        let mut acc = x.clone();
        for k in 1..200 {
            let next = apply(&term);
            let scale = h / k as f64;
            term = next.into_iter().map(|v| v * scale).collect();
            for (a, t) in acc.iter_mut().zip(&term) {
                *a += t;
            }
            if inf_norm(&term) <= 1e-17 * inf_norm(&acc).max(1e-300) {
                break;
            }
        }
        x = acc;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Bandwidth, Edge};
    use crate::manifold::{ManifoldModel, Point};

    fn pair(c: f64) -> Grid {
        Grid::from_parts(
            ManifoldModel::circle(),
            vec![Point::angle(0.0), Point::angle(0.1)],
            vec![Edge { i: 0, j: 1, weight: c }],
            1.0,
            0,
        )
        .unwrap()
    }

    fn small() -> Grid {
        build_grid(&ManifoldModel::circle(), 6, Bandwidth::Fixed(2.5), 21).unwrap()
    }

    #[test]
    fn size_limit() {
        let g = build_grid(&ManifoldModel::circle(), 11, Bandwidth::Auto, 1).unwrap();
        assert!(matches!(BruteForceModel::new(&g, 0.5), Err(Error::StateSpace { n: 11, max: 10 })));
    }

    #[test]
    fn generator_structure() {
        let m = BruteForceModel::new(&small(), 0.3).unwrap();
        let s = m.states();
        let q = m.generator_dense();
        for a in 0..s {
            let row: f64 = q[a * s..(a + 1) * s].iter().sum();
            assert!(row.abs() < 1e-12);
            for b in 0..s {
                if a != b {
                    assert!(q[a * s + b] >= 0.0);
                    assert_eq!(q[a * s + b], q[b * s + a]);
                }
            }
        }
        // ν Q = 0
        for b in 0..s {
            let v: f64 = (0..s).map(|a| m.stationary()[a] * q[a * s + b]).sum();
            assert!(v.abs() < 1e-10);
        }
        let total: f64 = m.stationary().iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn two_point_at_zero() {
        let m = BruteForceModel::new(&small(), 0.4).unwrap();
        assert!(m.expectation(&BruteForceObservable::TwoPoint { i: 1, j: 3 }, 0.0).unwrap().abs() < 1e-15);
        let v = m.expectation(&BruteForceObservable::TwoPoint { i: 2, j: 2 }, 0.0).unwrap();
        assert!((v - 0.24).abs() < 1e-15);
    }

    #[test]
    fn two_site_closed_form() {
        let c = 0.8;
        let m = BruteForceModel::new(&pair(c), 0.5).unwrap();
        for t in [0.1, 0.5, 2.0, 7.0] {
            let v = m.expectation(&BruteForceObservable::TwoPoint { i: 0, j: 1 }, t).unwrap();
            let exact = 0.25 * (1.0 - (-2.0 * c * t).exp()) / 2.0;
            assert!((v - exact).abs() < 1e-12, "t={t}: {v} vs {exact}");
        }
    }

    #[test]
    fn expm_matches_dense_eigen_free_check() {
        // e^{tQ} e^{uQ} = e^{(t+u)Q} and mass conservation of distributions
        let m = BruteForceModel::new(&small(), 0.5).unwrap();
        let p0: Vec<f64> = (0..m.states()).map(|k| if k == 5 { 1.0 } else { 0.0 }).collect();
        let a = m.evolve_distribution(&m.evolve_distribution(&p0, 0.3).unwrap(), 0.9).unwrap();
        let b = m.evolve_distribution(&p0, 1.2).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-13);
        }
        assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        assert!(b.iter().all(|&p| p >= -1e-15));
        // particle number is conserved: mass stays on states with 2 particles
        for (k, p) in b.iter().enumerate() {
            if (k as u64).count_ones() != 2 {
                assert!(p.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn phi_integrals_match_quadrature() {
        let m = BruteForceModel::new(&small(), 0.5).unwrap();
        let b: Vec<f64> = (0..m.states()).map(|k| (k as f64 * 0.37).sin()).collect();
        let t = 0.8;
        let p1 = m.phi1_apply(&b, t).unwrap();
        let p2 = m.phi2_apply(&b, t).unwrap();
        // composite Simpson over r
        let n = 200;
        let h = t / n as f64;
        let mut s1 = vec![0.0; b.len()];
        let mut s2 = vec![0.0; b.len()];
        for k in 0..=n {
            let r = k as f64 * h;
            let w = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            let e = m.expm_apply(&b, r).unwrap();
            for i in 0..b.len() {
                s1[i] += w * h / 3.0 * e[i];
                s2[i] += w * h / 3.0 * (t - r) * e[i];
            }
        }
        for i in 0..b.len() {
            assert!((p1[i] - s1[i]).abs() < 1e-8);
            assert!((p2[i] - s2[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn martingale_moments() {
        let g = small();
        let m = BruteForceModel::new(&g, 0.5).unwrap();
        let f: Vec<f64> = g.points().iter().map(|p| 2f64.sqrt() * p.coords[0].cos()).collect();
        for t in [0.0, 0.3, 1.5] {
            let em = m.expectation(&BruteForceObservable::MeanM { f: &f }, t).unwrap();
            assert!(em.abs() < 1e-12);
            // Dynkin: E[M_t²] = E[∫Γ]
            let m2 = m.expectation(&BruteForceObservable::SecondMomentM { f: &f }, t).unwrap();
            let eg = m.expectation(&BruteForceObservable::MeanG { f: &f }, t).unwrap();
            assert!((m2 - eg).abs() < 1e-10, "t={t}: {m2} vs {eg}");
        }
    }

    #[test]
    fn constant_field_is_trivial() {
        let g = small();
        let m = BruteForceModel::new(&g, 0.5).unwrap();
        let one = vec![1.0; 6];
        let v = m.expectation(&BruteForceObservable::SecondMomentM { f: &one }, 1.0).unwrap();
        assert!(v.abs() < 1e-12);
        let v = m.expectation(&BruteForceObservable::MeanG { f: &one }, 1.0).unwrap();
        assert!(v.abs() < 1e-12);
    }
}
