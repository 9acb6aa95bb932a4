//! Fluctuation field Y_t(f) = N^{-1/2} Σ f(p_i)(η_t(p_i) − ρ) and the two
//! Dynkin martingales
//!
//! ```text
//! M_t = Y_t(f) − Y_0(f) − ∫_0^t Y_s(𝓛f) ds
//! N_t = M_t² − ∫_0^t Γ(s) ds,   Γ = (1/N) Σ_{i<j} c_ij (η_j − η_i)² (f_j − f_i)²
//! ```
//!
//! Between events η is constant, so both time integrals are accumulated
//! exactly as sums of (holding time × integrand). A swap of unequal values at
//! (i, j) changes Y by a two-site difference and flips the indicator
//! [η_k ≠ η_l] on every other edge touching i or j, so all running values are
//! updated in O(deg) per event.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::manifold::{neumaier_sum, TestFunction};
use crate::sep::{Configuration, Event, Observer, ObserverResult};

/// Per-grid precomputation for one test function.
#[derive(Debug, Clone)]
pub struct FieldObservable {
    name: String,
    rho: f64,
    f: Vec<f64>,
    lf: Vec<f64>,
    delta_f: Option<Vec<f64>>,
    grad_sq: Option<Vec<f64>>,
    edge_w: Vec<f64>,
    l2_norm_sq: Option<f64>,
    dirichlet_energy: Option<f64>,
    eigenvalue: Option<f64>,
}

impl FieldObservable {
    /// Precomputes f, 𝓛f, Δf and |∇f|² on the grid. Integrals over the
    /// manifold come from closed forms when known, otherwise quadrature.
    pub fn new(grid: &Grid, f: &TestFunction, rho: f64) -> Result<Self> {
        let pts = grid.points();
        let vals = f.values(pts);
        let mut obs = Self::from_values(grid, f.name(), vals, rho)?;
        obs.delta_f = Some(pts.iter().map(|p| f.laplacian(p)).collect());
        obs.grad_sq = Some(pts.iter().map(|p| f.grad_sq(p)).collect());
        let m = grid.manifold();
        obs.l2_norm_sq = Some(f.l2_norm_sq().unwrap_or_else(|| m.integrate(|p| f.value(p).powi(2))));
        obs.dirichlet_energy = Some(f.dirichlet_energy().unwrap_or_else(|| m.integrate(|p| f.grad_sq(p))));
        obs.eigenvalue = f.eigenvalue();
        Ok(obs)
    }

    /// Observable for an arbitrary vector on the grid points, without
    /// manifold data.
    pub fn from_values(grid: &Grid, name: &str, f: Vec<f64>, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::Density(rho));
        }
        let lf = grid.laplacian_apply(&f)?;
        let edge_w = grid
            .edges()
            .iter()
            .map(|e| e.weight * (f[e.j as usize] - f[e.i as usize]).powi(2))
            .collect();
        Ok(FieldObservable {
            name: name.to_string(),
            rho,
            f,
            lf,
            delta_f: None,
            grad_sq: None,
            edge_w,
            l2_norm_sq: None,
            dirichlet_energy: None,
            eigenvalue: None,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn n(&self) -> usize {
        self.f.len()
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    /// 𝓛f on the grid.
    pub fn lf(&self) -> &[f64] {
        &self.lf
    }

    /// Δ_M f on the grid, if built from a test function.
    pub fn delta_f(&self) -> Option<&[f64]> {
        self.delta_f.as_deref()
    }

    pub fn grad_sq(&self) -> Option<&[f64]> {
        self.grad_sq.as_deref()
    }

    /// w_e = c_e (f_j − f_i)² per edge, in grid edge order.
    pub fn edge_weights(&self) -> &[f64] {
        &self.edge_w
    }

    pub fn l2_norm_sq(&self) -> Option<f64> {
        self.l2_norm_sq
    }

    pub fn dirichlet_energy(&self) -> Option<f64> {
        self.dirichlet_energy
    }

    pub fn eigenvalue(&self) -> Option<f64> {
        self.eigenvalue
    }

    /// 𝓛f − Δ_M f on the grid.
    pub fn replacement_residual(&self) -> Option<Vec<f64>> {
        let d = self.delta_f.as_ref()?;
        Some(self.lf.iter().zip(d).map(|(a, b)| a - b).collect())
    }

    /// Exact mean of Γ under product Bernoulli: −(2ρ(1−ρ)/N) Σ f 𝓛f.
    pub fn gamma_mean(&self) -> f64 {
        let n = self.n() as f64;
        -2.0 * self.rho * (1.0 - self.rho) / n * neumaier_sum(self.f.iter().zip(&self.lf).map(|(a, b)| a * b))
    }

    /// Limit of the Γ mean: 2ρ(1−ρ)∫|∇f|² dV̄.
    pub fn gamma_limit(&self) -> Option<f64> {
        Some(2.0 * self.rho * (1.0 - self.rho) * self.dirichlet_energy?)
    }
}

/// N^{-1/2} Σ g_i (η_i − ρ).
pub fn pair_with(cfg: &Configuration, g: &[f64], rho: f64) -> f64 {
    let n = g.len();
    neumaier_sum(g.iter().enumerate().map(|(i, gi)| gi * (cfg.value(i) - rho))) / (n as f64).sqrt()
}

/// Y(f) for the current configuration.
pub fn field_eval(cfg: &Configuration, obs: &FieldObservable) -> f64 {
    pair_with(cfg, &obs.f, obs.rho)
}

/// dt · Y(𝓛f), the drift accumulated over a holding time.
pub fn drift_increment(cfg: &Configuration, obs: &FieldObservable, dt: f64) -> f64 {
    if dt == 0.0 {
        return 0.0;
    }
    dt * pair_with(cfg, &obs.lf, obs.rho)
}

/// Γ = (1/N) Σ_{i<j} c_ij (η_j − η_i)² (f_j − f_i)².
pub fn gamma_eval(cfg: &Configuration, obs: &FieldObservable, grid: &Grid) -> f64 {
    let s = neumaier_sum(
        grid.edges()
            .iter()
            .zip(&obs.edge_w)
            .filter(|(e, _)| cfg.get(e.i as usize) != cfg.get(e.j as usize))
            .map(|(_, w)| *w),
    );
    s / grid.n() as f64
}

/// Samples of one field along one trajectory.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FieldTrajectory {
    pub f_name: String,
    pub times: Vec<f64>,
    /// Y_{t_k}(f)
    pub y: Vec<f64>,
    /// ∫_0^{t_k} Y_s(𝓛f) ds
    pub drift: Vec<f64>,
    /// ∫_0^{t_k} Γ(s) ds
    pub gamma: Vec<f64>,
    /// ∫_0^{t_k} Y_s(𝓛f − Δf) ds, when Δf is known
    pub replacement: Vec<f64>,
    pub m: Vec<f64>,
    pub n: Vec<f64>,
}

impl FieldTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// M_k = Y_k − Y_0 − I_k and N_k = M_k² − G_k.
pub fn finalize_martingales(traj: &mut FieldTrajectory) {
    let y0 = traj.y.first().copied().unwrap_or(0.0);
    traj.m = traj
        .y
        .iter()
        .zip(&traj.drift)
        .map(|(y, i)| y - y0 - i)
        .collect();
    traj.n = traj
        .m
        .iter()
        .zip(&traj.gamma)
        .map(|(m, g)| m * m - g)
        .collect();
}

/// Running sum with Neumaier compensation.
#[derive(Debug, Clone, Copy, Default)]
struct Accum {
    sum: f64,
    comp: f64,
}

impl Accum {
    #[inline]
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Debug, Clone)]
struct Running {
    y: f64,
    ylf: f64,
    yrep: f64,
    gamma: f64,
    drift: Accum,
    gamma_int: Accum,
    rep_int: Accum,
}

/// Observer that tracks every configured field along a trajectory.
///
/// Running values are refreshed from scratch at each sampling time so
/// rounding from incremental updates cannot accumulate across samples.
pub struct FieldTracker<'a> {
    grid: &'a Grid,
    obs: &'a [FieldObservable],
    residuals: Vec<Option<Vec<f64>>>,
    track_gamma: bool,
    state: Vec<Running>,
    out: Vec<FieldTrajectory>,
    inv_sqrt_n: f64,
    inv_n: f64,
}

impl<'a> FieldTracker<'a> {
    /// `track_gamma` enables the O(deg) carré du champ updates; without it
    /// the Γ integral is reported as zero.
    pub fn new(grid: &'a Grid, obs: &'a [FieldObservable], track_gamma: bool) -> Self {
        let n = grid.n() as f64;
        FieldTracker {
            grid,
            obs,
            residuals: obs.iter().map(|o| o.replacement_residual()).collect(),
            track_gamma,
            state: Vec::new(),
            out: obs
                .iter()
                .map(|o| FieldTrajectory {
                    f_name: o.name.clone(),
                    ..Default::default()
                })
                .collect(),
            inv_sqrt_n: 1.0 / n.sqrt(),
            inv_n: 1.0 / n,
        }
    }

    fn refresh(&mut self, cfg: &Configuration) {
        for (k, o) in self.obs.iter().enumerate() {
            let st = &mut self.state[k];
            st.y = field_eval(cfg, o);
            st.ylf = pair_with(cfg, &o.lf, o.rho);
            st.yrep = self.residuals[k]
                .as_ref()
                .map_or(0.0, |r| pair_with(cfg, r, o.rho));
            if self.track_gamma {
                st.gamma = gamma_eval(cfg, o, self.grid);
            }
        }
    }

    /// Finished trajectories with M and N filled in.
    pub fn finish(mut self) -> Vec<FieldTrajectory> {
        for t in self.out.iter_mut() {
            finalize_martingales(t);
        }
        self.out
    }
}

impl Observer for FieldTracker<'_> {
    fn start(&mut self, cfg: &Configuration) -> ObserverResult {
        if cfg.len() != self.grid.n() {
            return Err(format!("configuration has {} sites, grid has {}", cfg.len(), self.grid.n()).into());
        }
        self.state = vec![
            Running {
                y: 0.0,
                ylf: 0.0,
                yrep: 0.0,
                gamma: 0.0,
                drift: Accum::default(),
                gamma_int: Accum::default(),
                rep_int: Accum::default(),
            };
            self.obs.len()
        ];
        self.refresh(cfg);
        Ok(())
    }

    #[inline]
    fn hold(&mut self, _cfg: &Configuration, dt: f64) -> ObserverResult {
        if dt > 0.0 {
            for st in self.state.iter_mut() {
                st.drift.add(dt * st.ylf);
                st.rep_int.add(dt * st.yrep);
                if self.track_gamma {
                    st.gamma_int.add(dt * st.gamma);
                }
            }
        }
        Ok(())
    }

    #[inline]
    fn on_event(&mut self, cfg: &Configuration, ev: &Event, _t: f64) -> ObserverResult {
        if !ev.swapped {
            return Ok(());
        }
        let (i, j) = (ev.i, ev.j);
        let d_eta = cfg.value(i) - cfg.value(j);
        for (k, o) in self.obs.iter().enumerate() {
            let st = &mut self.state[k];
            st.y += self.inv_sqrt_n * (o.f[i] - o.f[j]) * d_eta;
            st.ylf += self.inv_sqrt_n * (o.lf[i] - o.lf[j]) * d_eta;
            if let Some(r) = &self.residuals[k] {
                st.yrep += self.inv_sqrt_n * (r[i] - r[j]) * d_eta;
            }
            if self.track_gamma {
                let mut delta = 0.0;
                for &a in &[i, j] {
                    let eta_a = cfg.get(a);
                    for &(b, e) in self.grid.neighbors(a) {
                        let b = b as usize;
                        if b == i || b == j {
                            continue;
                        }
                        let w = o.edge_w[e as usize];
                        delta += if eta_a != cfg.get(b) { w } else { -w };
                    }
                }
                st.gamma += self.inv_n * delta;
            }
        }
        Ok(())
    }

    fn on_sample(&mut self, cfg: &Configuration, _k: usize, t: f64) -> ObserverResult {
        self.refresh(cfg);
        for (st, tr) in self.state.iter().zip(self.out.iter_mut()) {
            tr.times.push(t);
            tr.y.push(st.y);
            tr.drift.push(st.drift.value());
            tr.gamma.push(st.gamma_int.value());
            tr.replacement.push(st.rep_int.value());
        }
        Ok(())
    }
}

/// Writes trajectories as CSV with columns replica, f_name, t, Y, M, N, I, G.
pub fn write_trajectories_csv<W: Write>(
    out: W,
    rows: impl IntoIterator<Item = (u64, FieldTrajectory)>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["replica", "f_name", "t", "Y", "M", "N", "I", "G"])?;
    for (rep, tr) in rows {
        for k in 0..tr.len() {
            w.write_record([
                rep.to_string(),
                tr.f_name.clone(),
                format!("{:e}", tr.times[k]),
                format!("{:e}", tr.y[k]),
                format!("{:e}", tr.m[k]),
                format!("{:e}", tr.n[k]),
                format!("{:e}", tr.drift[k]),
                format!("{:e}", tr.gamma[k]),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
