//! Model manifolds: circle, flat tori of dimension 1 and 2, and the unit
//! 2-sphere.
//!
//! All integrals are against the normalized volume measure, so that the
//! constant 1 integrates to 1. Eigenfunctions are L²-normalized under that
//! measure and carry closed-form Laplacians and squared gradients.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ManifoldKind {
    Circle,
    FlatTorus(usize),
    Sphere2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldModel {
    kind: ManifoldKind,
}

/// A point in chart coordinates: angles in `[0, 2π)` for circle and torus
/// (unused slots are zero), a unit 3-vector for the sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub coords: [f64; 3],
}

impl Point {
    pub fn angle(theta: f64) -> Self {
        Point {
            coords: [wrap_angle(theta), 0.0, 0.0],
        }
    }

    pub fn angles2(t1: f64, t2: f64) -> Self {
        Point {
            coords: [wrap_angle(t1), wrap_angle(t2), 0.0],
        }
    }

    /// Projects a nonzero 3-vector onto the unit sphere.
    pub fn unit(x: f64, y: f64, z: f64) -> Self {
        let r = (x * x + y * y + z * z).sqrt();
        Point {
            coords: [x / r, y / r, z / r],
        }
    }

    /// Sphere point from polar angle θ (from the north pole) and azimuth φ.
    pub fn spherical(theta: f64, phi: f64) -> Self {
        let s = theta.sin();
        Point {
            coords: [s * phi.cos(), s * phi.sin(), theta.cos()],
        }
    }
}

pub fn wrap_angle(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs.
    if w >= TAU {
        0.0
    } else {
        w
    }
}

impl ManifoldModel {
    pub fn circle() -> Self {
        ManifoldModel {
            kind: ManifoldKind::Circle,
        }
    }

    pub fn flat_torus(d: usize) -> Result<Self> {
        if !(1..=2).contains(&d) {
            return Err(Error::TorusDimension(d));
        }
        Ok(ManifoldModel {
            kind: ManifoldKind::FlatTorus(d),
        })
    }

    pub fn sphere2() -> Self {
        ManifoldModel {
            kind: ManifoldKind::Sphere2,
        }
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            ManifoldKind::Circle => 1,
            ManifoldKind::FlatTorus(d) => d,
            ManifoldKind::Sphere2 => 2,
        }
    }

    /// Riemannian volume before normalization.
    pub fn volume(&self) -> f64 {
        match self.kind {
            ManifoldKind::Circle => TAU,
            ManifoldKind::FlatTorus(d) => TAU.powi(d as i32),
            ManifoldKind::Sphere2 => 4.0 * PI,
        }
    }

    /// Single-byte tag used by the grid file format.
    pub fn tag(&self) -> u8 {
        match self.kind {
            ManifoldKind::Circle => 0,
            ManifoldKind::FlatTorus(_) => 1,
            ManifoldKind::Sphere2 => 2,
        }
    }

    pub fn from_tag(tag: u8, dim: u8) -> Result<Self> {
        let m = match tag {
            0 => Self::circle(),
            1 => Self::flat_torus(dim as usize)?,
            2 => Self::sphere2(),
            _ => {
                return Err(Error::Format(format!("unknown manifold tag {tag}")));
            }
        };
        if m.dim() != dim as usize {
            return Err(Error::Format(format!(
                "manifold tag {tag} has dimension {}, file says {dim}",
                m.dim()
            )));
        }
        Ok(m)
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ManifoldKind::Circle => "circle",
            ManifoldKind::FlatTorus(1) => "torus1",
            ManifoldKind::FlatTorus(_) => "torus2",
            ManifoldKind::Sphere2 => "sphere2",
        }
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match self.kind {
            ManifoldKind::Circle | ManifoldKind::FlatTorus(1) => {
                Point::angle(TAU * rng.gen::<f64>())
            }
            ManifoldKind::FlatTorus(_) => {
                let a = TAU * rng.gen::<f64>();
                let b = TAU * rng.gen::<f64>();
                Point::angles2(a, b)
            }
            ManifoldKind::Sphere2 => {
                // Archimedes: z uniform on [-1, 1] gives area-uniform points.
                let z = 2.0 * rng.gen::<f64>() - 1.0;
                let phi = TAU * rng.gen::<f64>();
                let s = (1.0 - z * z).max(0.0).sqrt();
                Point::unit(s * phi.cos(), s * phi.sin(), z)
            }
        }
    }

    pub fn geodesic_distance(&self, p: &Point, q: &Point) -> f64 {
        match self.kind {
            ManifoldKind::Circle | ManifoldKind::FlatTorus(1) => {
                circular_gap(p.coords[0], q.coords[0])
            }
            ManifoldKind::FlatTorus(_) => {
                let a = circular_gap(p.coords[0], q.coords[0]);
                let b = circular_gap(p.coords[1], q.coords[1]);
                a.hypot(b)
            }
            ManifoldKind::Sphere2 => {
                let [ax, ay, az] = p.coords;
                let [bx, by, bz] = q.coords;
                let dot = ax * bx + ay * by + az * bz;
                let cx = ay * bz - az * by;
                let cy = az * bx - ax * bz;
                let cz = ax * by - ay * bx;
                let cross = (cx * cx + cy * cy + cz * cz).sqrt();
                // Same angle as acos(clamp(dot)) but well conditioned near 0 and π.
                cross.atan2(dot)
            }
        }
    }

    /// Laplace-Beltrami eigenfunction for a multi-index.
    ///
    /// * circle and 1-torus: `[k]`, `k > 0` gives `√2 cos kθ`, `k < 0` gives
    ///   `√2 sin |k|θ`, `k = 0` the constant; λ = k².
    /// * 2-torus: `[k1, k2]`, the product of the 1-d functions; λ = k1² + k2².
    /// * sphere: `[l, m]` with `|m| <= l`, real spherical harmonics with
    ///   `m < 0` selecting the sine branch; λ = l(l+1).
    pub fn eigenfunction(&self, index: &[i32]) -> Result<TestFunction> {
        let bad = |reason: &str| Error::InvalidIndex {
            manifold: self.name(),
            index: index.to_vec(),
            reason: reason.to_string(),
        };
        match self.kind {
            ManifoldKind::Circle | ManifoldKind::FlatTorus(1) => {
                let [k] = index else {
                    return Err(bad("expected one Fourier mode"));
                };
                Ok(fourier1(*k))
            }
            ManifoldKind::FlatTorus(_) => {
                let [k1, k2] = index else {
                    return Err(bad("expected two Fourier modes"));
                };
                Ok(fourier2(*k1, *k2))
            }
            ManifoldKind::Sphere2 => {
                let [l, m] = index else {
                    return Err(bad("expected degree and order (l, m)"));
                };
                if *l < 0 {
                    return Err(bad("degree must be nonnegative"));
                }
                if m.abs() > *l {
                    return Err(bad("order must satisfy |m| <= l"));
                }
                Ok(spherical_harmonic(*l as u32, *m))
            }
        }
    }

    /// ∫ g dV̄ by deterministic quadrature.
    pub fn integrate<F>(&self, g: F) -> f64
    where
        F: Fn(&Point) -> f64,
    {
        Quadrature::default().integrate(self, g)
    }
}

impl fmt::Display for ManifoldModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn circular_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).abs().rem_euclid(TAU);
    d.min(TAU - d)
}

type ScalarFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;

/// A smooth function on a model manifold with its Laplacian and squared
/// gradient in closed form.
#[derive(Clone)]
pub struct TestFunction {
    name: String,
    value: ScalarFn,
    laplacian: ScalarFn,
    grad_sq: ScalarFn,
    eigenvalue: Option<f64>,
    index: Option<Vec<i32>>,
    l2_norm_sq: Option<f64>,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("name", &self.name)
            .field("eigenvalue", &self.eigenvalue)
            .field("index", &self.index)
            .finish_non_exhaustive()
    }
}

impl TestFunction {
    /// A function with user-supplied closed forms. It is not treated as an
    /// eigenfunction.
    pub fn custom(
        name: impl Into<String>,
        value: impl Fn(&Point) -> f64 + Send + Sync + 'static,
        laplacian: impl Fn(&Point) -> f64 + Send + Sync + 'static,
        grad_sq: impl Fn(&Point) -> f64 + Send + Sync + 'static,
    ) -> Self {
        TestFunction {
            name: name.into(),
            value: Arc::new(value),
            laplacian: Arc::new(laplacian),
            grad_sq: Arc::new(grad_sq),
            eigenvalue: None,
            index: None,
            l2_norm_sq: None,
        }
    }

    pub fn constant(c: f64) -> Self {
        TestFunction {
            name: format!("const({c})"),
            value: Arc::new(move |_| c),
            laplacian: Arc::new(|_| 0.0),
            grad_sq: Arc::new(|_| 0.0),
            eigenvalue: Some(0.0),
            index: None,
            l2_norm_sq: Some(c * c),
        }
    }

    fn eigen(
        name: String,
        index: Vec<i32>,
        lambda: f64,
        value: ScalarFn,
        grad_sq: ScalarFn,
    ) -> Self {
        let v = value.clone();
        TestFunction {
            name,
            value,
            laplacian: Arc::new(move |p| -lambda * v(p)),
            grad_sq,
            eigenvalue: Some(lambda),
            index: Some(index),
            l2_norm_sq: Some(1.0),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eigenvalue(&self) -> Option<f64> {
        self.eigenvalue
    }

    pub fn index(&self) -> Option<&[i32]> {
        self.index.as_deref()
    }

    /// ∫ f² dV̄ when known in closed form.
    pub fn l2_norm_sq(&self) -> Option<f64> {
        self.l2_norm_sq
    }

    /// ∫ |∇f|² dV̄ when known in closed form (λ ∫ f² for eigenfunctions).
    pub fn dirichlet_energy(&self) -> Option<f64> {
        Some(self.eigenvalue? * self.l2_norm_sq?)
    }

    #[inline]
    pub fn value(&self, p: &Point) -> f64 {
        (self.value)(p)
    }

    #[inline]
    pub fn laplacian(&self, p: &Point) -> f64 {
        (self.laplacian)(p)
    }

    #[inline]
    pub fn grad_sq(&self, p: &Point) -> f64 {
        (self.grad_sq)(p)
    }

    /// Δ(f²) − 2fΔf, which equals 2|∇f|².
    pub fn carre_du_champ(&self, p: &Point) -> f64 {
        2.0 * self.grad_sq(p)
    }

    pub fn values(&self, points: &[Point]) -> Vec<f64> {
        points.iter().map(|p| self.value(p)).collect()
    }
}

/// 1-d Fourier mode and its derivative.
fn mode1(k: i32, theta: f64) -> (f64, f64) {
    let s2 = std::f64::consts::SQRT_2;
    if k == 0 {
        (1.0, 0.0)
    } else if k > 0 {
        let kf = k as f64;
        (s2 * (kf * theta).cos(), -s2 * kf * (kf * theta).sin())
    } else {
        let kf = -k as f64;
        (s2 * (kf * theta).sin(), s2 * kf * (kf * theta).cos())
    }
}

fn mode_name(k: i32) -> String {
    match k {
        0 => "1".to_string(),
        k if k > 0 => format!("cos{k}"),
        k => format!("sin{}", -k),
    }
}

fn fourier1(k: i32) -> TestFunction {
    let lambda = (k as f64).powi(2);
    TestFunction::eigen(
        format!("fourier[{k}]"),
        vec![k],
        lambda,
        Arc::new(move |p| mode1(k, p.coords[0]).0),
        Arc::new(move |p| mode1(k, p.coords[0]).1.powi(2)),
    )
}

fn fourier2(k1: i32, k2: i32) -> TestFunction {
    let lambda = (k1 as f64).powi(2) + (k2 as f64).powi(2);
    TestFunction::eigen(
        format!("fourier[{k1},{k2}]:{}*{}", mode_name(k1), mode_name(k2)),
        vec![k1, k2],
        lambda,
        Arc::new(move |p| mode1(k1, p.coords[0]).0 * mode1(k2, p.coords[1]).0),
        Arc::new(move |p| {
            let (a, da) = mode1(k1, p.coords[0]);
            let (b, db) = mode1(k2, p.coords[1]);
            (da * b).powi(2) + (a * db).powi(2)
        }),
    )
}

/// Q_l^m(x) = d^m P_l / dx^m, the associated Legendre function without the
/// (1 − x²)^{m/2} factor. Zero when m > l.
pub fn legendre_q(l: u32, m: u32, x: f64) -> f64 {
    if m > l {
        return 0.0;
    }
    // (2m − 1)!!
    let mut qmm = 1.0;
    for i in 0..m {
        qmm *= (2 * i + 1) as f64;
    }
    if l == m {
        return qmm;
    }
    let mut prev = qmm;
    let mut cur = (2 * m + 1) as f64 * x * qmm;
    for ll in (m + 1)..l {
        let next = ((2 * ll + 1) as f64 * x * cur - (ll + m) as f64 * prev) / (ll - m + 1) as f64;
        prev = cur;
        cur = next;
    }
    cur
}

fn spherical_harmonic(l: u32, m: i32) -> TestFunction {
    let am = m.unsigned_abs();
    // (l − |m|)! / (l + |m|)!
    let mut ratio = 1.0;
    for i in (l - am + 1)..=(l + am) {
        ratio /= i as f64;
    }
    let c = if am == 0 {
        (2.0 * l as f64 + 1.0).sqrt()
    } else {
        (2.0 * (2.0 * l as f64 + 1.0) * ratio).sqrt()
    };
    let lambda = (l * (l + 1)) as f64;
    let use_sin = m < 0;
    let mf = am as f64;

    let value = move |p: &Point| {
        let [x, y, z] = p.coords;
        let q = legendre_q(l, am, z);
        if am == 0 {
            return c * q;
        }
        // (x + iy)^m = s^m e^{imφ}, evaluated without angles.
        let (mut re, mut im) = (1.0, 0.0);
        for _ in 0..am {
            let nr = re * x - im * y;
            im = re * y + im * x;
            re = nr;
        }
        c * q * if use_sin { im } else { re }
    };

    let grad_sq = move |p: &Point| {
        let [x, y, z] = p.coords;
        let s2 = (x * x + y * y).max(0.0);
        let q = legendre_q(l, am, z);
        let dq = legendre_q(l, am + 1, z);
        if am == 0 {
            // ∂θ f = −c s Q'
            return c * c * s2 * dq * dq;
        }
        let phi = y.atan2(x);
        let (t, dt) = if use_sin {
            ((mf * phi).sin(), mf * (mf * phi).cos())
        } else {
            ((mf * phi).cos(), -mf * (mf * phi).sin())
        };
        // ∂θ f = c T s^{m−1} (m z Q − s² Q'),  (1/s) ∂φ f = c T' s^{m−1} Q
        let sm1_sq = s2.powi(am as i32 - 1);
        let a = mf * z * q - s2 * dq;
        c * c * sm1_sq * (t * t * a * a + dt * dt * q * q)
    };

    TestFunction::eigen(
        format!("ylm[{l},{m}]"),
        vec![l as i32, m],
        lambda,
        Arc::new(value),
        Arc::new(grad_sq),
    )
}

/// Tensor-product quadrature against the normalized volume measure.
///
/// Circle and torus use the periodic trapezoid rule, which is spectrally
/// accurate for smooth periodic integrands. The sphere uses Gauss-Legendre
/// in z = cos θ times the periodic trapezoid rule in φ, exact for spherical
/// polynomials of degree below the node count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Quadrature {
    pub nodes_per_dim: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature {
            nodes_per_dim: 4096,
        }
    }
}

impl Quadrature {
    pub fn new(nodes_per_dim: usize) -> Self {
        Quadrature {
            nodes_per_dim: nodes_per_dim.max(1),
        }
    }

    pub fn integrate<F>(&self, m: &ManifoldModel, g: F) -> f64
    where
        F: Fn(&Point) -> f64,
    {
        let n = self.nodes_per_dim;
        let h = TAU / n as f64;
        match m.kind() {
            ManifoldKind::Circle | ManifoldKind::FlatTorus(1) => {
                neumaier_sum((0..n).map(|i| g(&Point::angle(i as f64 * h)))) / n as f64
            }
            ManifoldKind::FlatTorus(_) => {
                let rows = (0..n).map(|i| {
                    let a = i as f64 * h;
                    neumaier_sum((0..n).map(|j| g(&Point::angles2(a, j as f64 * h))))
                });
                neumaier_sum(rows) / (n * n) as f64
            }
            ManifoldKind::Sphere2 => {
                let (zs, ws) = gauss_legendre(n);
                let rows = zs.iter().zip(&ws).map(|(&z, &w)| {
                    let s = (1.0 - z * z).max(0.0).sqrt();
                    let ring = neumaier_sum((0..n).map(|j| {
                        let phi = j as f64 * h;
                        g(&Point {
                            coords: [s * phi.cos(), s * phi.sin(), z],
                        })
                    }));
                    w * ring
                });
                // weights sum to 2 over z and n over φ
                neumaier_sum(rows) / (2.0 * n as f64)
            }
        }
    }
}

/// Gauss-Legendre nodes and weights on [−1, 1], by Newton iteration on the
/// three-term recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Compensated summation.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in it {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
