//! Exact continuous-time simulation of the symmetric exclusion process in the
//! stirring representation.
//!
//! Every edge carries an exponential clock of rate c_ij. When it rings the
//! two endpoint values are exchanged unconditionally; exchanging equal values
//! is the identity, so this has the law of the exclusion generator while the
//! total rate R = Σ c_ij stays constant. Events are therefore drawn as
//! dt ~ Exp(R) and an edge from a static alias table.

use std::io::{Read, Write};

use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::rng::exp_variate;

/// Occupancy η ∈ {0,1}^N as a packed bit vector with a cached particle count.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    words: Vec<u64>,
    n: usize,
    count: usize,
}

impl Configuration {
    pub fn empty(n: usize) -> Self {
        Configuration {
            words: vec![0; n.div_ceil(64)],
            n,
            count: 0,
        }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut c = Self::empty(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            c.set(i, b);
        }
        c
    }

    /// Bit i of `index` is the occupancy of site i.
    pub fn from_index(n: usize, index: u64) -> Self {
        let bits: Vec<bool> = (0..n).map(|i| index >> i & 1 == 1).collect();
        Self::from_bits(&bits)
    }

    pub fn to_index(&self) -> u64 {
        assert!(self.n <= 64, "state index needs N <= 64");
        self.words.first().copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn count(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.words[i >> 6] >> (i & 63) & 1 == 1
    }

    #[inline]
    pub fn value(&self, i: usize) -> f64 {
        if self.get(i) {
            1.0
        } else {
            0.0
        }
    }

    pub fn set(&mut self, i: usize, v: bool) {
        let old = self.get(i);
        if old != v {
            self.words[i >> 6] ^= 1 << (i & 63);
            if v {
                self.count += 1;
            } else {
                self.count -= 1;
            }
        }
    }

    /// Exchanges η_i and η_j; returns whether anything changed.
    #[inline]
    pub fn swap(&mut self, i: usize, j: usize) -> bool {
        if self.get(i) != self.get(j) {
            self.words[i >> 6] ^= 1 << (i & 63);
            self.words[j >> 6] ^= 1 << (j & 63);
            true
        } else {
            false
        }
    }

    pub fn popcount(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.n).map(|i| self.get(i))
    }
}

/// Independent Bernoulli(ρ) occupancies.
pub fn init_bernoulli<R: Rng + ?Sized>(n: usize, rho: f64, rng: &mut R) -> Result<Configuration> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Density(rho));
    }
    let mut c = Configuration::empty(n);
    for i in 0..n {
        c.set(i, rng.gen::<f64>() < rho);
    }
    Ok(c)
}

/// Static alias table over edges with probabilities c_ij / R.
#[derive(Debug, Clone)]
pub struct EdgeSampler {
    ends: Vec<(u32, u32)>,
    prob: Vec<f64>,
    alias: Vec<u32>,
    total: f64,
}

impl EdgeSampler {
    pub fn new(grid: &Grid) -> Result<Self> {
        let ends = grid.edges().iter().map(|e| (e.i, e.j)).collect();
        let w: Vec<f64> = grid.edges().iter().map(|e| e.weight).collect();
        Self::from_weights(ends, &w)
    }

    pub fn from_weights(ends: Vec<(u32, u32)>, weights: &[f64]) -> Result<Self> {
        let m = weights.len();
        let total: f64 = crate::manifold::neumaier_sum(weights.iter().copied());
        if m == 0 || !(total > 0.0) || !total.is_finite() {
            return Err(Error::ZeroRate);
        }
        // Vose's method
        let mut prob: Vec<f64> = weights.iter().map(|w| w * m as f64 / total).collect();
        let mut alias: Vec<u32> = (0..m as u32).collect();
        let mut small: Vec<usize> = Vec::new();
        let mut large: Vec<usize> = Vec::new();
        for (k, &p) in prob.iter().enumerate() {
            if p < 1.0 {
                small.push(k);
            } else {
                large.push(k);
            }
        }
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            alias[s] = l as u32;
            prob[l] -= 1.0 - prob[s];
            if prob[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        for k in small.into_iter().chain(large) {
            prob[k] = 1.0;
        }
        Ok(EdgeSampler {
            ends,
            prob,
            alias,
            total,
        })
    }

    pub fn total_rate(&self) -> f64 {
        self.total
    }

    pub fn num_edges(&self) -> usize {
        self.ends.len()
    }

    pub fn ends(&self, edge: usize) -> (usize, usize) {
        let (i, j) = self.ends[edge];
        (i as usize, j as usize)
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u = rng.gen::<f64>() * self.prob.len() as f64;
        let k = (u as usize).min(self.prob.len() - 1);
        if u - (k as f64) < self.prob[k] {
            k
        } else {
            self.alias[k] as usize
        }
    }

    /// Marginal probability of each edge implied by the table.
    pub fn implied_probabilities(&self) -> Vec<f64> {
        let m = self.prob.len() as f64;
        let mut p = vec![0.0; self.prob.len()];
        for (k, (&pk, &a)) in self.prob.iter().zip(&self.alias).enumerate() {
            p[k] += pk / m;
            p[a as usize] += (1.0 - pk) / m;
        }
        p
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SimClock {
    pub t: f64,
    pub events: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub dt: f64,
    pub edge: usize,
    pub i: usize,
    pub j: usize,
    pub swapped: bool,
}

/// One stirring event: advance the clock by Exp(R) and exchange the values
/// at the ends of an edge drawn with probability c_ij / R.
pub fn step<R: Rng + ?Sized>(
    cfg: &mut Configuration,
    sampler: &EdgeSampler,
    clock: &mut SimClock,
    rng: &mut R,
) -> Event {
    let dt = exp_variate(rng, sampler.total);
    let edge = sampler.sample(rng);
    let (i, j) = sampler.ends(edge);
    let swapped = cfg.swap(i, j);
    clock.t += dt;
    clock.events += 1;
    Event {
        dt,
        edge,
        i,
        j,
        swapped,
    }
}

pub type ObserverResult = std::result::Result<(), Box<dyn std::error::Error + Send + Sync>>;

/// Callbacks driven by [`run`]. Time stamps passed to an observer are
/// nondecreasing.
pub trait Observer {
    fn start(&mut self, _cfg: &Configuration) -> ObserverResult {
        Ok(())
    }

    /// The configuration is constant for the next `dt` time units.
    fn hold(&mut self, _cfg: &Configuration, _dt: f64) -> ObserverResult {
        Ok(())
    }

    /// Called after the event is applied; `t` is the event time.
    fn on_event(&mut self, _cfg: &Configuration, _event: &Event, _t: f64) -> ObserverResult {
        Ok(())
    }

    /// Called at the k-th sampling time.
    fn on_sample(&mut self, _cfg: &Configuration, _k: usize, _t: f64) -> ObserverResult {
        Ok(())
    }
}

/// Runs the process on [0, T], calling every observer with the exact
/// piecewise-constant state. `sample_times` must be nondecreasing and lie in
/// [0, T]. The returned clock reads T.
pub fn run<R: Rng + ?Sized>(
    cfg: &mut Configuration,
    sampler: &EdgeSampler,
    horizon: f64,
    sample_times: &[f64],
    observers: &mut [&mut dyn Observer],
    rng: &mut R,
) -> Result<SimClock> {
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::NegativeTime(horizon));
    }
    if sample_times.iter().any(|&s| !(0.0..=horizon).contains(&s))
        || sample_times.windows(2).any(|w| w[1] < w[0])
    {
        return Err(Error::Invalid {
            what: "sample times",
            reason: format!("must be nondecreasing within [0, {horizon}]"),
        });
    }
    let mut clock = SimClock::default();
    let fail = |clock: &SimClock, t: f64, e: Box<dyn std::error::Error + Send + Sync>| Error::Observer {
        time: t,
        event: clock.events,
        message: e.to_string(),
    };

    for ob in observers.iter_mut() {
        ob.start(cfg).map_err(|e| fail(&clock, 0.0, e))?;
    }
    let mut k = 0;
    let mut now = 0.0;
    loop {
        let dt = exp_variate(rng, sampler.total);
        let t_event = clock.t + dt;
        while k < sample_times.len() && sample_times[k] < t_event {
            let s = sample_times[k];
            for ob in observers.iter_mut() {
                ob.hold(cfg, s - now).map_err(|e| fail(&clock, s, e))?;
                ob.on_sample(cfg, k, s).map_err(|e| fail(&clock, s, e))?;
            }
            now = s;
            k += 1;
        }
        if t_event > horizon {
            for ob in observers.iter_mut() {
                ob.hold(cfg, horizon - now).map_err(|e| fail(&clock, horizon, e))?;
            }
            break;
        }
        for ob in observers.iter_mut() {
            ob.hold(cfg, t_event - now).map_err(|e| fail(&clock, t_event, e))?;
        }
        now = t_event;
        let edge = sampler.sample(rng);
        let (i, j) = sampler.ends(edge);
        let swapped = cfg.swap(i, j);
        clock.t = t_event;
        clock.events += 1;
        let ev = Event {
            dt,
            edge,
            i,
            j,
            swapped,
        };
        for ob in observers.iter_mut() {
            ob.on_event(cfg, &ev, t_event).map_err(|e| fail(&clock, t_event, e))?;
        }
    }
    clock.t = horizon;
    Ok(clock)
}

pub const EVENT_LOG_MAGIC: &[u8; 8] = b"SEPEVLOG";
pub const EVENT_LOG_VERSION: u32 = 1;

/// One record of the event log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoggedEvent {
    pub t: f64,
    pub edge: u32,
    pub swapped: bool,
}

/// Observer that streams events as little-endian records
/// `(t f64, edge u32, swapped u8)` after an 8-byte magic and u32 version.
pub struct EventLogWriter<W: Write> {
    out: W,
    header_written: bool,
}

impl<W: Write> EventLogWriter<W> {
    pub fn new(out: W) -> Self {
        EventLogWriter {
            out,
            header_written: false,
        }
    }

    pub fn into_inner(mut self) -> std::io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

impl<W: Write> Observer for EventLogWriter<W> {
    fn start(&mut self, _cfg: &Configuration) -> ObserverResult {
        if !self.header_written {
            self.out.write_all(EVENT_LOG_MAGIC)?;
            self.out.write_all(&EVENT_LOG_VERSION.to_le_bytes())?;
            self.header_written = true;
        }
        Ok(())
    }

    fn on_event(&mut self, _cfg: &Configuration, ev: &Event, t: f64) -> ObserverResult {
        self.out.write_all(&t.to_le_bytes())?;
        self.out.write_all(&(ev.edge as u32).to_le_bytes())?;
        self.out.write_all(&[ev.swapped as u8])?;
        Ok(())
    }
}

pub fn read_event_log<R: Read>(mut r: R) -> Result<Vec<LoggedEvent>> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    if buf.len() < 12 || &buf[..8] != EVENT_LOG_MAGIC {
        return Err(Error::Format("bad event log header".into()));
    }
    let version = u32::from_le_bytes(buf[8..12].try_into().unwrap());
    if version != EVENT_LOG_VERSION {
        return Err(Error::Format(format!("unsupported event log version {version}")));
    }
    let body = &buf[12..];
    if body.len() % 13 != 0 {
        return Err(Error::Format("truncated event record".into()));
    }
    Ok(body
        .chunks_exact(13)
        .map(|c| LoggedEvent {
            t: f64::from_le_bytes(c[..8].try_into().unwrap()),
            edge: u32::from_le_bytes(c[8..12].try_into().unwrap()),
            swapped: c[12] != 0,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Bandwidth, Edge};
    use crate::manifold::{ManifoldModel, Point};
    use crate::rng::replica_rng;
    use proptest::prelude::*;

    fn path_grid(weights: &[f64]) -> Grid {
        let n = weights.len() + 1;
        let pts = (0..n).map(|i| Point::angle(i as f64 * 0.1)).collect();
        let edges = weights
            .iter()
            .enumerate()
            .map(|(k, &w)| Edge {
                i: k as u32,
                j: k as u32 + 1,
                weight: w,
            })
            .collect();
        Grid::from_parts(ManifoldModel::circle(), pts, edges, 1.0, 0).unwrap()
    }

    #[test]
    fn bernoulli_rejects_boundary() {
        let mut rng = replica_rng(0, 0);
        assert!(init_bernoulli(10, 0.0, &mut rng).is_err());
        assert!(init_bernoulli(10, 1.0, &mut rng).is_err());
        assert!(init_bernoulli(10, f64::NAN, &mut rng).is_err());
    }

    #[test]
    fn bernoulli_count_clt_and_reproducible() {
        let mut ok = 0;
        for s in 0..100 {
            let c = init_bernoulli(10_000, 0.5, &mut replica_rng(s, 0)).unwrap();
            assert_eq!(c.count(), c.popcount());
            if (c.count() as f64 - 5000.0).abs() <= 4.0 * 50.0 {
                ok += 1;
            }
        }
        assert!(ok >= 95);
        let a = init_bernoulli(500, 0.3, &mut replica_rng(9, 2)).unwrap();
        let b = init_bernoulli(500, 0.3, &mut replica_rng(9, 2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn state_index_round_trip() {
        for idx in 0..64u64 {
            let c = Configuration::from_index(6, idx);
            assert_eq!(c.to_index(), idx);
            assert_eq!(c.count(), idx.count_ones() as usize);
        }
    }

    #[test]
    fn step_examples() {
        let g = path_grid(&[1.0]);
        let s = EdgeSampler::new(&g).unwrap();
        let mut rng = replica_rng(1, 0);
        let mut clock = SimClock::default();
        let mut c = Configuration::from_bits(&[true, false]);
        let ev = step(&mut c, &s, &mut clock, &mut rng);
        assert!(ev.swapped);
        assert_eq!(c, Configuration::from_bits(&[false, true]));
        assert!(clock.t > 0.0 && clock.events == 1);
        let mut c = Configuration::from_bits(&[true, true]);
        let ev = step(&mut c, &s, &mut clock, &mut rng);
        assert!(!ev.swapped);
        assert_eq!(c, Configuration::from_bits(&[true, true]));
        assert_eq!(clock.events, 2);
    }

    #[test]
    fn zero_rate_rejected() {
        let g = path_grid(&[0.0, 0.0]);
        assert!(matches!(EdgeSampler::new(&g), Err(Error::ZeroRate)));
    }

    #[test]
    fn alias_table_is_exact() {
        let w = [0.5, 1.0, 2.0, 0.1, 3.0, 0.7, 0.01, 1.3, 2.2, 0.9];
        let g = path_grid(&w);
        let s = EdgeSampler::new(&g).unwrap();
        let total: f64 = w.iter().sum();
        for (p, wk) in s.implied_probabilities().iter().zip(&w) {
            assert!((p - wk / total).abs() < 1e-12);
        }
    }

    /// χ² goodness of fit on 10⁶ draws from a 10-edge table. The 0.999
    /// quantile of χ²(9) is 27.88.
    #[test]
    fn alias_sampler_chi_square() {
        let w = [0.5, 1.0, 2.0, 0.1, 3.0, 0.7, 0.05, 1.3, 2.2, 0.9];
        let g = path_grid(&w);
        let s = EdgeSampler::new(&g).unwrap();
        let total: f64 = w.iter().sum();
        let mut rng = replica_rng(123, 0);
        let n = 1_000_000;
        let mut counts = [0u64; 10];
        for _ in 0..n {
            counts[s.sample(&mut rng)] += 1;
        }
        let chi2: f64 = counts
            .iter()
            .zip(&w)
            .map(|(&c, wk)| {
                let e = n as f64 * wk / total;
                (c as f64 - e).powi(2) / e
            })
            .sum();
        assert!(chi2 < 27.88, "chi2 = {chi2}");
    }

    #[derive(Default)]
    struct Recorder {
        times: Vec<f64>,
        held: f64,
        counts: Vec<usize>,
        samples: Vec<usize>,
    }

    impl Observer for Recorder {
        fn hold(&mut self, _cfg: &Configuration, dt: f64) -> ObserverResult {
            assert!(dt >= 0.0);
            self.held += dt;
            Ok(())
        }
        fn on_event(&mut self, cfg: &Configuration, _ev: &Event, t: f64) -> ObserverResult {
            self.times.push(t);
            self.counts.push(cfg.count());
            Ok(())
        }
        fn on_sample(&mut self, _cfg: &Configuration, k: usize, t: f64) -> ObserverResult {
            self.samples.push(k);
            self.times.push(t);
            Ok(())
        }
    }

    #[test]
    fn zero_horizon_runs_no_events() {
        let g = path_grid(&[1.0, 2.0]);
        let s = EdgeSampler::new(&g).unwrap();
        let mut c = Configuration::from_bits(&[true, false, true]);
        let before = c.clone();
        let mut rec = Recorder::default();
        let clock = run(&mut c, &s, 0.0, &[0.0], &mut [&mut rec], &mut replica_rng(2, 0)).unwrap();
        assert_eq!(clock.events, 0);
        assert_eq!(clock.t, 0.0);
        assert_eq!(c, before);
        assert_eq!(rec.samples, vec![0]);
    }

    #[test]
    fn run_timestamps_and_conservation() {
        let m = ManifoldModel::circle();
        let g = build_grid(&m, 200, Bandwidth::Auto, 3).unwrap();
        let s = EdgeSampler::new(&g).unwrap();
        let mut rng = replica_rng(4, 0);
        let mut c = init_bernoulli(200, 0.4, &mut rng).unwrap();
        let n0 = c.count();
        let times: Vec<f64> = (0..=20).map(|k| k as f64 * 0.05).collect();
        let mut rec = Recorder::default();
        let clock = run(&mut c, &s, 1.0, &times, &mut [&mut rec], &mut rng).unwrap();
        assert_eq!(clock.t, 1.0);
        assert!(rec.times.windows(2).all(|w| w[0] <= w[1]));
        assert!(rec.counts.iter().all(|&k| k == n0));
        assert_eq!(rec.samples, (0..=20).collect::<Vec<_>>());
        assert!((rec.held - 1.0).abs() < 1e-12);
        assert_eq!(c.popcount(), n0);
    }

    #[test]
    fn million_steps_conserve_count() {
        let m = ManifoldModel::circle();
        let g = build_grid(&m, 100, Bandwidth::Auto, 5).unwrap();
        let s = EdgeSampler::new(&g).unwrap();
        let mut rng = replica_rng(6, 0);
        let mut c = init_bernoulli(100, 0.5, &mut rng).unwrap();
        let n0 = c.count();
        let mut clock = SimClock::default();
        for _ in 0..1_000_000 {
            step(&mut c, &s, &mut clock, &mut rng);
            debug_assert_eq!(c.count(), n0);
        }
        assert_eq!(c.count(), n0);
        assert_eq!(c.popcount(), n0);
    }

    #[test]
    fn event_count_is_poisson() {
        let g = path_grid(&[1.0, 2.0, 0.5]);
        let s = EdgeSampler::new(&g).unwrap();
        let mut c = Configuration::from_bits(&[true, false, true, false]);
        let t = 5000.0;
        let clock = run(&mut c, &s, t, &[], &mut [], &mut replica_rng(7, 0)).unwrap();
        let mean = 3.5 * t;
        assert!((clock.events as f64 - mean).abs() < 4.0 * mean.sqrt());
    }

    #[test]
    fn determinism() {
        let g = build_grid(&ManifoldModel::sphere2(), 120, Bandwidth::Auto, 8).unwrap();
        let s = EdgeSampler::new(&g).unwrap();
        let go = || {
            let mut rng = replica_rng(11, 3);
            let mut c = init_bernoulli(120, 0.5, &mut rng).unwrap();
            let mut log = EventLogWriter::new(Vec::new());
            run(&mut c, &s, 0.5, &[], &mut [&mut log], &mut rng).unwrap();
            (c, log.into_inner().unwrap())
        };
        let (a, la) = go();
        let (b, lb) = go();
        assert_eq!(a, b);
        assert_eq!(la, lb);
    }

    #[test]
    fn event_log_replays_trajectory() {
        let g = build_grid(&ManifoldModel::circle(), 80, Bandwidth::Auto, 9).unwrap();
        let s = EdgeSampler::new(&g).unwrap();
        let mut rng = replica_rng(12, 0);
        let start = init_bernoulli(80, 0.5, &mut rng).unwrap();
        let mut c = start.clone();
        let mut log = EventLogWriter::new(Vec::new());
        let clock = run(&mut c, &s, 1.0, &[], &mut [&mut log], &mut rng).unwrap();
        let events = read_event_log(log.into_inner().unwrap().as_slice()).unwrap();
        assert_eq!(events.len() as u64, clock.events);
        let mut r = start;
        for e in &events {
            let (i, j) = s.ends(e.edge as usize);
            assert_eq!(r.swap(i, j), e.swapped);
        }
        assert_eq!(r, c);
        assert!(read_event_log(&b"SEPEVLOX\x01\0\0\0"[..]).is_err());
    }

    struct Failing;
    impl Observer for Failing {
        fn on_event(&mut self, _cfg: &Configuration, _ev: &Event, t: f64) -> ObserverResult {
            if t > 0.1 {
                return Err("boom".into());
            }
            Ok(())
        }
    }

    #[test]
    fn observer_failure_carries_context() {
        let g = path_grid(&[5.0, 5.0]);
        let s = EdgeSampler::new(&g).unwrap();
        let mut c = Configuration::from_bits(&[true, false, false]);
        let err = run(&mut c, &s, 10.0, &[], &mut [&mut Failing], &mut replica_rng(1, 1)).unwrap_err();
        match err {
            Error::Observer { time, event, message } => {
                assert!(time > 0.1);
                assert!(event >= 1);
                assert_eq!(message, "boom");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn bad_sample_times_rejected() {
        let g = path_grid(&[1.0]);
        let s = EdgeSampler::new(&g).unwrap();
        let mut c = Configuration::from_bits(&[true, false]);
        let mut rng = replica_rng(0, 0);
        assert!(run(&mut c, &s, 1.0, &[0.5, 0.2], &mut [], &mut rng).is_err());
        assert!(run(&mut c, &s, 1.0, &[2.0], &mut [], &mut rng).is_err());
        assert!(run(&mut c, &s, -1.0, &[], &mut [], &mut rng).is_err());
    }

    /// Stationarity of product Bernoulli: per-site means and a pair
    /// correlation at t = 1 stay within 4 standard errors.
    #[test]
    fn bernoulli_is_stationary() {
        let g = path_grid(&[1.0, 0.3, 2.0, 0.8, 1.5]);
        let s = EdgeSampler::new(&g).unwrap();
        let rho = 0.3;
        let r = 40_000;
        let mut site = [0.0; 6];
        let mut pair = 0.0;
        for k in 0..r {
            let mut rng = replica_rng(99, k);
            let mut c = init_bernoulli(6, rho, &mut rng).unwrap();
            run(&mut c, &s, 1.0, &[], &mut [], &mut rng).unwrap();
            for (i, v) in site.iter_mut().enumerate() {
                *v += c.value(i);
            }
            pair += c.value(1) * c.value(2);
        }
        let se = (rho * (1.0 - rho) / r as f64).sqrt();
        for v in site {
            assert!((v / r as f64 - rho).abs() < 4.0 * se);
        }
        let var_pair = rho * rho * (1.0 - rho * rho);
        assert!((pair / r as f64 - rho * rho).abs() < 4.0 * (var_pair / r as f64).sqrt());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn swap_preserves_count(bits in prop::collection::vec(any::<bool>(), 1..200),
                                pairs in prop::collection::vec((0usize..200, 0usize..200), 0..100)) {
            let mut c = Configuration::from_bits(&bits);
            let n0 = c.count();
            for (i, j) in pairs {
                let (i, j) = (i % bits.len(), j % bits.len());
                let (a, b) = (c.get(i), c.get(j));
                c.swap(i, j);
                prop_assert_eq!((c.get(i), c.get(j)), (b, a));
            }
            prop_assert_eq!(c.count(), n0);
            prop_assert_eq!(c.popcount(), n0);
        }

        #[test]
        fn alias_probabilities_match_weights(w in prop::collection::vec(0.0f64..10.0, 1..50)) {
            prop_assume!(w.iter().sum::<f64>() > 1e-6);
            let ends = (0..w.len() as u32).map(|k| (k, k + 1)).collect();
            let s = EdgeSampler::from_weights(ends, &w).unwrap();
            let total: f64 = w.iter().sum();
            for (p, wk) in s.implied_probabilities().iter().zip(&w) {
                prop_assert!((p - wk / total).abs() < 1e-10);
            }
        }
    }
}
