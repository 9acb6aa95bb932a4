//! Symmetric exclusion process on random grids approximating compact
//! Riemannian manifolds.
//!
//! The crate is organised bottom-up:
//!
//! | Module | Purpose |
//! |--------|---------|
//! | [`manifold`] | model manifolds, uniform sampling, eigenfunction test functions, quadrature |
//! | [`grid`] | random geometric grids, the graph Laplacian, its spectrum and semigroup |
//! | [`sep`] | exact stirring simulation with an alias-table edge sampler |
//! | [`fluctuation`] | fluctuation field, Dynkin martingale and carré du champ along trajectories |
//! | [`analysis`] | replica ensembles, statistics, duality and brute-force oracles, checks |
//!
//! Everything is deterministic given the seeds: grids draw their points from
//! one seeded stream, replicas draw from independent streams derived from a
//! master seed by replica index.

pub mod analysis;
pub mod error;
pub mod fluctuation;
pub mod grid;
pub mod manifold;
pub mod rng;
pub mod sep;

pub use error::{Error, Result};
pub use fluctuation::{FieldObservable, FieldTrajectory};
pub use grid::{build_grid, Bandwidth, Grid, SpectralLaplacian};
pub use manifold::{ManifoldKind, ManifoldModel, Point, Quadrature, TestFunction};
pub use sep::{Configuration, EdgeSampler, Event, SimClock};
