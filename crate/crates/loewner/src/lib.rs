//! Deterministic numerics for Loewner evolutions.
//!
//! The crate is organized around a small set of numeric engines:
//!
//! - [`chordal`] — the chordal Loewner equation in the upper half-plane:
//!   forward solves (driver → curve) and driver extraction (curve → driver)
//!   through compositions of exact slit maps.
//! - [`conformal`] — numeric conformal maps: disk/half-plane Riemann map
//!   pairs for Jordan curves, Poisson extension, excursion kernels, and
//!   conformal welding.
//! - [`energy`] — Dirichlet-type energy functionals: driver energy, chord
//!   energy, loop energy (three routes), trace seminorms, and the
//!   cutting / flow-line / complex identity residuals.
//! - [`multichord`] — geodesic multichords for non-crossing link patterns,
//!   the associated real rational functions, potentials, and driving ODEs.
//! - [`radial`] — radial Loewner and Loewner–Kufarev chains driven by
//!   measures, their rate functionals, foliations, winding fields, and
//!   the energy-duality apparatus.
//! - [`stochastic`] — seeded SLE samplers (chordal, radial, Gibbs
//!   multichord), occupation measures, Brownian loop-soup estimates, and
//!   decay-rate experiments.
//! - [`geometry`] — curves, grids, Möbius transforms, Hausdorff distance,
//!   chord-arc profiles.
//! - [`io`] — the on-disk formats (curve JSON, driver CSV, measure JSON,
//!   map scripts, reports).

pub mod chordal;
pub mod conformal;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod io;
pub mod multichord;
pub mod radial;
pub mod spectral;
pub mod stochastic;

pub use error::{Error, Result};
pub use num_complex::Complex64;
