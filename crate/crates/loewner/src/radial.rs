//! Radial and whole-plane Loewner evolution in the unit disk.
//!
//! Two kinds of driving data are supported:
//!
//! * a [`RadialDriver`] — a boundary angle `θ(t)`, which generates a slit
//!   chain by composing exact one-slit steps (the radial analogue of the
//!   vertical-slit scheme used for chordal drivers), and
//! * a [`DrivingMeasure`] — a piecewise-constant-in-time family of
//!   probability densities `ρ_t` on the circle, which generates an absolutely
//!   continuous chain through the Loewner–Kufarev equation
//!   `∂_t f_t(z) = −z f_t'(z) H_t(z)`, where `H_t` is the Herglotz integral
//!   of `ρ_t`.
//!
//! Both produce a [`RadialChain`]: a decreasing family of simply connected
//! domains `D_t = f_t(𝔻)` with `f_t(0) = 0` and conformal radius
//! `f_t'(0) = e^{−t}`.  A chain built from a measure with
//! `uniform_outside = true` is a *whole-plane* chain: it extends to all
//! `t ∈ ℝ` by round circles before the active window and by equipotentials
//! of the final domain after it.
//!
//! On top of the chains the module provides
//!
//! * [`dv_rate`] / [`lk_energy`] — the Dirichlet rate
//!   `ρ ↦ (1/8)∫ ρ'(θ)²/ρ(θ) dθ` of a single density and its time integral
//!   over a measure (the large-deviation cost of deviating from the uniform
//!   density), with a refinement-based divergence flag;
//! * [`RadialChain::leaf`] and [`foliation`] — boundary curves `∂D_t`
//!   extracted by Richardson extrapolation toward `|z| = 1`;
//! * [`RadialChain::winding_trace`] and [`winding_field`] — the harmonic
//!   winding `−arg(f_t'(z) z / f_t(z))`, as a boundary trace per leaf and as
//!   a planar field sampled on a grid;
//! * [`herglotz_invert`] — recovery of the driving densities from coefficient
//!   snapshots of a spectral chain (the inverse problem of [`solve_kufarev`]);
//! * [`duality_gap`] — a numerical check of the energy duality: the Dirichlet
//!   energy of the winding field equals `16` times the measure energy;
//! * [`reversed_measure`] — the driving measure of the inversion-reversed
//!   chain `t̃ ↦ ι(ℂ̂ ∖ D̄_t)`, `ι(z) = 1/z`, which preserves the measure
//!   energy;
//! * [`realize_curve_as_leaf`] — the equipotential measure that realizes a
//!   given Jordan curve around the origin as a leaf, together with the
//!   energy identity `I^L(γ) = 16 S(ρ^γ) + 2 log(f'(0)/h'(∞))` relating loop
//!   energy, measure energy, and the conformal radius/capacity ratio.
//!
//! Numerical conventions: densities are sampled on the uniform angular grid
//! `θ_j = 2πj/M` (default `M = 256`); spectral chains carry `K = 128` Taylor
//! modes; boundary traces are evaluated at radii `1 − δ_b` and `1 − δ_b/2`
//! (default `δ_b = 10⁻³`) and Richardson-extrapolated to the boundary.
//! Herglotz inversion and the winding field require a spectral chain: slit
//! chains are driven by boundary atoms, for which the density reconstruction
//! is ill-posed.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::conformal::{winding_number, DiskMapsPair, SzegoMap};
use crate::energy::{h_half_seminorm_circle, loop_energy, EnergyConfig, LoopMethod};
use crate::error::{Error, Result};
use crate::geometry::{c64, GridField, PolylineCurve, SmoothLoop};
use crate::spectral;

/// Default angular grid size for densities and traces.
pub const DEFAULT_ANGULAR_GRID: usize = 256;
/// Default number of Taylor modes carried by spectral chains.
pub const DEFAULT_MODES: usize = 128;

/// Tunable resolutions for the radial solvers.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RadialOptions {
    /// Angular grid size `M` for densities, traces, and leaves.
    pub angular_grid: usize,
    /// Taylor modes `K` carried by spectral chains (`K ≤ M/2`).
    pub modes: usize,
    /// Runge–Kutta step for the coefficient ODE of [`solve_kufarev`].
    pub ode_step: f64,
    /// Boundary offset `δ_b`: traces and leaves are evaluated at radii
    /// `1 − δ_b` and `1 − δ_b/2` and Richardson-extrapolated.
    pub boundary_offset: f64,
    /// Nodes for the conformal-map solves used by reversal and realization
    /// (power of two).
    pub map_nodes: usize,
    /// Target time step between the leaf charts of [`duality_gap`].
    pub chart_step: f64,
    /// Time step between leaf snapshots in [`reversed_measure`] and
    /// [`realize_curve_as_leaf`].
    pub leaf_step: f64,
    /// How far past the active window leaves are sampled when reversing, and
    /// the logarithmic extent of the exterior equipotential window when
    /// realizing a curve; the discarded tail carries an energy of order
    /// `e^{−2·margin}` relative to the window.
    pub window_margin: f64,
}

impl Default for RadialOptions {
    fn default() -> Self {
        RadialOptions {
            angular_grid: DEFAULT_ANGULAR_GRID,
            modes: DEFAULT_MODES,
            ode_step: 2e-3,
            boundary_offset: 1e-3,
            map_nodes: 256,
            chart_step: 0.02,
            leaf_step: 0.05,
            window_margin: 2.5,
        }
    }
}

// ---------------------------------------------------------------------------
// driving data
// ---------------------------------------------------------------------------

/// A continuous driving angle `t ↦ θ(t)` for the radial slit evolution,
/// sampled at increasing times starting at `0`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "RawDriver")]
pub struct RadialDriver {
    times: Vec<f64>,
    angles: Vec<f64>,
}

#[derive(Deserialize)]
struct RawDriver {
    times: Vec<f64>,
    angles: Vec<f64>,
}

impl TryFrom<RawDriver> for RadialDriver {
    type Error = Error;
    fn try_from(raw: RawDriver) -> Result<Self> {
        RadialDriver::new(raw.times, raw.angles)
    }
}

impl RadialDriver {
    /// Validate and wrap a sampled driving angle.  Requires `times[0] = 0`,
    /// strictly increasing times, and angle increments of at most `π` per
    /// sample (larger jumps make the midpoint slit scheme meaningless).
    pub fn new(times: Vec<f64>, angles: Vec<f64>) -> Result<Self> {
        if times.len() != angles.len() || times.len() < 2 {
            return Err(Error::invalid(
                "driver needs equally many times and angles (at least two)",
            ));
        }
        if times[0].abs() > 1e-12 {
            return Err(Error::invalid("driver must start at t = 0"));
        }
        for pair in times.windows(2) {
            if !(pair[1] > pair[0]) {
                return Err(Error::invalid("driver times must be strictly increasing"));
            }
        }
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::invalid("driver angles must be finite"));
        }
        for pair in angles.windows(2) {
            if (pair[1] - pair[0]).abs() > PI + 1e-9 {
                return Err(Error::domain(
                    "driving angle jumps by more than π between samples",
                ));
            }
        }
        Ok(RadialDriver { times, angles })
    }

    /// Constant angle on `[0, t_end]` with the given number of steps.
    pub fn constant(angle: f64, t_end: f64, steps: usize) -> Result<Self> {
        if !(t_end > 0.0) || steps == 0 {
            return Err(Error::invalid("horizon must be positive"));
        }
        let times = (0..=steps)
            .map(|i| t_end * i as f64 / steps as f64)
            .collect();
        let angles = vec![angle; steps + 1];
        RadialDriver::new(times, angles)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }
}

/// One time slab of a driving measure: a probability density on the circle,
/// constant on the time interval `[t0, t1]`, sampled on the uniform grid
/// `θ_j = 2πj/M`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "RawSlab")]
pub struct MeasureSlab {
    pub t0: f64,
    pub t1: f64,
    pub density: Vec<f64>,
}

#[derive(Deserialize)]
struct RawSlab {
    t0: f64,
    t1: f64,
    density: Vec<f64>,
}

impl TryFrom<RawSlab> for MeasureSlab {
    type Error = Error;
    fn try_from(raw: RawSlab) -> Result<Self> {
        MeasureSlab::new(raw.t0, raw.t1, raw.density)
    }
}

impl MeasureSlab {
    /// Validate a slab: positive duration, at least 16 samples, nonnegative
    /// density up to a clipped tolerance of `10⁻⁸` in mass, and total mass
    /// `(2π/M) Σ ρ_j = 1` up to `10⁻⁶` (then renormalized exactly).
    pub fn new(t0: f64, t1: f64, density: Vec<f64>) -> Result<Self> {
        if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
            return Err(Error::invalid("slab needs finite t0 < t1"));
        }
        if density.len() < 16 {
            return Err(Error::invalid("slab density needs at least 16 samples"));
        }
        if density.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("slab density must be finite"));
        }
        let m = density.len() as f64;
        let w = 2.0 * PI / m;
        let neg_mass: f64 = density.iter().filter(|&&v| v < 0.0).map(|v| -v * w).sum();
        if neg_mass > 1e-8 {
            return Err(Error::domain(
                "slab density has negative mass beyond tolerance",
            ));
        }
        let mut density: Vec<f64> = density.iter().map(|&v| v.max(0.0)).collect();
        let mass: f64 = density.iter().sum::<f64>() * w;
        if (mass - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!(
                "slab density has mass {mass:.8}, expected 1"
            )));
        }
        for v in &mut density {
            *v /= mass;
        }
        Ok(MeasureSlab { t0, t1, density })
    }

    pub fn duration(&self) -> f64 {
        self.t1 - self.t0
    }
}

/// A piecewise-constant-in-time driving measure: contiguous slabs sharing one
/// angular grid.  With `uniform_outside` the measure extends to all of `ℝ`
/// by the uniform density, making the associated chain a whole-plane chain.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure")]
pub struct DrivingMeasure {
    slabs: Vec<MeasureSlab>,
    #[serde(default = "default_true")]
    uniform_outside: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Deserialize)]
struct RawMeasure {
    slabs: Vec<MeasureSlab>,
    #[serde(default = "default_true")]
    uniform_outside: bool,
}

impl TryFrom<RawMeasure> for DrivingMeasure {
    type Error = Error;
    fn try_from(raw: RawMeasure) -> Result<Self> {
        DrivingMeasure::new(raw.slabs, raw.uniform_outside)
    }
}

impl DrivingMeasure {
    pub fn new(slabs: Vec<MeasureSlab>, uniform_outside: bool) -> Result<Self> {
        if slabs.is_empty() {
            return Err(Error::invalid("measure needs at least one slab"));
        }
        let m = slabs[0].density.len();
        for pair in slabs.windows(2) {
            if (pair[1].t0 - pair[0].t1).abs() > 1e-9 * (1.0 + pair[0].t1.abs()) {
                return Err(Error::invalid("measure slabs must be contiguous in time"));
            }
            if pair[1].density.len() != m {
                return Err(Error::invalid("measure slabs must share one angular grid"));
            }
        }
        Ok(DrivingMeasure {
            slabs,
            uniform_outside,
        })
    }

    /// The uniform (zero-energy) measure on `[t0, t1]`.
    pub fn uniform(t0: f64, t1: f64, m: usize) -> Result<Self> {
        let density = vec![1.0 / (2.0 * PI); m];
        DrivingMeasure::new(vec![MeasureSlab::new(t0, t1, density)?], true)
    }

    /// The cosine family `ρ(θ) = (1 + ε cos θ)/2π` on `[t0, t1]`,
    /// `0 ≤ ε ≤ 1`.  Its Dirichlet rate is `(1 − √(1 − ε²))/8` exactly.
    pub fn cosine(t0: f64, t1: f64, m: usize, eps: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::invalid("cosine amplitude must lie in [0, 1]"));
        }
        let density = (0..m)
            .map(|j| {
                let th = 2.0 * PI * j as f64 / m as f64;
                (1.0 + eps * th.cos()) / (2.0 * PI)
            })
            .collect();
        DrivingMeasure::new(vec![MeasureSlab::new(t0, t1, density)?], true)
    }

    pub fn slabs(&self) -> &[MeasureSlab] {
        &self.slabs
    }

    pub fn uniform_outside(&self) -> bool {
        self.uniform_outside
    }

    /// Angular grid size shared by the slabs.
    pub fn grid_size(&self) -> usize {
        self.slabs[0].density.len()
    }

    /// Start of the active window.
    pub fn t0(&self) -> f64 {
        self.slabs[0].t0
    }

    /// End of the active window.
    pub fn t1(&self) -> f64 {
        self.slabs.last().unwrap().t1
    }
}

// ---------------------------------------------------------------------------
// Dirichlet rate and measure energy
// ---------------------------------------------------------------------------

/// Result of a rate or energy evaluation: `value` is `+∞` when the
/// refinement heuristic flags divergence.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DvRate {
    pub value: f64,
    pub divergent: bool,
}

fn rate_on_grid(density: &[f64]) -> f64 {
    let m = density.len();
    let samples: Vec<Complex64> = density.iter().map(|&v| c64(v, 0.0)).collect();
    let coeffs = spectral::fourier_coeffs(&samples);
    let dcoeffs = spectral::differentiate(&coeffs);
    let ddcoeffs = spectral::differentiate(&dcoeffs);
    let d1: Vec<Complex64> = spectral::fourier_values(&dcoeffs);
    let d2: Vec<Complex64> = spectral::fourier_values(&ddcoeffs);
    let peak = density.iter().fold(0.0f64, |a, &b| a.max(b));
    let floor = 1e-9 * peak;
    let mut acc = 0.0;
    for j in 0..m {
        let rho = density[j];
        let integrand = if rho <= floor {
            // at a zero of a nonnegative density, ρ'²/ρ → 2ρ''
            (2.0 * d2[j].re).max(0.0)
        } else {
            d1[j].re * d1[j].re / rho
        };
        acc += integrand;
    }
    acc * (2.0 * PI / m as f64) / 8.0
}

/// Dirichlet rate of one density: `(1/8) ∫ ρ'(θ)²/ρ(θ) dθ`, the instantaneous
/// energy cost of driving the evolution with `ρ` instead of the uniform
/// density.  Equivalently `½ ∫ v'(θ)² dθ` for `ρ = v²` — the quadratic form
/// is convex in `ρ` and vanishes exactly on the uniform density.
///
/// Divergence (e.g. for a density concentrating toward a point mass) is
/// flagged spectrally: a density whose Fourier coefficients have not decayed
/// by the top quarter of the band is not resolved by its grid — its rate is
/// still growing under refinement — and is reported as `+∞`.
pub fn dv_rate(density: &[f64]) -> Result<DvRate> {
    if density.len() < 16 {
        return Err(Error::invalid("rate needs at least 16 density samples"));
    }
    if density.iter().any(|v| !v.is_finite() || *v < -1e-12) {
        return Err(Error::invalid("density samples must be finite and >= 0"));
    }
    let m = density.len();
    let full = rate_on_grid(density);
    let coeffs =
        spectral::fourier_coeffs(&density.iter().map(|&v| c64(v, 0.0)).collect::<Vec<_>>());
    let peak = coeffs.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
    let band_lo = (3 * (m / 2)) / 4;
    let tail = (band_lo..=m / 2)
        .map(|k| coeffs[k].norm())
        .fold(0.0f64, f64::max);
    let divergent = tail > 1e-4 * peak || !full.is_finite();
    Ok(DvRate {
        value: if divergent { f64::INFINITY } else { full },
        divergent,
    })
}

/// Total energy of a driving measure: `Σ_slabs (t1 − t0) · rate(ρ_slab)`.
/// The uniform extension outside the window contributes nothing.
pub fn lk_energy(measure: &DrivingMeasure) -> Result<DvRate> {
    let mut total = 0.0;
    for slab in &measure.slabs {
        let r = dv_rate(&slab.density)?;
        if r.divergent {
            return Ok(DvRate {
                value: f64::INFINITY,
                divergent: true,
            });
        }
        total += slab.duration() * r.value;
    }
    Ok(DvRate {
        value: total,
        divergent: false,
    })
}

// ---------------------------------------------------------------------------
// the chain
// ---------------------------------------------------------------------------

/// Koebe-type map `k(w) = w/(1+w)²`: univalent on `𝔻`, image `ℂ ∖ [1/4, ∞)`,
/// conjugating the one-slit radial flow with attraction point `ζ = 1` to pure
/// scaling: `k(g_t(z)) = e^t k(z)`.
fn koebe(w: Complex64) -> Complex64 {
    let d = 1.0 + w;
    w / (d * d)
}

fn koebe_prime(w: Complex64) -> Complex64 {
    let d = 1.0 + w;
    (1.0 - w) / (d * d * d)
}

/// Inverse of `koebe` mapping `ℂ ∖ [1/4, ∞)` back into `𝔻`, in the form
/// `2u / (1 − 2u + √(1 − 4u))` which selects the root inside the disk (the
/// two roots have product 1) and is stable for small `u`.
fn koebe_inv(u: Complex64) -> Complex64 {
    let s = (1.0 - 4.0 * u).sqrt();
    2.0 * u / ((1.0 - 2.0 * u) + s)
}

/// One exact slit step of size `dt` toward the boundary point `e^{iθ}`,
/// in the shrinking direction — `f(z) = e^{iθ} k⁻¹(e^{−dt} k(e^{−iθ} z))` —
/// together with its `z`-derivative (chain rule through `k`).
fn slit_step_deriv(theta: f64, dt: f64, z: Complex64) -> (Complex64, Complex64) {
    let rot = Complex64::from_polar(1.0, theta);
    let w = z / rot;
    let u = (-dt).exp() * koebe(w);
    let v = koebe_inv(u);
    let deriv = (-dt).exp() * koebe_prime(w) / koebe_prime(v);
    (rot * v, deriv)
}

#[derive(Clone, Debug)]
enum Rep {
    /// Composition of exact one-slit steps; `thetas[i]` drives
    /// `[times[i], times[i+1]]`.
    Slit { thetas: Vec<f64> },
    /// Taylor snapshots `a_1..a_K` of `f_t` at each time; linear
    /// interpolation in between.
    Spectral { snaps: Vec<Vec<Complex64>> },
}

/// A radial Loewner chain `t ↦ f_t`, with `f_t : 𝔻 → D_t`, `f_t(0) = 0`,
/// `f_t'(0) = e^{−t} > 0`.
#[derive(Clone, Debug)]
pub struct RadialChain {
    times: Vec<f64>,
    rep: Rep,
    uniform_outside: bool,
    boundary_offset: f64,
    leaf_resolution: usize,
}

impl RadialChain {
    pub(crate) fn from_snapshots(
        times: Vec<f64>,
        snaps: Vec<Vec<Complex64>>,
        uniform_outside: bool,
        opts: &RadialOptions,
    ) -> Result<Self> {
        if times.len() != snaps.len() || times.len() < 2 {
            return Err(Error::invalid("chain needs at least two snapshots"));
        }
        for pair in times.windows(2) {
            if !(pair[1] > pair[0]) {
                return Err(Error::invalid("snapshot times must be strictly increasing"));
            }
        }
        Ok(RadialChain {
            times,
            rep: Rep::Spectral { snaps },
            uniform_outside,
            boundary_offset: opts.boundary_offset,
            leaf_resolution: opts.angular_grid,
        })
    }

    /// Active time window `[t0, t1]`.  A whole-plane chain also evaluates
    /// outside the window (circles before, equipotentials after).
    pub fn time_range(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().unwrap())
    }

    pub fn is_whole_plane(&self) -> bool {
        self.uniform_outside
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let (t0, t1) = self.time_range();
        if self.uniform_outside || (t >= t0 - 1e-12 && t <= t1 + 1e-12) {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "time {t} outside the chain window [{t0}, {t1}]"
            )))
        }
    }

    /// Taylor coefficients `a_1..a_K` of `f_t` (spectral chains only).
    fn coeffs_at(&self, t: f64) -> Result<Vec<Complex64>> {
        let snaps = match &self.rep {
            Rep::Spectral { snaps } => snaps,
            Rep::Slit { .. } => {
                return Err(Error::invalid(
                    "coefficient snapshots require a spectral chain",
                ))
            }
        };
        self.check_time(t)?;
        let (t0, t1) = self.time_range();
        if t <= t0 {
            // round circles before the window
            let mut a = vec![c64(0.0, 0.0); snaps[0].len()];
            a[0] = c64((-t).exp(), 0.0);
            if t0 - t < 1e-12 {
                return Ok(snaps[0].clone());
            }
            return Ok(a);
        }
        if t >= t1 {
            // equipotentials of the final domain after the window
            let last = snaps.last().unwrap();
            let r = (-(t - t1)).exp();
            let mut a = last.clone();
            let mut scale = 1.0;
            for v in a.iter_mut() {
                scale *= r;
                *v *= scale;
            }
            return Ok(a);
        }
        let idx = self.times.partition_point(|&tau| tau <= t).min(self.times.len() - 1);
        let (lo, hi) = (idx - 1, idx);
        let lam = (t - self.times[lo]) / (self.times[hi] - self.times[lo]);
        Ok(snaps[lo]
            .iter()
            .zip(&snaps[hi])
            .map(|(&a, &b)| a * (1.0 - lam) + b * lam)
            .collect())
    }

    /// Taylor coefficients and their time derivative at an interior time, by
    /// quadratic (three-snapshot Lagrange) differentiation on the snapshot
    /// grid — exact at the snapshots, second order in their spacing, and free
    /// of the smoothing a finite difference over interpolated values incurs.
    fn coeffs_and_rate_at(&self, t: f64) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        let snaps = match &self.rep {
            Rep::Spectral { snaps } => snaps,
            Rep::Slit { .. } => {
                return Err(Error::invalid(
                    "coefficient derivatives require a spectral chain",
                ))
            }
        };
        let n = self.times.len();
        if n < 3 {
            return Err(Error::invalid("need at least three snapshots"));
        }
        let idx = self
            .times
            .partition_point(|&tau| tau <= t)
            .clamp(1, n - 1);
        // of the two stencils spanning the interval [idx-1, idx], take the
        // one whose middle node is nearest t
        let cand_a = (idx - 1).min(n - 3);
        let cand_b = idx.saturating_sub(2).min(n - 3);
        let i0 = if (self.times[cand_a + 1] - t).abs() <= (self.times[cand_b + 1] - t).abs() {
            cand_a
        } else {
            cand_b
        };
        let (x0, x1, x2) = (self.times[i0], self.times[i0 + 1], self.times[i0 + 2]);
        // Lagrange basis values and derivatives at t
        let l0 = (t - x1) * (t - x2) / ((x0 - x1) * (x0 - x2));
        let l1 = (t - x0) * (t - x2) / ((x1 - x0) * (x1 - x2));
        let l2 = (t - x0) * (t - x1) / ((x2 - x0) * (x2 - x1));
        let d0 = ((t - x1) + (t - x2)) / ((x0 - x1) * (x0 - x2));
        let d1 = ((t - x0) + (t - x2)) / ((x1 - x0) * (x1 - x2));
        let d2 = ((t - x0) + (t - x1)) / ((x2 - x0) * (x2 - x1));
        let kk = snaps[i0].len();
        let mut a = Vec::with_capacity(kk);
        let mut da = Vec::with_capacity(kk);
        for k in 0..kk {
            a.push(l0 * snaps[i0][k] + l1 * snaps[i0 + 1][k] + l2 * snaps[i0 + 2][k]);
            da.push(d0 * snaps[i0][k] + d1 * snaps[i0 + 1][k] + d2 * snaps[i0 + 2][k]);
        }
        Ok((a, da))
    }

    /// Evaluate `f_t(z)` for `|z| ≤ 1`.
    pub fn map_disk(&self, t: f64, z: Complex64) -> Result<Complex64> {
        Ok(self.map_disk_deriv(t, z)?.0)
    }

    /// Evaluate `(f_t(z), f_t'(z))`.
    pub fn map_disk_deriv(&self, t: f64, z: Complex64) -> Result<(Complex64, Complex64)> {
        if z.norm() > 1.0 + 1e-9 {
            return Err(Error::domain("chain maps are defined on the closed disk"));
        }
        self.check_time(t)?;
        match &self.rep {
            Rep::Slit { thetas } => {
                let (t0, _) = self.time_range();
                if t < t0 {
                    return Err(Error::domain("slit chains do not extend before t = 0"));
                }
                // latest step is innermost: f_t = f_0 ∘ f_1 ∘ … ∘ f_k
                let k = self
                    .times
                    .partition_point(|&tau| tau < t - 1e-14)
                    .min(thetas.len());
                let mut w = z;
                let mut d = c64(1.0, 0.0);
                for i in (0..k).rev() {
                    let dt = self.times[i + 1].min(t) - self.times[i];
                    if dt <= 0.0 {
                        continue;
                    }
                    let (val, der) = slit_step_deriv(thetas[i], dt, w);
                    d *= der;
                    w = val;
                }
                Ok((w, d))
            }
            Rep::Spectral { .. } => {
                let a = self.coeffs_at(t)?;
                Ok(horner_poly(&a, z))
            }
        }
    }

    /// Conformal radius `|f_t'(0)|`, computed from a Cauchy coefficient
    /// integral on the circle `|z| = ½` (spectrally exact, independent of
    /// the representation).  Equals `e^{−t}` for every chain — the basic
    /// invariant of the parametrization.
    pub fn conformal_radius(&self, t: f64) -> Result<f64> {
        let mc = 64;
        let rc = 0.5;
        let mut acc = c64(0.0, 0.0);
        for j in 0..mc {
            let th = 2.0 * PI * j as f64 / mc as f64;
            let z = Complex64::from_polar(rc, th);
            acc += self.map_disk(t, z)? * Complex64::from_polar(1.0, -th);
        }
        Ok((acc / (mc as f64 * rc)).norm())
    }

    /// The leaf `∂D_t` as a closed polyline: images of `m` uniform angles at
    /// radii `1 − δ_b` and `1 − δ_b/2`, Richardson-extrapolated to the
    /// boundary.
    pub fn leaf(&self, t: f64, m: usize) -> Result<PolylineCurve> {
        if m < 16 {
            return Err(Error::invalid("leaf needs at least 16 samples"));
        }
        let delta = self.boundary_offset;
        let mut points = Vec::with_capacity(m);
        for j in 0..m {
            let th = 2.0 * PI * j as f64 / m as f64;
            let dir = Complex64::from_polar(1.0, th);
            let far = self.map_disk(t, dir * (1.0 - delta))?;
            let near = self.map_disk(t, dir * (1.0 - 0.5 * delta))?;
            points.push(2.0 * near - far);
        }
        // roughness guard: a leaf resolved by the grid has no outsized gaps
        let mut gaps: Vec<f64> = (0..m)
            .map(|j| (points[(j + 1) % m] - points[j]).norm())
            .collect();
        gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = gaps[m / 2].max(1e-300);
        if gaps[m - 1] > 50.0 * median {
            return Err(Error::degeneracy(
                "leaf is under-resolved by the angular grid",
                Some(t),
            ));
        }
        Ok(PolylineCurve {
            closed: true,
            through_infinity: false,
            points,
        })
    }

    /// Boundary trace of the winding: `u_t(θ) = −arg(f_t'(z) z / f_t(z))` at
    /// `z = r e^{iθ}`, unwrapped in `θ`, with the branch fixed by the
    /// mean-value property (the winding vanishes at the origin), Richardson
    /// extrapolated from radii `1 − δ_b` and `1 − δ_b/2`.
    pub fn winding_trace(&self, t: f64, m: usize) -> Result<Vec<f64>> {
        let delta = self.boundary_offset;
        let far = self.winding_samples(t, 1.0 - delta, m)?;
        let near = self.winding_samples(t, 1.0 - 0.5 * delta, m)?;
        Ok((0..m).map(|j| 2.0 * near[j] - far[j]).collect())
    }

    fn winding_samples(&self, t: f64, r: f64, m: usize) -> Result<Vec<f64>> {
        let mut raw = Vec::with_capacity(m);
        for j in 0..m {
            let z = Complex64::from_polar(r, 2.0 * PI * j as f64 / m as f64);
            let (f, df) = self.map_disk_deriv(t, z)?;
            if f.norm() < 1e-300 {
                return Err(Error::degeneracy("winding trace hit f = 0", Some(t)));
            }
            raw.push((df * z / f).arg());
        }
        let mut u = unwrap_angles(&raw);
        let mean = u.iter().sum::<f64>() / m as f64;
        let branch = 2.0 * PI * (mean / (2.0 * PI)).round();
        for v in &mut u {
            *v = -(*v - branch);
        }
        Ok(u)
    }
}

/// `p(z) = Σ_{k≥1} a_k z^k` and its derivative, Horner-evaluated
/// (`coeffs[k-1] = a_k`).
fn horner_poly(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut q = c64(0.0, 0.0);
    let mut dq = c64(0.0, 0.0);
    for &a in coeffs.iter().rev() {
        dq = dq * z + q;
        q = q * z + a;
    }
    (z * q, q + z * dq)
}

/// Continuous branch of a sampled angle sequence: each step is moved by a
/// multiple of `2π` to within `π` of its predecessor.
fn unwrap_angles(raw: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(raw.len());
    out.push(raw[0]);
    for i in 1..raw.len() {
        let prev = out[i - 1];
        let k = ((raw[i] - prev) / (2.0 * PI)).round();
        out.push(raw[i] - 2.0 * PI * k);
    }
    out
}

// ---------------------------------------------------------------------------
// solvers
// ---------------------------------------------------------------------------

/// Solve the radial slit evolution for a continuous driving angle by
/// composing exact one-slit steps, one per driver interval, each attracted to
/// the midpoint angle of the interval.  The composition keeps
/// `f_t'(0) = e^{−t}` exactly.
pub fn solve_radial(driver: &RadialDriver, opts: &RadialOptions) -> Result<RadialChain> {
    let times = driver.times().to_vec();
    let thetas: Vec<f64> = driver
        .angles()
        .windows(2)
        .map(|p| 0.5 * (p[0] + p[1]))
        .collect();
    Ok(RadialChain {
        times,
        rep: Rep::Slit { thetas },
        uniform_outside: false,
        boundary_offset: opts.boundary_offset,
        leaf_resolution: opts.angular_grid,
    })
}

/// Solve the Loewner–Kufarev equation `∂_t f = −z f' H_t(z)` for a driving
/// measure, as a triangular ODE system for the Taylor coefficients of
/// `f_t(z) = Σ a_k(t) z^k`:
///
/// `a_m' = −(m a_m + Σ_{k<m} k a_k η_{m−k})`, with `η_j = 2 ∫ e^{−ijθ} dρ`.
///
/// The `a_1` equation decouples to `a_1(t) = e^{−t}` exactly; the uniform
/// measure keeps all higher modes at zero, so the chain degenerates to
/// `f_t(z) = e^{−t} z`.  Integration is classical fixed-step RK4 with a
/// snapshot stored per step.
pub fn solve_kufarev(measure: &DrivingMeasure, opts: &RadialOptions) -> Result<RadialChain> {
    let kk = opts.modes;
    let m = measure.grid_size();
    if kk < 8 || kk > m / 2 {
        return Err(Error::invalid("modes must satisfy 8 <= K <= M/2"));
    }
    let t0 = measure.t0();
    let mut a = vec![c64(0.0, 0.0); kk];
    a[0] = c64((-t0).exp(), 0.0);
    let mut times = vec![t0];
    let mut snaps = vec![a.clone()];

    let mut k1 = vec![c64(0.0, 0.0); kk];
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut tmp = k1.clone();

    for slab in measure.slabs() {
        // Herglotz coefficients of the slab density
        let samples: Vec<Complex64> = slab.density.iter().map(|&v| c64(v, 0.0)).collect();
        let coeffs = spectral::fourier_coeffs(&samples);
        let mut eta = vec![c64(0.0, 0.0); kk];
        for j in 1..kk {
            eta[j] = 2.0 * 2.0 * PI * coeffs[j];
        }
        let deriv = |state: &[Complex64], out: &mut [Complex64]| {
            for mi in 1..=kk {
                let mut s = c64(0.0, 0.0);
                for k in 1..mi {
                    s += k as f64 * state[k - 1] * eta[mi - k];
                }
                out[mi - 1] = -(mi as f64 * state[mi - 1] + s);
            }
        };
        let steps = (slab.duration() / opts.ode_step).ceil().max(1.0) as usize;
        let h = slab.duration() / steps as f64;
        for step in 0..steps {
            deriv(&a, &mut k1);
            for i in 0..kk {
                tmp[i] = a[i] + 0.5 * h * k1[i];
            }
            deriv(&tmp, &mut k2);
            for i in 0..kk {
                tmp[i] = a[i] + 0.5 * h * k2[i];
            }
            deriv(&tmp, &mut k3);
            for i in 0..kk {
                tmp[i] = a[i] + h * k3[i];
            }
            deriv(&tmp, &mut k4);
            for i in 0..kk {
                a[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            times.push(slab.t0 + h * (step + 1) as f64);
            snaps.push(a.clone());
        }
    }
    RadialChain::from_snapshots(times, snaps, measure.uniform_outside(), opts)
}

// ---------------------------------------------------------------------------
// Herglotz inversion
// ---------------------------------------------------------------------------

/// Recover the driving density at one time from coefficient snapshots of a
/// spectral chain: differentiate the snapshots in time, solve the triangular
/// system `ȧ_m = −Σ_{k≤m} k a_k η_{m−k}` for the Herglotz coefficients
/// `η_j`, and evaluate `ρ(θ) = Re H(e^{iθ}) / 2π`.  High modes are damped by
/// a smooth spectral filter; small negative parts (up to 5% of the mass) are
/// clipped and renormalized, anything worse is reported as an inversion
/// failure.
pub fn herglotz_density(chain: &RadialChain, t: f64, m: usize) -> Result<Vec<f64>> {
    let (t0, t1) = chain.time_range();
    if t <= t0 || t >= t1 {
        return Err(Error::domain(
            "density reconstruction needs an interior time of the window",
        ));
    }
    let (a, da) = chain.coeffs_and_rate_at(t)?;
    let kk = a.len();

    if a[0].norm() < 1e-14 {
        return Err(Error::degeneracy("chain coefficient a_1 vanished", Some(t)));
    }
    let mut eta = vec![c64(0.0, 0.0); kk];
    eta[0] = -da[0] / a[0];
    for mi in 2..=kk {
        let mut s = c64(0.0, 0.0);
        for k in 2..=mi {
            s += k as f64 * a[k - 1] * eta[mi - k];
        }
        eta[mi - 1] = (-da[mi - 1] - s) / a[0];
    }
    // mass consistency: η_0 must be 1 (the conformal-radius invariant)
    if (eta[0] - 1.0).norm() > 0.05 {
        return Err(Error::no_convergence(
            "herglotz inversion: coefficient flow is inconsistent with a unit-mass measure",
            0,
            (eta[0] - 1.0).norm(),
        ));
    }
    // smooth spectral filter against finite-difference noise in high modes
    let jc = 0.8 * (kk as f64 - 1.0);
    for (j, v) in eta.iter_mut().enumerate().skip(1) {
        *v *= (-((j as f64 / jc).powi(8))).exp();
    }
    let mut padded = vec![c64(0.0, 0.0); m];
    padded[0] = c64(1.0, 0.0); // exact mass in place of the measured η_0
    for j in 1..kk.min(m / 2) {
        padded[j] = eta[j];
    }
    let vals = spectral::fourier_values(&padded);
    let mut density: Vec<f64> = vals.iter().map(|v| v.re / (2.0 * PI)).collect();
    let w = 2.0 * PI / m as f64;
    let neg: f64 = density.iter().filter(|&&v| v < 0.0).map(|v| -v * w).sum();
    if neg > 0.05 {
        return Err(Error::no_convergence(
            "herglotz inversion produced a signed density",
            0,
            neg,
        ));
    }
    for v in &mut density {
        *v = v.max(0.0);
    }
    let mass: f64 = density.iter().sum::<f64>() * w;
    for v in &mut density {
        *v /= mass;
    }
    Ok(density)
}

/// Invert a spectral chain into a piecewise-constant driving measure with
/// `slabs` equal slabs across the active window, each density reconstructed
/// at the slab midpoint.
pub fn herglotz_invert(chain: &RadialChain, slabs: usize, m: usize) -> Result<DrivingMeasure> {
    if slabs == 0 {
        return Err(Error::invalid("need at least one slab"));
    }
    let (t0, t1) = chain.time_range();
    let dt = (t1 - t0) / slabs as f64;
    let mut out = Vec::with_capacity(slabs);
    for i in 0..slabs {
        let lo = t0 + dt * i as f64;
        let hi = t0 + dt * (i + 1) as f64;
        let density = herglotz_density(chain, 0.5 * (lo + hi), m)?;
        out.push(MeasureSlab::new(lo, hi, density)?);
    }
    DrivingMeasure::new(out, chain.is_whole_plane())
}

// ---------------------------------------------------------------------------
// foliation and winding field
// ---------------------------------------------------------------------------

/// A family of leaves of one chain at increasing times.
#[derive(Clone, Debug)]
pub struct Foliation {
    pub times: Vec<f64>,
    pub leaves: Vec<PolylineCurve>,
}

/// Extract leaves at the given increasing times.
pub fn foliation(chain: &RadialChain, times: &[f64], m: usize) -> Result<Foliation> {
    if times.len() < 2 {
        return Err(Error::invalid("foliation needs at least two times"));
    }
    for pair in times.windows(2) {
        if !(pair[1] > pair[0]) {
            return Err(Error::invalid("foliation times must be increasing"));
        }
    }
    let leaves = times
        .iter()
        .map(|&t| chain.leaf(t, m))
        .collect::<Result<Vec<_>>>()?;
    Ok(Foliation {
        times: times.to_vec(),
        leaves,
    })
}

/// Whether consecutive leaves are strictly nested (later inside earlier),
/// checked by winding numbers of subsampled points.
pub fn leaves_nested(fol: &Foliation) -> bool {
    for pair in fol.leaves.windows(2) {
        let outer = &pair[0].points;
        let stride = (pair[1].points.len() / 32).max(1);
        for p in pair[1].points.iter().step_by(stride) {
            if winding_number(outer, *p) == 0 {
                return false;
            }
        }
    }
    true
}

/// The winding of the foliation sampled on a square grid, together with the
/// per-leaf boundary traces.
#[derive(Clone, Debug)]
pub struct WindingField {
    pub field: GridField,
    pub times: Vec<f64>,
    pub traces: Vec<Vec<f64>>,
}

/// Sample the winding field of a whole-plane spectral chain on an `n × n`
/// grid covering the outermost leaf.  Outside the outermost leaf the chain
/// consists of round circles and the winding vanishes; points inside the
/// window are located on their leaf by a nested-leaf bracket followed by
/// Newton inversion of the polynomial chain map, and the winding is read off
/// by radial continuation of `−arg(f'(w) w / f(w))` with Richardson
/// extrapolation at the boundary.
pub fn winding_field(chain: &RadialChain, fol: &Foliation, n: usize) -> Result<WindingField> {
    if !matches!(chain.rep, Rep::Spectral { .. }) {
        return Err(Error::invalid("the winding field requires a spectral chain"));
    }
    if !chain.is_whole_plane() {
        return Err(Error::invalid("the winding field requires a whole-plane chain"));
    }
    if n < 8 {
        return Err(Error::invalid("grid must be at least 8 x 8"));
    }
    let outer = &fol.leaves[0].points;
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in outer {
        xmin = xmin.min(p.re);
        xmax = xmax.max(p.re);
        ymin = ymin.min(p.im);
        ymax = ymax.max(p.im);
    }
    let span = (xmax - xmin).max(ymax - ymin) * 1.08;
    let cx = 0.5 * (xmin + xmax);
    let cy = 0.5 * (ymin + ymax);
    let h = span / (n - 1) as f64;
    let x0 = cx - 0.5 * span;
    let y0 = cy - 0.5 * span;

    let (_, t1) = chain.time_range();
    let mut values = vec![0.0; n * n];
    let mut mask = vec![false; n * n];
    for jy in 0..n {
        for jx in 0..n {
            let z = c64(x0 + jx as f64 * h, y0 + jy as f64 * h);
            let idx = jy * n + jx;
            match winding_at_point(chain, fol, z, t1) {
                Some(v) => {
                    values[idx] = v;
                    mask[idx] = true;
                }
                None => {
                    mask[idx] = false;
                }
            }
        }
    }
    let field = GridField {
        x0,
        y0,
        h,
        nx: n,
        ny: n,
        values,
        mask,
    };
    let traces = fol
        .times
        .iter()
        .map(|&t| chain.winding_trace(t, chain.leaf_resolution))
        .collect::<Result<Vec<_>>>()?;
    Ok(WindingField {
        field,
        times: fol.times.clone(),
        traces,
    })
}

fn winding_at_point(chain: &RadialChain, fol: &Foliation, z: Complex64, t1: f64) -> Option<f64> {
    if winding_number(&fol.leaves[0].points, z) == 0 {
        // outside the outermost leaf: round circles, zero winding
        return Some(0.0);
    }
    if z.norm() < 1e-12 {
        return Some(0.0);
    }
    // bracket by nesting: last foliation leaf that still contains z
    let mut lo = 0;
    let mut hi = fol.leaves.len();
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if winding_number(&fol.leaves[mid].points, z) != 0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let spacing = if fol.times.len() > 1 {
        (fol.times[fol.times.len() - 1] - fol.times[0]) / (fol.times.len() - 1) as f64
    } else {
        0.1
    };
    // φ(τ) = log|g_τ(z)|: strictly increasing, negative inside the leaf at τ,
    // zero exactly at the leaf time of z
    let phi = |tau: f64, guess: Complex64| -> Option<(f64, Complex64)> {
        let coeffs = chain.coeffs_at(tau).ok()?;
        let w = invert_poly(&coeffs, z, guess)?;
        Some((w.norm().ln(), w))
    };
    let reseed = |w: Complex64, dtau: f64| -> Complex64 {
        let g = w * dtau.exp();
        if g.norm() > 1.4 {
            g / g.norm() * 1.4
        } else {
            g
        }
    };
    let mut ta = fol.times[lo];
    let mut seed = z * ta.exp();
    if seed.norm() > 0.98 {
        seed = seed / seed.norm() * 0.98;
    }
    let (mut fa, mut wa) = phi(ta, seed)?;
    // numeric edge: the polyline winding test said "inside" but the point sits
    // a hair outside the analytic leaf — walk the lower end back
    let mut back = 0;
    while fa >= 0.0 {
        if fa < 1e-9 {
            return eval_boundary_winding(chain, ta, wa);
        }
        if back >= 8 {
            return None;
        }
        ta -= spacing.max(0.02);
        back += 1;
        let r = phi(ta, wa)?;
        fa = r.0;
        wa = r.1;
    }
    // upper end of the bracket
    let mut tb = if lo + 1 < fol.times.len() {
        fol.times[lo + 1]
    } else {
        (ta + spacing.max(0.02)).min(t1.max(ta + 1e-6))
    };
    let (mut fb, mut wb) = phi(tb, reseed(wa, tb - ta))?;
    while fb < 0.0 {
        if tb >= t1 {
            // past the window the chain is pure scaling: φ grows at unit rate
            let tau = tb - fb;
            return eval_boundary_winding(chain, tau, wb);
        }
        ta = tb;
        fa = fb;
        wa = wb;
        tb = (tb + spacing.max(0.05)).min(t1);
        let r = phi(tb, reseed(wa, tb - ta))?;
        fb = r.0;
        wb = r.1;
    }
    // Illinois false position on the bracket
    let mut side = 0i32;
    for _ in 0..60 {
        if !(fb > fa) {
            return None;
        }
        let mut tau = (ta * fb - tb * fa) / (fb - fa);
        let margin = 1e-3 * (tb - ta);
        tau = tau.max(ta + margin).min(tb - margin);
        let (f, w) = phi(tau, reseed(wa, tau - ta))?;
        if f.abs() < 1e-10 || tb - ta < 1e-12 {
            return eval_boundary_winding(chain, tau, w);
        }
        if f < 0.0 {
            ta = tau;
            fa = f;
            wa = w;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            tb = tau;
            fb = f;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    None
}

/// Winding at a located boundary point: continue the branch of
/// `−arg(f'(w) w / f(w))` from the center (where it vanishes) along the
/// radius through `w`, and Richardson-extrapolate the last two radii.
fn eval_boundary_winding(chain: &RadialChain, tau: f64, w: Complex64) -> Option<f64> {
    let coeffs = chain.coeffs_at(tau).ok()?;
    let dir = w / w.norm();
    let delta = chain.boundary_offset;
    let mut radii: Vec<f64> = (1..=8).map(|k| (k as f64 / 8.0) * (1.0 - delta)).collect();
    radii.push(1.0 - 0.5 * delta);
    let mut raw = Vec::with_capacity(radii.len());
    for &r in &radii {
        let zz = dir * r;
        let (f, df) = horner_poly(&coeffs, zz);
        if f.norm() < 1e-300 {
            return None;
        }
        raw.push((df * zz / f).arg());
    }
    let u = unwrap_angles(&raw);
    let far = u[radii.len() - 2];
    let near = u[radii.len() - 1];
    Some(-(2.0 * near - far))
}

/// Newton inversion of the polynomial `p(w) = z` from a seed; `None` when the
/// iteration leaves the disk neighborhood or stalls.
fn invert_poly(coeffs: &[Complex64], z: Complex64, seed: Complex64) -> Option<Complex64> {
    let mut w = seed;
    for _ in 0..80 {
        let (f, df) = horner_poly(coeffs, w);
        if df.norm() < 1e-300 {
            return None;
        }
        let step = (f - z) / df;
        w -= step;
        if w.norm() > 1.6 {
            return None;
        }
        if step.norm() < 1e-13 * (1.0 + w.norm()) {
            return Some(w);
        }
    }
    None
}

// ---------------------------------------------------------------------------
// energy duality
// ---------------------------------------------------------------------------

/// Two sides of the energy duality for one measure.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DualityReport {
    /// Dirichlet energy `𝒟(φ)` of the winding field, assembled from
    /// annulus charts between consecutive leaves plus the harmonic cap
    /// inside the final leaf.
    pub field_energy: f64,
    /// Measure energy `S(ρ)`.
    pub measure_energy: f64,
    /// `|𝒟(φ) − 16 S(ρ)|`.
    pub gap: f64,
}

/// Check the energy duality `𝒟(φ) = 16 S(ρ)` for a whole-plane measure.
///
/// The winding field is integrated leaf stratum by leaf stratum.  Pulled back
/// by `f_t`, the region between the leaves at `t` and `t + dt` is the thin
/// strip `{1 − dt·Re H(e^{iθ}) < r < 1}` (the gap width is the boundary
/// Loewner speed `Re H = 2πρ`), whose Dirichlet energy is, to first order,
///
/// `(1/π) ∫ [ (ũ − u)²/(dt·Re H) + dt·Re H·(u')² ] dθ`,
///
/// where `u` is the trace at `t` and `ũ` is the trace at `t + dt` transported
/// by the boundary correspondence `ψ(θ) = θ + dt·Im H(e^{iθ})` of the
/// transition map.  Outside the window the field vanishes (round circles);
/// inside the final leaf it is harmonic, contributing the `H^{1/2}` seminorm
/// of the final trace.  The strip error is first order in the grid step, so
/// the assembly is evaluated at step `dt` and `dt/2` and Richardson
/// extrapolated.
pub fn duality_gap(measure: &DrivingMeasure, opts: &RadialOptions) -> Result<DualityReport> {
    if !measure.uniform_outside() {
        return Err(Error::domain("energy duality requires a whole-plane measure"));
    }
    let s_rate = lk_energy(measure)?;
    if s_rate.divergent {
        return Err(Error::domain("measure energy diverges"));
    }
    let chain = solve_kufarev(measure, opts)?;
    let coarse = assemble_field_energy(&chain, measure, opts, opts.chart_step)?;
    let fine = assemble_field_energy(&chain, measure, opts, 0.5 * opts.chart_step)?;
    let field_energy = 2.0 * fine - coarse;
    Ok(DualityReport {
        field_energy,
        measure_energy: s_rate.value,
        gap: (field_energy - 16.0 * s_rate.value).abs(),
    })
}

fn assemble_field_energy(
    chain: &RadialChain,
    measure: &DrivingMeasure,
    opts: &RadialOptions,
    target_dt: f64,
) -> Result<f64> {
    let m = opts.angular_grid;
    let mut acc = 0.0;
    let mut prev_trace: Option<Vec<f64>> = None;
    for slab in measure.slabs() {
        // boundary values of the Herglotz integral of the slab density:
        // Re H = 2πρ (the Loewner speed), Im H its conjugate function
        let raw: Vec<Complex64> = slab.density.iter().map(|&v| c64(v, 0.0)).collect();
        let samples: Vec<Complex64> = if raw.len() == m {
            raw
        } else {
            spectral::resample(&raw, m)
        };
        let reh: Vec<f64> = samples.iter().map(|v| 2.0 * PI * v.re).collect();
        let coeffs = spectral::fourier_coeffs(&samples);
        let mut padded = vec![c64(0.0, 0.0); m];
        for j in 1..m / 2 {
            padded[j] = 2.0 * 2.0 * PI * coeffs[j];
        }
        let imh: Vec<f64> = spectral::fourier_values(&padded)
            .iter()
            .map(|v| v.im)
            .collect();

        let steps = (slab.duration() / target_dt).ceil().max(1.0) as usize;
        let dt = slab.duration() / steps as f64;
        let mut outer = match prev_trace.take() {
            Some(u) => u,
            None => chain.winding_trace(slab.t0, m)?,
        };
        for step in 0..steps {
            let t_hi = slab.t0 + dt * (step + 1) as f64;
            let inner = chain.winding_trace(t_hi, m)?;
            // tangential derivative of the outer trace
            let ocoeffs = spectral::fourier_coeffs(
                &outer.iter().map(|&v| c64(v, 0.0)).collect::<Vec<_>>(),
            );
            let du: Vec<f64> = spectral::fourier_values(&spectral::differentiate(&ocoeffs))
                .iter()
                .map(|v| v.re)
                .collect();
            // inner trace transported to the outer chart's angles
            let icoeffs = spectral::fourier_coeffs(
                &inner.iter().map(|&v| c64(v, 0.0)).collect::<Vec<_>>(),
            );
            let mut strip = 0.0;
            for j in 0..m {
                let th = 2.0 * PI * j as f64 / m as f64 + dt * imh[j];
                let jump = spectral::eval_series(&icoeffs, th).re - outer[j];
                let w = dt * reh[j];
                if w > 1e-14 {
                    strip += jump * jump / w;
                }
                strip += w * du[j] * du[j];
            }
            acc += strip * 2.0 / m as f64;
            outer = inner;
        }
        prev_trace = Some(outer);
    }
    // harmonic cap inside the final leaf
    let last = prev_trace.unwrap();
    acc += h_half_seminorm_circle(&last).value;
    Ok(acc)
}

// ---------------------------------------------------------------------------
// reversal
// ---------------------------------------------------------------------------

/// Driving measure of the inversion-reversed chain.
///
/// The reversed chain consists of the domains `ι(ℂ̂ ∖ D̄_t)`, `ι(z) = 1/z`,
/// run backwards: leaves of the original chain are sampled on a time grid
/// (extending one window margin past the active window, where leaves become
/// equipotentials and the reversed densities decay to uniform like
/// `e^{−2Δt}`), each inverted leaf is re-uniformized by a boundary-integral
/// map centered at the origin, and the resulting coefficient snapshots —
/// ordered by the reversed time `t̃ = −log (conformal radius)` — are inverted
/// back into densities.  The construction preserves the measure energy.
pub fn reversed_measure(measure: &DrivingMeasure, opts: &RadialOptions) -> Result<DrivingMeasure> {
    if !measure.uniform_outside() {
        return Err(Error::domain("reversal requires a whole-plane measure"));
    }
    let chain = solve_kufarev(measure, opts)?;
    let (t0, t1) = chain.time_range();
    let t_max = t1 + opts.window_margin;
    let steps = ((t_max - t0) / opts.leaf_step).ceil().max(2.0) as usize;
    let kk = opts.modes.min(opts.map_nodes / 2);

    let mut times_rev = Vec::with_capacity(steps + 1);
    let mut snaps_rev = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let t = t0 + (t_max - t0) * i as f64 / steps as f64;
        let leaf = chain.leaf(t, opts.map_nodes)?;
        let inverted: Vec<Complex64> = leaf
            .points
            .iter()
            .map(|&z| {
                if z.norm() < 1e-12 {
                    c64(1e12, 0.0)
                } else {
                    1.0 / z
                }
            })
            .collect();
        let smooth = SmoothLoop::from_samples(&inverted);
        let map = SzegoMap::build(&smooth, c64(0.0, 0.0), opts.map_nodes)?;
        let t_rev = -map.conformal_radius().ln();
        let coeffs: Vec<Complex64> = map.series[1..=kk].to_vec();
        times_rev.push(t_rev);
        snaps_rev.push(coeffs);
    }
    // original time increasing => reversed time decreasing
    times_rev.reverse();
    snaps_rev.reverse();
    let mut clean_t = Vec::with_capacity(times_rev.len());
    let mut clean_s = Vec::with_capacity(times_rev.len());
    for (t, s) in times_rev.into_iter().zip(snaps_rev) {
        if clean_t.last().map_or(true, |&prev| t > prev + 1e-9) {
            clean_t.push(t);
            clean_s.push(s);
        }
    }
    if clean_t.len() < 4 {
        return Err(Error::degeneracy("reversed chain collapsed", None));
    }
    let rev_chain = RadialChain::from_snapshots(clean_t, clean_s, true, opts)?;
    let (r0, r1) = rev_chain.time_range();
    let slabs = (((r1 - r0) / (2.0 * opts.leaf_step)).round() as usize).max(4);
    herglotz_invert(&rev_chain, slabs, measure.grid_size())
}

// ---------------------------------------------------------------------------
// realization of a curve as a leaf
// ---------------------------------------------------------------------------

/// Result of realizing a Jordan curve as a leaf of a whole-plane chain.
#[derive(Clone, Debug)]
pub struct LeafRealization {
    /// The equipotential driving measure `ρ^γ` whose chain has the curve as
    /// a leaf.
    pub measure: DrivingMeasure,
    /// Measure energy `S(ρ^γ)`.
    pub measure_energy: f64,
    /// Loop energy `I^L(γ)` of the curve.
    pub loop_energy: f64,
    /// `log(f'(0)/h'(∞))`: interior conformal radius over exterior capacity,
    /// nonpositive for every Jordan curve, zero exactly for centered circles.
    pub log_conformal_ratio: f64,
    /// Time at which the chain reaches the curve: `−log f'(0)`.
    pub leaf_time: f64,
    /// Defect of the energy identity
    /// `|I^L − 16 S(ρ^γ) − 2 log(f'(0)/h'(∞))|`.
    pub residual: f64,
}

/// Realize a Jordan curve around the origin as a leaf of a whole-plane chain
/// driven by its equipotential measure, and evaluate the energy identity
/// `I^L(γ) = 16 S(ρ^γ) + 2 log(f'(0)/h'(∞))`.
///
/// The equipotential chain follows level lines of the exterior Green
/// function down to the curve and the interior equipotentials
/// `f(r · 𝔻)` afterwards.  The interior part satisfies the evolution with
/// the uniform density (zero energy), so all measure energy lives on the
/// exterior side, which is sampled by re-uniformizing the images `h(r S¹)`
/// of round circles under the exterior map across one window margin of
/// capacity.
pub fn realize_curve_as_leaf(
    curve: &PolylineCurve,
    opts: &RadialOptions,
) -> Result<LeafRealization> {
    if !curve.closed || curve.through_infinity {
        return Err(Error::domain("realization needs a bounded closed curve"));
    }
    if winding_number(&curve.points, c64(0.0, 0.0)) == 0 {
        return Err(Error::domain("the curve must wind around the origin"));
    }
    let smooth = SmoothLoop::fit_polyline(curve, (opts.map_nodes / 4).max(16))?;
    let pair = DiskMapsPair::build_with_center(&smooth, c64(0.0, 0.0), opts.map_nodes)?;
    let log_ratio = pair.grunsky_functional();
    let leaf_time = -pair.interior_radius().ln();

    let loop_report = loop_energy(curve, LoopMethod::Disk, &EnergyConfig::default())?;
    if loop_report.divergent {
        return Err(Error::degeneracy(
            "curve has divergent loop energy; not realizable with finite measure energy",
            None,
        ));
    }

    // exterior equipotential snapshots h(r S¹), from the largest down to the curve
    let kk = opts.modes.min(opts.map_nodes / 2);
    let n_eq = (opts.window_margin / opts.leaf_step).ceil() as usize;
    let mut times = Vec::with_capacity(n_eq + 1);
    let mut snaps = Vec::with_capacity(n_eq + 1);
    for i in (0..=n_eq).rev() {
        let r = (opts.window_margin * i as f64 / n_eq as f64).exp();
        let pts: Vec<Complex64> = (0..opts.map_nodes)
            .map(|j| {
                let th = 2.0 * PI * j as f64 / opts.map_nodes as f64;
                pair.eval_exterior(Complex64::from_polar(r, th))
            })
            .collect();
        let level = SmoothLoop::from_samples(&pts);
        let map = SzegoMap::build(&level, c64(0.0, 0.0), opts.map_nodes)?;
        let t = -map.conformal_radius().ln();
        if times.last().map_or(false, |&prev| t <= prev + 1e-9) {
            continue;
        }
        times.push(t);
        snaps.push(map.series[1..=kk].to_vec());
    }
    if times.len() < 4 {
        return Err(Error::degeneracy("equipotential chain collapsed", None));
    }
    let chain = RadialChain::from_snapshots(times, snaps, true, opts)?;
    let (e0, e1) = chain.time_range();
    let slabs = (((e1 - e0) / opts.leaf_step).round() as usize).max(8);
    let measure = herglotz_invert(&chain, slabs, opts.angular_grid)?;
    let s_rate = lk_energy(&measure)?;
    if s_rate.divergent {
        return Err(Error::no_convergence(
            "equipotential measure energy diverged",
            0,
            f64::INFINITY,
        ));
    }
    let residual = (loop_report.value - 16.0 * s_rate.value - 2.0 * log_ratio).abs();
    Ok(LeafRealization {
        measure,
        measure_energy: s_rate.value,
        loop_energy: loop_report.value,
        log_conformal_ratio: log_ratio,
        leaf_time,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::polyline_deviation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn opts() -> RadialOptions {
        RadialOptions::default()
    }

    fn grid_angles(m: usize) -> Vec<f64> {
        (0..m).map(|j| 2.0 * PI * j as f64 / m as f64).collect()
    }

    // ---- slit chains -----------------------------------------------------

    #[test]
    fn slit_chain_radius_and_slit_geometry() {
        let driver = RadialDriver::constant(0.0, 1.0, 200).unwrap();
        let chain = solve_radial(&driver, &opts()).unwrap();
        // conformal radius invariant: e^{-t} on the nose
        for &t in &[0.25, 1.0] {
            let rad = chain.conformal_radius(t).unwrap();
            assert!(
                (rad - (-t as f64).exp()).abs() < 1e-9,
                "radius {rad} vs {}",
                (-t as f64).exp()
            );
        }
        // the slit tip at time t sits at k^{-1}(e^{-t}/4) on the positive axis
        let tip = koebe_inv(c64(0.25 * (-1.0f64).exp(), 0.0)).re;
        let leaf = chain.leaf(1.0, 1024).unwrap();
        let closest = leaf
            .points
            .iter()
            .map(|p| p.norm())
            .fold(f64::INFINITY, f64::min);
        assert!(
            (closest - tip).abs() < 2e-2,
            "slit tip at {closest}, expected {tip}"
        );
        // away from the slit the leaf follows the unit circle
        for p in leaf.points.iter().filter(|p| p.re < 0.0) {
            assert!((p.norm() - 1.0).abs() < 5e-3, "leaf point {p} off the circle");
        }
    }

    #[test]
    fn slit_chain_rotation_covariance() {
        // f_{θ+α}(e^{iα} z) = e^{iα} f_θ(z) exactly, step by step
        let o = opts();
        let base = solve_radial(&RadialDriver::constant(0.0, 0.6, 120).unwrap(), &o).unwrap();
        let rot = solve_radial(&RadialDriver::constant(1.1, 0.6, 120).unwrap(), &o).unwrap();
        let alpha = Complex64::from_polar(1.0, 1.1);
        let mut worst = 0.0f64;
        for &t in &[0.21, 0.6] {
            for j in 0..64 {
                let z = Complex64::from_polar(0.97, 2.0 * PI * j as f64 / 64.0);
                let a = base.map_disk(t, z).unwrap();
                let b = rot.map_disk(t, z * alpha).unwrap();
                worst = worst.max((b - a * alpha).norm());
            }
        }
        assert!(worst < 1e-9, "rotation covariance broken by {worst}");
    }

    #[test]
    fn driver_rejects_large_jumps() {
        let err = RadialDriver::new(vec![0.0, 0.1], vec![0.0, 3.5]);
        assert!(err.is_err());
    }

    // ---- Kufarev chains ---------------------------------------------------

    #[test]
    fn kufarev_uniform_is_pure_scaling() {
        let measure = DrivingMeasure::uniform(0.0, 1.0, 256).unwrap();
        let chain = solve_kufarev(&measure, &opts()).unwrap();
        let mut worst = 0.0f64;
        for &t in &[0.3, 1.0] {
            for j in 0..64 {
                let z = Complex64::from_polar(0.99, 2.0 * PI * j as f64 / 64.0);
                let f = chain.map_disk(t, z).unwrap();
                worst = worst.max((f - (-t).exp() * z).norm());
            }
        }
        assert!(worst < 1e-10, "uniform chain deviates from e^-t z by {worst}");
        // whole-plane evaluation before the window
        let z = c64(0.4, 0.1);
        let f = chain.map_disk(-1.0, z).unwrap();
        assert!((f - z * 1.0f64.exp()).norm() < 1e-12);
    }

    #[test]
    fn kufarev_radius_invariant_for_nonuniform_measure() {
        let measure = DrivingMeasure::cosine(0.0, 1.0, 256, 1.0).unwrap();
        let chain = solve_kufarev(&measure, &opts()).unwrap();
        for &t in &[0.2, 0.7, 1.0] {
            let rad = chain.conformal_radius(t).unwrap();
            assert!(
                (rad - (-t).exp()).abs() < 1e-8,
                "radius invariant broken: {rad} vs {}",
                (-t).exp()
            );
        }
    }

    #[test]
    fn kufarev_narrow_bump_approximates_slit() {
        // von Mises density concentrated at θ = 0, width ~ 1/sqrt(kappa)
        let m = 256;
        let kappa = 44.0;
        let raw: Vec<f64> = grid_angles(m)
            .iter()
            .map(|&th| (kappa * th.cos()).exp())
            .collect();
        let mass: f64 = raw.iter().sum::<f64>() * 2.0 * PI / m as f64;
        let density: Vec<f64> = raw.iter().map(|v| v / mass).collect();
        let measure = DrivingMeasure::new(
            vec![MeasureSlab::new(0.0, 0.3, density).unwrap()],
            true,
        )
        .unwrap();
        let bump_chain = solve_kufarev(&measure, &opts()).unwrap();
        let slit_chain =
            solve_radial(&RadialDriver::constant(0.0, 0.3, 60).unwrap(), &opts()).unwrap();
        let a = bump_chain.leaf(0.3, 256).unwrap();
        let b = slit_chain.leaf(0.3, 256).unwrap();
        let dev = polyline_deviation(&a.points, &b.points);
        assert!(dev < 0.12, "bump chain deviates from slit chain by {dev}");
    }

    #[test]
    fn chain_evaluation_is_deterministic() {
        let measure = DrivingMeasure::cosine(0.0, 0.5, 256, 0.7).unwrap();
        let a = solve_kufarev(&measure, &opts()).unwrap();
        let b = solve_kufarev(&measure, &opts()).unwrap();
        let la = a.leaf(0.5, 128).unwrap();
        let lb = b.leaf(0.5, 128).unwrap();
        for (p, q) in la.points.iter().zip(&lb.points) {
            assert_eq!(p.re.to_bits(), q.re.to_bits());
            assert_eq!(p.im.to_bits(), q.im.to_bits());
        }
    }

    // ---- rate and energy ---------------------------------------------------

    #[test]
    fn dv_rate_uniform_vanishes() {
        let density = vec![1.0 / (2.0 * PI); 256];
        let r = dv_rate(&density).unwrap();
        assert!(!r.divergent);
        assert!(r.value.abs() < 1e-14);
    }

    #[test]
    fn dv_rate_cosine_family_closed_form() {
        // rho_eps = (1 + eps cos)/2pi has rate (1 - sqrt(1 - eps^2))/8
        for &(eps, m) in &[(1.0, 256usize), (1.0, 64), (0.2, 256), (0.4, 256)] {
            let density: Vec<f64> = grid_angles(m)
                .iter()
                .map(|&th| (1.0 + eps * th.cos()) / (2.0 * PI))
                .collect();
            let r = dv_rate(&density).unwrap();
            let exact = (1.0 - (1.0 - eps * eps).sqrt()) / 8.0;
            assert!(!r.divergent);
            assert!(
                (r.value - exact).abs() < 1e-3,
                "eps {eps} m {m}: {} vs {exact}",
                r.value
            );
            // the quadrature is in fact exact for this family
            assert!((r.value - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn dv_rate_rotation_invariant() {
        let m = 256;
        let shift = 37;
        let density: Vec<f64> = (0..m)
            .map(|j| {
                let th = 2.0 * PI * ((j + shift) % m) as f64 / m as f64;
                (1.0 + th.cos()) / (2.0 * PI)
            })
            .collect();
        let r = dv_rate(&density).unwrap();
        assert!((r.value - 0.125).abs() < 1e-12);
    }

    #[test]
    fn dv_rate_flags_near_point_mass() {
        let m = 256;
        let sigma = 0.01f64;
        let raw: Vec<f64> = grid_angles(m)
            .iter()
            .map(|&th| {
                let d = (th - PI).abs();
                (-0.5 * (d / sigma).powi(2)).exp()
            })
            .collect();
        let mass: f64 = raw.iter().sum::<f64>() * 2.0 * PI / m as f64;
        let density: Vec<f64> = raw.iter().map(|v| v / mass).collect();
        let r = dv_rate(&density).unwrap();
        assert!(r.divergent, "near-point mass not flagged, rate {}", r.value);
        assert!(r.value.is_infinite());
    }

    #[test]
    fn dv_rate_is_convex() {
        let m = 256;
        let angles = grid_angles(m);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let mk = |rng: &mut ChaCha8Rng| -> Vec<f64> {
                let a: f64 = rng.gen_range(-1.5..1.5);
                let b: f64 = rng.gen_range(-1.5..1.5);
                let p1: f64 = rng.gen_range(0.0..2.0 * PI);
                let p2: f64 = rng.gen_range(0.0..2.0 * PI);
                let raw: Vec<f64> = angles
                    .iter()
                    .map(|&th| (a * (th - p1).cos() + b * (2.0 * th - p2).cos()).exp())
                    .collect();
                let mass: f64 = raw.iter().sum::<f64>() * 2.0 * PI / m as f64;
                raw.iter().map(|v| v / mass).collect()
            };
            let rho1 = mk(&mut rng);
            let rho2 = mk(&mut rng);
            let mid: Vec<f64> = rho1
                .iter()
                .zip(&rho2)
                .map(|(a, b)| 0.5 * (a + b))
                .collect();
            let v1 = dv_rate(&rho1).unwrap().value;
            let v2 = dv_rate(&rho2).unwrap().value;
            let vm = dv_rate(&mid).unwrap().value;
            assert!(
                vm <= 0.5 * (v1 + v2) + 1e-9,
                "convexity violated: {vm} > ({v1} + {v2})/2"
            );
        }
    }

    #[test]
    fn lk_energy_is_additive_over_slabs() {
        let m = 256;
        let cosine: Vec<f64> = grid_angles(m)
            .iter()
            .map(|&th| (1.0 + th.cos()) / (2.0 * PI))
            .collect();
        let one = DrivingMeasure::new(
            vec![MeasureSlab::new(0.0, 1.0, cosine.clone()).unwrap()],
            true,
        )
        .unwrap();
        let split = DrivingMeasure::new(
            vec![
                MeasureSlab::new(0.0, 0.3, cosine.clone()).unwrap(),
                MeasureSlab::new(0.3, 1.0, cosine).unwrap(),
            ],
            true,
        )
        .unwrap();
        let e1 = lk_energy(&one).unwrap().value;
        let e2 = lk_energy(&split).unwrap().value;
        assert!((e1 - 0.125).abs() < 1e-12);
        assert!((e1 - e2).abs() < 1e-12);
        let uniform = DrivingMeasure::uniform(0.0, 3.0, m).unwrap();
        assert!(lk_energy(&uniform).unwrap().value.abs() < 1e-14);
    }

    #[test]
    fn measure_slab_validation() {
        // negative mass beyond tolerance is rejected
        let mut density = vec![1.0 / (2.0 * PI); 64];
        density[3] = -0.1;
        assert!(MeasureSlab::new(0.0, 1.0, density).is_err());
        // mass far from one is rejected
        let density = vec![1.0; 64];
        assert!(MeasureSlab::new(0.0, 1.0, density).is_err());
        // non-contiguous slabs are rejected
        let a = MeasureSlab::new(0.0, 0.5, vec![1.0 / (2.0 * PI); 64]).unwrap();
        let b = MeasureSlab::new(0.7, 1.0, vec![1.0 / (2.0 * PI); 64]).unwrap();
        assert!(DrivingMeasure::new(vec![a, b], true).is_err());
    }

    // ---- inversion ---------------------------------------------------------

    #[test]
    fn herglotz_roundtrip_uniform() {
        let measure = DrivingMeasure::uniform(0.0, 1.0, 256).unwrap();
        let chain = solve_kufarev(&measure, &opts()).unwrap();
        let density = herglotz_density(&chain, 0.5, 256).unwrap();
        for v in &density {
            assert!((v - 1.0 / (2.0 * PI)).abs() < 1e-10);
        }
        let rt = herglotz_invert(&chain, 4, 256).unwrap();
        assert!(lk_energy(&rt).unwrap().value < 1e-12);
    }

    #[test]
    fn herglotz_roundtrip_cosine() {
        let m = 256;
        let measure = DrivingMeasure::cosine(0.0, 1.0, m, 1.0).unwrap();
        let chain = solve_kufarev(&measure, &opts()).unwrap();
        let recovered = herglotz_invert(&chain, 10, m).unwrap();
        let reference = &measure.slabs()[0].density;
        for slab in recovered.slabs() {
            let l1: f64 = slab
                .density
                .iter()
                .zip(reference)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
                * 2.0
                * PI
                / m as f64;
            assert!(l1 < 1e-2, "slab [{}, {}] L1 error {l1}", slab.t0, slab.t1);
        }
    }

    // ---- leaves, nesting, winding -------------------------------------------

    #[test]
    fn leaves_are_nested_with_finite_energy() {
        // ε < 1 keeps the density strictly positive, so every boundary point
        // moves and consecutive leaves are strictly nested
        let measure = DrivingMeasure::cosine(0.0, 1.0, 256, 0.8).unwrap();
        let chain = solve_kufarev(&measure, &opts()).unwrap();
        let times: Vec<f64> = (0..6).map(|i| 0.05 + 0.18 * i as f64).collect();
        let fol = foliation(&chain, &times, 256).unwrap();
        assert!(leaves_nested(&fol));
        let bound = 16.0 * lk_energy(&measure).unwrap().value;
        for (leaf, &t) in fol.leaves.iter().zip(&times) {
            let report = loop_energy(leaf, LoopMethod::Disk, &EnergyConfig::default()).unwrap();
            assert!(!report.divergent);
            assert!(
                report.value <= bound + 0.15,
                "leaf at t = {t} has energy {} above the measure bound {bound}",
                report.value
            );
        }
    }

    #[test]
    fn winding_trace_rotation_equivariance() {
        let m = 256;
        let shift_bins = 64; // rotation by pi/2 on a 256 grid
        let base = DrivingMeasure::cosine(0.0, 0.6, m, 0.8).unwrap();
        let rotated_density: Vec<f64> = (0..m)
            .map(|j| base.slabs()[0].density[(j + m - shift_bins) % m])
            .collect();
        let rotated = DrivingMeasure::new(
            vec![MeasureSlab::new(0.0, 0.6, rotated_density).unwrap()],
            true,
        )
        .unwrap();
        let ca = solve_kufarev(&base, &opts()).unwrap();
        let cb = solve_kufarev(&rotated, &opts()).unwrap();
        let ua = ca.winding_trace(0.6, m).unwrap();
        let ub = cb.winding_trace(0.6, m).unwrap();
        for j in 0..m {
            let diff = (ub[(j + shift_bins) % m] - ua[j]).abs();
            assert!(diff < 1e-8, "trace not equivariant at {j}: {diff}");
        }
    }

    #[test]
    fn winding_field_of_uniform_chain_vanishes() {
        let measure = DrivingMeasure::uniform(0.0, 1.0, 256).unwrap();
        let chain = solve_kufarev(&measure, &opts()).unwrap();
        let times: Vec<f64> = vec![0.1, 0.4, 0.7, 1.0];
        let fol = foliation(&chain, &times, 256).unwrap();
        let wf = winding_field(&chain, &fol, 41).unwrap();
        for (idx, &v) in wf.field.values.iter().enumerate() {
            if wf.field.mask[idx] {
                assert!(v.abs() < 1e-8, "winding {v} at a uniform chain");
            }
        }
        for trace in &wf.traces {
            for v in trace {
                assert!(v.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn winding_field_agrees_with_leaf_traces() {
        let measure = DrivingMeasure::cosine(0.0, 0.8, 256, 0.8).unwrap();
        let o = opts();
        let chain = solve_kufarev(&measure, &o).unwrap();
        let times: Vec<f64> = (0..9).map(|i| 0.05 + 0.09 * i as f64).collect();
        let fol = foliation(&chain, &times, 256).unwrap();
        let wf = winding_field(&chain, &fol, 61).unwrap();
        // sample the field at points of a mid-foliation leaf pushed slightly
        // inward, where the located leaf time is unambiguous
        let t_mid = 0.41;
        let trace = chain.winding_trace(t_mid, 256).unwrap();
        let mut checked = 0;
        for j in (0..256).step_by(16) {
            let th = 2.0 * PI * j as f64 / 256.0;
            let z = chain
                .map_disk(t_mid, Complex64::from_polar(0.995, th))
                .unwrap();
            if let Some(v) = winding_at_point(&chain, &fol, z, chain.time_range().1) {
                // compare against the boundary trace at the same angle
                assert!(
                    (v - trace[j]).abs() < 2e-2,
                    "field {v} vs trace {} at angle {th}",
                    trace[j]
                );
                checked += 1;
            }
        }
        assert!(checked >= 12, "too few field samples resolved: {checked}");
    }

    // ---- duality -------------------------------------------------------------

    #[test]
    fn duality_for_cosine_slab() {
        let measure = DrivingMeasure::cosine(0.0, 1.0, 256, 1.0).unwrap();
        let report = duality_gap(&measure, &opts()).unwrap();
        assert!((report.measure_energy - 0.125).abs() < 1e-10);
        assert!(
            report.gap <= 0.1 * 16.0 * report.measure_energy,
            "duality gap {} too large (field {}, 16S = {})",
            report.gap,
            report.field_energy,
            16.0 * report.measure_energy
        );
    }

    #[test]
    fn duality_scales_with_amplitude() {
        for &eps in &[0.2, 0.4] {
            let measure = DrivingMeasure::cosine(0.0, 1.0, 256, eps).unwrap();
            let report = duality_gap(&measure, &opts()).unwrap();
            let exact = (1.0 - (1.0 - eps * eps).sqrt()) / 8.0;
            assert!((report.measure_energy - exact).abs() < 1e-10);
            assert!(
                report.gap <= 0.1 * 16.0 * exact,
                "eps {eps}: field {} vs 16S {}",
                report.field_energy,
                16.0 * exact
            );
        }
    }

    // ---- reversal --------------------------------------------------------------

    #[test]
    fn reversal_of_uniform_stays_uniform() {
        let mut o = opts();
        o.leaf_step = 0.1;
        o.window_margin = 1.0;
        o.map_nodes = 128;
        let measure = DrivingMeasure::uniform(0.0, 0.7, 256).unwrap();
        let rev = reversed_measure(&measure, &o).unwrap();
        let energy = lk_energy(&rev).unwrap().value;
        assert!(energy < 1e-4, "reversed uniform measure has energy {energy}");
    }

    #[test]
    fn reversal_preserves_cosine_energy() {
        let measure = DrivingMeasure::cosine(0.0, 1.0, 256, 1.0).unwrap();
        let rev = reversed_measure(&measure, &opts()).unwrap();
        let s = lk_energy(&measure).unwrap().value;
        let s_rev = lk_energy(&rev).unwrap().value;
        assert!(
            (s_rev - s).abs() <= 0.1 * s,
            "reversal changed the energy: {s} -> {s_rev}"
        );
    }

    // ---- realization -------------------------------------------------------------

    #[test]
    fn realize_centered_circle_is_trivial() {
        let circle = SmoothLoop::circle(c64(0.0, 0.0), 0.8).to_polyline(256);
        let r = realize_curve_as_leaf(&circle, &opts()).unwrap();
        assert!(r.loop_energy.abs() < 1e-6);
        assert!(r.log_conformal_ratio.abs() < 1e-8);
        assert!(r.measure_energy.abs() < 1e-4);
        assert!(r.residual < 1e-3);
        assert!((r.leaf_time - (-0.8f64.ln())).abs() < 1e-8);
    }

    #[test]
    fn realize_off_center_circle_matches_moebius_oracle() {
        // disk of radius 1 centered at 0.3: interior radius 1 - 0.3^2 = 0.91,
        // exterior capacity 1, zero loop energy, so 16 S = -2 log 0.91 exactly
        let circle = SmoothLoop::circle(c64(0.3, 0.0), 1.0).to_polyline(256);
        let r = realize_curve_as_leaf(&circle, &opts()).unwrap();
        assert!(r.loop_energy.abs() < 1e-5, "loop energy {}", r.loop_energy);
        let exact_ratio = 0.91f64.ln();
        assert!(
            (r.log_conformal_ratio - exact_ratio).abs() < 1e-6,
            "log ratio {} vs {exact_ratio}",
            r.log_conformal_ratio
        );
        let expected_16s = -2.0 * exact_ratio;
        assert!(
            (16.0 * r.measure_energy - expected_16s).abs() <= 0.1 * expected_16s,
            "16S = {} vs {expected_16s}",
            16.0 * r.measure_energy
        );
        assert!(r.residual <= 0.1 * expected_16s.max(0.05));
    }

    #[test]
    fn dbg_ellipse_deviation_pattern() {
        let ellipse = SmoothLoop::ellipse(2.0, 1.0).to_polyline(512);
        let r = realize_curve_as_leaf(&ellipse, &opts()).unwrap();
        let chain = solve_kufarev(&r.measure, &opts()).unwrap();
        let leaf = chain.leaf(r.leaf_time, 256).unwrap();
        let (e0, e1) = chain.time_range();
        eprintln!("leaf_time {} window [{e0}, {e1}]", r.leaf_time);
        eprintln!("16S = {}, I_L = {}, 2logratio = {}, residual = {}",
            16.0 * r.measure_energy, r.loop_energy, 2.0 * r.log_conformal_ratio, r.residual);
        // bounding box of the leaf vs the ellipse's (±2, ±1)
        let (mut xmax, mut ymax) = (0.0f64, 0.0f64);
        for p in &leaf.points { xmax = xmax.max(p.re.abs()); ymax = ymax.max(p.im.abs()); }
        eprintln!("leaf half-extents: x {xmax} (want 2), y {ymax} (want 1)");
        // worst deviation point
        let mut worst = (0.0, 0usize);
        for (j, p) in leaf.points.iter().enumerate() {
            let d = ellipse.points.iter().map(|q| (p - q).norm()).fold(f64::MAX, f64::min);
            if d > worst.0 { worst = (d, j); }
        }
        let wp = leaf.points[worst.1];
        eprintln!("worst point-to-point dev {} at leaf index {} = {wp}", worst.0, worst.1);
        // conformal radius of the solved chain at leaf_time
        eprintln!("chain radius at leaf_time: {} want {}", chain.conformal_radius(r.leaf_time).unwrap(), (-r.leaf_time).exp());
        // density sanity at final slab
        let last = r.measure.slabs().last().unwrap();
        let mn = last.density.iter().cloned().fold(f64::MAX, f64::min);
        let mx = last.density.iter().cloned().fold(0.0f64, f64::max);
        eprintln!("final slab density range [{mn}, {mx}] t in [{}, {}]", last.t0, last.t1);
        eprintln!("polyline_deviation = {}", polyline_deviation(&leaf.points, &ellipse.points));
        // leaf point spacing stats
        let n = leaf.points.len();
        let mut gaps: Vec<f64> = (0..n).map(|j| (leaf.points[(j+1)%n] - leaf.points[j]).norm()).collect();
        gaps.sort_by(|a,b| a.partial_cmp(b).unwrap());
        eprintln!("leaf gaps: min {} median {} max {}", gaps[0], gaps[n/2], gaps[n-1]);
        // max distance from ellipse points to nearest LEAF point
        let mut worst2 = (0.0, 0usize);
        for (j, q) in ellipse.points.iter().enumerate() {
            let d = leaf.points.iter().map(|p| (p - q).norm()).fold(f64::MAX, f64::min);
            if d > worst2.0 { worst2 = (d, j); }
        }
        eprintln!("worst ellipse->leaf-point dev {} at ellipse index {} = {}", worst2.0, worst2.1, ellipse.points[worst2.1]);
        // leaf points near the left tip
        let mut near: Vec<(f64, usize)> = leaf.points.iter().enumerate()
            .map(|(j, p)| ((p - c64(-2.0, 0.0)).norm(), j)).collect();
        near.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for &(d, j) in near.iter().take(6) {
            eprintln!("  leaf[{j}] = {} (dist to tip {d})", leaf.points[j]);
        }
    }

    #[test]
    fn realize_ellipse_identity_and_grunsky_sign() {
        let ellipse = SmoothLoop::ellipse(2.0, 1.0).to_polyline(512);
        let mut o = opts();
        o.window_margin = 3.5;
        let r = realize_curve_as_leaf(&ellipse, &o).unwrap();
        assert!(r.loop_energy > 0.05, "ellipse loop energy {}", r.loop_energy);
        assert!(
            r.residual <= 0.1 * r.loop_energy,
            "identity residual {} vs loop energy {}",
            r.residual,
            r.loop_energy
        );
        // Grunsky inequality: interior radius never exceeds exterior capacity
        assert!(r.log_conformal_ratio <= 1e-10);
        // the realized chain reaches the curve as a leaf: reconstruct and compare
        let chain = solve_kufarev(&r.measure, &o).unwrap();
        let leaf = chain.leaf(r.leaf_time, 256).unwrap();
        let dev = polyline_deviation(&leaf.points, &ellipse.points);
        assert!(dev < 0.08, "realized leaf deviates from the curve by {dev}");
    }

    #[test]
    fn grunsky_sign_for_random_curves() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let mut coeffs = vec![c64(0.0, 0.0); 16];
            coeffs[1] = c64(1.0, 0.0);
            for k in 2..5 {
                let re: f64 = rng.gen_range(-0.08..0.08);
                let im: f64 = rng.gen_range(-0.08..0.08);
                coeffs[k] = c64(re, im);
                let re: f64 = rng.gen_range(-0.08..0.08);
                let im: f64 = rng.gen_range(-0.08..0.08);
                coeffs[16 - k] = c64(re, im);
            }
            let curve = SmoothLoop { coeffs };
            let pair =
                DiskMapsPair::build_with_center(&curve, c64(0.0, 0.0), 256).unwrap();
            assert!(pair.grunsky_functional() <= 1e-10);
        }
    }
}
