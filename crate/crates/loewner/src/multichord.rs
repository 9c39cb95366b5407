//! Geodesic multichords and their rational-function and potential calculus.
//!
//! A *multichord* is a family of `n` pairwise-disjoint simple chords of the
//! upper half-plane joining `2n` marked boundary points according to a
//! non-crossing link pattern. The module computes:
//!
//! - the **geodesic multichord**: the unique configuration in which every
//!   chord is the hyperbolic geodesic of its complementary component
//!   ([`geodesic_multichord`]), found by cyclic re-geodesic sweeps;
//! - the **real rational function** of degree `n + 1` whose critical points
//!   are exactly the marked points and whose real locus contains the
//!   geodesic multichord ([`rational_from_multichord`]); its finite poles
//!   solve the stationarity system
//!   `Σ_k 1/(ζ_l − x_k) = 2 Σ_{m≠l} 1/(ζ_l − ζ_m)`;
//! - the **minimal boundary potential** `𝒰(x₁,…,x_{2n})` up to an additive
//!   constant, through the product formula
//!   `exp(−𝒰) ∝ ∏_{j<k}(x_j−x_k)² · ∏_{l<m}(ζ_l−ζ_m)⁸ · ∏_{k,l}(x_k−ζ_l)⁻⁴`,
//!   with analytic and finite-difference gradients
//!   ([`minimal_potential_gradient`]);
//! - the **marginal driving ODE** `dW/dt = −∂_{a_j}𝒰`, `dVⁱ/dt = 2/(Vⁱ−W)`
//!   satisfied by the driving function of a single chord of the geodesic
//!   configuration ([`marginal_driving_ode`]);
//! - the **null-state identity**
//!   `½(∂_j𝒰)² − Σ_{i≠j} (2/(x_i−x_j)) ∂_i𝒰 = Σ_{i≠j} 6/(x_i−x_j)²`
//!   as a residual ([`null_state_residual`]);
//! - the **multichord energy** (deviation of a configuration from the
//!   geodesic one, including loop-mass corrections) and the **cascade
//!   decomposition** of the potential ([`multichord_energy`],
//!   [`cascade_check`]).

use crate::chordal::{extract_driver, ChordalConfig, ChordalDriver, ChordalFlow};
use crate::energy::{chord_energy, EnergyConfig, MarkedDomain};
use crate::error::{Error, Result};
use crate::geometry::{
    c64, dedup_for_trace, polyline_deviation, segments_intersect, semicircle, MobiusTransform,
    PolylineCurve, CLIP_RADIUS,
};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

// ---------------------------------------------------------------------------
// Catalan numbers and link patterns
// ---------------------------------------------------------------------------

/// `n`-th Catalan number, exact. Errors on `u128` overflow (first at n = 66).
pub fn catalan(n: usize) -> Result<u128> {
    let mut c: u128 = 1;
    for k in 0..n {
        // C_{k+1} = C_k · 2(2k+1)/(k+2), division exact.
        let num = c
            .checked_mul(2 * (2 * k as u128 + 1))
            .ok_or_else(|| Error::invalid(format!("catalan({n}) overflows u128")))?;
        c = num / (k as u128 + 2);
    }
    Ok(c)
}

/// A non-crossing perfect matching of `{1, …, 2n}`.
///
/// Pairs are stored as `(a, b)` with `a < b`, sorted by `a`. Two pairs are
/// either nested or separated — never interleaved.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[usize; 2]>", into = "Vec<[usize; 2]>")]
pub struct LinkPattern {
    n: usize,
    pairs: Vec<(usize, usize)>,
}

impl LinkPattern {
    /// Validates and normalizes a set of pairs into a link pattern.
    pub fn new(pairs: Vec<(usize, usize)>) -> Result<Self> {
        let n = pairs.len();
        if n == 0 {
            return Err(Error::invalid("link pattern needs at least one pair"));
        }
        let mut pairs: Vec<(usize, usize)> = pairs
            .into_iter()
            .map(|(a, b)| if a <= b { (a, b) } else { (b, a) })
            .collect();
        pairs.sort_unstable();
        let mut seen = vec![false; 2 * n + 1];
        for &(a, b) in &pairs {
            if a == 0 || b > 2 * n || a == b {
                return Err(Error::invalid(format!(
                    "pair ({a}, {b}) is out of range for 2n = {}",
                    2 * n
                )));
            }
            for p in [a, b] {
                if seen[p] {
                    return Err(Error::invalid(format!(
                        "point {p} appears in more than one pair"
                    )));
                }
                seen[p] = true;
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = pairs[i];
                let (c, d) = pairs[j];
                // sorted by first entry, so a < c; crossing means a < c < b < d
                if c < b && b < d {
                    return Err(Error::invalid(format!(
                        "links ({a}, {b}) and ({c}, {d}) cross"
                    )));
                }
            }
        }
        Ok(LinkPattern { n, pairs })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Pairs `(a_j, b_j)`, 1-based, `a_j < b_j`, sorted by `a_j`.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }
}

impl TryFrom<Vec<[usize; 2]>> for LinkPattern {
    type Error = Error;
    fn try_from(v: Vec<[usize; 2]>) -> Result<Self> {
        LinkPattern::new(v.into_iter().map(|[a, b]| (a, b)).collect())
    }
}

impl From<LinkPattern> for Vec<[usize; 2]> {
    fn from(p: LinkPattern) -> Self {
        p.pairs.iter().map(|&(a, b)| [a, b]).collect()
    }
}

/// All non-crossing link patterns on `2n` points (C_n of them), in a
/// deterministic order. Guarded to `n ≤ 8` (C_8 = 1430).
pub fn enumerate_link_patterns(n: usize) -> Result<Vec<LinkPattern>> {
    if n == 0 {
        return Err(Error::invalid("link pattern enumeration needs n ≥ 1"));
    }
    if n > 8 {
        return Err(Error::invalid(
            "link pattern enumeration is guarded to n ≤ 8",
        ));
    }
    fn rec(points: &[usize]) -> Vec<Vec<(usize, usize)>> {
        if points.is_empty() {
            return vec![Vec::new()];
        }
        let mut out = Vec::new();
        let first = points[0];
        // the partner must leave an even count on both sides
        for idx in (1..points.len()).step_by(2) {
            let partner = points[idx];
            let inside = rec(&points[1..idx]);
            let outside = rec(&points[idx + 1..]);
            for ins in &inside {
                for outs in &outside {
                    let mut pat = Vec::with_capacity(points.len() / 2);
                    pat.push((first, partner));
                    pat.extend_from_slice(ins);
                    pat.extend_from_slice(outs);
                    out.push(pat);
                }
            }
        }
        out
    }
    let points: Vec<usize> = (1..=2 * n).collect();
    rec(&points)
        .into_iter()
        .map(LinkPattern::new)
        .collect::<Result<Vec<_>>>()
}

// ---------------------------------------------------------------------------
// Configurations and multichords
// ---------------------------------------------------------------------------

/// Marked boundary points plus a link pattern: the boundary data of a
/// multichord in the upper half-plane.
///
/// Serialized as `{"points": [...], "pattern": [[a, b], ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConfig", into = "RawConfig")]
pub struct MultichordConfig {
    points: Vec<f64>,
    pattern: LinkPattern,
}

#[derive(Clone, Serialize, Deserialize)]
struct RawConfig {
    points: Vec<f64>,
    pattern: Vec<[usize; 2]>,
}

impl TryFrom<RawConfig> for MultichordConfig {
    type Error = Error;
    fn try_from(raw: RawConfig) -> Result<Self> {
        MultichordConfig::new(raw.points, LinkPattern::try_from(raw.pattern)?)
    }
}

impl From<MultichordConfig> for RawConfig {
    fn from(c: MultichordConfig) -> Self {
        RawConfig {
            points: c.points.clone(),
            pattern: c.pattern.into(),
        }
    }
}

impl MultichordConfig {
    pub fn new(points: Vec<f64>, pattern: LinkPattern) -> Result<Self> {
        if points.len() != 2 * pattern.n() {
            return Err(Error::invalid(format!(
                "{} marked points do not match a pattern on {} points",
                points.len(),
                2 * pattern.n()
            )));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(
                "marked points must be finite (pre-rotate a configuration through ∞)",
            ));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("marked points must be strictly increasing"));
        }
        Ok(MultichordConfig { points, pattern })
    }

    pub fn n(&self) -> usize {
        self.pattern.n()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn pattern(&self) -> &LinkPattern {
        &self.pattern
    }

    /// Endpoints `(x_{a_j}, x_{b_j})` of link `j` (0-based link index).
    pub fn link_endpoints(&self, j: usize) -> (f64, f64) {
        let (a, b) = self.pattern.pairs()[j];
        (self.points[a - 1], self.points[b - 1])
    }

    /// Reference length used to scale tolerances.
    pub fn frame(&self) -> f64 {
        (self.points[self.points.len() - 1] - self.points[0]).max(f64::MIN_POSITIVE)
    }
}

/// A realized multichord: one open curve per link, `curves[j]` running from
/// `x_{a_j}` to `x_{b_j}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Multichord {
    pub curves: Vec<PolylineCurve>,
    pub config: MultichordConfig,
}

/// Options for the geodesic solver and the marginal ODE.
#[derive(Clone, Debug)]
pub struct MultichordOptions {
    /// Sample count per chord.
    pub resolution: usize,
    /// Convergence threshold for the per-sweep Hausdorff move, relative to
    /// the configuration frame.
    pub tol: f64,
    /// Sweep cap; exceeding it is reported as non-convergence.
    pub max_sweeps: usize,
    /// Time step of the marginal driving ODE.
    pub ode_step: f64,
    pub chordal: ChordalConfig,
}

impl Default for MultichordOptions {
    fn default() -> Self {
        MultichordOptions {
            resolution: 256,
            tol: 1e-4,
            max_sweeps: 200,
            ode_step: 1e-3,
            chordal: ChordalConfig::default(),
        }
    }
}

// ---------------------------------------------------------------------------
// Conformal chain: mapping out chords one at a time
// ---------------------------------------------------------------------------

/// ℍ-automorphism sending `a ↦ 0`, `b ↦ ∞` (either order on the line).
fn mobius_zero_inf(a: f64, b: f64) -> MobiusTransform {
    if a < b {
        // (z − a)/(b − z), determinant b − a > 0
        MobiusTransform {
            a: c64(1.0, 0.0),
            b: c64(-a, 0.0),
            c: c64(-1.0, 0.0),
            d: c64(b, 0.0),
        }
    } else {
        // (z − a)/(z − b), determinant a − b > 0
        MobiusTransform {
            a: c64(1.0, 0.0),
            b: c64(-a, 0.0),
            c: c64(1.0, 0.0),
            d: c64(-b, 0.0),
        }
    }
}

struct ChainStep {
    pre: MobiusTransform,
    inv: MobiusTransform,
    flow: ChordalFlow,
}

impl ChainStep {
    fn fwd(&self, z: Complex64) -> Result<Complex64> {
        self.flow.map_out(self.pre.apply(z))
    }

    fn bwd(&self, w: Complex64) -> Complex64 {
        self.inv.apply(self.flow.map_in(w))
    }
}

/// Composition of chord map-outs; maps the complementary component of a
/// family of chords onto ℍ.
struct Chain {
    steps: Vec<ChainStep>,
}

impl Chain {
    fn fwd(&self, z: Complex64) -> Result<Complex64> {
        let mut z = z;
        for s in &self.steps {
            z = s.fwd(z)?;
        }
        Ok(z)
    }

    fn bwd(&self, w: Complex64) -> Complex64 {
        let mut w = w;
        for s in self.steps.iter().rev() {
            w = s.bwd(w);
        }
        w
    }

    /// Forward image of a boundary point, kept on the line.
    fn fwd_real(&self, x: f64) -> Result<f64> {
        Ok(self.fwd(c64(x, 0.0))?.re)
    }

    /// |φ′| at a boundary point, by central differences.
    fn fwd_real_derivative(&self, x: f64, h: f64) -> Result<f64> {
        let fp = self.fwd_real(x + h)?;
        let fm = self.fwd_real(x - h)?;
        Ok(((fp - fm) / (2.0 * h)).abs())
    }
}

/// Maps out the given chords in order. Each entry is `(points, a, b)`: the
/// chord polyline and its real endpoints. Sending an endpoint to ∞ first
/// turns the chord into a boundary-to-∞ slit, so the map-out swallows no
/// enclosed pocket; the slit is clipped at `CLIP_RADIUS`, which perturbs the
/// map near the origin only at relative order `(scale/CLIP_RADIUS)²`.
fn map_out_chords(chords: &[(Vec<Complex64>, f64, f64)], cfg: &ChordalConfig) -> Result<Chain> {
    let mut images: Vec<Vec<Complex64>> = chords.iter().map(|(p, _, _)| p.clone()).collect();
    let mut ends: Vec<(f64, f64)> = chords.iter().map(|&(_, a, b)| (a, b)).collect();
    let mut steps: Vec<ChainStep> = Vec::with_capacity(chords.len());
    for i in 0..chords.len() {
        let (ea, eb) = ends[i];
        if !(ea.is_finite() && eb.is_finite()) || (ea - eb).abs() < 1e-13 * (1.0 + ea.abs()) {
            return Err(Error::degeneracy(
                "chord endpoints collided while building the conformal chain",
                None,
            ));
        }
        let pre = mobius_zero_inf(ea, eb);
        let mut pts: Vec<Complex64> = images[i]
            .iter()
            .map(|&z| pre.apply(z))
            .filter(|w| w.is_finite() && w.norm() < 0.99 * CLIP_RADIUS)
            .collect();
        if pts.first().is_none_or(|z| z.norm() > 1e-9) {
            pts.insert(0, c64(0.0, 0.0));
        } else {
            pts[0] = c64(0.0, 0.0);
        }
        let pts = dedup_for_trace(pts);
        if pts.len() < 4 {
            return Err(Error::degeneracy(
                "chord image degenerated while building the conformal chain",
                None,
            ));
        }
        let ex = extract_driver(&PolylineCurve::open(pts)?, cfg)?;
        let step = ChainStep {
            inv: pre.inverse(),
            pre,
            flow: ex.flow,
        };
        for k in i + 1..chords.len() {
            for z in images[k].iter_mut() {
                *z = step.fwd(*z)?;
            }
            let (a, b) = ends[k];
            ends[k] = (step.fwd(c64(a, 0.0))?.re, step.fwd(c64(b, 0.0))?.re);
        }
        steps.push(step);
    }
    Ok(Chain { steps })
}

// ---------------------------------------------------------------------------
// Geodesic multichord
// ---------------------------------------------------------------------------

/// Computes the geodesic multichord of a configuration by cyclic sweeps:
/// each chord in turn is replaced by the hyperbolic geodesic of the
/// complementary component of the remaining chords, until the largest
/// per-chord Hausdorff move in a sweep drops below `tol` (relative to the
/// configuration frame). Non-convergence within `max_sweeps` is an error.
pub fn geodesic_multichord(
    config: &MultichordConfig,
    opts: &MultichordOptions,
) -> Result<Multichord> {
    let n = config.n();
    let m = opts.resolution.max(16);
    let mut curves: Vec<PolylineCurve> = (0..n)
        .map(|j| {
            let (a, b) = config.link_endpoints(j);
            semicircle(a, b, m)
        })
        .collect();
    if n == 1 {
        // the geodesic of (ℍ; a, b) is the semicircle itself
        return Ok(Multichord {
            curves,
            config: config.clone(),
        });
    }
    let frame = config.frame();
    let mut last_move = f64::INFINITY;
    for _sweep in 0..opts.max_sweeps {
        let mut max_move = 0.0f64;
        for j in 0..n {
            let updated = regeodesic(config, &curves, j, m, &opts.chordal)?;
            let moved = polyline_deviation(&curves[j].points, &updated.points);
            if moved > max_move {
                max_move = moved;
            }
            curves[j] = updated;
        }
        last_move = max_move;
        if max_move < opts.tol * frame {
            return Ok(Multichord {
                curves,
                config: config.clone(),
            });
        }
    }
    Err(Error::no_convergence(
        "geodesic multichord sweeps",
        opts.max_sweeps,
        last_move / frame,
    ))
}

/// Replaces chord `j` by the hyperbolic geodesic of the complement of the
/// other chords: map the others out, take the semicircle over the endpoint
/// images, pull it back.
fn regeodesic(
    config: &MultichordConfig,
    curves: &[PolylineCurve],
    j: usize,
    m: usize,
    cfg: &ChordalConfig,
) -> Result<PolylineCurve> {
    let others: Vec<(Vec<Complex64>, f64, f64)> = (0..curves.len())
        .filter(|&k| k != j)
        .map(|k| {
            let (a, b) = config.link_endpoints(k);
            (curves[k].points.clone(), a, b)
        })
        .collect();
    let chain = map_out_chords(&others, cfg)?;
    let (xa, xb) = config.link_endpoints(j);
    let ia = chain.fwd_real(xa)?;
    let ib = chain.fwd_real(xb)?;
    if !(ia.is_finite() && ib.is_finite()) || (ia - ib).abs() < 1e-12 * (1.0 + ia.abs()) {
        return Err(Error::degeneracy(
            "chord endpoints collided in the mapped-out frame",
            None,
        ));
    }
    // First pass: pull back a uniform-angle semicircle to measure how the
    // chain distorts arclength.
    let (lo, hi) = (ia.min(ib), ia.max(ib));
    let center = 0.5 * (lo + hi);
    let radius = 0.5 * (hi - lo);
    let angle = |t: f64| std::f64::consts::PI * (1.0 - t);
    let on_arc = |t: f64| {
        let th = angle(t);
        c64(center + radius * th.cos(), radius * th.sin())
    };
    let probe: Vec<Complex64> = (0..m)
        .map(|i| chain.bwd(on_arc(i as f64 / (m - 1) as f64)))
        .collect();
    let mut cum = vec![0.0f64; m];
    for i in 1..m {
        cum[i] = cum[i - 1] + (probe[i] - probe[i - 1]).norm();
    }
    let total = cum[m - 1];
    // Second pass: evaluate the pullback at uniform-arclength quantiles, so
    // every sample lies exactly on the geodesic and spacing is even.
    let mut pts: Vec<Complex64> = Vec::with_capacity(m);
    let mut seg = 1usize;
    for j in 0..m {
        let target = total * j as f64 / (m - 1) as f64;
        while seg < m - 1 && cum[seg] < target {
            seg += 1;
        }
        let (s0, s1) = (cum[seg - 1], cum[seg]);
        let frac = if s1 > s0 { (target - s0) / (s1 - s0) } else { 0.0 };
        let t = ((seg - 1) as f64 + frac) / (m - 1) as f64;
        pts.push(chain.bwd(on_arc(t)));
    }
    if (pts[0] - c64(xa, 0.0)).norm() > (pts[0] - c64(xb, 0.0)).norm() {
        pts.reverse();
    }
    let last = pts.len() - 1;
    pts[0] = c64(xa, 0.0);
    pts[last] = c64(xb, 0.0);
    PolylineCurve::open(dedup_for_trace(pts))
}

// ---------------------------------------------------------------------------
// Polynomial helpers (coefficients in ascending order)
// ---------------------------------------------------------------------------

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

fn poly_deriv(a: &[f64]) -> Vec<f64> {
    if a.len() <= 1 {
        return vec![0.0];
    }
    a.iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| k as f64 * c)
        .collect()
}

fn poly_eval(a: &[f64], z: Complex64) -> Complex64 {
    let mut acc = c64(0.0, 0.0);
    for &c in a.iter().rev() {
        acc = acc * z + c;
    }
    acc
}

fn poly_eval_c(a: &[Complex64], z: Complex64) -> Complex64 {
    let mut acc = c64(0.0, 0.0);
    for &c in a.iter().rev() {
        acc = acc * z + c;
    }
    acc
}

fn poly_from_real_roots(roots: &[f64]) -> Vec<f64> {
    let mut p = vec![1.0];
    for &r in roots {
        p = poly_mul(&p, &[-r, 1.0]);
    }
    p
}

/// Monic real polynomial with the given (conjugate-closed) complex roots.
fn poly_from_complex_roots(roots: &[Complex64]) -> Vec<f64> {
    let mut p: Vec<Complex64> = vec![c64(1.0, 0.0)];
    for &r in roots {
        let mut q = vec![c64(0.0, 0.0); p.len() + 1];
        for (i, &pi) in p.iter().enumerate() {
            q[i] -= r * pi;
            q[i + 1] += pi;
        }
        p = q;
    }
    p.iter().map(|c| c.re).collect()
}

/// All complex roots of a real polynomial (Durand–Kerner; roots assumed
/// simple, which holds for the denominators produced here).
fn poly_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let cc: Vec<Complex64> = coeffs.iter().map(|&c| c64(c, 0.0)).collect();
    poly_roots_complex(&cc)
}

fn poly_roots_complex(coeffs: &[Complex64]) -> Vec<Complex64> {
    let deg = coeffs.len() - 1;
    if deg == 0 {
        return Vec::new();
    }
    let lead = coeffs[deg];
    let monic: Vec<Complex64> = coeffs.iter().map(|&c| c / lead).collect();
    let radius = 1.0
        + monic[..deg]
            .iter()
            .map(|c| c.norm())
            .fold(0.0f64, f64::max);
    let mut z: Vec<Complex64> = (0..deg)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / deg as f64 + 0.4;
            radius * c64(t.cos(), t.sin())
        })
        .collect();
    for _ in 0..300 {
        let mut done = true;
        for i in 0..deg {
            let mut den = c64(1.0, 0.0);
            for k in 0..deg {
                if k != i {
                    den *= z[i] - z[k];
                }
            }
            let step = poly_eval_c(&monic, z[i]) / den;
            z[i] -= step;
            if step.norm() > 1e-13 * (1.0 + radius) {
                done = false;
            }
        }
        if done {
            break;
        }
    }
    z
}

// ---------------------------------------------------------------------------
// Pole system and the rational function
// ---------------------------------------------------------------------------

/// Residual of the pole stationarity system
/// `F_l = Σ_k 1/(ζ_l − x_k) − 2 Σ_{m≠l} 1/(ζ_l − ζ_m)`.
fn pole_system(points: &[f64], zetas: &[Complex64]) -> Vec<Complex64> {
    zetas
        .iter()
        .enumerate()
        .map(|(l, &z)| {
            let mut f = c64(0.0, 0.0);
            for &x in points {
                f += 1.0 / (z - x);
            }
            for (m, &w) in zetas.iter().enumerate() {
                if m != l {
                    f -= 2.0 / (z - w);
                }
            }
            f
        })
        .collect()
}

/// Sup-norm of the stationarity residual at a candidate pole set. Zero
/// exactly when the associated rational derivative `∏(z−x_k)/∏(z−ζ_l)²`
/// has vanishing residues, i.e. integrates to a rational function.
pub fn pole_stationarity_residual(points: &[f64], zetas: &[Complex64]) -> f64 {
    pole_system(points, zetas)
        .iter()
        .map(|f| f.norm())
        .fold(0.0, f64::max)
}

/// Newton iteration for the pole system from a given seed; `None` when it
/// leaves the search region or fails to meet the tolerance.
fn solve_poles(points: &[f64], seed: &[Complex64]) -> Option<Vec<Complex64>> {
    let n = seed.len();
    let span = points[points.len() - 1] - points[0];
    let min_gap = points
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let tol = 1e-11 / min_gap.min(1.0);
    let mut z: Vec<Complex64> = seed.to_vec();
    for _ in 0..120 {
        let f = pole_system(points, &z);
        let res = f.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
        if !res.is_finite() {
            return None;
        }
        if res < tol {
            // reject poles that collide with marked points
            for &zl in &z {
                for &x in points {
                    if (zl - x).norm() < 1e-9 * span {
                        return None;
                    }
                }
            }
            return Some(z);
        }
        let mut jac = DMatrix::<Complex64>::zeros(n, n);
        for l in 0..n {
            let mut diag = c64(0.0, 0.0);
            for &x in points {
                diag -= 1.0 / ((z[l] - x) * (z[l] - x));
            }
            for m in 0..n {
                if m != l {
                    let d = z[l] - z[m];
                    diag += 2.0 / (d * d);
                    jac[(l, m)] = -2.0 / (d * d);
                }
            }
            jac[(l, l)] = diag;
        }
        let rhs = DVector::<Complex64>::from_iterator(n, f.iter().map(|&v| -v));
        let delta = jac.lu().solve(&rhs)?;
        for l in 0..n {
            let mut d = delta[l];
            let cap = 0.5 * span;
            if d.norm() > cap {
                d *= cap / d.norm();
            }
            z[l] += d;
            if !z[l].is_finite() || z[l].norm() > 100.0 * (1.0 + span + points[0].abs()) {
                return None;
            }
        }
    }
    None
}

/// Deterministic seed catalog: choose `r` real gap midpoints and `c`
/// conjugate pairs anchored at chord tops, with `r + 2c = n`.
fn pole_seed_sets(config: &MultichordConfig) -> Vec<Vec<Complex64>> {
    let n = config.n();
    let x = config.points();
    let gaps: Vec<f64> = (0..2 * n - 1).map(|i| 0.5 * (x[i] + x[i + 1])).collect();
    let tops: Vec<Complex64> = (0..n)
        .map(|j| {
            let (a, b) = config.link_endpoints(j);
            c64(0.5 * (a + b), 0.5 * (b - a))
        })
        .collect();
    fn combinations<T: Clone>(items: &[T], k: usize) -> Vec<Vec<T>> {
        if k == 0 {
            return vec![Vec::new()];
        }
        if items.len() < k {
            return Vec::new();
        }
        let mut out = Vec::new();
        for i in 0..=items.len() - k {
            for mut rest in combinations(&items[i + 1..], k - 1) {
                let mut v = vec![items[i].clone()];
                v.append(&mut rest);
                out.push(v);
            }
        }
        out
    }
    let mut seeds = Vec::new();
    for c in 0..=n / 2 {
        let r = n - 2 * c;
        for reals in combinations(&gaps, r) {
            for pairs in combinations(&tops, c) {
                let mut s: Vec<Complex64> = reals.iter().map(|&g| c64(g, 1e-3)).collect();
                for &t in &pairs {
                    s.push(t);
                    s.push(t.conj());
                }
                seeds.push(s);
            }
        }
    }
    seeds
}

/// A rational function with real coefficients, stored as numerator and
/// denominator polynomials in ascending coefficient order.
///
/// The functions produced by [`rational_from_multichord`] have numerator
/// degree `n + 1`, monic; denominator degree `n`, monic; `h(∞) = ∞`;
/// normalized by derivative `h′(z) = ∏(z−x_i)/∏(z−ζ_l)²` (leading
/// coefficient 1) and `h(x₁) = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealRational {
    pub numerator: Vec<f64>,
    pub denominator: Vec<f64>,
}

impl RealRational {
    /// Degree as a map of the sphere: max of numerator/denominator degrees.
    pub fn degree(&self) -> usize {
        (self.numerator.len().max(self.denominator.len())) - 1
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        poly_eval(&self.numerator, z) / poly_eval(&self.denominator, z)
    }

    /// Derivative `h′(z) = (P′Q − PQ′)/Q²`.
    pub fn deriv(&self, z: Complex64) -> Complex64 {
        let p = poly_eval(&self.numerator, z);
        let dp = poly_eval(&poly_deriv(&self.numerator), z);
        let q = poly_eval(&self.denominator, z);
        let dq = poly_eval(&poly_deriv(&self.denominator), z);
        (dp * q - p * dq) / (q * q)
    }

    /// Finite poles (denominator roots), sorted by real then imaginary part.
    pub fn poles(&self) -> Vec<Complex64> {
        let mut roots = poly_roots(&self.denominator);
        roots.sort_by(|a, b| {
            (a.re, a.im)
                .partial_cmp(&(b.re, b.im))
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        roots
    }

    /// Relative size of the derivative numerator `P′Q − PQ′` at the given
    /// points (zero when they are critical points).
    pub fn critical_residual(&self, points: &[f64]) -> f64 {
        let w = wronskian(&self.numerator, &self.denominator);
        let scale: f64 = w.iter().map(|c| c.abs()).sum::<f64>().max(1e-300);
        points
            .iter()
            .map(|&x| {
                let grow = x.abs().max(1.0).powi(w.len() as i32 - 1);
                poly_eval(&w, c64(x, 0.0)).norm() / (scale * grow)
            })
            .fold(0.0, f64::max)
    }
}

/// `P′Q − PQ′` as a coefficient vector.
fn wronskian(p: &[f64], q: &[f64]) -> Vec<f64> {
    let a = poly_mul(&poly_deriv(p), q);
    let b = poly_mul(p, &poly_deriv(q));
    let len = a.len().max(b.len());
    (0..len)
        .map(|i| a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0))
        .collect()
}

/// Builds the rational function with `h′ = ∏(z−x)/Q²` for `Q = ∏(z−ζ)`:
/// solves the linear system `P′Q − PQ′ = N` for the monic numerator.
/// Returns `None` when the poles do not satisfy the stationarity system
/// (the linear system is then inconsistent).
fn rational_from_poles(points: &[f64], zetas: &[Complex64]) -> Option<RealRational> {
    let n = zetas.len();
    let q = poly_from_complex_roots(zetas);
    let nn = poly_from_real_roots(points);
    // leading term: z^{n+1} contributes (n+1) z^n Q − z^{n+1} Q′
    let mut lead = vec![0.0; n + 2];
    lead[n + 1] = 1.0;
    let lead_contrib = wronskian(&lead, &q);
    let rows = 2 * n + 1;
    let mut mat = DMatrix::<f64>::zeros(rows, n + 1);
    for k in 0..=n {
        let mut pk = vec![0.0; k + 1];
        pk[k] = 1.0;
        let col = wronskian(&pk, &q);
        for (i, &v) in col.iter().enumerate() {
            if i < rows {
                mat[(i, k)] = v;
            }
        }
    }
    let rhs = DVector::<f64>::from_iterator(
        rows,
        (0..rows).map(|i| {
            nn.get(i).copied().unwrap_or(0.0) - lead_contrib.get(i).copied().unwrap_or(0.0)
        }),
    );
    let rhs_norm = rhs.norm().max(1e-300);
    let svd = mat.clone().svd(true, true);
    let sol = svd.solve(&rhs, 1e-12 * rhs_norm).ok()?;
    let residual = (&mat * &sol - &rhs).norm() / rhs_norm;
    if residual > 1e-8 {
        return None;
    }
    let mut p: Vec<f64> = sol.iter().copied().collect();
    p.push(1.0);
    // gauge: h(x₁) = 0
    let x1 = c64(points[0], 0.0);
    let c = (poly_eval(&p, x1) / poly_eval(&q, x1)).re;
    for (pk, &qk) in p.iter_mut().zip(q.iter()) {
        *pk -= c * qk;
    }
    Some(RealRational {
        numerator: p,
        denominator: q,
    })
}

/// Maximum spherical distance from `h(z)` to the real line over the
/// multichord samples — small exactly when the real locus of `h` contains
/// the multichord.
fn real_locus_score(rr: &RealRational, mc: &Multichord) -> f64 {
    let mut worst = 0.0f64;
    for curve in &mc.curves {
        for &z in &curve.points {
            let h = rr.eval(z);
            let score = if h.is_finite() {
                h.im.abs() / (1.0 + h.norm_sqr())
            } else {
                0.0
            };
            if score > worst {
                worst = score;
            }
        }
    }
    worst
}

/// The degree-`(n+1)` real rational function attached to a geodesic
/// multichord: critical points exactly at the marked points, real locus
/// containing the chords, `h(∞) = ∞`.
///
/// Poles are found by Newton iteration on the stationarity system over a
/// deterministic catalog of seeds (real gap midpoints and conjugate pairs at
/// chord tops, supported for n ≤ 4); the branch is selected by requiring the
/// real locus to contain the supplied multichord.
pub fn rational_from_multichord(mc: &Multichord) -> Result<RealRational> {
    let zetas = select_poles(mc)?;
    rational_from_poles(mc.config.points(), &zetas)
        .ok_or_else(|| Error::invalid("selected poles do not integrate to a rational function"))
}

/// Poles of the rational function attached to a geodesic multichord.
fn select_poles(mc: &Multichord) -> Result<Vec<Complex64>> {
    let config = &mc.config;
    let n = config.n();
    if n > 4 {
        return Err(Error::invalid(
            "rational construction is supported for n ≤ 4",
        ));
    }
    let span = config.frame();
    let mut solutions: Vec<Vec<Complex64>> = Vec::new();
    for seed in pole_seed_sets(config) {
        if let Some(mut z) = solve_poles(config.points(), &seed) {
            z.sort_by(|a, b| {
                (a.re, a.im)
                    .partial_cmp(&(b.re, b.im))
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            let dup = solutions.iter().any(|s| {
                s.iter()
                    .zip(z.iter())
                    .all(|(a, b)| (a - b).norm() < 1e-7 * span)
            });
            if !dup {
                solutions.push(z);
            }
        }
    }
    let mut best: Option<(f64, Vec<Complex64>)> = None;
    for z in solutions {
        if let Some(rr) = rational_from_poles(config.points(), &z) {
            let score = real_locus_score(&rr, mc);
            if best.as_ref().is_none_or(|(s, _)| score < *s) {
                best = Some((score, z));
            }
        }
    }
    match best {
        Some((score, z)) if score < 1e-2 => Ok(z),
        Some((score, _)) => Err(Error::no_convergence(
            "no pole branch matches the multichord's real locus",
            0,
            score,
        )),
        None => Err(Error::no_convergence(
            "pole search found no stationary configuration",
            0,
            f64::NAN,
        )),
    }
}

// ---------------------------------------------------------------------------
// Minimal potential: value, gradient, null-state identity, marginal ODE
// ---------------------------------------------------------------------------

/// `𝒰` up to its configuration-independent additive constant:
/// `𝒰 = −2 Σ log|x_j−x_k| − 8 Σ log|ζ_l−ζ_m| + 4 Σ log|x_k−ζ_l|`.
fn potential_from_poles(points: &[f64], zetas: &[Complex64]) -> f64 {
    let mut u = 0.0;
    for j in 0..points.len() {
        for k in j + 1..points.len() {
            u -= 2.0 * (points[j] - points[k]).abs().ln();
        }
    }
    for l in 0..zetas.len() {
        for m in l + 1..zetas.len() {
            u -= 8.0 * (zetas[l] - zetas[m]).norm().ln();
        }
    }
    for &x in points {
        for &z in zetas {
            u += 4.0 * (x - z).norm().ln();
        }
    }
    u
}

/// `∂𝒰/∂x_i` holding the poles fixed — which equals the full derivative,
/// since the poles are stationary points of the product formula.
fn potential_gradient_from_poles(points: &[f64], zetas: &[Complex64], i: usize) -> f64 {
    let mut g = c64(0.0, 0.0);
    for (k, &x) in points.iter().enumerate() {
        if k != i {
            g -= 2.0 / (points[i] - x);
        }
    }
    for &z in zetas {
        g += 4.0 / (points[i] - z);
    }
    g.re
}

/// Both routes to `∂𝒰/∂x_j`.
#[derive(Clone, Copy, Debug)]
pub struct GradientReport {
    /// Analytic derivative of the pole product formula (poles held fixed by
    /// stationarity).
    pub analytic: f64,
    /// Central finite difference of the potential across re-solved pole
    /// configurations (pole motion included automatically).
    pub finite_difference: f64,
}

/// Gradient of the minimal potential in the `j`-th marked point (1-based).
pub fn minimal_potential_gradient(
    config: &MultichordConfig,
    j: usize,
    opts: &MultichordOptions,
) -> Result<GradientReport> {
    let x = config.points();
    if j == 0 || j > x.len() {
        return Err(Error::invalid("marked point index out of range"));
    }
    let mc = geodesic_multichord(config, opts)?;
    let zetas = select_poles(&mc)?;
    let analytic = potential_gradient_from_poles(x, &zetas, j - 1);
    let min_gap = x
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let h = 1e-3 * min_gap;
    let u_at = |xs: &[f64]| -> Result<f64> {
        let z = solve_poles(xs, &zetas).ok_or_else(|| {
            Error::no_convergence("pole tracking at a perturbed configuration", 0, f64::NAN)
        })?;
        Ok(potential_from_poles(xs, &z))
    };
    let mut xp = x.to_vec();
    xp[j - 1] += h;
    let up = u_at(&xp)?;
    xp[j - 1] = x[j - 1] - h;
    let um = u_at(&xp)?;
    Ok(GradientReport {
        analytic,
        finite_difference: (up - um) / (2.0 * h),
    })
}

/// Sides of the null-state identity at marked point `j` (1-based):
/// `½(∂_j𝒰)² − Σ_{i≠j} (2/(x_i−x_j)) ∂_i𝒰  =  Σ_{i≠j} 6/(x_i−x_j)²`.
#[derive(Clone, Copy, Debug)]
pub struct NullStateReport {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// Evaluates the null-state identity at marked point `j` (1-based).
pub fn null_state_residual(
    config: &MultichordConfig,
    j: usize,
    opts: &MultichordOptions,
) -> Result<NullStateReport> {
    let x = config.points();
    if j == 0 || j > x.len() {
        return Err(Error::invalid("marked point index out of range"));
    }
    let mc = geodesic_multichord(config, opts)?;
    let zetas = select_poles(&mc)?;
    let grads: Vec<f64> = (0..x.len())
        .map(|i| potential_gradient_from_poles(x, &zetas, i))
        .collect();
    let xj = x[j - 1];
    let mut lhs = 0.5 * grads[j - 1] * grads[j - 1];
    let mut rhs = 0.0;
    for (i, &xi) in x.iter().enumerate() {
        if i != j - 1 {
            lhs -= 2.0 / (xi - xj) * grads[i];
            rhs += 6.0 / ((xi - xj) * (xi - xj));
        }
    }
    Ok(NullStateReport {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
    })
}

/// Trajectory of the marginal driving ODE.
#[derive(Clone, Debug)]
pub struct MarginalOde {
    pub times: Vec<f64>,
    /// `states[s][i]` = position of marked point `i+1` at `times[s]`; the
    /// entry at the link's first endpoint is the driving value `W`.
    pub states: Vec<Vec<f64>>,
    /// The driving function `W(t)` of chord `j`.
    pub driver: ChordalDriver,
}

/// Integrates `dW/dt = −∂_{a_j}𝒰(V¹,…,W,…,V^{2n})`, `dVⁱ/dt = 2/(Vⁱ−W)`
/// for link `j` (1-based) over `[0, horizon]` in capacity time. The poles of
/// the product formula are tracked by warm-started Newton continuation along
/// the trajectory. The resulting `W` is the driving function of the chord
/// `η_j` of the geodesic multichord.
pub fn marginal_driving_ode(
    config: &MultichordConfig,
    j: usize,
    horizon: f64,
    opts: &MultichordOptions,
) -> Result<MarginalOde> {
    let n = config.n();
    if j == 0 || j > n {
        return Err(Error::invalid("link index out of range"));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::invalid("ODE horizon must be positive"));
    }
    let (aj, _) = config.pattern().pairs()[j - 1];
    let slot = aj - 1;
    let mc = geodesic_multichord(config, opts)?;
    let mut zetas = select_poles(&mc)?;
    let steps = (horizon / opts.ode_step).ceil().max(1.0) as usize;
    let dt = horizon / steps as f64;
    let span = config.frame();

    let deriv = |y: &[f64], zc: &mut Vec<Complex64>| -> Result<Vec<f64>> {
        let z = solve_poles(y, zc).ok_or_else(|| {
            Error::degeneracy("pole tracking failed along the marginal ODE", None)
        })?;
        *zc = z;
        let w = y[slot];
        let g = potential_gradient_from_poles(y, zc, slot);
        let mut dy = vec![0.0; y.len()];
        for (i, &v) in y.iter().enumerate() {
            if i == slot {
                dy[i] = -g;
            } else {
                if (v - w).abs() < 1e-6 * span {
                    return Err(Error::degeneracy(
                        "marked point swallowed by the marginal ODE",
                        None,
                    ));
                }
                dy[i] = 2.0 / (v - w);
            }
        }
        Ok(dy)
    };

    let mut y: Vec<f64> = config.points().to_vec();
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(y.clone());
    let add = |y: &[f64], k: &[f64], s: f64| -> Vec<f64> {
        y.iter().zip(k).map(|(a, b)| a + s * b).collect()
    };
    for s in 0..steps {
        let k1 = deriv(&y, &mut zetas)?;
        let k2 = deriv(&add(&y, &k1, 0.5 * dt), &mut zetas)?;
        let k3 = deriv(&add(&y, &k2, 0.5 * dt), &mut zetas)?;
        let k4 = deriv(&add(&y, &k3, dt), &mut zetas)?;
        for i in 0..y.len() {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        times.push((s + 1) as f64 * dt);
        states.push(y.clone());
    }
    let values: Vec<f64> = states.iter().map(|st| st[slot]).collect();
    let driver = ChordalDriver::new(times.clone(), values)?;
    Ok(MarginalOde {
        times,
        states,
        driver,
    })
}

// ---------------------------------------------------------------------------
// Potential, energy, cascade
// ---------------------------------------------------------------------------

/// Energy of chord `j` of the multichord *as a chord of (ℍ; x_a, x_b)*:
/// map the endpoints to (0, ∞) and extract.
fn plain_chord_energy(mc: &Multichord, j: usize, cfg: &EnergyConfig) -> Result<f64> {
    let (a, b) = mc.config.link_endpoints(j);
    let m = mobius_zero_inf(a, b);
    let mut pts: Vec<Complex64> = mc.curves[j]
        .points
        .iter()
        .map(|&z| m.apply(z))
        .filter(|w| w.is_finite() && w.norm() < 0.99 * CLIP_RADIUS)
        .collect();
    if pts.first().is_none_or(|z| z.norm() > 1e-9) {
        pts.insert(0, c64(0.0, 0.0));
    } else {
        pts[0] = c64(0.0, 0.0);
    }
    let curve = PolylineCurve::unbounded(dedup_for_trace(pts))?;
    let report = chord_energy(&curve, &MarkedDomain::HalfPlane, cfg)?;
    if report.divergent {
        return Ok(f64::INFINITY);
    }
    Ok(report.value)
}

/// Loop-mass estimates entering the potential (from the stochastic module
/// or zero for well-separated configurations).
#[derive(Clone, Copy, Debug, Default)]
pub struct LoopMasses {
    /// Mass term for the supplied multichord.
    pub multichord: f64,
    /// Mass term for the geodesic multichord of the same configuration.
    pub geodesic: f64,
}

/// The boundary potential of a multichord in (ℍ; x̄):
/// `𝓗 = (1/12) Σ I(γ_j) + m + ½ Σ log|x_{b_j} − x_{a_j}|`,
/// where the last sum is `−¼ Σ log P` for the boundary Poisson kernel
/// `P(x, y) = |y − x|⁻²` and `m` is the supplied loop-mass term.
pub fn loewner_potential(mc: &Multichord, loop_mass: f64, cfg: &EnergyConfig) -> Result<f64> {
    let mut h = loop_mass;
    for j in 0..mc.curves.len() {
        h += plain_chord_energy(mc, j, cfg)? / 12.0;
        let (a, b) = mc.config.link_endpoints(j);
        h += 0.5 * (b - a).abs().ln();
    }
    Ok(h)
}

/// Multichord energy: `12 (𝓗(γ̄) − 𝓗(η̄))` with `η̄` the geodesic multichord
/// of the same configuration. Returns `+∞` when chords intersect or any
/// chord has divergent energy; the Poisson-kernel terms cancel, so only the
/// chord energies and the loop masses enter.
pub fn multichord_energy(
    mc: &Multichord,
    masses: &LoopMasses,
    opts: &MultichordOptions,
    cfg: &EnergyConfig,
) -> Result<f64> {
    for j in 0..mc.curves.len() {
        for k in j + 1..mc.curves.len() {
            if curves_intersect(&mc.curves[j], &mc.curves[k]) {
                return Ok(f64::INFINITY);
            }
        }
    }
    let mut total = 12.0 * masses.multichord;
    for j in 0..mc.curves.len() {
        let e = plain_chord_energy(mc, j, cfg)?;
        if !e.is_finite() {
            return Ok(f64::INFINITY);
        }
        total += e;
    }
    let geo = geodesic_multichord(&mc.config, opts)?;
    let mut reference = 12.0 * masses.geodesic;
    for j in 0..geo.curves.len() {
        reference += plain_chord_energy(&geo, j, cfg)?;
    }
    Ok(total - reference)
}

fn curves_intersect(a: &PolylineCurve, b: &PolylineCurve) -> bool {
    for sa in a.points.windows(2) {
        for sb in b.points.windows(2) {
            if segments_intersect((sa[0], sa[1]), (sb[0], sb[1])) {
                return true;
            }
        }
    }
    false
}

/// Sides of the cascade decomposition of the potential at link `j`.
#[derive(Clone, Copy, Debug)]
pub struct CascadeReport {
    /// `𝓗_ℍ(γ̄)` computed directly.
    pub full: f64,
    /// `𝓗_{D̂_j}(γ_j) + 𝓗_ℍ(γ̄ ∖ γ_j)` computed through the complementary
    /// component of the other chords.
    pub split: f64,
    pub residual: f64,
}

/// Checks the cascade relation `𝓗_ℍ(γ̄) = 𝓗_{D̂_j}(γ_j) + 𝓗_ℍ(γ̄ ∖ γ_j)`
/// at link `j` (1-based). `mass_full` and `mass_rest` are loop-mass
/// estimates for the full family and for the family without chord `j`; the
/// single chord's mass in its own component vanishes.
pub fn cascade_check(
    mc: &Multichord,
    j: usize,
    mass_full: f64,
    mass_rest: f64,
    cfg: &EnergyConfig,
) -> Result<CascadeReport> {
    let n = mc.curves.len();
    if j == 0 || j > n {
        return Err(Error::invalid("link index out of range"));
    }
    let j = j - 1;
    // left side: the full potential
    let full = loewner_potential(mc, mass_full, cfg)?;
    // right side, part 1: chord j in the complement of the others
    let others: Vec<(Vec<Complex64>, f64, f64)> = (0..n)
        .filter(|&k| k != j)
        .map(|k| {
            let (a, b) = mc.config.link_endpoints(k);
            (mc.curves[k].points.clone(), a, b)
        })
        .collect();
    let chain = map_out_chords(&others, &cfg.chordal)?;
    let (xa, xb) = mc.config.link_endpoints(j);
    let span = mc.config.frame();
    let h = 1e-6 * span;
    let ia = chain.fwd_real(xa)?;
    let ib = chain.fwd_real(xb)?;
    let da = chain.fwd_real_derivative(xa, h)?;
    let db = chain.fwd_real_derivative(xb, h)?;
    // −¼ log P_{D̂}(xa, xb) with P_D = |φ′(xa)||φ′(xb)| / |φ(xb) − φ(xa)|²
    let kernel_term = 0.5 * (ib - ia).abs().ln() - 0.25 * (da.ln() + db.ln());
    // chord-j energy inside the component: push through the chain, then to (0, ∞)
    let mut img: Vec<Complex64> = Vec::with_capacity(mc.curves[j].points.len());
    for &z in &mc.curves[j].points {
        let w = chain.fwd(z)?;
        if w.is_finite() {
            img.push(w);
        }
    }
    let m = mobius_zero_inf(ia, ib);
    let mut pts: Vec<Complex64> = img
        .iter()
        .map(|&z| m.apply(z))
        .filter(|w| w.is_finite() && w.norm() < 0.99 * CLIP_RADIUS)
        .collect();
    if pts.first().is_none_or(|z| z.norm() > 1e-9) {
        pts.insert(0, c64(0.0, 0.0));
    } else {
        pts[0] = c64(0.0, 0.0);
    }
    let curve = PolylineCurve::unbounded(dedup_for_trace(pts))?;
    let inside = chord_energy(&curve, &MarkedDomain::HalfPlane, cfg)?;
    let part1 = inside.value / 12.0 + kernel_term;
    // right side, part 2: the other chords in ℍ
    let mut part2 = mass_rest;
    for k in 0..n {
        if k != j {
            part2 += plain_chord_energy(mc, k, cfg)? / 12.0;
            let (a, b) = mc.config.link_endpoints(k);
            part2 += 0.5 * (b - a).abs().ln();
        }
    }
    let split = part1 + part2;
    Ok(CascadeReport {
        full,
        split,
        residual: (full - split).abs(),
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
