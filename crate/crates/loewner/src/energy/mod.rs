//! Energy functionals for drivers, chords, fields, boundary data, and loops.
//!
//! The central quantity is the Dirichlet-type energy of a driving function,
//! `Σ (ΔW)²/(2Δt)`, which is the energy of the piecewise-linear interpolant
//! and increases under partition refinement. Chord energies reduce to driver
//! energies through driver extraction; loop energies are computed by three
//! routes (disk formula, line formula, rooted limit) that agree on their
//! common domain of applicability:
//!
//! * disk route — `I = 𝒟_D(log|F'|) + 𝒟_{D*}(log|h'|) + 4 log F'(0) − 4 log h'(∞)`
//!   for bounded Jordan curves, with `F : D →` interior and `h : D* →`
//!   exterior;
//! * line route — `I = 𝒟_H(log|f'|) + 𝒟_{H*}(log|g'|)` for curves through ∞;
//! * root route — the increasing limit of chordal energies of the loop with
//!   a shrinking arc around a marked root removed, accelerated by Richardson
//!   extrapolation.
//!
//! All Dirichlet energies use the normalization `𝒟(φ) = (1/π)∫|∇φ|²`, under
//! which `𝒟_D(Re z) = 1` and the boundary form on the unit circle is
//! `‖u‖² = (1/2π²)∬ |u(s)−u(t)|²/|e^{is}−e^{it}|² ds dt`.

pub mod identities;
pub mod welding;

use crate::chordal::{extract_driver, ChordalConfig, ChordalDriver};
use crate::conformal::{DiskMapsPair, HalfPlaneMaps};
use crate::error::{Error, Result};
use crate::geometry::{c64, GraphCurve, GridField, MobiusTransform, PolylineCurve, SmoothLoop};
use crate::spectral;
use num_complex::Complex64;
use std::f64::consts::PI;

/// How an energy value was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyMethod {
    Driver,
    DiskFormula,
    LineFormula,
    RootLimit,
    Quadrature,
    Fourier,
}

/// An energy value with its provenance.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct EnergyReport {
    /// The energy estimate. Meaningless when `divergent` is set.
    pub value: f64,
    /// Set when refinement indicates the true value is +∞.
    pub divergent: bool,
    pub method: EnergyMethod,
    /// Grid size / node count / partition size the value was computed on.
    pub resolution: usize,
    /// Estimated discretization error (last refinement increment or
    /// comparable internal consistency measure).
    pub error_estimate: f64,
}

impl EnergyReport {
    fn finite(value: f64, method: EnergyMethod, resolution: usize, err: f64) -> Self {
        EnergyReport {
            value,
            divergent: false,
            method,
            resolution,
            error_estimate: err,
        }
    }

    fn divergent(method: EnergyMethod, resolution: usize, slope: f64) -> Self {
        EnergyReport {
            value: f64::INFINITY,
            divergent: true,
            method,
            resolution,
            error_estimate: slope,
        }
    }
}

/// `Σ (ΔW)²/(2Δt)` over the driver's own grid — the Dirichlet energy of the
/// piecewise-linear interpolant, a lower bound for the true energy that
/// increases under refinement.
pub fn driver_energy(driver: &ChordalDriver) -> EnergyReport {
    let value = partition_energy(&driver.times, &driver.values);
    EnergyReport::finite(value, EnergyMethod::Driver, driver.times.len(), 0.0)
}

fn partition_energy(times: &[f64], values: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 1..times.len() {
        let dt = times[i] - times[i - 1];
        if dt > 0.0 {
            let dw = values[i] - values[i - 1];
            acc += dw * dw / (2.0 * dt);
        }
    }
    acc
}

/// Energy of the driver on the sub-partition keeping every `stride`-th node
/// (endpoints always kept). Coarsening never increases the energy.
fn subsampled_energy(driver: &ChordalDriver, stride: usize) -> f64 {
    let n = driver.times.len();
    let mut times = Vec::with_capacity(n / stride + 2);
    let mut values = Vec::with_capacity(n / stride + 2);
    let mut i = 0;
    while i < n {
        times.push(driver.times[i]);
        values.push(driver.values[i]);
        i += stride;
    }
    if *times.last().unwrap() < driver.times[n - 1] {
        times.push(driver.times[n - 1]);
        values.push(driver.values[n - 1]);
    }
    partition_energy(&times, &values)
}

/// Chord domains: the upper half-plane with marked prime ends (0, ∞), or
/// the unit disk with marked boundary points `e^{ia}, e^{ib}`.
#[derive(Clone, Copy, Debug)]
pub enum MarkedDomain {
    /// (ℍ; 0, ∞)
    HalfPlane,
    /// (𝔻; e^{ia}, e^{ib}), chord running from `a` to `b`.
    Disk { a: f64, b: f64 },
}

impl MarkedDomain {
    /// A Möbius map sending the domain to ℍ with the marked points to
    /// (0, ∞). Any two such maps differ by a scaling, under which driver
    /// energy is invariant.
    pub fn uniformizer(&self) -> MobiusTransform {
        match *self {
            MarkedDomain::HalfPlane => MobiusTransform::identity(),
            MarkedDomain::Disk { a, b } => {
                let pa = c64(a.cos(), a.sin());
                let pb = c64(b.cos(), b.sin());
                // (z − pa)/(z − pb) maps the circle to a line through 0;
                // rotate that line onto ℝ and flip to put the disk above.
                let probe_angle = a + angle_gap(a, b) / 2.0;
                let probe = c64(probe_angle.cos(), probe_angle.sin());
                let w = (probe - pa) / (probe - pb);
                let lambda = w.conj() / w.norm();
                let center = lambda * (-pa) / (-pb);
                let lambda = if center.im >= 0.0 { lambda } else { -lambda };
                MobiusTransform {
                    a: lambda,
                    b: -lambda * pa,
                    c: c64(1.0, 0.0),
                    d: -pb,
                }
            }
        }
    }
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let mut d = b - a;
    while d <= 0.0 {
        d += 2.0 * PI;
    }
    while d > 2.0 * PI {
        d -= 2.0 * PI;
    }
    d
}

/// Tuning for chord/loop energies.
#[derive(Clone, Debug)]
pub struct EnergyConfig {
    pub chordal: ChordalConfig,
    /// A chord energy is declared divergent when two successive dyadic
    /// partition coarsenings each recover more than this fraction of the
    /// value (plus an absolute floor), i.e. the partition sums keep growing
    /// under refinement instead of saturating.
    pub divergence_slope: f64,
    /// Absolute floor for the divergence test increments.
    pub divergence_floor: f64,
    /// Node count for conformal-map routes (power of two).
    pub map_resolution: usize,
    /// Window padding factor for fitting through-∞ curves.
    pub graph_padding: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        EnergyConfig {
            chordal: ChordalConfig::default(),
            divergence_slope: 0.02,
            divergence_floor: 5e-3,
            map_resolution: 512,
            graph_padding: 2.0,
        }
    }
}

/// Loewner energy of a chord of the marked domain, by driver extraction.
///
/// The curve must run from the first marked point toward the second (for
/// the half-plane: start on ℝ near 0, end at large modulus). The reported
/// value is the partition energy on the extracted grid; divergence is
/// detected by comparing against dyadically coarsened partitions.
pub fn chord_energy(
    curve: &PolylineCurve,
    domain: &MarkedDomain,
    config: &EnergyConfig,
) -> Result<EnergyReport> {
    let mapped = match domain {
        MarkedDomain::HalfPlane => curve.clone(),
        MarkedDomain::Disk { .. } => {
            let m = domain.uniformizer();
            let mut pts: Vec<Complex64> = curve
                .points
                .iter()
                .map(|&z| m.apply(z))
                .filter(|w| w.is_finite() && w.norm() < crate::geometry::CLIP_RADIUS)
                .collect();
            // The chord begins at the first marked point, whose image is 0.
            // Supplied curves often start just inside the domain; anchor the
            // image there so driver extraction sees a boundary start.
            let scale = pts.iter().map(|p| p.norm()).fold(0.0f64, f64::max).max(1.0);
            if pts.first().is_none_or(|z| z.im.abs() > 1e-12 * scale) {
                pts.insert(0, c64(0.0, 0.0));
            }
            PolylineCurve::unbounded(crate::geometry::dedup_for_trace(pts))?
        }
    };
    let extracted = extract_driver(&mapped, &config.chordal)?;
    let e_full = partition_energy(&extracted.driver.times, &extracted.driver.values);
    let n = extracted.driver.times.len();
    if n >= 16 {
        let e_half = subsampled_energy(&extracted.driver, 2);
        let e_quarter = subsampled_energy(&extracted.driver, 4);
        let thr = (config.divergence_slope * e_full.max(1.0)).max(config.divergence_floor);
        let inc1 = e_full - e_half;
        let inc2 = e_half - e_quarter;
        if inc1 > thr && inc2 > thr {
            return Ok(EnergyReport::divergent(EnergyMethod::Driver, n, inc1.max(inc2)));
        }
        return Ok(EnergyReport::finite(e_full, EnergyMethod::Driver, n, inc1));
    }
    Ok(EnergyReport::finite(e_full, EnergyMethod::Driver, n, 0.0))
}

/// `(1/π)·Σ |∇φ|²·h²` over grid nodes where the centered gradient exists.
pub fn field_energy(field: &GridField) -> EnergyReport {
    let mut acc = 0.0;
    let mut cells = 0usize;
    for j in 0..field.ny {
        for i in 0..field.nx {
            if let Some((gx, gy)) = field.gradient(i, j) {
                acc += gx * gx + gy * gy;
                cells += 1;
            }
        }
    }
    EnergyReport::finite(
        acc * field.h * field.h / PI,
        EnergyMethod::Quadrature,
        cells,
        0.0,
    )
}

/// Harmonic extension of uniform circle samples to the unit disk, sampled
/// on a square grid of spacing `h` (mask: open unit disk).
pub fn poisson_extend(u: &[f64], h: f64) -> GridField {
    let m = u.len();
    let coeffs = spectral::fourier_coeffs(&u.iter().map(|&x| c64(x, 0.0)).collect::<Vec<_>>());
    GridField::on_disk(1.0, h, |z| {
        // u real: value = c0 + 2 Re Σ_{0<k<m/2} c_k z^k + Re(c_{m/2} z^{m/2})
        let mut acc = c64(0.0, 0.0);
        for k in (1..=m / 2).rev() {
            acc = (acc + coeffs[k]) * z;
            if k == m / 2 && m % 2 == 0 {
                acc *= 0.5; // Nyquist bin is shared between ±m/2
            }
        }
        coeffs[0].re + 2.0 * acc.re
    })
}

/// `H^{1/2}` seminorm of uniform samples on the unit circle, by the double
/// integral `(1/2π²)∬ |u(s)−u(t)|²/|e^{is}−e^{it}|² ds dt` with the exact
/// diagonal limit `u'(t)²`. The quadrature is exact for trigonometric
/// polynomials of degree below half the sample count.
pub fn h_half_seminorm_circle(u: &[f64]) -> EnergyReport {
    let m = u.len();
    let uc: Vec<Complex64> = u.iter().map(|&x| c64(x, 0.0)).collect();
    let du = spectral::fourier_values(&spectral::differentiate(&spectral::fourier_coeffs(&uc)));
    let nodes: Vec<Complex64> = (0..m)
        .map(|j| {
            let t = 2.0 * PI * j as f64 / m as f64;
            c64(t.cos(), t.sin())
        })
        .collect();
    let mut acc = 0.0;
    for j in 0..m {
        for l in 0..m {
            if j == l {
                acc += du[j].re * du[j].re;
            } else {
                let diff = u[j] - u[l];
                acc += diff * diff / (nodes[j] - nodes[l]).norm_sqr();
            }
        }
    }
    EnergyReport::finite(2.0 * acc / (m * m) as f64, EnergyMethod::Quadrature, m, 0.0)
}

/// `H^{1/2}` seminorm of samples on a uniform grid over `[−X, X] ⊂ ℝ`
/// (same normalization; the function is treated as ≡ 0 outside the window,
/// with the exterior tail integrated analytically).
pub fn h_half_seminorm_line(xs: &[f64], u: &[f64]) -> Result<EnergyReport> {
    let n = xs.len();
    if n < 4 || u.len() != n {
        return Err(Error::invalid("need ≥ 4 matched samples"));
    }
    let hx = xs[1] - xs[0];
    let mut acc = 0.0;
    for j in 0..n {
        for l in 0..n {
            if j == l {
                // diagonal limit u'(x)²
                let d = if j == 0 {
                    (u[1] - u[0]) / hx
                } else if j == n - 1 {
                    (u[n - 1] - u[n - 2]) / hx
                } else {
                    (u[j + 1] - u[j - 1]) / (2.0 * hx)
                };
                acc += d * d * hx * hx;
            } else {
                let diff = u[j] - u[l];
                let dx = xs[j] - xs[l];
                acc += diff * diff / (dx * dx) * hx * hx;
            }
        }
    }
    // pairs with one point beyond the window, where u ≡ 0:
    // 2·∫ u(x)² [1/(X_hi−x) + 1/(x−X_lo)] dx
    let x_lo = xs[0] - 0.5 * hx;
    let x_hi = xs[n - 1] + 0.5 * hx;
    let mut tail = 0.0;
    for j in 0..n {
        tail += u[j] * u[j] * (1.0 / (x_hi - xs[j]) + 1.0 / (xs[j] - x_lo)) * hx;
    }
    Ok(EnergyReport::finite(
        (acc + 2.0 * tail) / (2.0 * PI * PI),
        EnergyMethod::Quadrature,
        n,
        0.0,
    ))
}

/// Boundary Dirichlet form from Fourier data: for real uniform samples `u`
/// on the circle (or one period), the Dirichlet energy of the harmonic
/// extension to the disk (equivalently half of the two-sided extension):
/// `Σ_k 4k|c_k|²` with the Nyquist bin weighted once.
pub fn dirichlet_form_fourier(u: &[f64]) -> f64 {
    let m = u.len();
    let coeffs = spectral::fourier_coeffs(&u.iter().map(|&x| c64(x, 0.0)).collect::<Vec<_>>());
    let mut acc = 0.0;
    for k in 1..m / 2 {
        acc += 4.0 * k as f64 * coeffs[k].norm_sqr();
    }
    if m % 2 == 0 {
        acc += (m / 2) as f64 * coeffs[m / 2].norm_sqr();
    }
    acc
}

/// Loop-energy computation routes.
#[derive(Clone, Copy, Debug)]
pub enum LoopMethod {
    /// Bounded Jordan curve via the disk-pair formula.
    Disk,
    /// Curve through ∞ via periodized half-plane maps.
    Line,
    /// Bounded Jordan curve via the rooted chordal limit; `root` indexes
    /// the polyline vertex used as the root.
    Root { root: usize, eps0: f64, levels: usize },
}

/// Loewner energy of a Jordan curve (bounded or through ∞ per method).
pub fn loop_energy(
    curve: &PolylineCurve,
    method: LoopMethod,
    config: &EnergyConfig,
) -> Result<EnergyReport> {
    match method {
        LoopMethod::Disk => {
            if !curve.closed {
                return Err(Error::domain("disk route requires a bounded Jordan curve"));
            }
            let modes = (config.map_resolution / 4).max(16);
            let smooth = SmoothLoop::fit_polyline(curve, modes)?;
            loop_energy_disk(&smooth, config.map_resolution)
        }
        LoopMethod::Line => {
            if !curve.through_infinity {
                return Err(Error::domain("line route requires a curve through ∞"));
            }
            let graph =
                GraphCurve::fit_polyline(curve, config.map_resolution, config.graph_padding)?;
            loop_energy_line(&graph)
        }
        LoopMethod::Root { root, eps0, levels } => {
            if !curve.closed {
                return Err(Error::domain("root route requires a bounded Jordan curve"));
            }
            loop_energy_root(curve, root, eps0, levels, config)
        }
    }
}

/// Disk-formula loop energy of an already-fitted loop.
pub fn loop_energy_disk(smooth: &SmoothLoop, m: usize) -> Result<EnergyReport> {
    let pair = DiskMapsPair::build(smooth, m)?;
    let interior = dirichlet_form_fourier(&pair.interior_trace_log_deriv());
    let exterior = dirichlet_form_fourier(&pair.exterior_trace_log_deriv());
    let value = interior + exterior + 4.0 * pair.grunsky_functional();
    let err = pair.interior.analyticity_error + pair.inverted.analyticity_error;
    Ok(EnergyReport::finite(
        value.max(0.0),
        EnergyMethod::DiskFormula,
        m,
        err,
    ))
}

/// Line-formula loop energy of an already-fitted periodized graph curve.
pub fn loop_energy_line(graph: &GraphCurve) -> Result<EnergyReport> {
    let maps = HalfPlaneMaps::build(graph)?;
    let value = maps.energy_upper() + maps.energy_lower();
    let err = maps.upper.residual + maps.lower_reflected.residual;
    Ok(EnergyReport::finite(
        value,
        EnergyMethod::LineFormula,
        graph.heights.len(),
        err,
    ))
}

/// Rooted-limit loop energy: remove the arc of length `ε` after the root,
/// open the complement slit to ℍ exactly (the removed prefix of a polyline
/// is a straight segment, whose inversion image is a straight ray), and
/// take the chordal energy of the remainder; Richardson-extrapolate over
/// `ε_k = 2^{−k} ε₀`.
pub fn loop_energy_root(
    curve: &PolylineCurve,
    root: usize,
    eps0: f64,
    levels: usize,
    config: &EnergyConfig,
) -> Result<EnergyReport> {
    if !curve.closed {
        return Err(Error::domain("root route requires a closed curve"));
    }
    let n = curve.points.len();
    if root >= n {
        return Err(Error::invalid("root index out of range"));
    }
    if levels < 2 {
        return Err(Error::invalid("need at least two ε levels"));
    }
    // rotate so the root is vertex 0
    let pts: Vec<Complex64> = (0..n).map(|i| curve.points[(root + i) % n]).collect();
    let first_seg = (pts[1] - pts[0]).norm();
    let mut eps = eps0.min(0.9 * first_seg);
    let mut energies = Vec::with_capacity(levels);
    let mut divergent_seen = false;
    let mut resolution = 0usize;
    for _ in 0..levels {
        let report = rooted_chord_energy(&pts, eps, config)?;
        if report.divergent {
            divergent_seen = true;
            break;
        }
        resolution = resolution.max(report.resolution);
        energies.push(report.value);
        eps *= 0.5;
    }
    if divergent_seen {
        return Ok(EnergyReport::divergent(EnergyMethod::RootLimit, resolution, f64::INFINITY));
    }
    let k = energies.len();
    // first-order Richardson: E(ε) ≈ E* + cε ⇒ E* ≈ 2E_{k} − E_{k−1}
    let value = 2.0 * energies[k - 1] - energies[k - 2];
    let err = (energies[k - 1] - energies[k - 2]).abs();
    Ok(EnergyReport::finite(
        value.max(0.0),
        EnergyMethod::RootLimit,
        resolution,
        err,
    ))
}

/// Chordal energy of the loop minus its first `ε` of arclength, in the slit
/// plane opened at the root.
fn rooted_chord_energy(pts: &[Complex64], eps: f64, config: &EnergyConfig) -> Result<EnergyReport> {
    let n = pts.len();
    let root = pts[0];
    // point at arclength ε from the root along the loop
    let mut acc = 0.0;
    let mut cut_index = 1usize;
    let mut z_eps = pts[0];
    for i in 1..=n {
        let a = pts[i - 1];
        let b = pts[i % n];
        let seg = (b - a).norm();
        if acc + seg >= eps {
            let s = (eps - acc) / seg;
            z_eps = a + (b - a) * s;
            cut_index = i;
            break;
        }
        acc += seg;
    }
    // open ℂ̂ ∖ (segment root→z_eps) with the root sent to ∞:
    // ζ = 1/(z − root) maps the prefix onto an exact ray of direction
    // e^{−iθ}; rotate it onto [0,∞) and take the square root branch with
    // arg ∈ [0, 2π) to land in ℍ.
    let theta = (z_eps - root).arg();
    let rot = c64(theta.cos(), theta.sin());
    let zeta_tip = 1.0 / (z_eps - root);
    let open = |z: Complex64| -> Complex64 {
        let eta = rot * (1.0 / (z - root) - zeta_tip);
        let mut arg = eta.arg();
        if arg < 0.0 {
            arg += 2.0 * PI;
        }
        let r = eta.norm().sqrt();
        let half = arg / 2.0;
        c64(r * half.cos(), r * half.sin())
    };
    // Remaining arc from z_eps around the loop toward the root. The square
    // root compresses the geometry near the tip, so refine the first part
    // of the arc with √-graded spacing (uniform steps in the image scale
    // like the square root of arclength from the tip).
    let mut arc = Vec::with_capacity(n - cut_index + 2);
    arc.push(z_eps);
    arc.extend_from_slice(&pts[cut_index..n]);
    let mut cum = vec![0.0; arc.len()];
    for i in 1..arc.len() {
        cum[i] = cum[i - 1] + (arc[i] - arc[i - 1]).norm();
    }
    let total = *cum.last().unwrap();
    let d0 = (50.0 * eps).min(0.3 * total);
    let m_tip = 48usize;
    let at_arclength = |s: f64| -> Complex64 {
        let i = cum.partition_point(|&c| c < s).min(arc.len() - 1).max(1);
        let (s0, s1) = (cum[i - 1], cum[i]);
        let lam = if s1 > s0 { (s - s0) / (s1 - s0) } else { 0.0 };
        arc[i - 1] + (arc[i] - arc[i - 1]) * lam
    };
    let mut refined = vec![z_eps];
    for i in 1..=m_tip {
        let s = d0 * (i as f64 / m_tip as f64).powi(2);
        refined.push(at_arclength(s));
    }
    for i in 1..arc.len() {
        if cum[i] > d0 {
            refined.push(arc[i]);
        }
    }
    let mut mapped = Vec::with_capacity(refined.len());
    mapped.push(c64(0.0, 0.0));
    for &z in &refined[1..] {
        let w = open(z);
        if w.is_finite() && w.norm() < crate::geometry::CLIP_RADIUS {
            mapped.push(w);
        }
    }
    let chord = PolylineCurve::unbounded(crate::geometry::dedup_for_trace(mapped))?;
    chord_energy(&chord, &MarkedDomain::HalfPlane, config)
}

/// Reversibility data for a chord of (ℍ; 0, ∞).
#[derive(Clone, Debug)]
pub struct ReversibilityReport {
    pub forward: EnergyReport,
    pub backward: EnergyReport,
    /// `|I(γ) − I(ι(γ))|`; NaN when both sides are divergent (flags then
    /// agree, which is itself the consistency statement).
    pub gap: f64,
}

/// Continue a chord beyond its tip by zero-energy growth: extend the
/// extracted flow with a constant driver (whose trace continuation leaves
/// the tip smoothly) and append the continuation points up to height
/// `target` above ℝ in the final chart.
pub fn extend_by_constant_growth(
    curve: &PolylineCurve,
    config: &ChordalConfig,
    target: f64,
) -> Result<PolylineCurve> {
    let ex = extract_driver(curve, config)?;
    let w_end = *ex.driver.values.last().unwrap();
    let dt_last = ex
        .driver
        .times
        .windows(2)
        .last()
        .map(|w| w[1] - w[0])
        .unwrap_or(1e-6);
    let mut pts = curve.points.clone();
    let mut h = (2.0 * dt_last.max(1e-12)).sqrt();
    while h < target {
        let z = ex.flow.map_in(c64(w_end, h));
        if z.is_finite() {
            pts.push(z);
        }
        h *= 1.2;
    }
    PolylineCurve::unbounded(crate::geometry::dedup_for_trace(pts))
}

/// Compare the chord energy of `γ` with that of `ι(γ)`, `ι(z) = −1/z`,
/// which swaps the marked ends of (ℍ; 0, ∞).
///
/// Both curves are first continued toward ∞ by zero-energy growth so that
/// the inversion swaps comparable truncations; without this the reversed
/// polyline would start with a corner at the image of the truncated tip.
pub fn reversibility_gap(
    curve: &PolylineCurve,
    config: &EnergyConfig,
) -> Result<ReversibilityReport> {
    let raw = chord_energy(curve, &MarkedDomain::HalfPlane, config)?;
    // Only smooth (non-divergent) chords are extended: their truncation
    // corner would otherwise pollute the reversed value. A refinement-
    // divergent curve is left alone — its roughness survives inversion.
    let (forward, base) = if raw.divergent {
        (raw, curve.clone())
    } else {
        let scale = curve
            .points
            .iter()
            .map(|p| p.norm())
            .fold(0.0f64, f64::max)
            .max(1.0);
        let extended = extend_by_constant_growth(
            curve,
            &config.chordal,
            (300.0 * scale).min(0.5 * crate::geometry::CLIP_RADIUS),
        )?;
        (
            chord_energy(&extended, &MarkedDomain::HalfPlane, config)?,
            extended,
        )
    };
    let mut pts: Vec<Complex64> = base
        .points
        .iter()
        .rev()
        .filter(|z| z.norm() > 1e-12)
        .map(|&z| -1.0 / z)
        .collect();
    // ι(∞) = 0 is the new starting prime end
    pts.insert(0, c64(0.0, 0.0));
    let reversed = PolylineCurve::unbounded(crate::geometry::dedup_for_trace(pts))?;
    let backward = chord_energy(&reversed, &MarkedDomain::HalfPlane, config)?;
    let gap = if forward.divergent || backward.divergent {
        if forward.divergent && backward.divergent {
            f64::NAN
        } else {
            f64::INFINITY
        }
    } else {
        (forward.value - backward.value).abs()
    };
    Ok(ReversibilityReport {
        forward,
        backward,
        gap,
    })
}
