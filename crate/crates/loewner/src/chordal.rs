//! Chordal Loewner evolution in the upper half-plane.
//!
//! The driving function `W : [0,T] → ℝ` and the hull maps
//! `g_t : ℍ∖K_t → ℍ` are related by `∂_t g_t(z) = 2/(g_t(z) − W_t)` with
//! `g_t(z) = z + 2t/z + O(1/z²)` at ∞.
//!
//! Discretization is by slit maps: on each step the driver is frozen and the
//! hull increment is an exact slit. Two step families are provided:
//!
//! - **vertical** (default): the increment is a vertical segment; the step
//!   maps are `z ↦ b + √((z−b)² ± 4Δt)` with `b` the driver value at the
//!   step's right endpoint.
//! - **tilted**: the increment is a straight segment at angle `πα` given by
//!   the power map `u ↦ (u−a)^α (u−b)^{1−α}`; exact for square-root drivers
//!   `W = C√t` with `C = 2(1−2α)/√(α(1−α))`.
//!
//! In both schemes the forward solver places each trace point exactly at a
//! step tip and driver extraction consumes each curve point exactly as a
//! step tip, so extraction followed by the forward solve reproduces the
//! input points to rounding error.

use crate::error::{Error, Result};
use crate::geometry::{c64, PolylineCurve};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

// ---------------------------------------------------------------------------
// Elementary maps
// ---------------------------------------------------------------------------

/// Principal log with boundary values taken as limits from ℍ
/// (`arg ∈ [0, π]`; negative reals get `+iπ` regardless of the sign of a
/// zero imaginary part).
fn ln_upper(z: Complex64) -> Complex64 {
    let z = if z.im == 0.0 { c64(z.re, 0.0) } else { z };
    z.ln()
}

/// The branch of `√(u² + c)` (real `c`) that behaves like `u` at infinity
/// and takes boundary values as limits from the closed upper half-plane.
pub fn continued_sqrt(u: Complex64, c: f64) -> Complex64 {
    let arg = u * u + c;
    // boundary of the principal branch cut: real u with arg on (−∞, 0)
    if u.im == 0.0 && arg.im == 0.0 && arg.re < 0.0 {
        // the limit from ℍ is +i√|arg| on both sides of the cut
        return c64(0.0, (-arg.re).sqrt());
    }
    let v = arg.sqrt();
    if u.re < 0.0 || (u.re == 0.0 && u.im < 0.0) {
        -v
    } else {
        v
    }
}

/// One-step hull map `g` for a constant driver: removes the vertical slit
/// `[b, b + 2i√dt]`, sending its tip to `b`.
pub fn slit_map_out(base: f64, dt: f64, z: Complex64) -> Complex64 {
    base + continued_sqrt(z - base, 4.0 * dt)
}

/// Inverse one-step map `f = g^{-1}`: welds the vertical slit back in,
/// sending `b` to the tip `b + 2i√dt`.
pub fn slit_map_in(base: f64, dt: f64, w: Complex64) -> Complex64 {
    base + continued_sqrt(w - base, -4.0 * dt)
}

/// Parameters of a tilted-slit step. The welding map in the local chart is
/// `m(u) = (u−a)^α (u−b)^{1−α}` with `b < 0 < a`; the fold point `u = 0`
/// maps to the slit tip at angle `πα`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TiltedStep {
    /// Driver value at the step's left (earlier) endpoint.
    pub w_prev: f64,
    /// Driver value at the step's right endpoint.
    pub w_next: f64,
    pub dt: f64,
    pub alpha: f64,
    pub a: f64,
    pub b: f64,
}

impl TiltedStep {
    /// Step from driver increment `dw` over time `dt > 0`.
    pub fn from_driver(w_prev: f64, dw: f64, dt: f64) -> Self {
        let c = dw / dt.sqrt();
        let root = (c * c + 16.0).sqrt();
        let alpha = 0.5 * (1.0 - c / root);
        let s = dt.sqrt() * root;
        TiltedStep {
            w_prev,
            w_next: w_prev + dw,
            dt,
            alpha,
            a: alpha * s,
            b: -(1.0 - alpha) * s,
        }
    }

    /// Step whose tip lands exactly on `w_prev + tau` (`tau ∈ ℍ`).
    pub fn from_tip_offset(w_prev: f64, tau: Complex64) -> Result<Self> {
        let theta = tau.im.atan2(tau.re);
        if !(theta > 0.0 && theta < std::f64::consts::PI) {
            return Err(Error::domain("tilted step tip must lie in ℍ"));
        }
        let alpha = theta / std::f64::consts::PI;
        let c = 2.0 * (1.0 - 2.0 * alpha) / (alpha * (1.0 - alpha)).sqrt();
        let k = alpha.powf(alpha) * (1.0 - alpha).powf(1.0 - alpha);
        let root = (c * c + 16.0).sqrt();
        let sqrt_dt = tau.norm() / (root * k);
        let dt = sqrt_dt * sqrt_dt;
        Ok(TiltedStep {
            w_prev,
            w_next: w_prev + c * sqrt_dt,
            dt,
            alpha,
            a: alpha * tau.norm() / k,
            b: -(1.0 - alpha) * tau.norm() / k,
        })
    }

    fn m(&self, u: Complex64) -> Complex64 {
        (u - self.a).powf(self.alpha) * (u - self.b).powf(1.0 - self.alpha)
    }

    /// Tip of the slit in the earlier chart.
    pub fn tip(&self) -> Complex64 {
        self.w_prev + self.m(c64(0.0, 0.0))
    }

    /// Welding direction (chart at the step's end → chart at its start).
    pub fn map_in(&self, w: Complex64) -> Complex64 {
        self.w_prev + self.m(w - self.w_next)
    }

    /// Unwelding direction. Newton iteration on `α log(u−a) + (1−α) log(u−b)
    /// = log(target)` — the log form keeps a single consistent branch on the
    /// ℍ side and is well conditioned near the slit. Several seeds are tried:
    /// the vertical-slit far-field seed, its mirror image, and the two local
    /// seeds from the fold expansion `m(u) ≈ tip·exp(κu²/2)`.
    pub fn map_out(&self, z: Complex64) -> Result<Complex64> {
        let target = z - self.w_prev;
        if target.norm() < 1e-300 {
            return Ok(c64(self.w_next + self.a, 0.0));
        }
        let log_t = ln_upper(target);
        let far = continued_sqrt(target, 4.0 * self.dt);
        let kappa = -self.alpha / (self.a * self.a) - (1.0 - self.alpha) / (self.b * self.b);
        let local = ((log_t - ln_upper(self.tip() - self.w_prev)) * 2.0 / kappa).sqrt();
        let seeds = [far, c64(-far.re, far.im), local, -local];
        for seed in seeds {
            if let Some(u) = self.newton_log(seed, log_t) {
                let m = self.m(u);
                if (m - target).norm() <= 1e-10 * (1.0 + target.norm()) {
                    let u = if u.im < 0.0 { c64(u.re, 0.0) } else { u };
                    return Ok(self.w_next + u);
                }
            }
        }
        Err(Error::no_convergence("tilted slit inversion", 80, f64::NAN))
    }

    fn newton_log(&self, seed: Complex64, log_t: Complex64) -> Option<Complex64> {
        let mut u = seed;
        if !u.is_finite() {
            return None;
        }
        for _ in 0..80 {
            let ua = u - self.a;
            let ub = u - self.b;
            if ua.norm() < 1e-280 || ub.norm() < 1e-280 {
                u += c64(0.0, 1e-13 * (1.0 + u.norm()));
                continue;
            }
            let l = ln_upper(ua) * self.alpha + ln_upper(ub) * (1.0 - self.alpha);
            let err = l - log_t;
            if err.norm() <= 1e-14 {
                return Some(u);
            }
            let dl = self.alpha / ua + (1.0 - self.alpha) / ub;
            if dl.norm() < 1e-280 {
                return None;
            }
            let mut du = err / dl;
            let mut next = u - du;
            let mut tries = 0;
            while next.im < -1e-12 * (1.0 + u.norm()) && tries < 40 {
                du *= 0.5;
                next = u - du;
                tries += 1;
            }
            if !next.is_finite() {
                return None;
            }
            u = next;
        }
        None
    }
}

/// One discrete Loewner step.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub enum SlitStep {
    Vertical { base: f64, dt: f64 },
    Tilted(TiltedStep),
}

impl SlitStep {
    pub fn dt(&self) -> f64 {
        match self {
            SlitStep::Vertical { dt, .. } => *dt,
            SlitStep::Tilted(t) => t.dt,
        }
    }

    /// Driver value at the step's right endpoint.
    pub fn w_next(&self) -> f64 {
        match self {
            SlitStep::Vertical { base, .. } => *base,
            SlitStep::Tilted(t) => t.w_next,
        }
    }

    /// Slit tip in the chart at the step's start.
    pub fn tip(&self) -> Complex64 {
        match self {
            SlitStep::Vertical { base, dt } => c64(*base, 2.0 * dt.sqrt()),
            SlitStep::Tilted(t) => t.tip(),
        }
    }

    pub fn map_out(&self, z: Complex64) -> Result<Complex64> {
        match self {
            SlitStep::Vertical { base, dt } => Ok(slit_map_out(*base, *dt, z)),
            SlitStep::Tilted(t) => t.map_out(z),
        }
    }

    pub fn map_in(&self, w: Complex64) -> Complex64 {
        match self {
            SlitStep::Vertical { base, dt } => slit_map_in(*base, *dt, w),
            SlitStep::Tilted(t) => t.map_in(w),
        }
    }
}

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

/// A sampled driving function: `values[j] = W(times[j])`, linear in between.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChordalDriver {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl ChordalDriver {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::invalid("driver times/values length mismatch"));
        }
        if times.len() < 2 {
            return Err(Error::invalid("driver needs at least 2 samples"));
        }
        if times[0] != 0.0 {
            return Err(Error::invalid("driver must start at t = 0"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("driver times must be strictly increasing"));
        }
        if times.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("driver contains non-finite samples"));
        }
        Ok(ChordalDriver { times, values })
    }

    pub fn constant(w: f64, t_end: f64, steps: usize) -> Result<Self> {
        Self::from_fn(|_| w, t_end, steps)
    }

    pub fn from_fn(f: impl Fn(f64) -> f64, t_end: f64, steps: usize) -> Result<Self> {
        if !(t_end > 0.0) || steps == 0 {
            return Err(Error::invalid("driver needs t_end > 0 and steps ≥ 1"));
        }
        let times: Vec<f64> = (0..=steps).map(|i| t_end * i as f64 / steps as f64).collect();
        let values = times.iter().map(|&t| f(t)).collect();
        Self::new(times, values)
    }

    /// Square-root driver `W(t) = w0 + c·√t`, whose trace is a straight ray.
    pub fn sqrt_ray(w0: f64, c: f64, t_end: f64, steps: usize) -> Result<Self> {
        Self::from_fn(|t| w0 + c * t.sqrt(), t_end, steps)
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Linear interpolation (clamped to the time range).
    pub fn value_at(&self, t: f64) -> f64 {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.values[0];
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1];
        }
        let i = self.times.partition_point(|&s| s <= t) - 1;
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let frac = (t - t0) / (t1 - t0);
        self.values[i] + (self.values[i + 1] - self.values[i]) * frac
    }

    /// Subdivide intervals (linearly) until every step satisfies
    /// `|ΔW| ≤ max_ratio · √Δt`.
    pub fn refine(&self, max_ratio: f64) -> ChordalDriver {
        let mut times = Vec::with_capacity(self.times.len());
        let mut values = Vec::with_capacity(self.values.len());
        times.push(self.times[0]);
        values.push(self.values[0]);
        for i in 1..self.times.len() {
            let dt = self.times[i] - self.times[i - 1];
            let dw = self.values[i] - self.values[i - 1];
            let ratio = dw.abs() / dt.sqrt();
            // splitting into k parts scales the ratio by 1/√k
            let k = if ratio > max_ratio {
                ((ratio / max_ratio).powi(2).ceil() as usize).clamp(2, 65536)
            } else {
                1
            };
            for j in 1..=k {
                let f = j as f64 / k as f64;
                times.push(self.times[i - 1] + dt * f);
                values.push(self.values[i - 1] + dw * f);
            }
        }
        ChordalDriver { times, values }
    }
}

// ---------------------------------------------------------------------------
// Flow = ordered family of slit steps
// ---------------------------------------------------------------------------

/// A discrete chordal Loewner flow: the composition of slit steps.
///
/// `g_T = out_n ∘ … ∘ out_1` maps the hull complement onto ℍ;
/// `f_T = in_1 ∘ … ∘ in_n` is its inverse.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChordalFlow {
    /// `times[0] = 0`; `times[j]` is the capacity after step `j`.
    pub times: Vec<f64>,
    /// Driver value at time 0 (steps carry their own endpoints thereafter).
    pub w0: f64,
    pub steps: Vec<SlitStep>,
}

impl ChordalFlow {
    pub fn capacity(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    /// Effective driver samples (piecewise data at step endpoints).
    pub fn driver(&self) -> ChordalDriver {
        let mut values = Vec::with_capacity(self.steps.len() + 1);
        values.push(self.w0);
        values.extend(self.steps.iter().map(|s| s.w_next()));
        ChordalDriver {
            times: self.times.clone(),
            values,
        }
    }

    /// Full hull map `g_T(z)`.
    pub fn map_out(&self, z: Complex64) -> Result<Complex64> {
        self.map_out_range(0, self.steps.len(), z)
    }

    /// `g` over steps `from..to` (charts `from` → `to`).
    pub fn map_out_range(&self, from: usize, to: usize, z: Complex64) -> Result<Complex64> {
        let mut z = z;
        for step in &self.steps[from..to] {
            z = step.map_out(z)?;
        }
        Ok(z)
    }

    /// Full inverse map `f_T(w)`.
    pub fn map_in(&self, w: Complex64) -> Complex64 {
        self.map_in_prefix(self.steps.len(), w)
    }

    /// `f_{t_j}(w)`: welds in the first `j` steps.
    pub fn map_in_prefix(&self, j: usize, w: Complex64) -> Complex64 {
        let mut w = w;
        for step in self.steps[..j].iter().rev() {
            w = step.map_in(w);
        }
        w
    }

    /// Trace points `γ(t_j)`, `j = 0..n` (the point at `t_0` is the base).
    pub fn trace(&self) -> Vec<Complex64> {
        let n = self.steps.len();
        let mut pts = Vec::with_capacity(n + 1);
        pts.push(c64(self.w0, 0.0));
        let rest: Vec<Complex64> = (1..=n)
            .into_par_iter()
            .map(|j| self.map_in_prefix(j - 1, self.steps[j - 1].tip()))
            .collect();
        pts.extend(rest);
        pts
    }

    /// Numerical derivative `f_T'(w)` by central differences at interior
    /// points (step `h` relative to |w|).
    pub fn map_in_derivative(&self, w: Complex64, h: f64) -> Complex64 {
        let hh = h * (1.0 + w.norm());
        let d1 = self.map_in(w + c64(hh, 0.0)) - self.map_in(w - c64(hh, 0.0));
        d1 / c64(2.0 * hh, 0.0)
    }
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Which slit family discretizes each step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepScheme {
    Vertical,
    Tilted,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ChordalConfig {
    /// Refinement threshold on `|ΔW|/√Δt` per step.
    pub max_ratio: f64,
    pub scheme: StepScheme,
    /// Extraction stops (with a truncation flag) when a transformed curve
    /// point's height falls below this fraction of the curve scale.
    pub degeneracy_floor: f64,
    /// Cap on per-segment subdivision depth during extraction.
    pub max_subdivision: u32,
}

impl Default for ChordalConfig {
    fn default() -> Self {
        ChordalConfig {
            max_ratio: 1.0,
            scheme: StepScheme::Vertical,
            degeneracy_floor: 1e-9,
            max_subdivision: 12,
        }
    }
}

// ---------------------------------------------------------------------------
// Forward solve
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct ChordalSolution {
    pub flow: ChordalFlow,
    /// Trace curve; `trace.points[j]` corresponds to `flow.times[j]`.
    pub trace: PolylineCurve,
}

/// Solve the chordal equation for a sampled driver: builds the discrete flow
/// (refining the driver until `|ΔW| ≤ max_ratio·√Δt` per step) and returns
/// the trace.
pub fn solve_forward(driver: &ChordalDriver, config: &ChordalConfig) -> Result<ChordalSolution> {
    let refined = driver.refine(config.max_ratio);
    let n = refined.times.len() - 1;
    let mut steps = Vec::with_capacity(n);
    for j in 1..=n {
        let dt = refined.times[j] - refined.times[j - 1];
        let dw = refined.values[j] - refined.values[j - 1];
        let step = match config.scheme {
            StepScheme::Vertical => SlitStep::Vertical {
                base: refined.values[j],
                dt,
            },
            StepScheme::Tilted => {
                if dw.abs() < 1e-14 * dt.sqrt() {
                    SlitStep::Vertical {
                        base: refined.values[j],
                        dt,
                    }
                } else {
                    SlitStep::Tilted(TiltedStep::from_driver(refined.values[j - 1], dw, dt))
                }
            }
        };
        steps.push(step);
    }
    let flow = ChordalFlow {
        times: refined.times.clone(),
        w0: refined.values[0],
        steps,
    };
    // index alignment trace.points[j] ↔ flow.times[j] is part of the contract
    let trace = PolylineCurve {
        closed: false,
        through_infinity: false,
        points: flow.trace(),
    };
    Ok(ChordalSolution { flow, trace })
}

// ---------------------------------------------------------------------------
// Driver extraction (inverse problem)
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct ExtractedDriver {
    pub driver: ChordalDriver,
    pub flow: ChordalFlow,
    /// Subdivision depth of each consumed step's tip (0 = input point).
    pub depths: Vec<u32>,
    /// Set when extraction stopped early because the transformed curve
    /// reached the boundary (the remaining piece only grows the hull).
    pub truncated: Option<String>,
}

/// Recover the driving function of a simple curve in ℍ started on ℝ.
///
/// Each curve point is consumed exactly as the tip of one slit step, so
/// [`solve_forward`] on the returned driver reproduces the input points to
/// rounding error. With the vertical scheme, segments whose step ratio
/// `|ΔW|/√Δt` exceeds `max_ratio` are subdivided (in the current chart) up
/// to `max_subdivision` levels.
pub fn extract_driver(curve: &PolylineCurve, config: &ChordalConfig) -> Result<ExtractedDriver> {
    if curve.closed {
        return Err(Error::domain("cannot extract a driver from a closed curve"));
    }
    let pts = &curve.points;
    let scale = pts.iter().map(|p| p.norm()).fold(0.0f64, f64::max).max(1.0);
    let base = pts[0];
    if base.im.abs() > 1e-9 * scale {
        return Err(Error::domain(
            "curve must start on the real axis for driver extraction",
        ));
    }
    let floor = config.degeneracy_floor * scale;
    let mut pending: VecDeque<(Complex64, u32)> =
        pts[1..].iter().map(|&p| (p, 0u32)).collect();
    let mut w_prev = base.re;
    let mut t = 0.0;
    let mut times = vec![0.0];
    let mut steps: Vec<SlitStep> = Vec::with_capacity(pending.len());
    let mut depths: Vec<u32> = Vec::with_capacity(pending.len());
    let mut truncated = None;

    while let Some((w, depth)) = pending.pop_front() {
        if w.im <= floor {
            truncated = Some(format!(
                "transformed curve point reached the boundary at capacity {t:.6e}; \
                 remainder treated as hull-only growth"
            ));
            break;
        }
        let step = match config.scheme {
            StepScheme::Tilted => {
                let tau = w - c64(w_prev, 0.0);
                SlitStep::Tilted(TiltedStep::from_tip_offset(w_prev, tau)?)
            }
            StepScheme::Vertical => {
                let dt = w.im * w.im / 4.0;
                let ratio = (w.re - w_prev).abs() / dt.sqrt();
                if ratio > config.max_ratio && depth < config.max_subdivision {
                    // halve the step in the current chart
                    let mid = 0.5 * (c64(w_prev, 0.0) + w);
                    pending.push_front((w, depth + 1));
                    pending.push_front((mid, depth + 1));
                    continue;
                }
                SlitStep::Vertical { base: w.re, dt }
            }
        };
        // map the remaining points into the next chart
        for (p, _) in pending.iter_mut() {
            *p = step.map_out(*p)?;
        }
        t += step.dt();
        times.push(t);
        w_prev = step.w_next();
        steps.push(step);
        depths.push(depth);
    }

    if steps.is_empty() {
        return Err(Error::degeneracy(
            "curve has no resolvable growth above the boundary",
            Some(0.0),
        ));
    }
    let flow = ChordalFlow {
        times,
        w0: base.re,
        steps,
    };
    Ok(ExtractedDriver {
        driver: flow.driver(),
        flow,
        depths,
        truncated,
    })
}

/// Half-plane capacity of a curve grown from ℝ (final Loewner time).
pub fn halfplane_capacity(curve: &PolylineCurve, config: &ChordalConfig) -> Result<f64> {
    Ok(extract_driver(curve, config)?.flow.capacity())
}
