//! Identities linking loop energy to plane Dirichlet energies.
//!
//! For a curve γ through ∞ with half-plane maps `f : ℍ →` (above γ) and
//! `g : ℍ* →` (below γ), three identities are implemented:
//!
//! * **winding / flow-line** — the tangent-angle function τ along γ has a
//!   minimal (componentwise harmonic) extension 𝒫[τ] to the plane, and
//!   `I(γ) = 𝒟_ℂ(𝒫[τ])`; moreover `𝒫[τ]∘f = arg f'`, so the extension is
//!   computable from the maps alone. γ is recovered from 𝒫[τ] as the flow
//!   line `γ' = e^{i𝒫[τ](γ)}` through any of its points.
//! * **cutting** — for any finite-energy φ on ℂ,
//!   `𝒟_ℂ(φ) + I(γ) = 𝒟_ℍ(φ∘f + log|f'|) + 𝒟_ℍ*(φ∘g + log|g'|)`.
//! * **complex-valued cutting** — for complex ψ with γ a flow line of
//!   `e^{i Im ψ}`, `𝒟_ℂ(ψ) = 𝒟_ℍ(ψ∘f + (log f')*) + 𝒟_ℍ*(ψ∘g + (log g')*)`
//!   (`*` = complex conjugate).
//!
//! The half-plane Dirichlet energies split into a spectrally exact part
//! (`Σ k|d_k|²` from the log-derivative coefficients) plus a compactly
//! supported correction handled by quadrature, so the identities can be
//! verified without integrating over unbounded regions.

use crate::conformal::HalfPlaneMaps;
use crate::error::{Error, Result};
use crate::geometry::{c64, GraphCurve, GridField, PolylineCurve};
use crate::spectral;
use num_complex::Complex64;
use std::f64::consts::PI;

use super::dirichlet_form_fourier;

// ---------------------------------------------------------------------------
// Winding function along and off the curve
// ---------------------------------------------------------------------------

/// Tangent angles of a curve through ∞ at boundary-correspondence points,
/// computed from the half-plane maps (`τ(f(x)) = arg f'(x)`).
#[derive(Clone, Debug)]
pub struct WindingTrace {
    /// Points on the curve (plane coordinates).
    pub points: Vec<Complex64>,
    /// Winding (tangent angle) at each point.
    pub angles: Vec<f64>,
    /// Set when the height data carries significant unresolved high-frequency
    /// content (corners), which makes the trace unreliable.
    pub warning: Option<String>,
}

/// Winding along the curve via the upper map's boundary derivative.
pub fn winding_trace(graph: &GraphCurve) -> Result<WindingTrace> {
    let maps = HalfPlaneMaps::build(graph)?;
    let xs = graph.grid_xs();
    let mut points = Vec::with_capacity(xs.len());
    let mut angles = Vec::with_capacity(xs.len());
    for &x in &xs {
        let z = c64(x, 0.0);
        points.push(maps.eval_upper(z));
        angles.push(maps.deriv_upper(z).arg());
    }
    Ok(WindingTrace {
        points,
        angles,
        warning: corner_warning(graph),
    })
}

fn corner_warning(graph: &GraphCurve) -> Option<String> {
    let m = graph.heights.len();
    let b_hat = spectral::fourier_coeffs(
        &graph.heights.iter().map(|&h| c64(h, 0.0)).collect::<Vec<_>>(),
    );
    // slope spectrum k²|b̂_k|²: a smooth curve decays spectrally, a corner
    // only algebraically, leaving a visible top-quartile tail
    let mut total = 0.0;
    let mut tail = 0.0;
    for i in 1..m {
        let k = spectral::mode_of(i, m).unsigned_abs() as f64;
        let e = k * k * b_hat[i].norm_sqr();
        total += e;
        if k as usize > (3 * m) / 8 {
            tail += e;
        }
    }
    if total > 0.0 && tail > 1e-6 * total {
        Some(format!(
            "unresolved slope content in the top frequency quartile \
             (fraction {:.2e}); the curve may have corners",
            tail / total
        ))
    } else {
        None
    }
}

/// The minimal plane extension of the winding, `𝒫[τ]`, sampled on a
/// rectangular grid (plane coordinates). Above the curve the value is
/// `arg f'(f^{-1}(·))`, below it `arg g'(g^{-1}(·))`; nodes outside the
/// central 90% of the period window are masked out.
pub fn winding_extension_field(
    maps: &HalfPlaneMaps,
    x0: f64,
    y0: f64,
    h: f64,
    nx: usize,
    ny: usize,
) -> GridField {
    let theta = maps.graph.rotation;
    let rot_inv = c64(theta.cos(), -theta.sin());
    let omega = 2.0 * PI / maps.graph.window;
    let b_hat = spectral::fourier_coeffs(
        &maps
            .graph
            .heights
            .iter()
            .map(|&v| c64(v, 0.0))
            .collect::<Vec<_>>(),
    );
    let b_at = |u: f64| spectral::eval_series(&b_hat, omega * u + PI).re;
    let mut values = vec![0.0; nx * ny];
    let mut mask = vec![false; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let p = c64(x0 + i as f64 * h, y0 + j as f64 * h);
            let w = rot_inv * (p - maps.graph.anchor);
            if w.re.abs() > 0.45 * maps.graph.window {
                continue;
            }
            let above = w.im >= b_at(w.re);
            let val = if above {
                maps.upper
                    .invert(w)
                    .map(|z| theta + maps.upper.deriv(z).arg())
            } else {
                // lower map in local coordinates: g(z) = conj(f̃(z̄)), so
                // arg g' = −arg f̃' at the reflected preimage
                maps.lower_reflected
                    .invert(w.conj())
                    .map(|z| theta - maps.lower_reflected.deriv(z).arg())
            };
            if let Ok(v) = val {
                values[j * nx + i] = v;
                mask[j * nx + i] = true;
            }
        }
    }
    GridField {
        x0,
        y0,
        h,
        nx,
        ny,
        values,
        mask,
    }
}

// ---------------------------------------------------------------------------
// Flow-line identity
// ---------------------------------------------------------------------------

/// Both sides of `I(γ) = 𝒟_ℂ(𝒫[τ])`, computed along independent data paths.
#[derive(Clone, Debug)]
pub struct FlowlineIdentityReport {
    /// `𝒟_ℍ(log|f'|) + 𝒟_ℍ*(log|g'|)` from the maps' log-derivative spectra.
    pub line_route: f64,
    /// `𝒟` of the harmonic extensions of the *directly measured* tangent
    /// angles pulled back to the boundary grids of both half-planes.
    pub winding_route: f64,
}

impl FlowlineIdentityReport {
    pub fn gap(&self) -> f64 {
        (self.line_route - self.winding_route).abs()
    }
}

/// Verify the flow-line identity on a graph curve: the loop energy (line
/// route) against the plane energy of the extension of the direct winding.
pub fn flowline_identity_gap(graph: &GraphCurve) -> Result<FlowlineIdentityReport> {
    let maps = HalfPlaneMaps::build(graph)?;
    let line_route = maps.energy_upper() + maps.energy_lower();
    let omega = 2.0 * PI / graph.window;
    let b_hat = spectral::fourier_coeffs(
        &graph.heights.iter().map(|&v| c64(v, 0.0)).collect::<Vec<_>>(),
    );
    // direct tangent angle at graph coordinate u: atan(b'(u)); the constant
    // frame rotation carries no energy
    let slope_at =
        |u: f64| omega * spectral::eval_series_deriv(&b_hat, omega * u + PI).re;
    let xs = graph.grid_xs();
    let tau_upper: Vec<f64> = xs
        .iter()
        .map(|&x| slope_at(maps.upper.eval(c64(x, 0.0)).re).atan())
        .collect();
    let tau_lower: Vec<f64> = xs
        .iter()
        .map(|&x| slope_at(maps.lower_reflected.eval(c64(x, 0.0)).re).atan())
        .collect();
    let winding_route = dirichlet_form_fourier(&tau_upper) + dirichlet_form_fourier(&tau_lower);
    Ok(FlowlineIdentityReport {
        line_route,
        winding_route,
    })
}

// ---------------------------------------------------------------------------
// Flow-line ODE
// ---------------------------------------------------------------------------

/// A flow line `γ' = e^{iφ(γ)}` integrated in both directions from a point.
#[derive(Clone, Debug)]
pub struct FlowlineResult {
    pub curve: PolylineCurve,
    /// The integration left the field's domain in the forward (backward)
    /// direction before exhausting its step budget — the curve is truncated.
    pub exited_forward: bool,
    pub exited_backward: bool,
}

/// Integrate the flow line of the angle field `phi` (RK4, arclength step
/// `ds`, at most `max_steps` each way). `phi` returns `None` outside its
/// domain, which stops that direction and marks it as exited.
pub fn flowline_solve_fn(
    phi: impl Fn(Complex64) -> Option<f64>,
    start: Complex64,
    ds: f64,
    max_steps: usize,
) -> Result<FlowlineResult> {
    if !(ds > 0.0) || max_steps == 0 {
        return Err(Error::invalid("flow line needs ds > 0 and steps ≥ 1"));
    }
    let dir = |z: Complex64, sign: f64| -> Option<Complex64> {
        let a = phi(z)?;
        Some(sign * c64(a.cos(), a.sin()))
    };
    let march = |sign: f64| -> (Vec<Complex64>, bool) {
        let mut pts = Vec::new();
        let mut z = start;
        let mut exited = false;
        for _ in 0..max_steps {
            let step = (|| {
                let k1 = dir(z, sign)?;
                let k2 = dir(z + 0.5 * ds * k1, sign)?;
                let k3 = dir(z + 0.5 * ds * k2, sign)?;
                let k4 = dir(z + ds * k3, sign)?;
                Some(ds / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
            })();
            match step {
                Some(dz) => {
                    z += dz;
                    pts.push(z);
                }
                None => {
                    exited = true;
                    break;
                }
            }
        }
        (pts, exited)
    };
    let (forward, exited_forward) = march(1.0);
    let (backward, exited_backward) = march(-1.0);
    if phi(start).is_none() {
        return Err(Error::domain("flow line start is outside the field domain"));
    }
    let mut pts: Vec<Complex64> = backward.into_iter().rev().collect();
    pts.push(start);
    pts.extend(forward);
    let curve = PolylineCurve::unbounded(crate::geometry::dedup_for_trace(pts))?;
    Ok(FlowlineResult {
        curve,
        exited_forward,
        exited_backward,
    })
}

/// Flow line of a gridded angle field (bilinear interpolation).
pub fn flowline_solve(
    field: &GridField,
    start: Complex64,
    ds: f64,
    max_steps: usize,
) -> Result<FlowlineResult> {
    flowline_solve_fn(|z| field.sample(z), start, ds, max_steps)
}

// ---------------------------------------------------------------------------
// Cutting identity
// ---------------------------------------------------------------------------

/// A real-valued finite-energy function on the plane, given with its
/// gradient `φ_x + iφ_y` and a disk outside which it vanishes.
pub struct PlaneFunction<'a> {
    pub value: &'a dyn Fn(Complex64) -> f64,
    pub gradient: &'a dyn Fn(Complex64) -> Complex64,
    pub support_center: Complex64,
    pub support_radius: f64,
}

impl PlaneFunction<'_> {
    /// `𝒟_ℂ(φ) = (1/π)∬|∇φ|²` by midpoint quadrature over the support box.
    pub fn plane_energy(&self, n: usize) -> f64 {
        let r = self.support_radius;
        let h = 2.0 * r / n as f64;
        let mut acc = 0.0;
        for j in 0..n {
            for i in 0..n {
                let z = self.support_center
                    + c64(-r + (i as f64 + 0.5) * h, -r + (j as f64 + 0.5) * h);
                acc += (self.gradient)(z).norm_sqr();
            }
        }
        acc * h * h / PI
    }
}

/// The four energies in the cutting identity
/// `𝒟_ℂ(φ) + I(γ) = 𝒟_ℍ(u) + 𝒟_ℍ*(v)`.
#[derive(Clone, Debug)]
pub struct CuttingReport {
    /// `𝒟_ℂ(φ)`.
    pub plane: f64,
    /// `I(γ)` by the line route.
    pub loop_energy: f64,
    /// `𝒟_ℍ(φ∘f + log|f'|)`.
    pub upper: f64,
    /// `𝒟_ℍ*(φ∘g + log|g'|)`.
    pub lower: f64,
}

impl CuttingReport {
    /// Signed identity defect `(𝒟_ℂ(φ) + I) − (𝒟_ℍ(u) + 𝒟_ℍ*(v))`.
    pub fn gap(&self) -> f64 {
        self.plane + self.loop_energy - self.upper - self.lower
    }

    /// Defect relative to the identity's total scale.
    pub fn relative_gap(&self) -> f64 {
        self.gap().abs() / (self.plane + self.loop_energy).max(1e-12)
    }

    /// Welding-bound slack `𝒟_ℍ(u) + 𝒟_ℍ*(v) − I(γ) ≥ 0` (equals `𝒟_ℂ(φ)`
    /// when the weld data comes from an actual plane function).
    pub fn dissipation(&self) -> f64 {
        self.upper + self.lower - self.loop_energy
    }
}

/// Quadrature controls for the half-plane correction integrals.
#[derive(Clone, Copy, Debug)]
pub struct StripQuadrature {
    /// Vertical spacing of the midpoint rows.
    pub dy: f64,
    /// Extra height above the support, to let the map perturbation decay.
    pub margin: f64,
}

impl Default for StripQuadrature {
    fn default() -> Self {
        StripQuadrature {
            dy: 0.02,
            margin: 1.0,
        }
    }
}

/// Evaluate all four energies of the cutting identity for a graph curve
/// and a compactly supported φ.
pub fn cutting_identity_gap(
    graph: &GraphCurve,
    phi: &PlaneFunction<'_>,
    quad: &StripQuadrature,
) -> Result<CuttingReport> {
    let maps = HalfPlaneMaps::build(graph)?;
    let loop_energy = maps.energy_upper() + maps.energy_lower();
    let plane = phi.plane_energy(512);
    let rot = c64(graph.rotation.cos(), graph.rotation.sin());

    // 𝒟_ℍ(φ∘F + log|f'|) = Σk|d_k|² + (1/π)∬ (|conj(g)F' + f''/f'|² − |f''/f'|²),
    // the correction being supported where F lands in supp φ.
    let correction = |map: &crate::conformal::PeriodizedMap, lower: bool| -> f64 {
        let m = maps.graph.heights.len();
        let hx = graph.window / m as f64;
        let y_top = phi.support_center.im.abs()
            + phi.support_radius
            + map.c0.norm()
            + map.coeffs.iter().map(|c| c.norm()).sum::<f64>()
            + quad.margin;
        let ny = (y_top / quad.dy).ceil() as usize;
        let mut acc = 0.0;
        for jy in 0..ny {
            let y = (jy as f64 + 0.5) * quad.dy;
            for ix in 0..m {
                let x = -graph.window / 2.0 + ix as f64 * hx;
                let z = c64(x, y);
                let d1 = map.deriv(z);
                let b = map.deriv2(z) / d1;
                let plane_pt = if lower {
                    graph.anchor + rot * map.eval(z).conj()
                } else {
                    graph.anchor + rot * map.eval(z)
                };
                if (plane_pt - phi.support_center).norm() > phi.support_radius {
                    continue;
                }
                let g = (phi.gradient)(plane_pt);
                let a = if lower {
                    // 2∂(φ∘C) with anti-holomorphic C = anchor + rot·conj(f̃)
                    g * rot.conj() * d1
                } else {
                    g.conj() * rot * d1
                };
                acc += (a + b).norm_sqr() - b.norm_sqr();
            }
        }
        acc * hx * quad.dy / PI
    };
    let upper = maps.energy_upper() + correction(&maps.upper, false);
    let lower = maps.energy_lower() + correction(&maps.lower_reflected, true);
    Ok(CuttingReport {
        plane,
        loop_energy,
        upper,
        lower,
    })
}

// ---------------------------------------------------------------------------
// Complex-valued identity
// ---------------------------------------------------------------------------

/// A complex-valued finite-energy function on the plane, given with its
/// Wirtinger derivatives and a disk outside which it vanishes.
pub struct ComplexPlaneFunction<'a> {
    pub value: &'a dyn Fn(Complex64) -> Complex64,
    pub d_dz: &'a dyn Fn(Complex64) -> Complex64,
    pub d_dzbar: &'a dyn Fn(Complex64) -> Complex64,
    pub support_center: Complex64,
    pub support_radius: f64,
}

impl ComplexPlaneFunction<'_> {
    /// `𝒟_ℂ(ψ) = (2/π)∬(|∂_z ψ|² + |∂_z̄ ψ|²)` over the support box.
    pub fn plane_energy(&self, n: usize) -> f64 {
        let r = self.support_radius;
        let h = 2.0 * r / n as f64;
        let mut acc = 0.0;
        for j in 0..n {
            for i in 0..n {
                let z = self.support_center
                    + c64(-r + (i as f64 + 0.5) * h, -r + (j as f64 + 0.5) * h);
                acc += (self.d_dz)(z).norm_sqr() + (self.d_dzbar)(z).norm_sqr();
            }
        }
        2.0 * acc * h * h / PI
    }
}

/// The three energies in `𝒟_ℂ(ψ) = 𝒟_ℍ(ζ) + 𝒟_ℍ*(ξ)` with
/// `ζ = ψ∘f + (log f')*` and `ξ = ψ∘g + (log g')*`.
#[derive(Clone, Debug)]
pub struct ComplexIdentityReport {
    pub plane: f64,
    pub upper: f64,
    pub lower: f64,
}

impl ComplexIdentityReport {
    pub fn gap(&self) -> f64 {
        self.plane - self.upper - self.lower
    }

    pub fn relative_gap(&self) -> f64 {
        self.gap().abs() / self.plane.max(1e-12)
    }
}

/// Evaluate both sides of the complex identity. Fails with a domain error
/// unless γ is (numerically) a flow line of `e^{i Im ψ}`: the tangent angle
/// along the curve must match `Im ψ` there.
pub fn complex_identity_gap(
    graph: &GraphCurve,
    psi: &ComplexPlaneFunction<'_>,
    quad: &StripQuadrature,
) -> Result<ComplexIdentityReport> {
    // precondition: τ = Im ψ along the curve
    let omega = 2.0 * PI / graph.window;
    let b_hat = spectral::fourier_coeffs(
        &graph.heights.iter().map(|&v| c64(v, 0.0)).collect::<Vec<_>>(),
    );
    let mut worst = 0.0f64;
    let m = graph.heights.len();
    for j in 0..m {
        let u = -graph.window / 2.0 + graph.window * j as f64 / m as f64;
        if u.abs() > 0.4 * graph.window {
            continue;
        }
        let tau = graph.rotation
            + (omega * spectral::eval_series_deriv(&b_hat, omega * u + PI).re).atan();
        let im_psi = (psi.value)(graph.eval(u)).im;
        let mut d = im_psi - tau;
        while d > PI {
            d -= 2.0 * PI;
        }
        while d < -PI {
            d += 2.0 * PI;
        }
        worst = worst.max(d.abs());
    }
    if worst > 0.05 {
        return Err(Error::domain(
            "curve is not a flow line of e^{i·Im ψ} (tangent-angle mismatch)",
        ));
    }

    let maps = HalfPlaneMaps::build(graph)?;
    let plane = psi.plane_energy(512);
    let rot = c64(graph.rotation.cos(), graph.rotation.sin());
    // 𝒟_ℍ(ψ∘F + (log f')*) = 2Σk|d_k|²
    //   + (2/π)∬ (|ψ_w(F)|²|f'|² + |ψ_w̄(F)·conj(F') + conj(f''/f')|² − |f''/f'|²)
    // and mirrored combinations on the lower side.
    let correction = |map: &crate::conformal::PeriodizedMap, lower: bool| -> f64 {
        let hx = graph.window / m as f64;
        let y_top = psi.support_center.im.abs()
            + psi.support_radius
            + map.c0.norm()
            + map.coeffs.iter().map(|c| c.norm()).sum::<f64>()
            + quad.margin;
        let ny = (y_top / quad.dy).ceil() as usize;
        let mut acc = 0.0;
        for jy in 0..ny {
            let y = (jy as f64 + 0.5) * quad.dy;
            for ix in 0..m {
                let x = -graph.window / 2.0 + ix as f64 * hx;
                let z = c64(x, y);
                let d1 = map.deriv(z);
                let b = map.deriv2(z) / d1;
                let plane_pt = if lower {
                    graph.anchor + rot * map.eval(z).conj()
                } else {
                    graph.anchor + rot * map.eval(z)
                };
                if (plane_pt - psi.support_center).norm() > psi.support_radius {
                    continue;
                }
                let pw = (psi.d_dz)(plane_pt);
                let pwb = (psi.d_dzbar)(plane_pt);
                if lower {
                    // reflected field ξ̃(ζ) = ψ(C(ζ)) + log f̃'(ζ) − iθ with
                    // anti-holomorphic C: the log term joins the ∂ζ group
                    let holo = pwb * rot.conj() * d1;
                    let anti = pw * (rot.conj() * d1).conj();
                    acc += (holo + b).norm_sqr() + anti.norm_sqr() - b.norm_sqr();
                } else {
                    // ζ(z) = ψ(F(z)) + conj(log f'): the log term joins ∂z̄
                    let holo = pw * rot * d1;
                    let anti = pwb * (rot * d1).conj();
                    acc += holo.norm_sqr() + (anti + b.conj()).norm_sqr() - b.norm_sqr();
                }
            }
        }
        2.0 * acc * hx * quad.dy / PI
    };
    let upper = 2.0 * maps.energy_upper() + correction(&maps.upper, false);
    let lower = 2.0 * maps.energy_lower() + correction(&maps.lower_reflected, true);
    Ok(ComplexIdentityReport {
        plane,
        upper,
        lower,
    })
}

// ---------------------------------------------------------------------------
// Boundary traces of grid fields
// ---------------------------------------------------------------------------

/// Boundary values of a grid field along a set of points, by averages over
/// shrinking balls restricted to the field's mask (one-sided when the mask
/// stops at the curve). Radii are halved from `r0` down to about 2.5 grid
/// cells; the last two averages are Richardson-combined. `None` where no
/// masked nodes fall inside the smallest ball.
pub fn jonsson_wallin_trace(
    field: &GridField,
    points: &[Complex64],
    r0: f64,
) -> Vec<Option<f64>> {
    let r_min = 2.5 * field.h;
    points
        .iter()
        .map(|&p| {
            let mut averages: Vec<f64> = Vec::new();
            let mut r = r0.max(r_min);
            loop {
                if let Some(a) = ball_average(field, p, r) {
                    averages.push(a);
                }
                if r <= r_min {
                    break;
                }
                r = (r / 2.0).max(r_min);
            }
            match averages.len() {
                0 => None,
                1 => Some(averages[0]),
                k => Some(2.0 * averages[k - 1] - averages[k - 2]),
            }
        })
        .collect()
}

fn ball_average(field: &GridField, p: Complex64, r: f64) -> Option<f64> {
    let i0 = (((p.re - r - field.x0) / field.h).floor().max(0.0)) as usize;
    let j0 = (((p.im - r - field.y0) / field.h).floor().max(0.0)) as usize;
    let i1 = ((((p.re + r - field.x0) / field.h).ceil()) as usize).min(field.nx.saturating_sub(1));
    let j1 = ((((p.im + r - field.y0) / field.h).ceil()) as usize).min(field.ny.saturating_sub(1));
    let mut acc = 0.0;
    let mut count = 0usize;
    for j in j0..=j1 {
        for i in i0..=i1 {
            if (field.node(i, j) - p).norm() <= r {
                if let Some(v) = field.at(i, j) {
                    acc += v;
                    count += 1;
                }
            }
        }
    }
    if count >= 3 {
        Some(acc / count as f64)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GraphCurve;

    fn bump_graph(amp: f64, window: f64, m: usize) -> GraphCurve {
        GraphCurve::from_fn(window, m, move |x| amp * (-x * x / 2.0).exp())
    }

    #[test]
    fn winding_trace_flat_and_tilted_lines() {
        let flat = GraphCurve::flat(20.0, 64);
        let tr = winding_trace(&flat).unwrap();
        assert!(tr.angles.iter().all(|a| a.abs() < 1e-12));
        assert!(tr.warning.is_none());
        let mut tilted = GraphCurve::flat(20.0, 64);
        tilted.rotation = 0.8;
        let tr = winding_trace(&tilted).unwrap();
        assert!(tr.angles.iter().all(|a| (a - 0.8).abs() < 1e-12));
    }

    #[test]
    fn winding_trace_matches_direct_slopes_on_bump() {
        let graph = bump_graph(0.5, 40.0, 512);
        let tr = winding_trace(&graph).unwrap();
        assert!(tr.warning.is_none());
        // direct check: at each traced point, compare against atan(b')
        // computed from the height series at that point's x-coordinate
        let b_hat = spectral::fourier_coeffs(
            &graph.heights.iter().map(|&v| c64(v, 0.0)).collect::<Vec<_>>(),
        );
        let omega = 2.0 * PI / graph.window;
        let mut worst = 0.0f64;
        for (p, a) in tr.points.iter().zip(&tr.angles) {
            if p.re.abs() > 10.0 {
                continue;
            }
            let slope = omega * spectral::eval_series_deriv(&b_hat, omega * p.re + PI).re;
            worst = worst.max((a - slope.atan()).abs());
        }
        assert!(worst < 1e-2, "worst winding mismatch {worst}");
    }

    #[test]
    fn winding_trace_warns_on_corner() {
        // triangular bump has a genuine corner
        let graph = GraphCurve::from_fn(20.0, 256, |x| (1.0 - x.abs()).max(0.0));
        let tr = winding_trace(&graph).unwrap();
        assert!(tr.warning.is_some());
    }

    #[test]
    fn flowline_identity_on_bumps() {
        for (amp, window) in [(0.4, 30.0), (0.8, 40.0)] {
            let graph = bump_graph(amp, window, 512);
            let rep = flowline_identity_gap(&graph).unwrap();
            assert!(
                rep.gap() <= 0.03 * rep.line_route.max(1e-9),
                "amp {amp}: line {} vs winding {}",
                rep.line_route,
                rep.winding_route
            );
        }
    }

    #[test]
    fn flowline_identity_scaling_invariance() {
        // the loop energy is scale invariant; both routes should agree on a
        // rescaled copy of the same curve
        let graph = bump_graph(0.5, 30.0, 512);
        let scaled = GraphCurve::from_fn(60.0, 512, |x| {
            2.0 * 0.5 * (-(x / 2.0) * (x / 2.0) / 2.0).exp()
        });
        let a = flowline_identity_gap(&graph).unwrap();
        let b = flowline_identity_gap(&scaled).unwrap();
        assert!(
            (a.line_route - b.line_route).abs() < 0.01 * a.line_route,
            "scaling broke the line route: {} vs {}",
            a.line_route,
            b.line_route
        );
        assert!(b.gap() <= 0.03 * b.line_route);
    }

    #[test]
    fn flowline_solver_straight_fields() {
        // φ ≡ 0: horizontal line
        let res = flowline_solve_fn(|_| Some(0.0), c64(0.0, 0.5), 0.01, 500).unwrap();
        assert!(!res.exited_forward && !res.exited_backward);
        for p in &res.curve.points {
            assert!((p.im - 0.5).abs() < 1e-12);
        }
        // φ ≡ θ: straight line at angle θ through the start
        let theta = 0.4f64;
        let res = flowline_solve_fn(|_| Some(theta), c64(0.0, 0.0), 0.01, 500).unwrap();
        for p in &res.curve.points {
            assert!((p.im - p.re * theta.tan()).abs() < 1e-10, "point {p}");
        }
    }

    #[test]
    fn flowline_self_consistency_on_bump_field() {
        // integrate through a smooth angle bump and check the tangent of the
        // produced polyline matches the field along it
        let phi = |z: Complex64| Some(0.4 * (-z.norm_sqr() / 2.0).exp());
        let res = flowline_solve_fn(phi, c64(-8.0, 0.0), 5e-3, 3200).unwrap();
        let pts = &res.curve.points;
        let mut worst = 0.0f64;
        for i in 1..pts.len() - 1 {
            let tangent = (pts[i + 1] - pts[i - 1]).arg();
            let expected = phi(pts[i]).unwrap();
            worst = worst.max((tangent - expected).abs());
        }
        assert!(worst < 1e-2, "flow line tangent mismatch {worst}");
    }

    #[test]
    fn flowline_exits_masked_field() {
        let field = GridField::from_fn(-1.0, -1.0, 0.05, 41, 41, |_| 0.0, |_| true);
        let res = flowline_solve(&field, c64(0.0, 0.0), 0.01, 10_000).unwrap();
        assert!(res.exited_forward && res.exited_backward);
        // truncated at the box edges
        assert!(res.curve.points.iter().all(|p| p.re.abs() <= 1.0));
    }

    #[test]
    fn flowline_recovers_curve_from_winding_extension() {
        // γ is the flow line of 𝒫[τ] through any of its points: rebuild the
        // curve from the extension field and compare
        let graph = bump_graph(0.5, 30.0, 256);
        let maps = HalfPlaneMaps::build(&graph).unwrap();
        let field = winding_extension_field(&maps, -9.0, -3.0, 0.04, 451, 151);
        let start = graph.eval(0.0);
        let res = flowline_solve(&field, start, 0.01, 850).unwrap();
        let mut worst = 0.0f64;
        for u in [-6.0, -4.0, -2.0, -1.0, 0.5, 1.5, 3.0, 5.0] {
            let target = graph.eval(u);
            let d = res
                .curve
                .points
                .iter()
                .map(|p| (p - target).norm())
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(d);
        }
        assert!(worst < 2e-2, "flow line missed the curve by {worst}");
    }

    #[test]
    fn cutting_identity_flat_curve_with_bump() {
        // γ = ℝ: the identity is the exact splitting of the plane energy
        let graph = GraphCurve::flat(40.0, 256);
        let center = c64(1.0, 0.3);
        let sigma2 = 2.0;
        let value = move |z: Complex64| (-(z - center).norm_sqr() / sigma2).exp();
        let gradient = move |z: Complex64| {
            -2.0 * value(z) * (z - center) / sigma2
        };
        let phi = PlaneFunction {
            value: &value,
            gradient: &gradient,
            support_center: center,
            support_radius: 8.0,
        };
        let rep = cutting_identity_gap(&graph, &phi, &StripQuadrature::default()).unwrap();
        assert!(rep.loop_energy < 1e-20);
        // Gaussian of unit amplitude: 𝒟_ℂ = 1 exactly
        assert!((rep.plane - 1.0).abs() < 5e-3, "plane energy {}", rep.plane);
        assert!(
            rep.relative_gap() < 0.01,
            "flat-curve cutting gap {} (pieces {:?})",
            rep.relative_gap(),
            rep
        );
    }

    #[test]
    fn cutting_identity_bump_curve() {
        let graph = bump_graph(0.5, 40.0, 512);
        // φ ≡ 0 reduces to the tautological line route
        let zero = |_: Complex64| 0.0;
        let zero_grad = |_: Complex64| c64(0.0, 0.0);
        let phi0 = PlaneFunction {
            value: &zero,
            gradient: &zero_grad,
            support_center: c64(0.0, 0.0),
            support_radius: 1.0,
        };
        let rep = cutting_identity_gap(&graph, &phi0, &StripQuadrature::default()).unwrap();
        assert!(rep.relative_gap() < 1e-12);
        // genuine bump overlapping the curve
        let center = c64(0.5, 0.4);
        let sigma2 = 1.5;
        let value = move |z: Complex64| 0.8 * (-(z - center).norm_sqr() / sigma2).exp();
        let gradient = move |z: Complex64| -2.0 * value(z) * (z - center) / sigma2;
        let phi = PlaneFunction {
            value: &value,
            gradient: &gradient,
            support_center: center,
            support_radius: 7.5,
        };
        let rep = cutting_identity_gap(&graph, &phi, &StripQuadrature::default()).unwrap();
        assert!(
            rep.relative_gap() < 0.05,
            "cutting gap {} (plane {} loop {} upper {} lower {})",
            rep.relative_gap(),
            rep.plane,
            rep.loop_energy,
            rep.upper,
            rep.lower
        );
        // welding bound: the dissipation is ≥ 0 and ≈ 𝒟_ℂ(φ)
        assert!(rep.dissipation() > 0.0);
        assert!((rep.dissipation() - rep.plane).abs() < 0.05 * rep.plane);
    }

    #[test]
    fn complex_identity_requires_flow_line() {
        let graph = bump_graph(0.5, 40.0, 256);
        let value = |_: Complex64| c64(0.0, 1.0); // Im ψ = 1 ≠ τ anywhere
        let dz = |_: Complex64| c64(0.0, 0.0);
        let psi = ComplexPlaneFunction {
            value: &value,
            d_dz: &dz,
            d_dzbar: &dz,
            support_center: c64(0.0, 0.0),
            support_radius: 5.0,
        };
        assert!(complex_identity_gap(&graph, &psi, &StripQuadrature::default()).is_err());
    }

    #[test]
    fn complex_identity_on_flow_line_of_compact_field() {
        // build ψ = (μ + iν)·B with a Gaussian B, integrate the flow line of
        // Im ψ, and verify the identity on the resulting curve
        let center = c64(0.0, 0.0);
        let sigma2 = 4.0;
        let coef = c64(0.3, 0.5);
        let bump = move |z: Complex64| (-(z - center).norm_sqr() / sigma2).exp();
        let value = move |z: Complex64| coef * bump(z);
        let d_dz = move |z: Complex64| -coef * bump(z) * (z - center).conj() / sigma2;
        let d_dzbar = move |z: Complex64| -coef * bump(z) * (z - center) / sigma2;
        let flow = flowline_solve_fn(
            |z| Some(value(z).im),
            c64(-14.0, 0.0),
            5e-3,
            5600,
        )
        .unwrap();
        let graph = GraphCurve::fit_polyline(&flow.curve, 512, 1.4).unwrap();
        let psi = ComplexPlaneFunction {
            value: &value,
            d_dz: &d_dz,
            d_dzbar: &d_dzbar,
            support_center: center,
            support_radius: 9.0,
        };
        let rep = complex_identity_gap(&graph, &psi, &StripQuadrature::default()).unwrap();
        // 𝒟_ℂ((μ+iν)B) = |μ+iν|²·𝒟_ℂ(B) = |coef|² for the unit Gaussian
        assert!(
            (rep.plane - coef.norm_sqr()).abs() < 0.01 * coef.norm_sqr(),
            "plane energy {} vs {}",
            rep.plane,
            coef.norm_sqr()
        );
        assert!(
            rep.relative_gap() < 0.05,
            "complex identity gap {} (plane {} upper {} lower {})",
            rep.relative_gap(),
            rep.plane,
            rep.upper,
            rep.lower
        );
    }

    #[test]
    fn jonsson_wallin_traces() {
        // constant field: trace is exact
        let disk = GridField::on_disk(1.0, 2.0 / 256.0, |_| 3.25);
        let pts: Vec<Complex64> = (0..16)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / 16.0;
                c64(t.cos(), t.sin())
            })
            .collect();
        for v in jonsson_wallin_trace(&disk, &pts, 0.1) {
            assert!((v.unwrap() - 3.25).abs() < 1e-12);
        }
        // Re z: boundary trace ≈ cos θ (one-sided averages from inside)
        let disk = GridField::on_disk(1.0, 2.0 / 512.0, |z| z.re);
        let traces = jonsson_wallin_trace(&disk, &pts, 0.1);
        for (p, v) in pts.iter().zip(&traces) {
            assert!(
                (v.unwrap() - p.re).abs() < 0.02,
                "trace at {p}: {v:?} vs {}",
                p.re
            );
        }
        // two-sided: fields on either side of the unit circle disagree, and
        // each trace sees only its own side
        let inner = GridField::from_fn(
            -1.6,
            -1.6,
            2.0 / 512.0,
            821,
            821,
            |z| z.re,
            |z| z.norm() < 1.0,
        );
        let outer = GridField::from_fn(
            -1.6,
            -1.6,
            2.0 / 512.0,
            821,
            821,
            |z| (1.0 / z).re,
            |z| z.norm() > 1.0,
        );
        let ti = jonsson_wallin_trace(&inner, &pts, 0.08);
        let to = jonsson_wallin_trace(&outer, &pts, 0.08);
        for ((p, vi), vo) in pts.iter().zip(&ti).zip(&to) {
            assert!((vi.unwrap() - p.re).abs() < 0.03);
            assert!((vo.unwrap() - (1.0 / p).re).abs() < 0.03);
        }
    }
}
