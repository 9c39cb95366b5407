//! Conformal welding of boundary densities.
//!
//! Two boundary functions `u, v` (log-densities on two copies of ℝ) define
//! the *isometric welding* homeomorphism `w` by matching weighted lengths,
//!
//! ```text
//! ∫_0^x e^u = ∫_{w₀}^{w(x)} e^v ,
//! ```
//!
//! and a welding homeomorphism in turn determines a curve through ∞ (up to
//! translation) whose side maps `f, g` satisfy `f = g∘w` on ℝ. The key
//! structural fact, used heavily by the tests: if `u = φ∘f + log|f'|` and
//! `v = φ∘g + log|g'|` for the maps of one curve and *any* finite-energy φ,
//! both sides pull back the same weighted arclength on the curve, so the
//! isometric weld equals the boundary correspondence `g⁻¹∘f` independently
//! of φ.
//!
//! The curve is recovered from a periodic weld by an alternating-projection
//! (Garrick-style) iteration on the boundary values of the two side maps:
//! `f(x) = x + p(x)` with `p` spanned by positive frequencies, `g(y) = y +
//! δ + q(y)` with `q` spanned by negative frequencies, coupled through
//! `p(x) − q(w(x)) = w(x) − x + δ`.

use crate::error::{Error, Result};
use crate::geometry::c64;
use crate::spectral;
use num_complex::Complex64;
use std::f64::consts::PI;

/// An isometric welding homeomorphism sampled on the `u`-side grid.
#[derive(Clone, Debug)]
pub struct IsometricWeld {
    pub xs: Vec<f64>,
    /// `w(x_j)`.
    pub w: Vec<f64>,
    /// `log w'(x_j) = u(x_j) − v(w(x_j))`.
    pub log_deriv: Vec<f64>,
}

/// Isometric welding of the densities `e^u` (on the grid `xs`) and `e^v`
/// (on `ys`), normalized by `w(0) = w0`. Both grids must be increasing and
/// bracket the points involved; the map is defined where the target mass
/// stays inside the `v` grid.
pub fn isometric_welding_map(
    xs: &[f64],
    u: &[f64],
    ys: &[f64],
    v: &[f64],
    w0: f64,
) -> Result<IsometricWeld> {
    if xs.len() != u.len() || ys.len() != v.len() || xs.len() < 3 || ys.len() < 3 {
        return Err(Error::invalid("welding needs matched grids of ≥ 3 samples"));
    }
    if !(xs[0] <= 0.0 && 0.0 <= xs[xs.len() - 1]) {
        return Err(Error::invalid("u-grid must contain the base point 0"));
    }
    if !(ys[0] <= w0 && w0 <= ys[ys.len() - 1]) {
        return Err(Error::invalid("v-grid must contain the base image w0"));
    }
    // cumulative trapezoid masses
    let mass = |grid: &[f64], logs: &[f64]| -> Vec<f64> {
        let mut acc = vec![0.0; grid.len()];
        for i in 1..grid.len() {
            let h = grid[i] - grid[i - 1];
            acc[i] = acc[i - 1] + 0.5 * h * (logs[i - 1].exp() + logs[i].exp());
        }
        acc
    };
    let interp = |grid: &[f64], vals: &[f64], x: f64| -> f64 {
        let i = grid.partition_point(|&g| g < x).clamp(1, grid.len() - 1);
        let t = (x - grid[i - 1]) / (grid[i] - grid[i - 1]);
        vals[i - 1] + (vals[i] - vals[i - 1]) * t
    };
    let mu = mass(xs, u);
    let mv = mass(ys, v);
    let mu0 = interp(xs, &mu, 0.0);
    let mv0 = interp(ys, &mv, w0);
    let mut w = Vec::with_capacity(xs.len());
    let mut log_deriv = Vec::with_capacity(xs.len());
    for j in 0..xs.len() {
        let target = mu[j] - mu0 + mv0;
        if target < mv[0] - 1e-12 || target > mv[mv.len() - 1] + 1e-12 {
            return Err(Error::domain(
                "welding image leaves the v-side grid; enlarge it",
            ));
        }
        // invert the increasing mass function by monotone interpolation
        let i = mv.partition_point(|&m| m < target).clamp(1, mv.len() - 1);
        let dm = mv[i] - mv[i - 1];
        let t = if dm > 0.0 { (target - mv[i - 1]) / dm } else { 0.0 };
        let wx = ys[i - 1] + (ys[i] - ys[i - 1]) * t.clamp(0.0, 1.0);
        w.push(wx);
        log_deriv.push(u[j] - interp(ys, v, wx));
    }
    Ok(IsometricWeld {
        xs: xs.to_vec(),
        w,
        log_deriv,
    })
}

/// Periodic isometric weld on the uniform grid over one period: returns the
/// shift samples `w(x_j) − x_j` with `w(0) = w0`. The `v`-side density is
/// rescaled by a constant (a homothety of its curve, which carries no
/// energy) so that both sides have equal mass per period, as required for
/// `w(x + L) = w(x) + L`.
pub fn periodic_isometric_weld(
    window: f64,
    u: &[f64],
    v: &[f64],
    w0: f64,
) -> Result<Vec<f64>> {
    let m = u.len();
    if v.len() != m || m < 8 || m % 2 != 0 {
        return Err(Error::invalid(
            "periodic weld needs matched even grids of ≥ 8 samples",
        ));
    }
    let omega = 2.0 * PI / window;
    let xs: Vec<f64> = (0..m)
        .map(|j| -window / 2.0 + window * j as f64 / m as f64)
        .collect();
    let density_hat = |logs: &[f64]| -> Vec<Complex64> {
        spectral::fourier_coeffs(&logs.iter().map(|&s| c64(s.exp(), 0.0)).collect::<Vec<_>>())
    };
    let uh = density_hat(u);
    let vh = density_hat(v);
    if uh[0].re <= 0.0 || vh[0].re <= 0.0 {
        return Err(Error::domain("weld densities must have positive mean"));
    }
    // v is rescaled so both sides carry equal mass per period
    let lam = uh[0].re / vh[0].re;
    // an antiderivative of the trigonometric interpolant of the density,
    // exact up to spectral truncation (differences of it are used, so the
    // integration constant is irrelevant)
    let mass = |hat: &[Complex64], x: f64| -> f64 {
        let n = hat.len();
        let t = omega * x + PI;
        let mut osc = c64(0.0, 0.0);
        for (i, &c) in hat.iter().enumerate() {
            let k = spectral::mode_of(i, n);
            if k != 0 {
                let kf = k as f64;
                osc += c / c64(0.0, kf * omega) * c64(0.0, kf * t).exp();
            }
        }
        hat[0].re * x + osc.re
    };
    let mu_at = |x: f64| mass(&uh, x);
    let mv_at = |y: f64| lam * mass(&vh, y);
    let mu0 = mu_at(0.0);
    let mv0 = mv_at(w0);
    let mut out = Vec::with_capacity(m);
    let mut guess = w0 + xs[0];
    for &x in &xs {
        // Newton for mv(w) = mu(x), warm-started from the previous node
        let target = mu_at(x) - mu0 + mv0;
        let mut y = guess;
        for _ in 0..80 {
            let err = mv_at(y) - target;
            if err.abs() < 1e-13 * (1.0 + target.abs()) {
                break;
            }
            let d = lam * spectral::eval_series(&vh, omega * y + PI).re;
            let mut step = err / d.max(1e-8);
            step = step.clamp(-0.25 * window, 0.25 * window);
            y -= step;
        }
        out.push(y - x);
        guess = y + window / m as f64;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Curve recovery from a periodic weld
// ---------------------------------------------------------------------------

/// A curve through ∞ realizing a periodic welding homeomorphism.
#[derive(Clone, Debug)]
pub struct WeldedCurve {
    pub window: f64,
    /// Uniform grid over one period.
    pub xs: Vec<f64>,
    /// `f(x_j) = x_j + p(x_j)` — boundary trace of the upper map, i.e.
    /// points on the curve (local coordinates, translation gauge `c_f = 0`).
    pub upper_points: Vec<Complex64>,
    /// Constant offset `δ = c_g − c_f` between the two side maps.
    pub delta: Complex64,
    /// Final sup-norm of the coupling residual.
    pub residual: f64,
    pub iterations: usize,
}

/// Solve `f = g∘w` for the side maps of a periodic weld given by its shift
/// `s_j = w(x_j) − x_j` on the uniform grid (`s` must be `L`-periodic).
pub fn solve_periodic_weld(window: f64, shift: &[f64]) -> Result<WeldedCurve> {
    let m = shift.len();
    if !m.is_power_of_two() || m < 16 {
        return Err(Error::invalid("shift count must be a power of two ≥ 16"));
    }
    let omega = 2.0 * PI / window;
    let xs: Vec<f64> = (0..m)
        .map(|j| -window / 2.0 + window * j as f64 / m as f64)
        .collect();
    let wvals: Vec<f64> = xs.iter().zip(shift).map(|(&x, &s)| x + s).collect();
    for i in 1..m {
        if wvals[i] <= wvals[i - 1] {
            return Err(Error::domain("weld is not increasing"));
        }
    }
    let s_hat = spectral::fourier_coeffs(&shift.iter().map(|&s| c64(s, 0.0)).collect::<Vec<_>>());
    let s_at = |x: f64| spectral::eval_series(&s_hat, omega * x + PI).re;

    // projections onto strictly positive / strictly negative frequencies
    let project = |vals: &[Complex64], positive: bool| -> Vec<Complex64> {
        let mut hat = spectral::fourier_coeffs(vals);
        for (i, c) in hat.iter_mut().enumerate() {
            let k = spectral::mode_of(i, m);
            let keep = if positive {
                (1..(m as i64) / 2).contains(&k)
            } else {
                (-(m as i64) / 2 + 1..=-1).contains(&k)
            };
            if !keep {
                *c = c64(0.0, 0.0);
            }
        }
        spectral::fourier_values(&hat)
    };
    // preimages x*_j = w⁻¹(y_j) of the uniform grid, by Newton on the
    // trigonometric interpolant of the shift; with these, transplanting a
    // band-limited function from weld points back to the grid is exact
    let xstar: Vec<f64> = xs
        .iter()
        .map(|&y| {
            let mut x = y; // w = id + bounded periodic part
            for _ in 0..80 {
                let err = x + s_at(x) - y;
                if err.abs() < 1e-13 * (1.0 + window) {
                    break;
                }
                let d = 1.0 + omega * spectral::eval_series_deriv(&s_hat, omega * x + PI).re;
                x -= err / d.max(0.05);
            }
            x
        })
        .collect();

    let mut p = vec![c64(0.0, 0.0); m];
    let mut q = vec![c64(0.0, 0.0); m];
    let mut delta = c64(0.0, 0.0);
    let mut residual = f64::INFINITY;
    let mut iterations = 0usize;
    let tol = 1e-11 * (1.0 + window);
    let mut best = f64::INFINITY;
    let mut since_best = 0usize;
    for it in 0..600 {
        iterations = it + 1;
        // evaluate q at the weld points via its spectrum
        let q_hat = spectral::fourier_coeffs(&q);
        let q_at_w: Vec<Complex64> = wvals
            .iter()
            .map(|&wx| spectral::eval_series(&q_hat, omega * wx + PI))
            .collect();
        // p-update: p = P₊[s + δ + q∘w]
        let target_p: Vec<Complex64> = (0..m)
            .map(|j| c64(shift[j], 0.0) + q_at_w[j])
            .collect();
        delta = -target_p.iter().sum::<Complex64>() / m as f64;
        let p_new = project(
            &target_p.iter().map(|&t| t + delta).collect::<Vec<_>>(),
            true,
        );
        // q-update: q(y) = (p − s − δ)(w⁻¹(y)) on the uniform grid, all
        // three terms evaluated from their spectra at the preimages
        let p_hat = spectral::fourier_coeffs(&p_new);
        let q_vals: Vec<Complex64> = xstar
            .iter()
            .map(|&x| spectral::eval_series(&p_hat, omega * x + PI) - s_at(x) - delta)
            .collect();
        let q_new = project(&q_vals, false);
        // coupling residual with the updated pair
        let q_hat = spectral::fourier_coeffs(&q_new);
        let mut res = 0.0f64;
        for j in 0..m {
            let qw = spectral::eval_series(&q_hat, omega * wvals[j] + PI);
            res = res.max((p_new[j] - s_at(xs[j]) - delta - qw).norm());
        }
        p = p_new;
        q = q_new;
        residual = res;
        if res < tol {
            break;
        }
        // the resampling error floors the residual; stop once it stalls
        if res < 0.999 * best {
            best = res;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= 30 {
                break;
            }
        }
    }
    if residual > 1e-6 * (1.0 + window) {
        return Err(Error::no_convergence(
            "periodic weld solve",
            iterations,
            residual,
        ));
    }
    let upper_points: Vec<Complex64> = (0..m).map(|j| xs[j] + p[j]).collect();
    Ok(WeldedCurve {
        window,
        xs,
        upper_points,
        delta,
        residual,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::HalfPlaneMaps;
    use crate::geometry::GraphCurve;

    /// Resample a welded curve's period of points onto the uniform grid as
    /// a graph curve in local coordinates.
    fn welded_graph(solved: &WeldedCurve) -> GraphCurve {
        let window = solved.window;
        let pts = &solved.upper_points;
        let m = pts.len();
        let heights: Vec<f64> = solved
            .xs
            .iter()
            .map(|&x| {
                let mut x_adj = x;
                let first = pts[0].re;
                while x_adj < first {
                    x_adj += window;
                }
                while x_adj >= first + window {
                    x_adj -= window;
                }
                let i = pts.partition_point(|p| p.re <= x_adj);
                let (p0, p1) = if i == 0 {
                    (pts[m - 1] - window, pts[0])
                } else if i == m {
                    (pts[m - 1], pts[0] + window)
                } else {
                    (pts[i - 1], pts[i])
                };
                let t = (x_adj - p0.re) / (p1.re - p0.re);
                p0.im + (p1.im - p0.im) * t
            })
            .collect();
        GraphCurve {
            window,
            rotation: 0.0,
            anchor: c64(0.0, 0.0),
            heights,
        }
    }

    /// Boundary-correspondence weld `g⁻¹∘f` of a graph curve, as shift
    /// samples on the uniform grid.
    fn weld_from_maps(maps: &HalfPlaneMaps) -> Vec<f64> {
        let graph = &maps.graph;
        let xs = graph.grid_xs();
        // w(x_j) solves b(w) = a(x_j) where a, b are the curve x-coordinates
        // reached by the two sides; b is increasing with b(x+L) = b(x)+L
        xs.iter()
            .map(|&x| {
                let t = maps.upper.eval(c64(x, 0.0)).re;
                let mut w = t;
                for _ in 0..80 {
                    let err = maps.lower_reflected.eval(c64(w, 0.0)).re - t;
                    if err.abs() < 1e-13 * (1.0 + t.abs()) {
                        break;
                    }
                    let d = maps.lower_reflected.deriv(c64(w, 0.0)).re;
                    w -= err / d.max(0.1);
                }
                w - x
            })
            .collect()
    }

    #[test]
    fn isometric_weld_examples() {
        let xs: Vec<f64> = (0..401).map(|i| -10.0 + 0.05 * i as f64).collect();
        let zeros = vec![0.0; xs.len()];
        // u = v = 0: identity
        let weld = isometric_welding_map(&xs, &zeros, &xs, &zeros, 0.0).unwrap();
        for (x, w) in weld.xs.iter().zip(&weld.w) {
            assert!((w - x).abs() < 1e-12);
        }
        // v = log 2 halves the speed: w(x) = x/2
        let log2 = vec![2.0f64.ln(); xs.len()];
        let weld = isometric_welding_map(&xs, &zeros, &xs, &log2, 0.0).unwrap();
        for (x, w) in weld.xs.iter().zip(&weld.w) {
            assert!((w - x / 2.0).abs() < 1e-10, "w({x}) = {w}");
        }
        // Gaussian u: log w' = u − v∘w stays finite and matches u at v = 0;
        // the extra mass ∫(e^u − 1) ≈ 1.9 pushes w(10) past 10, so the
        // v-side grid must extend further
        let ys: Vec<f64> = (0..561).map(|i| -14.0 + 0.05 * i as f64).collect();
        let zeros_v = vec![0.0; ys.len()];
        let u: Vec<f64> = xs.iter().map(|&x| (-x * x / 2.0).exp()).collect();
        let weld = isometric_welding_map(&xs, &u, &ys, &zeros_v, 0.0).unwrap();
        for (j, ld) in weld.log_deriv.iter().enumerate() {
            assert!(ld.is_finite());
            assert!((ld - u[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn isometric_weld_is_invariant_under_plane_reweighting() {
        // u = φ∘f + log|f'| and v = φ∘g + log|g'| both pull back the same
        // weighted arclength on the curve, so the weld must not depend on φ
        let graph = GraphCurve::from_fn(30.0, 512, |x| 0.5 * (-x * x / 2.0).exp());
        let maps = HalfPlaneMaps::build(&graph).unwrap();
        let m = graph.heights.len();
        let xs = graph.grid_xs();
        let shift = weld_from_maps(&maps);
        let w_maps: Vec<f64> = xs.iter().zip(&shift).map(|(&x, &s)| x + s).collect();
        let w0 = w_maps[m / 2]; // image of the base point x = 0
        // keep the u-grid away from the window edges so the image never
        // leaves the v-grid
        let lo = m / 8;
        let hi = 7 * m / 8;
        for phi_amp in [0.0, 0.8] {
            let phi = |z: Complex64| phi_amp * (-(z - c64(0.3, 0.2)).norm_sqr() / 1.5).exp();
            let u: Vec<f64> = xs
                .iter()
                .map(|&x| {
                    phi(maps.eval_upper(c64(x, 0.0)))
                        + maps.deriv_upper(c64(x, 0.0)).norm().ln()
                })
                .collect();
            let v: Vec<f64> = xs
                .iter()
                .map(|&x| {
                    phi(maps.eval_lower(c64(x, 0.0)))
                        + maps.deriv_lower(c64(x, 0.0)).norm().ln()
                })
                .collect();
            let weld =
                isometric_welding_map(&xs[lo..hi], &u[lo..hi], &xs, &v, w0).unwrap();
            let mut worst = 0.0f64;
            for (j, &x) in xs[lo..hi].iter().enumerate() {
                if x.abs() > 7.5 {
                    continue;
                }
                worst = worst.max((weld.w[j] - w_maps[lo + j]).abs());
            }
            assert!(
                worst < 5e-3,
                "phi amplitude {phi_amp}: weld deviates by {worst}"
            );
        }
    }

    #[test]
    fn periodic_weld_identity() {
        let shift = vec![0.0; 64];
        let solved = solve_periodic_weld(20.0, &shift).unwrap();
        assert!(solved.residual < 1e-12);
        for (x, p) in solved.xs.iter().zip(&solved.upper_points) {
            assert!((p - c64(*x, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn periodic_weld_roundtrip_recovers_curve() {
        // curve → weld → solver: the recovered boundary trace must match the
        // original up to the translation gauge (solver fixes c_f = 0)
        let graph = GraphCurve::from_fn(30.0, 256, |x| 0.5 * (-x * x / 2.0).exp());
        let maps = HalfPlaneMaps::build(&graph).unwrap();
        let shift = weld_from_maps(&maps);
        let solved = solve_periodic_weld(graph.window, &shift).unwrap();
        let mut worst = 0.0f64;
        for (j, &x) in solved.xs.iter().enumerate() {
            let original = maps.upper.eval(c64(x, 0.0)) - maps.upper.c0;
            worst = worst.max((solved.upper_points[j] - original).norm());
        }
        assert!(worst < 5e-3, "recovered curve off by {worst}");
    }

    #[test]
    fn arclength_welding_is_subadditive() {
        // weld the upper side of γ₁ to the lower side of γ₂ by arclength
        // (and vice versa); the two welded curves together cannot exceed the
        // total energy of the inputs
        let window = 30.0;
        let m = 256;
        let g1 = GraphCurve::from_fn(window, m, |x| 0.7 * (-x * x / 2.0).exp());
        let g2 = GraphCurve::from_fn(window, m, |x| {
            -0.5 * (-(x - 1.0) * (x - 1.0) / 3.0).exp()
        });
        let m1 = HalfPlaneMaps::build(&g1).unwrap();
        let m2 = HalfPlaneMaps::build(&g2).unwrap();
        let energy_of = |maps: &HalfPlaneMaps| maps.energy_upper() + maps.energy_lower();
        let i1 = energy_of(&m1);
        let i2 = energy_of(&m2);

        let xs = g1.grid_xs();
        let boundary_logs = |maps: &HalfPlaneMaps, upper: bool| -> Vec<f64> {
            xs.iter()
                .map(|&x| {
                    if upper {
                        maps.deriv_upper(c64(x, 0.0)).norm().ln()
                    } else {
                        maps.deriv_lower(c64(x, 0.0)).norm().ln()
                    }
                })
                .collect()
        };
        let weld_energy = |u: &[f64], v: &[f64]| -> f64 {
            let shift = periodic_isometric_weld(window, u, v, 0.0).unwrap();
            let solved = solve_periodic_weld(window, &shift).unwrap();
            let welded = welded_graph(&solved);
            crate::energy::loop_energy_line(&welded).unwrap().value
        };
        let ia = weld_energy(&boundary_logs(&m1, true), &boundary_logs(&m2, false));
        let ib = weld_energy(&boundary_logs(&m2, true), &boundary_logs(&m1, false));
        assert!(
            ia + ib <= (i1 + i2) * 1.02 + 1e-4,
            "subadditivity violated: {ia} + {ib} vs {i1} + {i2}"
        );
        // the welded curves are genuine (nonzero energy) for these inputs
        assert!(ia > 1e-4 && ib > 1e-4);
    }

    #[test]
    fn welding_upper_bound() {
        // welding arbitrary densities produces a curve whose energy cannot
        // exceed the sum of the input Dirichlet forms; the deficit is the
        // plane energy dissipated by the induced harmonic field
        let window = 30.0;
        let m = 256;
        let omega = 2.0 * PI / window;
        let xs: Vec<f64> = (0..m)
            .map(|j| -window / 2.0 + window * j as f64 / m as f64)
            .collect();
        let u: Vec<f64> = xs
            .iter()
            .map(|&x| 0.3 * (omega * x).cos() + 0.1 * (2.0 * omega * x).sin())
            .collect();
        let v: Vec<f64> = xs
            .iter()
            .map(|&y| 0.2 * (omega * y).cos() - 0.15 * (3.0 * omega * y).sin())
            .collect();
        let du = crate::energy::dirichlet_form_fourier(&u);
        let dv = crate::energy::dirichlet_form_fourier(&v);
        let shift = periodic_isometric_weld(window, &u, &v, 0.0).unwrap();
        let solved = solve_periodic_weld(window, &shift).unwrap();
        let welded = welded_graph(&solved);
        let energy = crate::energy::loop_energy_line(&welded).unwrap().value;
        assert!(energy > 1e-3, "weld should produce a genuine curve: {energy}");
        assert!(
            energy <= (du + dv) * 1.02 + 1e-4,
            "upper bound violated: {energy} vs {du} + {dv}"
        );
    }
}
