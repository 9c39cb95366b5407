//! Conformal maps onto the two sides of a curve through ∞.
//!
//! The curve is given as a periodized graph `x ↦ x + i b(x)` (period `L`,
//! see [`GraphCurve`]). The map from ℍ onto the region above the curve is
//! sought in the form
//!
//! ```text
//! f(z) = z + c₀ + Σ_{k≥1} a_k e^{ikωz},   ω = 2π/L,
//! ```
//!
//! whose periodic perturbation decays as `Im z → ∞`. On the boundary the
//! positive-frequency structure forces `Re w = −H[Im w]` (periodic Hilbert
//! transform), which turns the boundary condition `Im f(x) = b(Re f(x))`
//! into the classical Theodorsen fixed point for the boundary
//! correspondence `φ(x) = Re f(x)`:
//!
//! ```text
//! φ ← x − H[b(φ(x))].
//! ```
//!
//! The map of the lower side is obtained by reflection: build the upper map
//! `f̃` for the mirrored heights `−b`; then `g(z) = conj(f̃(conj z))` maps
//! the lower half-plane onto the region below the curve.
//!
//! Periodization replaces the true curve by its `L`-periodic extension;
//! callers choose windows large enough that the replaced tails are flat.

use crate::error::{Error, Result};
use crate::geometry::{c64, GraphCurve};
use crate::spectral;
use num_complex::Complex64;
use std::f64::consts::PI;

/// `f(z) = z + c₀ + Σ_{k≥1} a_k e^{ikωz}` on `Im z ≥ 0`
/// (local graph coordinates).
#[derive(Clone, Debug)]
pub struct PeriodizedMap {
    pub omega: f64,
    pub window: f64,
    pub c0: Complex64,
    /// `coeffs[k]` multiplies `e^{ikωz}`; index 0 unused (kept zero).
    pub coeffs: Vec<Complex64>,
    /// Boundary correspondence `φ(x_j)` on the uniform grid.
    pub phi_boundary: Vec<f64>,
    /// Final fixed-point residual.
    pub residual: f64,
}

impl PeriodizedMap {
    pub fn eval(&self, z: Complex64) -> Complex64 {
        z + self.c0 + self.perturbation(z)
    }

    pub fn deriv(&self, z: Complex64) -> Complex64 {
        let q = c64(0.0, self.omega) * z;
        let q = q.exp();
        let mut acc = c64(0.0, 0.0);
        for k in (1..self.coeffs.len()).rev() {
            acc = (acc + self.coeffs[k] * c64(0.0, k as f64 * self.omega)) * q;
        }
        1.0 + acc
    }

    pub fn deriv2(&self, z: Complex64) -> Complex64 {
        let q = (c64(0.0, self.omega) * z).exp();
        let mut acc = c64(0.0, 0.0);
        for k in (1..self.coeffs.len()).rev() {
            let ik = c64(0.0, k as f64 * self.omega);
            acc = (acc + self.coeffs[k] * ik * ik) * q;
        }
        acc
    }

    /// Invert `f(z) = w` by Newton iteration (the map is a decaying
    /// perturbation of the identity, so `w − c₀` is a good seed).
    pub fn invert(&self, w: Complex64) -> Result<Complex64> {
        let mut z = w - self.c0;
        for _ in 0..60 {
            let err = self.eval(z) - w;
            if err.norm() < 1e-13 * (1.0 + w.norm()) {
                return Ok(z);
            }
            let d = self.deriv(z);
            if d.norm() < 1e-14 {
                break;
            }
            let mut step = err / d;
            // keep the iterate out of the far lower half-plane, where the
            // perturbation grows without bound
            let max_step = 1.0 + z.im.abs();
            if step.norm() > max_step {
                step *= max_step / step.norm();
            }
            z -= step;
        }
        Err(Error::no_convergence(
            "periodized map inversion",
            60,
            (self.eval(z) - w).norm(),
        ))
    }

    fn perturbation(&self, z: Complex64) -> Complex64 {
        let q = (c64(0.0, self.omega) * z).exp();
        let mut acc = c64(0.0, 0.0);
        for k in (1..self.coeffs.len()).rev() {
            acc = (acc + self.coeffs[k]) * q;
        }
        acc
    }

    /// Coefficients `d_k` of `log f' = Σ_{k≥1} d_k e^{ikωz}` (index 0 holds
    /// the residual mean, which should vanish).
    pub fn log_deriv_coeffs(&self) -> Vec<Complex64> {
        let m = self.phi_boundary.len();
        // sample f' on the boundary grid and take the principal log
        let vals: Vec<Complex64> = (0..m)
            .map(|j| {
                let x = -self.window / 2.0 + self.window * j as f64 / m as f64;
                let d = self.deriv(c64(x, 0.0));
                d.ln()
            })
            .collect();
        let hat = spectral::fourier_coeffs(&vals);
        // grid-to-x-convention conversion: coefficient of e^{ikωx} is
        // (−1)^k × (FFT coefficient), since x_0 = −L/2
        let mut out = vec![c64(0.0, 0.0); m / 2 + 1];
        for (i, &c) in hat.iter().enumerate() {
            let k = spectral::mode_of(i, m);
            if (0..=(m as i64 / 2)).contains(&k) {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                out[k as usize] = c * sign;
            }
        }
        out
    }

    /// Normalized Dirichlet energy (one period) of the harmonic function
    /// `log|f'|` on the half-plane: `Σ_{k≥1} k |d_k|²`.
    pub fn log_deriv_energy(&self) -> f64 {
        self.log_deriv_coeffs()
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, d)| k as f64 * d.norm_sqr())
            .sum()
    }
}

/// Maps of both sides of a graph curve, in plane coordinates.
#[derive(Clone, Debug)]
pub struct HalfPlaneMaps {
    pub graph: GraphCurve,
    pub upper: PeriodizedMap,
    /// Upper map of the mirrored graph; the lower-side map is
    /// `z ↦ conj(lower_reflected.eval(conj z))` in local coordinates.
    pub lower_reflected: PeriodizedMap,
}

impl HalfPlaneMaps {
    pub fn build(graph: &GraphCurve) -> Result<Self> {
        let upper = theodorsen(graph.window, &graph.heights)?;
        let mirrored: Vec<f64> = graph.heights.iter().map(|&h| -h).collect();
        let lower_reflected = theodorsen(graph.window, &mirrored)?;
        Ok(HalfPlaneMaps {
            graph: graph.clone(),
            upper,
            lower_reflected,
        })
    }

    fn to_plane(&self, local: Complex64) -> Complex64 {
        self.graph.anchor
            + c64(self.graph.rotation.cos(), self.graph.rotation.sin()) * local
    }

    /// Map `ℍ →` region above the curve (plane coordinates).
    pub fn eval_upper(&self, z: Complex64) -> Complex64 {
        self.to_plane(self.upper.eval(z))
    }

    /// Map of the lower half-plane onto the region below the curve.
    pub fn eval_lower(&self, z: Complex64) -> Complex64 {
        self.to_plane(self.lower_reflected.eval(z.conj()).conj())
    }

    pub fn deriv_upper(&self, z: Complex64) -> Complex64 {
        self.upper.deriv(z)
            * c64(self.graph.rotation.cos(), self.graph.rotation.sin())
    }

    pub fn deriv_lower(&self, z: Complex64) -> Complex64 {
        self.lower_reflected.deriv(z.conj()).conj()
            * c64(self.graph.rotation.cos(), self.graph.rotation.sin())
    }

    /// `Σ k|d_k|²` for the upper side.
    pub fn energy_upper(&self) -> f64 {
        self.upper.log_deriv_energy()
    }

    /// `Σ k|d_k|²` for the lower side.
    pub fn energy_lower(&self) -> f64 {
        self.lower_reflected.log_deriv_energy()
    }
}

/// Solve the Theodorsen fixed point for given periodic heights.
fn theodorsen(window: f64, heights: &[f64]) -> Result<PeriodizedMap> {
    let m = heights.len();
    if !m.is_power_of_two() || m < 16 {
        return Err(Error::invalid("height count must be a power of two ≥ 16"));
    }
    let omega = 2.0 * PI / window;
    let b_hat = spectral::fourier_coeffs(
        &heights.iter().map(|&h| c64(h, 0.0)).collect::<Vec<_>>(),
    );
    // b at an arbitrary graph coordinate (grid angle τ = ωx + π)
    let b_at = |x: f64| spectral::eval_series(&b_hat, omega * x + PI).re;

    let xs: Vec<f64> = (0..m)
        .map(|j| -window / 2.0 + window * j as f64 / m as f64)
        .collect();
    let mut phi: Vec<f64> = xs.clone();
    let mut v = vec![0.0f64; m];
    let mut residual = f64::INFINITY;
    let mut lambda = 1.0f64;
    let mut prev_res = f64::INFINITY;
    let tol = 1e-13 * (1.0 + window);
    let mut converged = false;
    for _ in 0..400 {
        for j in 0..m {
            v[j] = b_at(phi[j]);
        }
        let h = spectral::conjugate_periodic(&v);
        let mut res = 0.0f64;
        for j in 0..m {
            let target = xs[j] - h[j];
            let next = phi[j] + lambda * (target - phi[j]);
            res = res.max((next - phi[j]).abs());
            phi[j] = next;
        }
        residual = res;
        if res < tol {
            converged = true;
            break;
        }
        if res > prev_res * 1.000001 {
            lambda = (lambda * 0.5).max(0.05);
        }
        prev_res = res;
    }
    if !converged {
        return Err(Error::no_convergence(
            "Theodorsen boundary correspondence",
            400,
            residual,
        ));
    }
    // final boundary data → coefficients
    for j in 0..m {
        v[j] = b_at(phi[j]);
    }
    let mean = v.iter().sum::<f64>() / m as f64;
    let vc: Vec<Complex64> = v.iter().map(|&x| c64(x - mean, 0.0)).collect();
    let v_hat = spectral::fourier_coeffs(&vc);
    let mut coeffs = vec![c64(0.0, 0.0); m / 2 + 1];
    for (i, &c) in v_hat.iter().enumerate() {
        let k = spectral::mode_of(i, m);
        if (1..=(m as i64 / 2)).contains(&k) {
            // Im w has e^{ikωx}-coefficient (−1)^k·ĉ_k; w = 2i × that part
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            coeffs[k as usize] = c64(0.0, 2.0) * c * sign;
        }
    }
    Ok(PeriodizedMap {
        omega,
        window,
        c0: c64(0.0, mean),
        coeffs,
        phi_boundary: phi,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GraphCurve;

    #[test]
    fn flat_line_is_identity() {
        let g = GraphCurve::flat(20.0, 64);
        let maps = HalfPlaneMaps::build(&g).unwrap();
        let z = c64(1.3, 0.8);
        assert!((maps.eval_upper(z) - z).norm() < 1e-12);
        assert!((maps.eval_lower(z.conj()) - z.conj()).norm() < 1e-12);
        assert!(maps.energy_upper() < 1e-24);
        assert!(maps.energy_lower() < 1e-24);
        // constant height: identity plus iĉ
        let g = GraphCurve::from_fn(20.0, 64, |_| 0.7);
        let maps = HalfPlaneMaps::build(&g).unwrap();
        assert!((maps.eval_upper(z) - (z + c64(0.0, 0.7))).norm() < 1e-12);
        assert!(maps.energy_upper() < 1e-24);
    }

    #[test]
    fn single_mode_curve_is_recovered_exactly() {
        // the exact map f(z) = z + ε e^{iz} (ω = 1, window 2π) sends ℝ to
        // the curve x ↦ (x + ε cos x, ε sin x); recover b by inverting the
        // first coordinate
        let eps = 0.1;
        let window = 2.0 * PI;
        let m = 256;
        let b = |x1: f64| {
            // solve x + ε cos x = x1 by Newton
            let mut x = x1;
            for _ in 0..60 {
                let err = x + eps * x.cos() - x1;
                if err.abs() < 1e-15 {
                    break;
                }
                x -= err / (1.0 - eps * x.sin());
            }
            eps * x.sin()
        };
        let g = GraphCurve::from_fn(window, m, b);
        let maps = HalfPlaneMaps::build(&g).unwrap();
        let up = &maps.upper;
        assert!((up.coeffs[1] - c64(eps, 0.0)).norm() < 1e-10, "a1 = {}", up.coeffs[1]);
        assert!(up.c0.norm() < 1e-10, "c0 = {}", up.c0);
        for k in 2..10 {
            assert!(up.coeffs[k].norm() < 1e-10, "a{k} = {}", up.coeffs[k]);
        }
        let z = c64(0.4, 0.9);
        let exact = z + eps * (c64(0.0, 1.0) * z).exp();
        assert!((up.eval(z) - exact).norm() < 1e-10);
        // log f' = log(1 + iε e^{iz}): Σ k|d_k|² = −log(1 − ε²)
        let e = up.log_deriv_energy();
        let exact_e = -(1.0 - eps * eps).ln();
        assert!((e - exact_e).abs() < 1e-10, "energy {e} vs {exact_e}");
    }

    #[test]
    fn boundary_lands_on_curve_both_sides() {
        let g = GraphCurve::from_fn(40.0, 512, |x| 0.5 * (-x * x / 2.0).exp());
        let maps = HalfPlaneMaps::build(&g).unwrap();
        // check at off-grid boundary points: Im f(x) = b(Re f(x))
        let b_of = |x1: f64| {
            // dense reference via the graph's own interpolation
            maps.graph.eval(x1).im
        };
        for i in 0..37 {
            let x = -15.0 + 30.0 * i as f64 / 36.0 + 0.013;
            let fu = maps.eval_upper(c64(x, 0.0));
            assert!(
                (fu.im - b_of(fu.re)).abs() < 1e-8,
                "upper boundary at {x}: {fu}"
            );
            let fl = maps.eval_lower(c64(x, 0.0));
            assert!(
                (fl.im - b_of(fl.re)).abs() < 1e-8,
                "lower boundary at {x}: {fl}"
            );
        }
        // interior points land on the correct side
        let zu = maps.eval_upper(c64(0.0, 0.4));
        assert!(zu.im > b_of(zu.re));
        let zl = maps.eval_lower(c64(0.0, -0.4));
        assert!(zl.im < b_of(zl.re));
        // energies are positive and finite for a genuine bump
        assert!(maps.energy_upper() > 1e-4);
        assert!(maps.energy_lower() > 1e-4);
    }
}
