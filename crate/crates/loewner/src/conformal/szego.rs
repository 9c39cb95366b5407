//! Riemann maps of analytic Jordan curves by the Kerzman–Stein method.
//!
//! For a Jordan curve `γ` with interior `Ω` and a center `a ∈ Ω`, the Szegő
//! kernel `S(·, a)` solves the second-kind integral equation
//!
//! ```text
//! S(z(t), a) + ∫ A(t, s) S(z(s), a) |z'(s)| ds = conj( T(t) / (2πi (z(t) − a)) )
//! ```
//!
//! where `T = z'/|z'|` and the Kerzman–Stein kernel
//! `A(t,s) = T(s)/(2πi(z(s) − z(t))) − conj(T(t)/(2πi(z(t) − z(s))))`
//! is smooth (it vanishes on the diagonal in any parametrization). The
//! Garabedian kernel is `L(z(t), a) = i·conj(T(t))·conj(S(z(t), a))`, and
//!
//! ```text
//! f = S(·,a)/L(·,a) : Ω → 𝔻,   f(a) = 0,   f'(a) = 2π S(a,a) > 0.
//! ```
//!
//! The equation is discretized by the trapezoid-rule Nyström method, which
//! is spectrally accurate for analytic data, and solved densely. From the
//! boundary correspondence `θ(t) = arg f(z(t))` the inverse map
//! `F = f^{-1} : 𝔻 → Ω` is recovered as a Taylor series, which is the form
//! every downstream computation consumes.

use crate::error::{Error, Result};
use crate::geometry::{c64, SmoothLoop};
use crate::spectral;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Default boundary resolution.
pub const DEFAULT_NODES: usize = 256;

/// Interior Riemann map data for one analytic Jordan curve.
#[derive(Clone, Debug)]
pub struct SzegoMap {
    /// Number of boundary nodes (power of two).
    pub m: usize,
    /// Map center `a = F(0)`.
    pub center: Complex64,
    /// Boundary nodes `z(t_k)`, `t_k = 2πk/m`.
    pub nodes: Vec<Complex64>,
    /// `z'(t_k)`.
    pub dnodes: Vec<Complex64>,
    /// `f(z(t_k))` on the unit circle.
    pub f_boundary: Vec<Complex64>,
    /// Unwrapped boundary angles `θ(t_k) = arg f(z(t_k))`, increasing.
    pub theta: Vec<f64>,
    /// `f'(a) = 2π S(a,a) > 0`.
    pub fprime_center: f64,
    /// Taylor coefficients of `F = f^{-1}`: `F(w) = Σ series[n] wⁿ`
    /// (length `m/2 + 1`).
    pub series: Vec<Complex64>,
    /// Max deviation of `|f|` from 1 on the boundary.
    pub unimodularity_error: f64,
    /// Relative size of the negative-frequency residual of the boundary
    /// values of `F` (should vanish for an analytic map).
    pub analyticity_error: f64,
}

impl SzegoMap {
    /// Build the map with the centroid of the curve as center.
    pub fn build_auto(curve: &SmoothLoop, m: usize) -> Result<SzegoMap> {
        let center = curve.coeffs[0];
        Self::build(curve, center, m)
    }

    pub fn build(curve: &SmoothLoop, center: Complex64, m: usize) -> Result<SzegoMap> {
        if !m.is_power_of_two() || m < 16 {
            return Err(Error::invalid("node count must be a power of two ≥ 16"));
        }
        let curve = curve.oriented_ccw();
        let (nodes, dnodes) = curve.sample_uniform(m);
        if super::winding_number(&nodes, center) != 1 {
            return Err(Error::domain("map center does not lie inside the curve"));
        }
        let speeds: Vec<f64> = dnodes.iter().map(|d| d.norm()).collect();
        if speeds.iter().any(|&s| s < 1e-12) {
            return Err(Error::domain("curve parametrization is singular"));
        }
        let tangents: Vec<Complex64> = dnodes
            .iter()
            .zip(speeds.iter())
            .map(|(d, &s)| d / s)
            .collect();
        let h = 2.0 * PI / m as f64;
        let two_pi_i = c64(0.0, 2.0 * PI);

        // With the skew-hermitian Kerzman–Stein kernel A = C − C* (C the
        // Cauchy transform), the Szegő boundary values satisfy the smooth
        // second-kind equation (I − A) S = g: indeed C S = S for boundary
        // values of holomorphic functions, so the equation reduces to
        // C* S = g, which holds against all of L². A vanishes on the
        // diagonal in any parametrization, so Nyström needs no diagonal
        // limit: matrix I − A·diag(|z'| h).
        let mat = DMatrix::<Complex64>::from_fn(m, m, |k, j| {
            if k == j {
                c64(1.0, 0.0)
            } else {
                let d = nodes[j] - nodes[k];
                let a_kj = tangents[j] / (two_pi_i * d) - (tangents[k] / (two_pi_i * (-d))).conj();
                -a_kj * speeds[j] * h
            }
        });
        let rhs = DVector::<Complex64>::from_iterator(
            m,
            (0..m).map(|k| (tangents[k] / (two_pi_i * (nodes[k] - center))).conj()),
        );
        let szego = mat
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::no_convergence("Szegő boundary system", 1, f64::NAN))?;

        // f'(a) = 2π S(a,a); S(a,a) = ∫ |S|² |dz| by the reproducing property
        let s_aa: f64 = (0..m).map(|k| szego[k].norm_sqr() * speeds[k] * h).sum();
        let fprime_center = 2.0 * PI * s_aa;
        if !(fprime_center > 0.0) {
            return Err(Error::no_convergence(
                "Szegő solve produced a non-positive derivative",
                1,
                fprime_center,
            ));
        }

        // Garabedian kernel and boundary map values
        let mut unimodularity_error = 0.0f64;
        let mut f_boundary = Vec::with_capacity(m);
        for k in 0..m {
            let l = c64(0.0, 1.0) * tangents[k].conj() * szego[k].conj();
            if l.norm() < 1e-300 {
                return Err(Error::no_convergence(
                    "Garabedian kernel vanished on the boundary",
                    1,
                    0.0,
                ));
            }
            let f = szego[k] / l;
            unimodularity_error = unimodularity_error.max((f.norm() - 1.0).abs());
            f_boundary.push(f / f.norm());
        }

        // unwrapped, increasing boundary angles
        let mut theta = Vec::with_capacity(m);
        let mut prev = f_boundary[0].arg();
        theta.push(prev);
        for k in 1..m {
            let mut a = f_boundary[k].arg();
            while a < prev {
                a += 2.0 * PI;
            }
            // guard against numerically tiny backward steps inflating by 2π
            if a - prev > 2.0 * PI - 1e-6 {
                a -= 2.0 * PI;
            }
            theta.push(a);
            prev = a;
        }
        let turn = theta[m - 1] - theta[0];
        if !(turn > 0.0 && turn < 2.0 * PI + 1e-6) {
            return Err(Error::no_convergence(
                "boundary correspondence is not monotone",
                1,
                turn,
            ));
        }

        // Taylor series of F = f^{-1}: resample F's boundary values onto the
        // uniform angle grid by inverting θ(t), then FFT.
        let t_of_phi = invert_boundary_angle(&theta, m)?;
        let f_samples: Vec<Complex64> = t_of_phi.iter().map(|&t| curve.eval(t)).collect();
        let coeffs = spectral::fourier_coeffs(&f_samples);
        let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1e-300);
        let mut analyticity_error = 0.0f64;
        for i in 1..m {
            if spectral::mode_of(i, m) < 0 {
                analyticity_error = analyticity_error.max(coeffs[i].norm() / scale);
            }
        }
        let series: Vec<Complex64> = (0..=m / 2).map(|n| coeffs[n]).collect();

        Ok(SzegoMap {
            m,
            center,
            nodes,
            dnodes,
            f_boundary,
            theta,
            fprime_center,
            series,
            unimodularity_error,
            analyticity_error,
        })
    }

    /// `F(w) = Σ bₙ wⁿ` for `|w| ≤ 1`.
    pub fn eval_disk_to_domain(&self, w: Complex64) -> Complex64 {
        let mut acc = c64(0.0, 0.0);
        for &b in self.series.iter().rev() {
            acc = acc * w + b;
        }
        acc
    }

    /// `F'(w)`.
    pub fn eval_disk_to_domain_deriv(&self, w: Complex64) -> Complex64 {
        let mut acc = c64(0.0, 0.0);
        for n in (1..self.series.len()).rev() {
            acc = acc * w + self.series[n] * n as f64;
        }
        acc
    }

    /// `F''(w)`.
    pub fn eval_disk_to_domain_deriv2(&self, w: Complex64) -> Complex64 {
        let mut acc = c64(0.0, 0.0);
        for n in (2..self.series.len()).rev() {
            acc = acc * w + self.series[n] * (n * (n - 1)) as f64;
        }
        acc
    }

    /// Conformal radius of the domain seen from the center: `F'(0) = 1/f'(a)`.
    ///
    /// Computed from the reproducing-kernel value `S(a,a)` (spectrally exact
    /// under the Nyström discretization) rather than from the Taylor
    /// coefficient `series[1]`, which carries the aliasing error of slowly
    /// decaying coefficient tails.
    pub fn conformal_radius(&self) -> f64 {
        1.0 / self.fprime_center
    }

    /// `f(z)` for interior `z`, by Newton iteration on the Taylor series.
    pub fn eval_domain_to_disk(&self, z: Complex64) -> Result<Complex64> {
        // seed: nearest boundary node's angle scaled inward, or 0
        let mut w = {
            let (k, _) = self
                .nodes
                .iter()
                .enumerate()
                .map(|(k, &p)| (k, (p - z).norm()))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap();
            let r_center = (z - self.center).norm();
            let r_node = (self.nodes[k] - self.center).norm().max(1e-300);
            let r = (r_center / r_node).min(0.999);
            c64(0.0, self.theta[k]).exp() * r
        };
        let scale = 1.0 + z.norm();
        for _ in 0..60 {
            let err = self.eval_disk_to_domain(w) - z;
            if err.norm() <= 1e-13 * scale {
                return Ok(w);
            }
            let d = self.eval_disk_to_domain_deriv(w);
            if d.norm() < 1e-280 {
                break;
            }
            let mut dw = err / d;
            let mut next = w - dw;
            let mut tries = 0;
            while next.norm() > 1.0 + 1e-9 && tries < 40 {
                dw *= 0.5;
                next = w - dw;
                tries += 1;
            }
            w = next;
        }
        Err(Error::no_convergence("interior map inversion", 60, f64::NAN))
    }

    /// `log|F'(e^{iφ_j})|` on the uniform angle grid `φ_j = 2πj/m`.
    pub fn boundary_log_deriv_trace(&self) -> Vec<f64> {
        let m = self.m;
        let mut coeffs = vec![c64(0.0, 0.0); m];
        for n in 1..self.series.len() {
            coeffs[n % m] += self.series[n] * n as f64;
        }
        spectral::fourier_values(&coeffs)
            .into_iter()
            .map(|v| v.norm().max(1e-300).ln())
            .collect()
    }

    /// Boundary values `F(e^{iφ_j})` on the uniform angle grid.
    pub fn boundary_values_uniform(&self) -> Vec<Complex64> {
        let m = self.m;
        let mut coeffs = vec![c64(0.0, 0.0); m];
        for n in 0..self.series.len() {
            coeffs[n % m] += self.series[n];
        }
        spectral::fourier_values(&coeffs)
    }
}

/// Invert the monotone boundary correspondence: returns `t(φ_j)` at the
/// uniform angles `φ_j = θ(t_0) + 2πj/m` re-based so the series FFT sees a
/// full uniform angle grid (any common rotation of φ only multiplies the
/// Taylor coefficients by phases of modulus one — harmless for traces, but
/// we keep the true angles so `F` is the genuine inverse of `f`).
fn invert_boundary_angle(theta: &[f64], m: usize) -> Result<Vec<f64>> {
    // periodic part p(t) = θ(t) − t on the uniform t grid
    let p: Vec<Complex64> = theta
        .iter()
        .enumerate()
        .map(|(k, &th)| c64(th - 2.0 * PI * k as f64 / m as f64, 0.0))
        .collect();
    let p_hat = spectral::fourier_coeffs(&p);
    let dp_hat = spectral::differentiate(&p_hat);
    let theta_at = |t: f64| t + spectral::eval_series(&p_hat, t).re;
    let dtheta_at = |t: f64| 1.0 + spectral::eval_series(&dp_hat, t).re;

    let mut out = Vec::with_capacity(m);
    for j in 0..m {
        let phi = 2.0 * PI * j as f64 / m as f64;
        // seed by table lookup in the sampled (t_k, θ_k) pairs (θ shifted
        // into phi's window)
        let mut lo = 0usize;
        let mut t = {
            let base = theta[0];
            let mut target = phi;
            while target < base {
                target += 2.0 * PI;
            }
            while lo + 1 < m && theta[lo + 1] < target {
                lo += 1;
            }
            let t0 = 2.0 * PI * lo as f64 / m as f64;
            let t1 = 2.0 * PI * (lo + 1) as f64 / m as f64;
            let th0 = theta[lo];
            let th1 = if lo + 1 < m {
                theta[lo + 1]
            } else {
                theta[0] + 2.0 * PI
            };
            if th1 > th0 {
                t0 + (t1 - t0) * (target - th0) / (th1 - th0)
            } else {
                t0
            }
        };
        // Newton on θ(t) ≡ φ (mod 2π)
        let mut ok = false;
        for _ in 0..40 {
            let mut err = theta_at(t) - phi;
            err -= (err / (2.0 * PI)).round() * 2.0 * PI;
            if err.abs() < 1e-13 {
                ok = true;
                break;
            }
            let d = dtheta_at(t);
            if !(d > 1e-8) {
                break;
            }
            t -= err / d;
        }
        if !ok {
            return Err(Error::no_convergence(
                "boundary angle inversion",
                40,
                f64::NAN,
            ));
        }
        out.push(t);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Interior + exterior pair
// ---------------------------------------------------------------------------

/// Interior and exterior uniformizations of one Jordan curve:
/// `F : 𝔻 → int γ` with `F(0) = a`, `F'(0) > 0`, and
/// `h : 𝔻* → ext γ` with `h(∞) = ∞`, `h'(∞) > 0`.
///
/// The exterior map is realized through inversion: with `ι(z) = 1/(z − a)`,
/// the curve `ι(γ)` is again Jordan with 0 inside, and
/// `h(w) = a + 1/F̃(1/w)` for the interior map `F̃` of `ι(γ)`.
#[derive(Clone, Debug)]
pub struct DiskMapsPair {
    pub interior: SzegoMap,
    /// Interior map of the inverted curve (center 0).
    pub inverted: SzegoMap,
    pub center: Complex64,
}

impl DiskMapsPair {
    pub fn build(curve: &SmoothLoop, m: usize) -> Result<Self> {
        let center = curve.coeffs[0];
        Self::build_with_center(curve, center, m)
    }

    pub fn build_with_center(curve: &SmoothLoop, center: Complex64, m: usize) -> Result<Self> {
        let interior = SzegoMap::build(curve, center, m)?;
        // invert the curve about the center and refit
        let fine = 2 * m;
        let (samples, _) = curve.sample_uniform(fine);
        let inv_samples: Vec<Complex64> = samples
            .iter()
            .map(|&z| {
                let d = z - center;
                if d.norm() < 1e-300 {
                    c64(1e300, 0.0)
                } else {
                    1.0 / d
                }
            })
            .collect();
        let inv_loop = SmoothLoop::from_samples(&inv_samples).oriented_ccw();
        let inverted = SzegoMap::build(&inv_loop, c64(0.0, 0.0), m)?;
        Ok(DiskMapsPair {
            interior,
            inverted,
            center,
        })
    }

    /// Conformal radius of the interior seen from the center.
    pub fn interior_radius(&self) -> f64 {
        self.interior.conformal_radius()
    }

    /// Capacity `h'(∞)` of the curve.
    pub fn exterior_capacity(&self) -> f64 {
        1.0 / self.inverted.conformal_radius()
    }

    /// `h(w)` for `|w| ≥ 1`.
    pub fn eval_exterior(&self, w: Complex64) -> Complex64 {
        self.center + 1.0 / self.inverted.eval_disk_to_domain(1.0 / w)
    }

    /// `h'(w)` for `|w| ≥ 1`.
    pub fn eval_exterior_deriv(&self, w: Complex64) -> Complex64 {
        let zeta = 1.0 / w;
        let ft = self.inverted.eval_disk_to_domain(zeta);
        let dft = self.inverted.eval_disk_to_domain_deriv(zeta);
        dft / (w * w * ft * ft)
    }

    /// `log|F'|` on the uniform angle grid of ∂𝔻.
    pub fn interior_trace_log_deriv(&self) -> Vec<f64> {
        self.interior.boundary_log_deriv_trace()
    }

    /// `log|h'|` on the uniform angle grid of ∂𝔻* (same angle convention).
    pub fn exterior_trace_log_deriv(&self) -> Vec<f64> {
        // |h'(e^{iφ})| = |F̃'(ζ)| / |F̃(ζ)|² at ζ = e^{-iφ}
        let m = self.inverted.m;
        let ftil = self.inverted.boundary_values_uniform();
        let log_dftil = self.inverted.boundary_log_deriv_trace();
        (0..m)
            .map(|j| {
                let jz = (m - j) % m;
                log_dftil[jz] - 2.0 * ftil[jz].norm().max(1e-300).ln()
            })
            .collect()
    }

    /// `log(F'(0) / h'(∞))`: nonpositive for every Jordan curve, zero
    /// exactly for circles centered at the map center.
    pub fn grunsky_functional(&self) -> f64 {
        self.interior_radius().ln() - self.exterior_capacity().ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SmoothLoop;

    #[test]
    fn circle_map_is_affine() {
        let a = c64(1.0, 0.5);
        let sl = SmoothLoop::circle(a, 2.0);
        let map = SzegoMap::build(&sl, a, 64).unwrap();
        assert!(map.unimodularity_error < 1e-11, "{}", map.unimodularity_error);
        assert!(map.analyticity_error < 1e-11, "{}", map.analyticity_error);
        assert!((map.fprime_center - 0.5).abs() < 1e-10, "{}", map.fprime_center);
        assert!((map.series[0] - a).norm() < 1e-10);
        assert!((map.series[1] - c64(2.0, 0.0)).norm() < 1e-10);
        for n in 2..map.series.len() {
            assert!(map.series[n].norm() < 1e-10, "n = {n}: {}", map.series[n]);
        }
        // interior evaluation and inversion
        let w = c64(0.3, -0.2);
        let z = map.eval_disk_to_domain(w);
        assert!((z - (a + 2.0 * w)).norm() < 1e-10);
        let back = map.eval_domain_to_disk(z).unwrap();
        assert!((back - w).norm() < 1e-10);
    }

    #[test]
    fn ellipse_interior_exterior_consistency() {
        let sl = SmoothLoop::ellipse(2.0, 1.0);
        let pair = DiskMapsPair::build(&sl, 1024).unwrap();
        // exterior capacity of an ellipse with semiaxes (a, b) is (a+b)/2
        let cap = pair.exterior_capacity();
        assert!((cap - 1.5).abs() < 1e-10, "capacity {cap}");
        // interior conformal radius at the center: the classical value via
        // Jacobi elliptic functions (nome q = ((a−b)/(a+b))², modulus
        // k = (θ₂/θ₃)², radius = πc/(2K√k) with c = √(a²−b²))
        let r = pair.interior_radius();
        assert!((r - 1.212001445787872).abs() < 1e-9, "radius {r}");
        // the interior radius is strictly smaller (Grunsky functional < 0)
        let g = pair.grunsky_functional();
        assert!(g < 0.0 && g > -1.0, "grunsky {g}");
        // the Taylor coefficient route agrees up to coefficient-tail aliasing
        assert!(
            (pair.interior.series[1].re - r).abs() < 1e-9,
            "series b1 {} vs radius {r}",
            pair.interior.series[1].re
        );
        // boundary roundtrip: F(f(z_k)) = z_k
        let mut worst = 0.0f64;
        for k in 0..pair.interior.m {
            let z = pair.interior.nodes[k];
            let w = pair.interior.f_boundary[k];
            worst = worst.max((pair.interior.eval_disk_to_domain(w) - z).norm());
        }
        assert!(worst < 1e-9, "boundary roundtrip {worst}");
        // exterior map sends large |w| near w·h'(∞) — series sanity
        let w = c64(40.0, 13.0);
        let h = pair.eval_exterior(w);
        assert!((h / w - c64(cap, 0.0)).norm() < 0.02, "far field {}", h / w);
        // exterior boundary values land on the curve
        let hb = pair.eval_exterior(c64(0.0, 0.6).exp());
        let val = (hb.re / 2.0).powi(2) + hb.im.powi(2);
        assert!((val - 1.0).abs() < 1e-6, "boundary value {hb}");
    }

    #[test]
    fn circle_grunsky_is_zero() {
        let sl = SmoothLoop::circle(c64(0.3, -0.1), 1.7);
        let pair = DiskMapsPair::build(&sl, 64).unwrap();
        assert!(pair.grunsky_functional().abs() < 1e-11);
        assert!((pair.exterior_capacity() - 1.7).abs() < 1e-11);
        // log|F'| and log|h'| traces are constant ≈ log r
        let t1 = pair.interior_trace_log_deriv();
        let t2 = pair.exterior_trace_log_deriv();
        for v in t1 {
            assert!((v - 1.7f64.ln()).abs() < 1e-10);
        }
        for v in t2 {
            assert!((v - 1.7f64.ln()).abs() < 1e-10);
        }
    }

    #[test]
    fn node_doubling_is_spectrally_converged() {
        let sl = SmoothLoop::ellipse(1.6, 0.9);
        let p1 = DiskMapsPair::build(&sl, 128).unwrap();
        let p2 = DiskMapsPair::build(&sl, 256).unwrap();
        assert!((p1.interior_radius() - p2.interior_radius()).abs() < 1e-11);
        assert!((p1.exterior_capacity() - p2.exterior_capacity()).abs() < 1e-11);
    }
}

