//! Numerical conformal maps.
//!
//! Two map builders cover the geometries the rest of the crate needs:
//!
//! - [`szego`]: interior/exterior Riemann maps of an analytic Jordan curve
//!   via the Kerzman–Stein boundary integral equation. Spectrally accurate
//!   on [`SmoothLoop`] input; the workhorse for loop energies, equipotential
//!   chains, and welding checks.
//! - [`halfplane`]: maps of the two sides of a curve through ∞ (a periodized
//!   graph), built by Theodorsen iteration on the boundary correspondence.
//!
//! Both produce objects that evaluate the map, its derivative, and the
//! boundary trace of `log|derivative|` on uniform grids, which is exactly
//! what the energy identities consume.

pub mod halfplane;
pub mod szego;

pub use halfplane::{HalfPlaneMaps, PeriodizedMap};
pub use szego::{DiskMapsPair, SzegoMap};

use crate::geometry::c64;
use crate::spectral;
use num_complex::Complex64;

/// Winding number of a sampled closed curve around `p` (sum of turned angle
/// / 2π, rounded).
pub fn winding_number(samples: &[Complex64], p: Complex64) -> i32 {
    let mut total = 0.0f64;
    let n = samples.len();
    for i in 0..n {
        let a = samples[i] - p;
        let b = samples[(i + 1) % n] - p;
        total += (b / a).arg();
    }
    (total / (2.0 * std::f64::consts::PI)).round() as i32
}

/// Harmonic extension to the disk of real boundary samples on the uniform
/// angle grid, evaluated at `r e^{iφ}` (`r < 1`).
pub fn poisson_disk(boundary: &[f64], r: f64, phi: f64) -> f64 {
    let n = boundary.len();
    let coeffs = spectral::fourier_coeffs(
        &boundary.iter().map(|&u| c64(u, 0.0)).collect::<Vec<_>>(),
    );
    let mut sum = coeffs[0].re;
    for i in 1..n {
        let k = spectral::mode_of(i, n);
        let ka = k.unsigned_abs() as i32;
        let w = r.powi(ka);
        let phase = c64(0.0, k as f64 * phi).exp();
        sum += (coeffs[i] * phase).re * w;
    }
    sum
}

/// Boundary excursion kernel of the upper half-plane between distinct real
/// points: `P(x, y) = |y − x|^{-2}`.
pub fn halfplane_excursion_kernel(x: f64, y: f64) -> f64 {
    let d = y - x;
    1.0 / (d * d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry;

    #[test]
    fn winding_numbers() {
        let c = geometry::circle(c64(0.0, 0.0), 1.0, 256);
        assert_eq!(winding_number(&c.points, c64(0.2, 0.1)), 1);
        assert_eq!(winding_number(&c.points, c64(2.0, 0.0)), 0);
        let r = c.reversed();
        assert_eq!(winding_number(&r.points, c64(0.0, 0.0)), -1);
    }

    #[test]
    fn poisson_reproduces_harmonic_polynomials() {
        // u = Re(z²) = r² cos 2φ is harmonic: extension of cos 2φ at r
        let n = 64;
        let boundary: Vec<f64> = (0..n)
            .map(|j| (2.0 * 2.0 * std::f64::consts::PI * j as f64 / n as f64).cos())
            .collect();
        let u = poisson_disk(&boundary, 0.5, 0.3);
        let exact = 0.25 * (2.0f64 * 0.3).cos();
        assert!((u - exact).abs() < 1e-12);
    }
}
