//! Small FFT layer: Fourier coefficients of periodic samples, spectral
//! differentiation, conjugate functions, and trig-series evaluation.
//!
//! Conventions: a period-2π function sampled at `t_j = 2πj/n` has
//! coefficients `c_k = (1/n) Σ_j u_j e^{-ik t_j}` stored in standard FFT
//! order (`k = i` for `i ≤ n/2`, `k = i - n` above). All transforms here
//! are O(n log n) via rustfft.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::cell::RefCell;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft_in_place(data: &mut [Complex64], inverse: bool) {
    PLANNER.with(|p| {
        let fft = if inverse {
            p.borrow_mut().plan_fft_inverse(data.len())
        } else {
            p.borrow_mut().plan_fft_forward(data.len())
        };
        fft.process(data);
    });
}

/// Signed mode number for FFT bin `i` of an `n`-point transform.
pub fn mode_of(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Fourier coefficients (normalized by 1/n) of complex periodic samples.
pub fn fourier_coeffs(samples: &[Complex64]) -> Vec<Complex64> {
    let n = samples.len();
    let mut data = samples.to_vec();
    fft_in_place(&mut data, false);
    let scale = 1.0 / n as f64;
    for c in &mut data {
        *c *= scale;
    }
    data
}

/// Samples on the uniform grid from coefficients (inverse of `fourier_coeffs`).
pub fn fourier_values(coeffs: &[Complex64]) -> Vec<Complex64> {
    let mut data = coeffs.to_vec();
    fft_in_place(&mut data, true);
    data
}

/// Coefficients of the derivative d/dt (multiply by ik; Nyquist mode zeroed).
pub fn differentiate(coeffs: &[Complex64]) -> Vec<Complex64> {
    let n = coeffs.len();
    let mut out = Vec::with_capacity(n);
    for (i, &c) in coeffs.iter().enumerate() {
        let k = mode_of(i, n);
        if n % 2 == 0 && i == n / 2 {
            out.push(Complex64::new(0.0, 0.0));
        } else {
            out.push(Complex64::new(0.0, k as f64) * c);
        }
    }
    out
}

/// Evaluate `Σ c_k e^{ikt}` at an arbitrary parameter value.
pub fn eval_series(coeffs: &[Complex64], t: f64) -> Complex64 {
    let n = coeffs.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, &c) in coeffs.iter().enumerate() {
        let k = mode_of(i, n) as f64;
        acc += c * Complex64::new(0.0, k * t).exp();
    }
    acc
}

/// Evaluate the derivative `Σ ik c_k e^{ikt}`.
pub fn eval_series_deriv(coeffs: &[Complex64], t: f64) -> Complex64 {
    let n = coeffs.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, &c) in coeffs.iter().enumerate() {
        let k = mode_of(i, n) as f64;
        acc += Complex64::new(0.0, k) * c * Complex64::new(0.0, k * t).exp();
    }
    acc
}

/// Trigonometric interpolation of periodic samples onto `m` uniform points.
pub fn resample(samples: &[Complex64], m: usize) -> Vec<Complex64> {
    let n = samples.len();
    let coeffs = fourier_coeffs(samples);
    let mut padded = vec![Complex64::new(0.0, 0.0); m];
    for (i, &c) in coeffs.iter().enumerate() {
        let k = mode_of(i, n);
        if (k.unsigned_abs() as usize) <= m / 2 {
            let j = if k >= 0 { k as usize } else { (m as i64 + k) as usize };
            padded[j] += c;
        }
    }
    fourier_values(&padded)
}

/// Conjugate function of real periodic samples: the Fourier multiplier
/// `-i·sgn(k)` (mean and Nyquist modes dropped), so that `u + i·conj(u)`
/// extends analytically to the upper side.
pub fn conjugate_periodic(samples: &[f64]) -> Vec<f64> {
    let n = samples.len();
    let mut data: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_in_place(&mut data, false);
    for (i, c) in data.iter_mut().enumerate() {
        let k = mode_of(i, n);
        let mult = if k > 0 && !(n % 2 == 0 && i == n / 2) {
            Complex64::new(0.0, -1.0)
        } else if k < 0 {
            Complex64::new(0.0, 1.0)
        } else {
            Complex64::new(0.0, 0.0)
        };
        *c *= mult;
    }
    fft_in_place(&mut data, true);
    data.iter().map(|c| c.re / n as f64).collect()
}

/// Real-series view of coefficients: `(mean, Σ over k≥1 of |k||c_k|²·w(k))`
/// helpers live with the energy module; here we only expose the raw pieces.
pub fn coeff_abs2_weighted(coeffs: &[Complex64], weight: impl Fn(i64) -> f64) -> f64 {
    let n = coeffs.len();
    coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| weight(mode_of(i, n)) * c.norm_sqr())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_modes() {
        let n = 16;
        let samples: Vec<Complex64> = (0..n)
            .map(|j| {
                let t = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
                Complex64::new((2.0 * t).cos() + 0.5, t.sin())
            })
            .collect();
        let coeffs = fourier_coeffs(&samples);
        let back = fourier_values(&coeffs);
        for (a, b) in samples.iter().zip(back.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
        // cos 2t ↦ c_{±2} = 1/2 in the real part
        assert!((coeffs[2].re - 0.5).abs() < 1e-12);
        assert!((coeffs[n - 2].re - 0.5).abs() < 1e-12);
        assert!((coeffs[0].re - 0.5).abs() < 1e-12);
    }

    #[test]
    fn derivative_matches_analytic() {
        let n = 32;
        let samples: Vec<Complex64> = (0..n)
            .map(|j| {
                let t = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
                Complex64::new((3.0 * t).sin(), 0.0)
            })
            .collect();
        let d = differentiate(&fourier_coeffs(&samples));
        let vals = fourier_values(&d);
        for (j, v) in vals.iter().enumerate() {
            let t = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
            assert!((v.re - 3.0 * (3.0 * t).cos()).abs() < 1e-10);
        }
    }

    #[test]
    fn conjugate_of_cos_is_sin() {
        let n = 64;
        let samples: Vec<f64> = (0..n)
            .map(|j| (2.0 * std::f64::consts::PI * j as f64 / n as f64).cos())
            .collect();
        let conj = conjugate_periodic(&samples);
        for (j, v) in conj.iter().enumerate() {
            let t = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
            assert!((v - t.sin()).abs() < 1e-10);
        }
    }
}
