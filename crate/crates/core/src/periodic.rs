//! Quadrature and interpolation on uniform periodic grids.
//!
//! Every closed curve in this crate is sampled at `t_i = shift + 2πi/n` with
//! `n` even, so all rules here assume that layout.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Weights `R_k` of the logarithmic product rule
///
/// `∫_0^{2π} log(4 sin²((t_i − τ)/2)) g(τ) dτ ≈ Σ_j R_{(i−j) mod n} g(τ_j)`,
///
/// exact for trigonometric polynomials of degree below `n/2`.
pub fn log_weights(n: usize) -> Vec<f64> {
    assert!(n >= 2 && n.is_multiple_of(2), "log_weights needs an even node count");
    let m = n / 2;
    let mf = m as f64;
    (0..n)
        .map(|k| {
            let mut s = 0.0;
            for l in 1..m {
                s += (l as f64 * PI * k as f64 / mf).cos() / l as f64;
            }
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            -2.0 * PI / mf * s - PI / (mf * mf) * sign
        })
        .collect()
}

/// Fourier differentiation matrix `d/dt` on an even uniform grid.
pub fn derivative_matrix(n: usize) -> DMatrix<f64> {
    assert!(n >= 2 && n.is_multiple_of(2), "derivative_matrix needs an even node count");
    let h = 2.0 * PI / n as f64;
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            let k = i as isize - j as isize;
            let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            0.5 * sign / (0.5 * k as f64 * h).tan()
        }
    })
}

/// Discrete Fourier coefficients of samples on `t_j = shift + 2πj/n`.
///
/// Returns `(c_k for k = -(m-1)..=(m-1), nyquist)` where the Nyquist mode is
/// represented as `nyquist · cos(m (t − shift))`.
fn fourier_coefficients(values: &[Complex64], shift: f64) -> (Vec<Complex64>, Complex64) {
    let n = values.len();
    let m = n / 2;
    let mut coeffs = Vec::with_capacity(2 * m - 1);
    for k in -(m as isize - 1)..=(m as isize - 1) {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, v) in values.iter().enumerate() {
            let t = shift + 2.0 * PI * j as f64 / n as f64;
            acc += v * Complex64::from_polar(1.0, -(k as f64) * t);
        }
        coeffs.push(acc / n as f64);
    }
    let nyquist = values
        .iter()
        .enumerate()
        .map(|(j, v)| if j % 2 == 0 { *v } else { -*v })
        .sum::<Complex64>()
        / n as f64;
    (coeffs, nyquist)
}

/// Evaluates the trigonometric interpolant of `values` (sampled on an even
/// grid starting at `shift`) at the parameters `targets`.
pub fn trig_interpolate(values: &[Complex64], shift: f64, targets: &[f64]) -> Vec<Complex64> {
    let n = values.len();
    assert!(n >= 2 && n.is_multiple_of(2), "trig_interpolate needs an even node count");
    let m = n / 2;
    let (coeffs, nyquist) = fourier_coefficients(values, shift);
    targets
        .iter()
        .map(|&t| {
            let mut acc = nyquist * (m as f64 * (t - shift)).cos();
            for (idx, c) in coeffs.iter().enumerate() {
                let k = idx as isize - (m as isize - 1);
                acc += c * Complex64::from_polar(1.0, k as f64 * t);
            }
            acc
        })
        .collect()
}

/// Real-valued convenience wrapper around [`trig_interpolate`].
pub fn trig_interpolate_real(values: &[f64], shift: f64, targets: &[f64]) -> Vec<f64> {
    let cv: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    trig_interpolate(&cv, shift, targets)
        .into_iter()
        .map(|z| z.re)
        .collect()
}

/// Matrix `P` with `(P v)_i` equal to the trigonometric interpolant of `v`
/// (given on the even grid `shift + 2πj/n`) evaluated at `targets[i]`.
pub fn interpolation_matrix(n: usize, shift: f64, targets: &[f64]) -> DMatrix<f64> {
    assert!(n >= 2 && n.is_multiple_of(2), "interpolation_matrix needs an even node count");
    let m = n as f64 / 2.0;
    let nodes = grid(n, shift);
    DMatrix::from_fn(targets.len(), n, |i, j| {
        let x = (targets[i] - nodes[j]).rem_euclid(2.0 * PI);
        let half = 0.5 * x;
        if half.sin().abs() < 1e-14 {
            1.0
        } else {
            (m * x).sin() / half.tan() / n as f64
        }
    })
}

/// Uniform grid parameters `shift + 2πi/n`.
pub fn grid(n: usize, shift: f64) -> Vec<f64> {
    (0..n)
        .map(|i| shift + 2.0 * PI * i as f64 / n as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn log_rule_reproduces_fourier_symbol() {
        // ∫ log(4 sin²((t−τ)/2)) cos(kτ) dτ = −(2π/k) cos(kt), and 0 for k = 0.
        let n = 32;
        let r = log_weights(n);
        let ts = grid(n, 0.3);
        for k in 0..(n / 2) {
            for (i, &t) in ts.iter().enumerate() {
                let approx: f64 = (0..n)
                    .map(|j| r[(i + n - j) % n] * (k as f64 * ts[j]).cos())
                    .sum();
                let exact = if k == 0 {
                    0.0
                } else {
                    -2.0 * PI / k as f64 * (k as f64 * t).cos()
                };
                assert!((approx - exact).abs() < 1e-12, "k={k} i={i}");
            }
        }
    }

    #[test]
    fn derivative_of_trig_polynomial() {
        let n = 24;
        let d = derivative_matrix(n);
        let ts = grid(n, 0.0);
        let f = nalgebra::DVector::from_iterator(n, ts.iter().map(|t| (3.0 * t).sin() + t.cos()));
        let df = &d * f;
        for (i, t) in ts.iter().enumerate() {
            assert_relative_eq!(df[i], 3.0 * (3.0 * t).cos() - t.sin(), epsilon = 1e-12);
        }
    }

    #[test]
    fn interpolation_is_exact_for_band_limited_data() {
        let n = 16;
        let shift = 0.1;
        let ts = grid(n, shift);
        let vals: Vec<f64> = ts.iter().map(|t| 1.0 + (2.0 * t).cos() - 0.5 * (5.0 * t).sin()).collect();
        let targets = [0.0, 0.77, 2.0, 5.5];
        let got = trig_interpolate_real(&vals, shift, &targets);
        for (g, t) in got.iter().zip(targets) {
            assert_relative_eq!(*g, 1.0 + (2.0 * t).cos() - 0.5 * (5.0 * t).sin(), epsilon = 1e-12);
        }
        // Nodes are reproduced, including the Nyquist component.
        let alt: Vec<f64> = (0..n).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let back = trig_interpolate_real(&alt, shift, &ts);
        for (a, b) in alt.iter().zip(back) {
            assert_relative_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn interpolation_matrix_matches_direct_interpolant() {
        let n = 12;
        let shift = 0.4;
        let ts = grid(n, shift);
        let vals: Vec<f64> = ts.iter().map(|t| (t.sin() * 2.0).exp()).collect();
        let targets = grid(48, shift);
        let p = interpolation_matrix(n, shift, &targets);
        let direct = trig_interpolate_real(&vals, shift, &targets);
        let via = &p * nalgebra::DVector::from_vec(vals);
        for (a, b) in direct.iter().zip(via.iter()) {
            assert_relative_eq!(*a, *b, epsilon = 1e-12);
        }
    }
}
