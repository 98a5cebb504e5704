//! Minimum-phase spectral factorisation through the real cepstrum.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

pub const DEFAULT_FFT_LEN: usize = 8192;
const LOG_FLOOR: f64 = 1e-10;

/// `r(k) = Σ_n h(n) h(n+k)` for `k = 0..len(h)`.
pub fn autocorrelation(h: &[f64]) -> Vec<f64> {
    (0..h.len())
        .map(|k| h.iter().zip(&h[k..]).map(|(a, b)| a * b).sum())
        .collect()
}

/// `c(0) + 2 Σ_{k≥1} c(k) cos(kθ)` on `n` uniform points of `[0, 2π)`.
pub fn magnitude_squared_on_grid(c: &[f64], n: usize) -> Vec<f64> {
    let mut spectrum = vec![Complex64::new(0.0, 0.0); n];
    for (k, &ck) in c.iter().enumerate() {
        if k == 0 {
            spectrum[0] += ck;
        } else {
            spectrum[k % n] += ck;
            spectrum[(n - k % n) % n] += ck;
        }
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut spectrum);
    spectrum.iter().map(|v| v.re).collect()
}

#[derive(Debug, Clone)]
pub struct SpectralFactor {
    pub taps: Vec<f64>,
    /// `max |(|Ĥ|² − c-magnitude)| / max c-magnitude` straight after the
    /// cepstral step, before Newton polishing.
    pub cepstral_error: f64,
    /// Largest autocorrelation mismatch after polishing, relative to `c(0)`.
    pub residual: f64,
    pub fft_len: usize,
}

/// Minimum-phase `h` with `Σ h(n)h(n+k) = c(k)`, normalised so that
/// `h(0) > 0`.
///
/// The cepstral construction folds `κ(n)` onto the causal side, truncates
/// the inverse to `len(c)` taps and is then polished by Newton iterations
/// on the autocorrelation equations. If the truncated cepstral factor
/// misses the target magnitude by more than `1e-4` the grid is doubled once.
pub fn minimum_phase_factor(c: &[f64], fft_len: usize) -> Result<SpectralFactor> {
    if c.is_empty() {
        return Err(Error::Cepstrum("empty magnitude specification".into()));
    }
    if !(c[0] > 0.0) {
        return Err(Error::Cepstrum(format!(
            "c(0) must be positive, got {}",
            c[0]
        )));
    }
    let mut n = fft_len.max(4 * c.len()).next_power_of_two();
    let mut attempt = cepstral_factor(c, n)?;
    if attempt.1 > 1e-4 {
        n *= 2;
        attempt = cepstral_factor(c, n)?;
    }
    let (taps, cepstral_error) = attempt;
    let (taps, residual) = newton_polish(c, taps);
    Ok(SpectralFactor {
        taps,
        cepstral_error,
        residual,
        fft_len: n,
    })
}

fn cepstral_factor(c: &[f64], n: usize) -> Result<(Vec<f64>, f64)> {
    let mag2 = magnitude_squared_on_grid(c, n);
    let peak = mag2.iter().fold(0.0f64, |m, &v| m.max(v));
    if let Some(min) = mag2.iter().copied().reduce(f64::min) {
        if min <= 0.0 {
            return Err(Error::Cepstrum(format!(
                "magnitude-squared response reaches {min:e} on the grid"
            )));
        }
    }

    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    let scale = 1.0 / n as f64;

    let mut buf: Vec<Complex64> = mag2
        .iter()
        .map(|&v| Complex64::new(v.sqrt().max(LOG_FLOOR).ln(), 0.0))
        .collect();
    inverse.process(&mut buf);
    let kappa: Vec<f64> = buf.iter().map(|v| v.re * scale).collect();

    let half = n / 2;
    let mut folded = vec![Complex64::new(0.0, 0.0); n];
    folded[0] = kappa[0].into();
    for k in 1..half {
        folded[k] = (2.0 * kappa[k]).into();
    }
    folded[half] = kappa[half].into();

    forward.process(&mut folded);
    for v in folded.iter_mut() {
        *v = v.exp();
    }
    inverse.process(&mut folded);
    let taps: Vec<f64> = folded[..c.len()].iter().map(|v| v.re * scale).collect();

    let achieved = magnitude_squared_on_grid(&autocorrelation(&taps), n);
    let err = achieved
        .iter()
        .zip(&mag2)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / peak;
    Ok((taps, err))
}

fn newton_polish(c: &[f64], mut h: Vec<f64>) -> (Vec<f64>, f64) {
    let m = c.len();
    let residual_of = |h: &[f64]| -> Vec<f64> {
        autocorrelation(h)
            .iter()
            .zip(c)
            .map(|(r, t)| r - t)
            .collect()
    };
    let norm = |r: &[f64]| r.iter().fold(0.0f64, |a, v| a.max(v.abs())) / c[0];

    let mut res = residual_of(&h);
    for _ in 0..30 {
        if norm(&res) < 1e-15 {
            break;
        }
        // ∂r(k)/∂h(j) = h(j+k) + h(j-k)
        let mut jac = DMatrix::<f64>::zeros(m, m);
        for k in 0..m {
            for j in 0..m {
                let mut v = 0.0;
                if j + k < m {
                    v += h[j + k];
                }
                if j >= k {
                    v += h[j - k];
                }
                jac[(k, j)] = v;
            }
        }
        let Some(step) = jac.lu().solve(&DVector::from_column_slice(&res)) else {
            break;
        };
        let candidate: Vec<f64> = h.iter().zip(step.iter()).map(|(a, s)| a - s).collect();
        let cand_res = residual_of(&candidate);
        if norm(&cand_res) >= norm(&res) {
            break;
        }
        h = candidate;
        res = cand_res;
    }
    if h[0] < 0.0 {
        h.iter_mut().for_each(|v| *v = -*v);
    }
    let r = norm(&res);
    (h, r)
}

/// Roots of `Σ_n a(n) z^{-n}`, i.e. of `a(0) z^{N-1} + … + a(N-1)`.
pub fn polynomial_zeros(a: &[f64]) -> Vec<Complex64> {
    let first = a.iter().position(|&v| v != 0.0);
    let last = a.iter().rposition(|&v| v != 0.0);
    let (Some(first), Some(last)) = (first, last) else {
        return Vec::new();
    };
    let poly = &a[first..=last];
    let deg = poly.len() - 1;
    let mut zeros = vec![Complex64::new(0.0, 0.0); a.len() - 1 - last];
    if deg == 0 {
        return zeros;
    }
    let mut companion = DMatrix::<f64>::zeros(deg, deg);
    for j in 0..deg {
        companion[(0, j)] = -poly[j + 1] / poly[0];
    }
    for i in 1..deg {
        companion[(i, i - 1)] = 1.0;
    }
    zeros.extend(companion.complex_eigenvalues().iter().copied());
    zeros
}

pub fn max_zero_radius(a: &[f64]) -> f64 {
    polynomial_zeros(a)
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn flat_magnitude_gives_impulse() {
        let mut c = vec![0.0; 8];
        c[0] = 1.0;
        let f = minimum_phase_factor(&c, DEFAULT_FFT_LEN).unwrap();
        assert_abs_diff_eq!(f.taps[0], 1.0, epsilon = 1e-12);
        for v in &f.taps[1..] {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn two_tap_factor() {
        // Oracle: 1 + 0.5 z⁻¹ has its only zero at -0.5, inside the circle,
        // and autocorrelation (1.25, 0.5).
        let c = [1.25, 0.5, 0.0, 0.0, 0.0];
        let f = minimum_phase_factor(&c, DEFAULT_FFT_LEN).unwrap();
        let expect = [1.0, 0.5, 0.0, 0.0, 0.0];
        for (a, b) in f.taps.iter().zip(expect) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-10);
        }
        let zeros = polynomial_zeros(&[1.0, 0.5]);
        assert_eq!(zeros.len(), 1);
        assert_abs_diff_eq!(zeros[0].re, -0.5, epsilon = 1e-14);
    }

    #[test]
    fn maximum_phase_input_reflected_inside() {
        // 0.5 + z⁻¹ has its zero at -2; its minimum-phase twin is 1 + 0.5 z⁻¹.
        let c = autocorrelation(&[0.5, 1.0, 0.0]);
        let f = minimum_phase_factor(&c, 1024).unwrap();
        assert_abs_diff_eq!(f.taps[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(f.taps[1], 0.5, epsilon = 1e-10);
        assert!(max_zero_radius(&f.taps) < 1.0);
    }

    #[test]
    fn negative_magnitude_rejected() {
        // c(0) + 2 c(1) cos θ < 0 at θ = π.
        assert!(minimum_phase_factor(&[1.0, 0.8], 256).is_err());
        assert!(minimum_phase_factor(&[0.0, 0.0], 256).is_err());
    }

    #[test]
    fn magnitude_grid_matches_direct_sum() {
        let c = [2.0, 0.3, -0.2, 0.05];
        let n = 64;
        let fast = magnitude_squared_on_grid(&c, n);
        for (k, v) in fast.iter().enumerate() {
            let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            let direct = c[0] + 2.0 * (1..4).map(|q| c[q] * (q as f64 * th).cos()).sum::<f64>();
            assert_abs_diff_eq!(*v, direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn zeros_with_trailing_and_leading_zero_taps() {
        let z = polynomial_zeros(&[0.0, 1.0, -0.25, 0.0]);
        // 1 - 0.25 z⁻¹ (zero at 0.25) preceded by a delay; trailing zero tap is a root at 0.
        let mut radii: Vec<f64> = z.iter().map(|v| v.norm()).collect();
        radii.sort_by(f64::total_cmp);
        assert_eq!(radii.len(), 2);
        assert_abs_diff_eq!(radii[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(radii[1], 0.25, epsilon = 1e-14);
    }
}
