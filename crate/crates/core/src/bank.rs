//! Streaming time-domain analysis and synthesis banks built from chains of
//! first-order allpass sections.

use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::Result;
use crate::warp::{BankSpec, FilterKind, PrototypeFilter};

/// One warping section `y[n] = -μ x[n] + x[n-1] + μ y[n-1]`.
#[derive(Debug, Clone, Copy)]
struct Section<T> {
    x1: T,
    y1: T,
}

impl<T> Section<T>
where
    T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
{
    fn new(zero: T) -> Self {
        Self { x1: zero, y1: zero }
    }

    #[inline]
    fn step(&mut self, mu: f64, x: T) -> T {
        let y = self.x1 - x * mu + self.y1 * mu;
        self.x1 = x;
        self.y1 = y;
        y
    }
}

/// Produces all `M` undecimated complex subband samples per input sample.
pub struct AnalysisBank {
    mu: f64,
    h: Vec<f64>,
    chain: Vec<Section<f64>>,
    fft: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl AnalysisBank {
    pub fn new(spec: &BankSpec, h: &PrototypeFilter) -> Result<Self> {
        spec.check_prototype(h, FilterKind::Analysis)?;
        let m = spec.bands();
        let fft = FftPlanner::new().plan_fft_forward(m);
        let scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        Ok(Self {
            mu: spec.mu(),
            h: h.coeffs().to_vec(),
            chain: vec![Section::new(0.0); m.saturating_sub(1)],
            fft,
            buf: vec![Complex64::new(0.0, 0.0); m],
            scratch,
        })
    }

    pub fn bands(&self) -> usize {
        self.h.len()
    }

    /// `x_i[n] = Σ_k h(k) W_M^{ki} (A^k x)[n]` for every band `i`.
    pub fn process(&mut self, x: f64) -> &[Complex64] {
        let mut u = x;
        self.buf[0] = Complex64::new(self.h[0] * u, 0.0);
        for (k, section) in self.chain.iter_mut().enumerate() {
            u = section.step(self.mu, u);
            self.buf[k + 1] = Complex64::new(self.h[k + 1] * u, 0.0);
        }
        self.fft
            .process_with_scratch(&mut self.buf, &mut self.scratch);
        &self.buf
    }

    /// Undecimated subband signals, `[band][n]`.
    pub fn run(&mut self, x: &[f64]) -> Vec<Vec<Complex64>> {
        let m = self.bands();
        let mut out = vec![Vec::with_capacity(x.len()); m];
        for &v in x {
            for (band, s) in self.process(v).iter().enumerate() {
                out[band].push(*s);
            }
        }
        out
    }
}

/// Combines full-rate (already upsampled) subband samples into one real
/// output sample: `y = Re (1/M) Σ_i G_i Y_i`.
pub struct SynthesisBank {
    mu: f64,
    g: Vec<f64>,
    chain: Vec<Section<Complex64>>,
    ifft: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl SynthesisBank {
    pub fn new(spec: &BankSpec, g: &PrototypeFilter) -> Result<Self> {
        spec.check_prototype(g, FilterKind::Synthesis)?;
        let m = spec.bands();
        let ifft = FftPlanner::new().plan_fft_inverse(m);
        let scratch = vec![Complex64::new(0.0, 0.0); ifft.get_inplace_scratch_len()];
        Ok(Self {
            mu: spec.mu(),
            g: g.coeffs().to_vec(),
            chain: vec![Section::new(Complex64::new(0.0, 0.0)); m.saturating_sub(1)],
            ifft,
            buf: vec![Complex64::new(0.0, 0.0); m],
            scratch,
        })
    }

    /// `Σ_n g(n) A^{M-1-n} v_n` with `v_n = (1/M) Σ_i W_M^{-ni} Y_i`,
    /// evaluated by Horner's rule along the allpass chain.
    pub fn process(&mut self, subbands: &[Complex64]) -> f64 {
        self.buf.copy_from_slice(subbands);
        self.ifft
            .process_with_scratch(&mut self.buf, &mut self.scratch);
        let scale = 1.0 / self.g.len() as f64;
        self.buf.iter_mut().for_each(|v| *v *= scale);
        let mut acc = self.buf[0] * self.g[0];
        for (k, section) in self.chain.iter_mut().enumerate() {
            acc = section.step(self.mu, acc) + self.buf[k + 1] * self.g[k + 1];
        }
        acc.re
    }
}

/// Decimates every band by its own factor, keeping samples at `n ≡ 0 mod D_i`.
pub fn decimate(spec: &BankSpec, subbands: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    subbands
        .iter()
        .enumerate()
        .map(|(i, s)| s.iter().step_by(spec.factor(i)).copied().collect())
        .collect()
}

/// Full analysis → decimation → zero-insertion (gain `D_i`) → synthesis.
pub fn analysis_synthesis(
    spec: &BankSpec,
    h: &PrototypeFilter,
    g: &PrototypeFilter,
    x: &[f64],
) -> Result<Vec<f64>> {
    let mut analysis = AnalysisBank::new(spec, h)?;
    let mut synthesis = SynthesisBank::new(spec, g)?;
    let m = spec.bands();
    let mut frame = vec![Complex64::new(0.0, 0.0); m];
    Ok(x.iter()
        .enumerate()
        .map(|(n, &v)| {
            let sub = analysis.process(v);
            for i in 0..m {
                let d = spec.factor(i);
                frame[i] = if n % d == 0 {
                    sub[i] * d as f64
                } else {
                    Complex64::new(0.0, 0.0)
                };
            }
            synthesis.process(&frame)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::warp;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn dft_at(x: &[Complex64], omega: f64) -> Complex64 {
        x.iter()
            .enumerate()
            .map(|(n, v)| v * Complex64::from_polar(1.0, -omega * n as f64))
            .sum()
    }

    #[test]
    fn analysis_impulse_matches_frequency_response() {
        let spec = BankSpec::uniform(6, 0.45, 1).unwrap();
        let h = PrototypeFilter::analysis(vec![0.1, 0.3, 0.2, 0.15, 0.15, 0.1]).unwrap();
        let mut bank = AnalysisBank::new(&spec, &h).unwrap();
        let mut x = vec![0.0; 400];
        x[0] = 1.0;
        let sub = bank.run(&x);
        for (band, signal) in sub.iter().enumerate() {
            for w in [-2.5, -0.3, 0.0, 1.1, 2.9] {
                let direct = warp::analysis_band_response(&spec, &h, band, &[w]).unwrap()[0];
                assert_abs_diff_eq!((dft_at(signal, w) - direct).norm(), 0.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn synthesis_impulse_matches_frequency_response() {
        let spec = BankSpec::uniform(5, -0.3, 1).unwrap();
        let g = PrototypeFilter::synthesis(vec![0.3, -0.1, 0.2, 0.4, 0.2]).unwrap();
        for band in 0..5 {
            let mut bank = SynthesisBank::new(&spec, &g).unwrap();
            let mut frame = vec![Complex64::new(0.0, 0.0); 5];
            frame[band] = Complex64::new(1.0, 0.0);
            let mut y = vec![Complex64::new(bank.process(&frame), 0.0)];
            frame[band] = Complex64::new(0.0, 0.0);
            // Feed `j` on a second run to recover the imaginary part.
            let mut bank_j = SynthesisBank::new(&spec, &g).unwrap();
            let mut frame_j = vec![Complex64::new(0.0, 0.0); 5];
            frame_j[band] = Complex64::new(0.0, -1.0);
            y[0].im = bank_j.process(&frame_j);
            frame_j[band] = Complex64::new(0.0, 0.0);
            for _ in 1..300 {
                y.push(Complex64::new(
                    bank.process(&frame),
                    bank_j.process(&frame_j),
                ));
            }
            for w in [-2.0, 0.0, 0.7, 3.0] {
                let direct = warp::synthesis_band_response(&spec, &g, band, &[w]).unwrap()[0] / 5.0;
                assert_abs_diff_eq!((dft_at(&y, w) - direct).norm(), 0.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn decimated_cascade_matches_periodic_transfer() {
        // Oracle: a unit impulse at time l through the full cascade has
        // spectrum e^{-jωl} T_l(e^{jω}).
        let spec = BankSpec::new(0.4, vec![2, 4, 2, 4]).unwrap();
        let h = PrototypeFilter::analysis(vec![0.2, 0.35, 0.3, 0.15]).unwrap();
        let g = PrototypeFilter::synthesis(vec![0.3, 0.3, 0.25, 0.15]).unwrap();
        let grid = [-2.2, -0.4, 0.0, 0.9, 2.6];
        let t = warp::overall_transfer(&spec, &h, &g, &grid).unwrap();
        for l in 0..4 {
            let mut x = vec![0.0; 600];
            x[l] = 1.0;
            let y: Vec<Complex64> = analysis_synthesis(&spec, &h, &g, &x)
                .unwrap()
                .iter()
                .map(|&v| v.into())
                .collect();
            let tl = t.phase_response(l);
            for (p, &w) in grid.iter().enumerate() {
                let got = dft_at(&y, w) * Complex64::from_polar(1.0, w * l as f64);
                assert_abs_diff_eq!((got - tl[p]).norm(), 0.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn alias_free_cascade_is_allpass_delay() {
        // D_i = 1: the cascade is exactly T_d = A^{M-1} Σ h g.
        let spec = BankSpec::uniform(4, 0.5, 1).unwrap();
        let h = PrototypeFilter::analysis(vec![0.4, 0.3, 0.2, 0.1]).unwrap();
        let g = PrototypeFilter::synthesis(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let mut x = vec![0.0; 512];
        x[0] = 1.0;
        let y = analysis_synthesis(&spec, &h, &g, &x).unwrap();
        let yc: Vec<Complex64> = y.iter().map(|&v| v.into()).collect();
        let hg: f64 = 0.04 + 0.06 + 0.06 + 0.04;
        for w in [-PI + 0.1, 0.2, 1.3] {
            let expect = spec.allpass(w).powu(3) * hg;
            assert_abs_diff_eq!((dft_at(&yc, w) - expect).norm(), 0.0, epsilon = 1e-10);
        }
    }
}
