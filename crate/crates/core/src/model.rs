use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Input PSD `P_xx` and unknown-system power spectrum `|S|²`, sampled on a
/// uniform grid over `[-π, π)` and interpolated periodically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceModel {
    pxx: Vec<f64>,
    s2: Vec<f64>,
}

impl SourceModel {
    /// `P_xx = |S|² = 1`.
    pub fn white() -> Self {
        Self {
            pxx: vec![1.0],
            s2: vec![1.0],
        }
    }

    /// Samples at `ω_k = -π + 2πk/n`, `k = 0..n`.
    pub fn from_samples(pxx: Vec<f64>, s2: Vec<f64>) -> Result<Self> {
        if pxx.is_empty() || pxx.len() != s2.len() {
            return Err(Error::InvalidModel(format!(
                "P_xx has {} samples, |S|² has {}",
                pxx.len(),
                s2.len()
            )));
        }
        if let Some(v) = pxx
            .iter()
            .chain(&s2)
            .find(|v| !(**v >= 0.0) || !v.is_finite())
        {
            return Err(Error::InvalidModel(format!(
                "spectra must be finite and nonnegative, found {v}"
            )));
        }
        Ok(Self { pxx, s2 })
    }

    pub fn from_fn(n: usize, pxx: impl Fn(f64) -> f64, s2: impl Fn(f64) -> f64) -> Result<Self> {
        let grid = Self::grid(n);
        Self::from_samples(
            grid.iter().map(|&w| pxx(w)).collect(),
            grid.iter().map(|&w| s2(w)).collect(),
        )
    }

    /// Sample positions of an `n`-point model grid.
    pub fn grid(n: usize) -> Vec<f64> {
        (0..n)
            .map(|k| -PI + 2.0 * PI * k as f64 / n as f64)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.pxx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pxx.is_empty()
    }

    pub fn pxx_samples(&self) -> &[f64] {
        &self.pxx
    }

    pub fn s2_samples(&self) -> &[f64] {
        &self.s2
    }

    pub fn is_white(&self) -> bool {
        self.pxx.iter().chain(&self.s2).all(|&v| v == 1.0)
    }

    pub fn pxx(&self, omega: f64) -> f64 {
        interpolate(&self.pxx, omega)
    }

    pub fn s2(&self, omega: f64) -> f64 {
        interpolate(&self.s2, omega)
    }

    /// `P_xx(e^{jω}) |S(e^{jω})|²`.
    pub fn power(&self, omega: f64) -> f64 {
        self.pxx(omega) * self.s2(omega)
    }

    /// Same model with `P_xx` multiplied by `scale`.
    pub fn scaled(&self, scale: f64) -> Result<Self> {
        Self::from_samples(
            self.pxx.iter().map(|v| v * scale).collect(),
            self.s2.clone(),
        )
    }
}

fn interpolate(samples: &[f64], omega: f64) -> f64 {
    let n = samples.len();
    if n == 1 {
        return samples[0];
    }
    let pos = (omega + PI).rem_euclid(2.0 * PI) / (2.0 * PI) * n as f64;
    let k = (pos.floor() as usize).min(n - 1);
    let t = pos - k as f64;
    samples[k] * (1.0 - t) + samples[(k + 1) % n] * t
}
