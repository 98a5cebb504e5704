//! Signal-to-alias ratio, its Monte-Carlo time-domain check, and the
//! fullband ERLE bound from model truncation.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::bank::AnalysisBank;
use crate::error::{Error, Result};
use crate::model::SourceModel;
use crate::warp::{self, BankSpec, FilterKind, PrototypeFilter};

const TWO_PI: f64 = 2.0 * PI;
pub const DEFAULT_SAR_GRID: usize = 2048;

/// Per-band and overall SAR. Alias-free bands report `+∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarReport {
    pub sigma2: Vec<f64>,
    pub alias2: Vec<f64>,
    #[serde(with = "infinite_as_null")]
    pub sar_db: Vec<f64>,
    #[serde(with = "infinite_scalar_as_null")]
    pub overall_sar_db: f64,
}

impl SarReport {
    pub fn from_powers(sigma2: Vec<f64>, alias2: Vec<f64>) -> Self {
        let sar_db = sigma2
            .iter()
            .zip(&alias2)
            .map(|(s, a)| ratio_db(*s, *a))
            .collect();
        let overall_sar_db = ratio_db(sigma2.iter().sum(), alias2.iter().sum());
        Self {
            sigma2,
            alias2,
            sar_db,
            overall_sar_db,
        }
    }
}

fn ratio_db(num: f64, den: f64) -> f64 {
    if den <= 0.0 {
        f64::INFINITY
    } else {
        10.0 * (num / den).log10()
    }
}

/// `σ_i² = (D_i/2π) ∫_{-π}^{π} |L_i|² dω` and
/// `(σ_i^{(a)})² = (1/2π) ∫_{Ω_l}^{Ω_h} Σ_{d=1}^{D_i-1} |L_i(e^{j(ω-2πd)/D_i})|² dω`
/// with `|L_i|² = P_xx |S|² |H_i|²`, both by the midpoint rule.
pub fn sar(
    spec: &BankSpec,
    h: &PrototypeFilter,
    model: &SourceModel,
    grid_n: usize,
) -> Result<SarReport> {
    spec.check_prototype(h, FilterKind::Analysis)?;
    if grid_n == 0 {
        return Err(Error::InvalidArgument("SAR grid must be nonempty".into()));
    }
    let coeffs = h.coeffs();
    let l2 = |band: usize, w: f64| {
        model.power(w) * warp::analysis_response_at(spec, coeffs, band, w).norm_sqr()
    };

    let powers: Vec<(f64, f64)> = (0..spec.bands())
        .into_par_iter()
        .map(|band| {
            let factor = spec.factor(band);
            let full = warp::midpoint_grid(grid_n, -PI, TWO_PI);
            let sigma2 =
                factor as f64 * full.iter().map(|&w| l2(band, w)).sum::<f64>() / grid_n as f64;
            if factor == 1 {
                return Ok((sigma2, 0.0));
            }
            let edges = warp::band_edges(spec, band)?;
            let span = edges.omega_h - edges.omega_l;
            let alias = warp::midpoint_grid(grid_n, edges.omega_l, span)
                .iter()
                .map(|&w| {
                    (1..factor)
                        .map(|d| l2(band, (w - TWO_PI * d as f64) / factor as f64))
                        .sum::<f64>()
                })
                .sum::<f64>()
                * span
                / (TWO_PI * grid_n as f64);
            Ok((sigma2, alias))
        })
        .collect::<Result<_>>()?;
    let (sigma2, alias2) = powers.into_iter().unzip();
    Ok(SarReport::from_powers(sigma2, alias2))
}

/// Measured subband power and out-of-band (aliasing) power with standard
/// errors from independent blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuredBand {
    pub total: f64,
    pub total_se: f64,
    pub alias: f64,
    pub alias_se: f64,
    #[serde(with = "infinite_scalar_as_null")]
    pub sar_db: f64,
}

pub const MIN_ORACLE_SAMPLES: usize = 1 << 16;
const ORACLE_BLOCK: usize = 1 << 14;
const ORACLE_WARMUP: usize = 4096;

/// Drives the analysis bank with seeded unit-variance white noise and splits
/// each undecimated subband signal into its image inside
/// `[Ω_l, Ω_h]/D_i` and the remainder, which decimation folds onto the
/// band as aliasing. The ratio total/alias estimates the same quantity as
/// [`sar`] with a white model.
pub fn sar_oracle_montecarlo(
    spec: &BankSpec,
    h: &PrototypeFilter,
    seed: u64,
    n_samples: usize,
) -> Result<Vec<MeasuredBand>> {
    if n_samples < MIN_ORACLE_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "at least {MIN_ORACLE_SAMPLES} samples required, got {n_samples}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..n_samples + ORACLE_WARMUP)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let mut bank = AnalysisBank::new(spec, h)?;
    let subbands = bank.run(&x);
    let blocks = n_samples / ORACLE_BLOCK;
    let fft = FftPlanner::new().plan_fft_forward(ORACLE_BLOCK);

    subbands
        .into_par_iter()
        .enumerate()
        .map(|(band, signal)| {
            let factor = spec.factor(band);
            let in_band: Vec<bool> = if factor == 1 {
                vec![true; ORACLE_BLOCK]
            } else {
                let edges = warp::band_edges(spec, band)?;
                let (lo, hi) = (edges.omega_l / factor as f64, edges.omega_h / factor as f64);
                (0..ORACLE_BLOCK)
                    .map(|k| {
                        let nu = TWO_PI * k as f64 / ORACLE_BLOCK as f64;
                        // Shift into [lo, lo + 2π) before comparing.
                        let shifted = lo + (nu - lo).rem_euclid(TWO_PI);
                        shifted <= hi
                    })
                    .collect()
            };
            let mut totals = Vec::with_capacity(blocks);
            let mut aliases = Vec::with_capacity(blocks);
            let mut buf = vec![Complex64::new(0.0, 0.0); ORACLE_BLOCK];
            for b in 0..blocks {
                let start = ORACLE_WARMUP + b * ORACLE_BLOCK;
                buf.copy_from_slice(&signal[start..start + ORACLE_BLOCK]);
                fft.process(&mut buf);
                let norm = (ORACLE_BLOCK * ORACLE_BLOCK) as f64;
                let (mut total, mut alias) = (0.0, 0.0);
                for (v, &inside) in buf.iter().zip(&in_band) {
                    let p = v.norm_sqr() / norm;
                    total += p;
                    if !inside {
                        alias += p;
                    }
                }
                totals.push(total);
                aliases.push(alias);
            }
            let (total, total_se) = mean_and_se(&totals);
            let (alias, alias_se) = mean_and_se(&aliases);
            Ok(MeasuredBand {
                total,
                total_se,
                alias,
                alias_se,
                sar_db: ratio_db(total, alias),
            })
        })
        .collect()
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `10 log₁₀(Σ_{i≥0} s_i² / Σ_{i≥N} s_i²)`, `+∞` when the tail is empty.
pub fn erle_upper_bound(s: &[f64], model_len: usize) -> Result<f64> {
    let total: f64 = s.iter().map(|v| v * v).sum();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument(
            "impulse response has zero energy".into(),
        ));
    }
    let tail: f64 = s.iter().skip(model_len).map(|v| v * v).sum();
    Ok(ratio_db(total, tail))
}

mod infinite_scalar_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| x.is_finite().then_some(*x)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(Vec::<Option<f64>>::deserialize(d)?
            .into_iter()
            .map(|x| x.unwrap_or(f64::INFINITY))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn geometric_tail_bound() {
        let s: Vec<f64> = (0..200).map(|i| 0.5f64.powi(i)).collect();
        assert_abs_diff_eq!(erle_upper_bound(&s, 4).unwrap(), 24.0824, epsilon = 1e-4);
        assert_abs_diff_eq!(erle_upper_bound(&s, 0).unwrap(), 0.0, epsilon = 1e-12);
        assert_eq!(erle_upper_bound(&s, 200).unwrap(), f64::INFINITY);
        assert!(erle_upper_bound(&[0.0; 4], 2).is_err());
    }

    #[test]
    fn alias_free_bank_is_infinite() {
        let spec = BankSpec::uniform(4, 0.5, 1).unwrap();
        let h = PrototypeFilter::analysis(vec![0.25; 4]).unwrap();
        let r = sar(&spec, &h, &SourceModel::white(), 256).unwrap();
        assert!(r.alias2.iter().all(|&a| a == 0.0));
        assert!(r.sar_db.iter().all(|v| v.is_infinite()));
        assert!(r.overall_sar_db.is_infinite());
        let json = serde_json::to_string(&r).unwrap();
        let back: SarReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn uniform_boxcar_matches_dirichlet_kernel() {
        // μ = 0: |H_i(ω)|² = F(ω + 2πi/M) with F the squared Dirichlet kernel
        // of the boxcar; the band occupies D·(-2πi/M - π/D, -2πi/M + π/D).
        let (m, d) = (4usize, 4usize);
        let spec = BankSpec::uniform(m, 0.0, d).unwrap();
        let h = PrototypeFilter::analysis(vec![0.25; 4]).unwrap();
        let r = sar(&spec, &h, &SourceModel::white(), 4096).unwrap();
        let fejer = |t: f64| {
            let s = (t / 2.0).sin();
            if s.abs() < 1e-12 {
                1.0
            } else {
                ((m as f64 * t / 2.0).sin() / (m as f64 * s)).powi(2)
            }
        };
        let n = 200_000;
        for i in 0..m {
            let wc = TWO_PI * i as f64 / m as f64;
            // Fine Riemann sum of the alias integral in the decimated-ν domain.
            let mut alias = 0.0;
            let mut total = 0.0;
            for k in 0..n {
                let nu = -PI + TWO_PI * (k as f64 + 0.5) / n as f64;
                let p = fejer(nu + wc);
                total += p;
                let centre = -wc;
                let dist = (nu - centre + PI).rem_euclid(TWO_PI) - PI;
                if dist.abs() > PI / d as f64 {
                    alias += p;
                }
            }
            let expect = 10.0 * (total / alias).log10();
            assert_abs_diff_eq!(r.sar_db[i], expect, epsilon = 1e-3);
        }
    }

    #[test]
    fn overall_is_mediant_of_bands() {
        let spec = BankSpec::new(0.5, vec![2, 4, 4, 2, 2, 4]).unwrap();
        let h = PrototypeFilter::analysis(vec![0.05, 0.15, 0.3, 0.3, 0.15, 0.05]).unwrap();
        let r = sar(&spec, &h, &SourceModel::white(), 512).unwrap();
        let lo = r.sar_db.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = r.sar_db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo <= r.overall_sar_db && r.overall_sar_db <= hi);
    }

    #[test]
    fn oracle_rejects_short_runs_and_reports_zero_alias_for_unit_factor() {
        let spec = BankSpec::uniform(4, 0.5, 1).unwrap();
        let h = PrototypeFilter::analysis(vec![0.25; 4]).unwrap();
        assert!(sar_oracle_montecarlo(&spec, &h, 1, 1000).is_err());
        let bands = sar_oracle_montecarlo(&spec, &h, 1, MIN_ORACLE_SAMPLES).unwrap();
        for b in bands {
            assert_eq!(b.alias, 0.0);
            assert!(b.sar_db.is_infinite());
        }
    }
}
