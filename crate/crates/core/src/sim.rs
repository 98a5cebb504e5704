//! Subband acoustic echo cancellation: signal generation, per-band complex
//! NLMS and ERLE tracing.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::bank::{AnalysisBank, SynthesisBank};
use crate::error::{Error, Result};
use crate::warp::{BankSpec, FilterKind, PrototypeFilter};

const SIGNAL_STREAM: u64 = 0;
const SYSTEM_STREAM: u64 = 1;

pub const COLORED_ORDER: usize = 5;
pub const COLORED_CUTOFF: f64 = 0.25 * PI;
pub const SPEECH_CORNER_HZ: f64 = 500.0;
const SPREAD_DIM: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SignalKind {
    White,
    Colored,
    SpeechLike,
    File { samples: Vec<f64> },
}

/// Order-5 Hamming-windowed sinc lowpass with cutoff `0.25π`, scaled to
/// unit energy.
pub fn colored_fir() -> Vec<f64> {
    let n = COLORED_ORDER + 1;
    let centre = COLORED_ORDER as f64 / 2.0;
    let taps: Vec<f64> = (0..n)
        .map(|k| {
            let t = k as f64 - centre;
            let sinc = if t == 0.0 {
                COLORED_CUTOFF / PI
            } else {
                (COLORED_CUTOFF * t).sin() / (PI * t)
            };
            let window = 0.54 - 0.46 * (2.0 * PI * k as f64 / COLORED_ORDER as f64).cos();
            sinc * window
        })
        .collect();
    let energy = taps.iter().map(|v| v * v).sum::<f64>().sqrt();
    taps.iter().map(|v| v / energy).collect()
}

/// `|FIR(e^{jω})|²` of [`colored_fir`].
pub fn colored_psd(omega: f64) -> f64 {
    colored_fir()
        .iter()
        .enumerate()
        .map(|(k, &c)| Complex64::from_polar(c, -omega * k as f64))
        .sum::<Complex64>()
        .norm_sqr()
}

/// Synthetic speech envelope: flat to 500 Hz, then −6 dB per octave.
/// Normalised so that its mean over `[-π, π)` is one.
pub fn speech_psd(omega: f64, sample_rate: f64) -> f64 {
    speech_shape(omega, sample_rate) / speech_mean(sample_rate)
}

fn speech_shape(omega: f64, sample_rate: f64) -> f64 {
    let w = (omega + PI).rem_euclid(2.0 * PI) - PI;
    let f = w.abs() / (2.0 * PI) * sample_rate;
    if f <= SPEECH_CORNER_HZ {
        1.0
    } else {
        (SPEECH_CORNER_HZ / f).powi(2)
    }
}

fn speech_mean(sample_rate: f64) -> f64 {
    // Closed form of (1/π) ∫_0^π shape dω with f_c = 500 Hz.
    let wc = 2.0 * PI * SPEECH_CORNER_HZ / sample_rate;
    if wc >= PI {
        return 1.0;
    }
    (wc + wc * wc * (1.0 / wc - 1.0 / PI)) / PI
}

#[derive(Debug, Clone)]
pub struct GeneratedSignal {
    pub samples: Vec<f64>,
    /// Eigenvalue spread of the 32×32 sample autocorrelation matrix.
    pub eigenvalue_spread: f64,
}

pub fn generate_signal(
    kind: &SignalKind,
    seed: u64,
    length: usize,
    sample_rate: f64,
) -> Result<GeneratedSignal> {
    if length == 0 {
        return Err(Error::InvalidArgument(
            "signal length must be positive".into(),
        ));
    }
    let samples = match kind {
        SignalKind::White => white_noise(seed, length),
        SignalKind::Colored => {
            let fir = colored_fir();
            let w = white_noise(seed, length + COLORED_ORDER);
            (0..length)
                .map(|n| {
                    fir.iter()
                        .enumerate()
                        .map(|(k, c)| c * w[n + COLORED_ORDER - k])
                        .sum()
                })
                .collect()
        }
        SignalKind::SpeechLike => {
            shape_spectrum(&white_noise(seed, length), |w| speech_psd(w, sample_rate))
        }
        SignalKind::File { samples } => {
            if samples.len() < length {
                return Err(Error::InvalidArgument(format!(
                    "signal file has {} samples, {length} required",
                    samples.len()
                )));
            }
            samples[..length].to_vec()
        }
    };
    let eigenvalue_spread = eigenvalue_spread(&samples, SPREAD_DIM);
    Ok(GeneratedSignal {
        samples,
        eigenvalue_spread,
    })
}

fn white_noise(seed: u64, length: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SIGNAL_STREAM);
    (0..length)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect()
}

/// Circular spectral shaping by `sqrt(psd)`.
fn shape_spectrum(x: &[f64], psd: impl Fn(f64) -> f64) -> Vec<f64> {
    let n = x.len();
    let mut planner = FftPlanner::new();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| v.into()).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        *v *= psd(2.0 * PI * k as f64 / n as f64).sqrt();
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|v| v.re / n as f64).collect()
}

/// `λ_max / λ_min` of the Toeplitz sample autocorrelation matrix.
pub fn eigenvalue_spread(x: &[f64], dim: usize) -> f64 {
    let n = x.len();
    let dim = dim.min(n);
    let r: Vec<f64> = (0..dim)
        .map(|k| {
            x[..n - k]
                .iter()
                .zip(&x[k..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / n as f64
        })
        .collect();
    let mat = DMatrix::from_fn(dim, dim, |i, j| r[i.abs_diff(j)]);
    let eig = mat.symmetric_eigenvalues();
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Gaussian unknown system with unit-variance taps.
pub fn generate_unknown_system(seed: u64, length: usize) -> Result<Vec<f64>> {
    if length == 0 {
        return Err(Error::InvalidArgument(
            "unknown system length must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SYSTEM_STREAM);
    Ok((0..length)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimParams {
    pub sample_rate: f64,
    pub duration: f64,
    pub adapt_start: f64,
    pub fullband_taps: usize,
    pub step_size: f64,
    /// Regularisation relative to the running input-power estimate.
    pub nlms_eps: f64,
    pub seed: u64,
    pub signal: SignalKind,
    pub unknown_len: usize,
    pub window: f64,
    pub hop: f64,
    /// Independent realisations whose window powers are averaged.
    pub ensemble: usize,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            sample_rate: 16000.0,
            duration: 20.0,
            adapt_start: 1.0,
            fullband_taps: 256,
            step_size: 0.5,
            nlms_eps: 1e-6,
            seed: 1,
            signal: SignalKind::White,
            unknown_len: 200,
            window: 0.05,
            hop: 0.025,
            ensemble: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub spec: BankSpec,
    pub h: PrototypeFilter,
    pub g: PrototypeFilter,
    pub params: SimParams,
    /// Overrides the seeded Gaussian unknown system.
    pub unknown_system: Option<Vec<f64>>,
}

impl SimConfig {
    pub fn new(spec: BankSpec, h: PrototypeFilter, g: PrototypeFilter, params: SimParams) -> Self {
        Self {
            spec,
            h,
            g,
            params,
            unknown_system: None,
        }
    }

    fn validate(&self) -> Result<Vec<usize>> {
        self.spec.check_prototype(&self.h, FilterKind::Analysis)?;
        self.spec.check_prototype(&self.g, FilterKind::Synthesis)?;
        let p = &self.params;
        if !(p.sample_rate > 0.0
            && p.duration > 0.0
            && p.adapt_start >= 0.0
            && p.adapt_start < p.duration)
        {
            return Err(Error::InvalidArgument(
                "need sample_rate > 0 and 0 <= adapt_start < duration".into(),
            ));
        }
        if !(p.step_size > 0.0 && p.step_size < 2.0) || !(p.nlms_eps >= 0.0) {
            return Err(Error::InvalidArgument(
                "step_size must be in (0, 2), nlms_eps >= 0".into(),
            ));
        }
        if !(p.window > 0.0 && p.hop > 0.0) {
            return Err(Error::InvalidArgument(
                "window and hop must be positive".into(),
            ));
        }
        self.spec
            .decimation()
            .iter()
            .map(|&d| {
                if p.fullband_taps.is_multiple_of(d) && p.fullband_taps >= d {
                    Ok(p.fullband_taps / d)
                } else {
                    Err(Error::InvalidArgument(format!(
                        "fullband_taps {} is not a multiple of decimation factor {d}",
                        p.fullband_taps
                    )))
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErleTrace {
    pub time: Vec<f64>,
    pub erle_db: Vec<f64>,
    pub steady_state_db: f64,
    /// Raw `10 log₁₀(P_d/P_e)` averaged over windows inside the first
    /// second, subtracted from every point.
    pub reference_db: f64,
    pub diverged: bool,
    pub eigenvalue_spread: f64,
}

impl ErleTrace {
    /// Trace value at the first window centred at or after `t`.
    pub fn at(&self, t: f64) -> Option<f64> {
        self.time
            .iter()
            .position(|&v| v >= t)
            .map(|k| self.erle_db[k])
    }
}

/// Complex NLMS state of one band, `y = wᴴx`.
#[derive(Debug, Clone)]
pub struct SubbandAfState {
    pub weights: Vec<Complex64>,
    delay: Vec<Complex64>,
    head: usize,
    pub power: f64,
}

impl SubbandAfState {
    pub fn new(taps: usize) -> Self {
        Self {
            weights: vec![Complex64::new(0.0, 0.0); taps],
            delay: vec![Complex64::new(0.0, 0.0); taps],
            head: 0,
            power: 0.0,
        }
    }

    /// Pushes `x`, returns `e = d − wᴴx` and adapts when `adapt` is set.
    fn step(
        &mut self,
        x: Complex64,
        d: Complex64,
        step: f64,
        eps_rel: f64,
        adapt: bool,
    ) -> Complex64 {
        let n = self.weights.len();
        self.head = (self.head + n - 1) % n;
        self.delay[self.head] = x;
        let alpha = 1.0 / n as f64;
        self.power += alpha * (x.norm_sqr() - self.power);

        let mut y = Complex64::new(0.0, 0.0);
        let mut energy = 0.0;
        for k in 0..n {
            let xv = self.delay[(self.head + k) % n];
            y += self.weights[k].conj() * xv;
            energy += xv.norm_sqr();
        }
        let e = d - y;
        if adapt {
            let eps = eps_rel * n as f64 * self.power + f64::MIN_POSITIVE;
            let gain = e.conj() * (step / (eps + energy));
            for k in 0..n {
                let xv = self.delay[(self.head + k) % n];
                self.weights[k] += xv * gain;
            }
        }
        e
    }
}

/// Decimated complex subband signals, `[band][m]`.
fn analyze(spec: &BankSpec, h: &PrototypeFilter, x: &[f64]) -> Result<Vec<Vec<Complex64>>> {
    let mut bank = AnalysisBank::new(spec, h)?;
    let mut out: Vec<Vec<Complex64>> = spec
        .decimation()
        .iter()
        .map(|&d| Vec::with_capacity(x.len() / d + 1))
        .collect();
    for (n, &v) in x.iter().enumerate() {
        let sub = bank.process(v);
        for (i, band) in out.iter_mut().enumerate() {
            if n % spec.factor(i) == 0 {
                band.push(sub[i]);
            }
        }
    }
    Ok(out)
}

/// Zero-insertion by `D_i` with gain `D_i`, then synthesis.
fn synthesize(
    spec: &BankSpec,
    g: &PrototypeFilter,
    subbands: &[Vec<Complex64>],
    len: usize,
) -> Result<Vec<f64>> {
    let mut bank = SynthesisBank::new(spec, g)?;
    let m = spec.bands();
    let mut frame = vec![Complex64::new(0.0, 0.0); m];
    Ok((0..len)
        .map(|n| {
            for i in 0..m {
                let d = spec.factor(i);
                frame[i] = if n % d == 0 {
                    subbands[i][n / d] * d as f64
                } else {
                    Complex64::new(0.0, 0.0)
                };
            }
            bank.process(&frame)
        })
        .collect())
}

fn convolve(x: &[f64], s: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|n| {
            s.iter()
                .take(n + 1)
                .enumerate()
                .map(|(k, c)| c * x[n - k])
                .sum()
        })
        .collect()
}

/// Runs `params.ensemble` independent realisations (seeds `seed`,
/// `seed + 1`, …, each drawing its own signal and unknown system), sums the
/// per-window desired and error powers across them and converts to ERLE.
pub fn run_simulation(cfg: &SimConfig) -> Result<ErleTrace> {
    let taps = cfg.validate()?;
    let p = &cfg.params;
    if p.ensemble == 0 {
        return Err(Error::InvalidArgument("ensemble must be at least 1".into()));
    }
    let runs = (0..p.ensemble as u64)
        .into_par_iter()
        .map(|r| run_once(cfg, &taps, p.seed.wrapping_add(r)))
        .collect::<Result<Vec<_>>>()?;
    let mut total = runs[0].clone();
    for run in &runs[1..] {
        for (a, b) in total.pd.iter_mut().zip(&run.pd) {
            *a += b;
        }
        for (a, b) in total.pe.iter_mut().zip(&run.pe) {
            *a += b;
        }
        total.diverged |= run.diverged;
    }
    total.spread = runs.iter().map(|r| r.spread).sum::<f64>() / runs.len() as f64;
    Ok(erle_trace(total, p))
}

#[derive(Debug, Clone)]
struct WindowPowers {
    time: Vec<f64>,
    pd: Vec<f64>,
    pe: Vec<f64>,
    diverged: bool,
    spread: f64,
}

fn run_once(cfg: &SimConfig, taps: &[usize], seed: u64) -> Result<WindowPowers> {
    let p = &cfg.params;
    let len = (p.duration * p.sample_rate).round() as usize;
    let signal = generate_signal(&p.signal, seed, len, p.sample_rate)?;
    let system = match &cfg.unknown_system {
        Some(s) if !s.is_empty() => s.clone(),
        Some(_) => return Err(Error::InvalidArgument("unknown system is empty".into())),
        None => generate_unknown_system(seed, p.unknown_len)?,
    };
    let x = signal.samples;
    let d = convolve(&x, &system);

    let spec = &cfg.spec;
    let xs = analyze(spec, &cfg.h, &x)?;
    let ds = analyze(spec, &cfg.h, &d)?;
    let adapt_from = (p.adapt_start * p.sample_rate).round() as usize;

    let es: Vec<Vec<Complex64>> = (0..spec.bands())
        .into_par_iter()
        .map(|i| {
            let factor = spec.factor(i);
            let mut state = SubbandAfState::new(taps[i]);
            xs[i]
                .iter()
                .zip(&ds[i])
                .enumerate()
                .map(|(m, (&xv, &dv))| {
                    state.step(xv, dv, p.step_size, p.nlms_eps, m * factor >= adapt_from)
                })
                .collect()
        })
        .collect();

    let d_hat = synthesize(spec, &cfg.g, &ds, len)?;
    let e = synthesize(spec, &cfg.g, &es, len)?;

    let win = ((p.window * p.sample_rate).round() as usize).max(1);
    let hop = ((p.hop * p.sample_rate).round() as usize).max(1);
    let mut out = WindowPowers {
        time: Vec::new(),
        pd: Vec::new(),
        pe: Vec::new(),
        diverged: false,
        spread: signal.eigenvalue_spread,
    };
    let mut start = 0;
    while start + win <= len {
        let pd: f64 = d_hat[start..start + win].iter().map(|v| v * v).sum();
        let pe: f64 = e[start..start + win].iter().map(|v| v * v).sum();
        if start >= adapt_from && pe > 10.0 * pd {
            out.diverged = true;
        }
        out.time
            .push((start as f64 + win as f64 / 2.0) / p.sample_rate);
        out.pd.push(pd);
        out.pe.push(pe);
        start += hop;
    }
    Ok(out)
}

fn erle_trace(w: WindowPowers, p: &SimParams) -> ErleTrace {
    let time = w.time;
    let raw: Vec<f64> =
        w.pd.iter()
            .zip(&w.pe)
            .map(|(d, e)| 10.0 * ((d + f64::MIN_POSITIVE) / (e + f64::MIN_POSITIVE)).log10())
            .collect();
    let diverged = w.diverged;
    let spread = w.spread;
    // Windows that end inside the first second and before adaptation.
    let reference_end = p.adapt_start.min(1.0);
    let first: Vec<f64> = time
        .iter()
        .zip(&raw)
        .filter(|(t, _)| **t + p.window / 2.0 <= reference_end + 1e-12)
        .map(|(_, v)| *v)
        .collect();
    let reference_db = if first.is_empty() {
        0.0
    } else {
        first.iter().sum::<f64>() / first.len() as f64
    };
    let erle_db: Vec<f64> = raw.iter().map(|v| v - reference_db).collect();
    let tail_from = erle_db.len() - erle_db.len() / 5;
    let tail = &erle_db[tail_from.min(erle_db.len().saturating_sub(1))..];
    let steady_state_db = tail.iter().sum::<f64>() / tail.len().max(1) as f64;
    ErleTrace {
        time,
        erle_db,
        steady_state_db,
        reference_db,
        diverged,
        eigenvalue_spread: spread,
    }
}

#[derive(Debug, Clone)]
pub struct NamedDesign {
    pub name: String,
    pub h: PrototypeFilter,
    pub g: PrototypeFilter,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Comparison {
    pub names: Vec<String>,
    pub traces: Vec<ErleTrace>,
    pub steady_state_db: Vec<f64>,
    /// Steady state of each design minus that of the first.
    pub delta_db: Vec<f64>,
}

/// Runs every design on the same signal, unknown system and seed.
pub fn compare_designs(
    spec: &BankSpec,
    params: &SimParams,
    designs: &[NamedDesign],
) -> Result<Comparison> {
    if designs.len() < 2 {
        return Err(Error::InvalidArgument(
            "at least two designs are required".into(),
        ));
    }
    let traces = designs
        .iter()
        .map(|d| {
            run_simulation(&SimConfig::new(
                spec.clone(),
                d.h.clone(),
                d.g.clone(),
                params.clone(),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let steady_state_db: Vec<f64> = traces.iter().map(|t| t.steady_state_db).collect();
    let delta_db = steady_state_db
        .iter()
        .map(|v| v - steady_state_db[0])
        .collect();
    Ok(Comparison {
        names: designs.iter().map(|d| d.name.clone()).collect(),
        traces,
        steady_state_db,
        delta_db,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn white_noise_statistics() {
        let s = generate_signal(&SignalKind::White, 3, 1 << 20, 16000.0).unwrap();
        let var = s.samples.iter().map(|v| v * v).sum::<f64>() / s.samples.len() as f64;
        assert_abs_diff_eq!(var, 1.0, epsilon = 0.01);
        assert!(s.eigenvalue_spread < 1.5);
        assert!(generate_signal(&SignalKind::White, 3, 0, 16000.0).is_err());
    }

    #[test]
    fn colored_fir_shape() {
        let fir = colored_fir();
        assert_eq!(fir.len(), 6);
        assert_abs_diff_eq!(fir.iter().map(|v| v * v).sum::<f64>(), 1.0, epsilon = 1e-14);
        for k in 0..3 {
            assert_abs_diff_eq!(fir[k], fir[5 - k], epsilon = 1e-15);
        }
        assert!(colored_psd(0.0) > 100.0 * colored_psd(PI));
    }

    #[test]
    fn speech_envelope_normalised() {
        let n = 1 << 16;
        let mean = (0..n)
            .map(|k| speech_psd(-PI + 2.0 * PI * (k as f64 + 0.5) / n as f64, 16000.0))
            .sum::<f64>()
            / n as f64;
        assert_abs_diff_eq!(mean, 1.0, epsilon = 1e-4);
        let one_k = speech_psd(2.0 * PI * 1000.0 / 16000.0, 16000.0);
        let two_k = speech_psd(2.0 * PI * 2000.0 / 16000.0, 16000.0);
        assert_abs_diff_eq!(10.0 * (one_k / two_k).log10(), 6.0206, epsilon = 1e-3);
    }

    #[test]
    fn unknown_system_deterministic() {
        let a = generate_unknown_system(9, 200).unwrap();
        assert_eq!(a, generate_unknown_system(9, 200).unwrap());
        assert_ne!(a, generate_unknown_system(10, 200).unwrap());
        assert!(generate_unknown_system(9, 0).is_err());
        let energy: f64 = a.iter().map(|v| v * v).sum();
        assert!((energy - 200.0).abs() <= 3.0 * 400f64.sqrt());
    }

    #[test]
    fn nlms_identifies_fir_system() {
        let mut st = SubbandAfState::new(4);
        let target = [
            Complex64::new(0.5, 0.1),
            Complex64::new(-0.2, 0.3),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.1, 0.0),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut hist = vec![Complex64::new(0.0, 0.0); 4];
        let mut last = Complex64::new(1.0, 0.0);
        for _ in 0..5000 {
            let x = Complex64::new(
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            );
            hist.rotate_right(1);
            hist[0] = x;
            let d: Complex64 = target.iter().zip(&hist).map(|(w, h)| w.conj() * h).sum();
            last = st.step(x, d, 0.5, 1e-6, true);
        }
        assert!(last.norm() < 1e-10);
        for (w, t) in st.weights.iter().zip(&target) {
            assert_abs_diff_eq!((w - t).norm(), 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn taps_must_divide() {
        let spec = BankSpec::new(0.5, vec![3, 2]).unwrap();
        let h = PrototypeFilter::analysis(vec![0.5, 0.5]).unwrap();
        let g = PrototypeFilter::synthesis(vec![1.0, 1.0]).unwrap();
        let cfg = SimConfig::new(spec, h, g, SimParams::default());
        assert!(run_simulation(&cfg).is_err());
    }
}
