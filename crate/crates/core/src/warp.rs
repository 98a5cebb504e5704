//! Geometry and frequency responses of the allpass-warped DFT filter bank.
//!
//! Every delay of an `M`-point DFT bank is replaced by a first-order allpass
//! section. The bank places the prototype's frequency `ω` at the bank
//! frequency `φ(ω)` returned by [`warp_frequency`], so that for `μ > 0` the
//! low bands are narrow and the band around `π` is the widest.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

/// Bank configuration: band count, warping coefficient and per-band
/// decimation factors. The band count is `decimation.len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBankSpec", into = "RawBankSpec")]
pub struct BankSpec {
    mu: f64,
    decimation: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBankSpec {
    #[serde(rename = "M")]
    m: usize,
    mu: f64,
    #[serde(rename = "D")]
    d: Vec<usize>,
}

impl TryFrom<RawBankSpec> for BankSpec {
    type Error = Error;

    fn try_from(raw: RawBankSpec) -> Result<Self> {
        if raw.d.len() != raw.m {
            return Err(Error::InvalidBank(format!(
                "M = {} but D has {} entries",
                raw.m,
                raw.d.len()
            )));
        }
        BankSpec::new(raw.mu, raw.d)
    }
}

impl From<BankSpec> for RawBankSpec {
    fn from(spec: BankSpec) -> Self {
        RawBankSpec {
            m: spec.bands(),
            mu: spec.mu,
            d: spec.decimation,
        }
    }
}

impl BankSpec {
    pub fn new(mu: f64, decimation: Vec<usize>) -> Result<Self> {
        check_mu(mu)?;
        if decimation.is_empty() {
            return Err(Error::InvalidBank("at least one band is required".into()));
        }
        if let Some(i) = decimation.iter().position(|&d| d == 0) {
            return Err(Error::InvalidBank(format!(
                "decimation factor of band {i} is zero"
            )));
        }
        Ok(Self { mu, decimation })
    }

    pub fn uniform(bands: usize, mu: f64, factor: usize) -> Result<Self> {
        Self::new(mu, vec![factor; bands])
    }

    /// Number of bands `M` (also the prototype length).
    pub fn bands(&self) -> usize {
        self.decimation.len()
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn decimation(&self) -> &[usize] {
        &self.decimation
    }

    pub fn factor(&self, band: usize) -> usize {
        self.decimation[band]
    }

    pub fn max_factor(&self) -> usize {
        self.decimation.iter().copied().max().unwrap_or(1)
    }

    pub fn is_alias_free(&self) -> bool {
        self.decimation.iter().all(|&d| d == 1)
    }

    /// Frequency response of the bank's warping section,
    /// `(e^{-jω} - μ) / (1 - μ e^{-jω})`.
    ///
    /// This is [`allpass_response`] evaluated at `-μ`; its negative unwrapped
    /// phase is the inverse of [`warp_frequency`] at `μ`.
    pub fn allpass(&self, omega: f64) -> Complex64 {
        allpass_unchecked(-self.mu, omega)
    }

    /// Modulation factor `W_M^k = e^{-j2πk/M}`.
    pub fn twiddle(&self, k: i64) -> Complex64 {
        let m = self.bands() as i64;
        Complex64::from_polar(1.0, -TWO_PI * (k.rem_euclid(m)) as f64 / m as f64)
    }

    pub(crate) fn check_prototype(&self, filter: &PrototypeFilter, kind: FilterKind) -> Result<()> {
        if filter.kind != kind {
            return Err(Error::InvalidPrototype(format!(
                "expected {kind:?} prototype, got {:?}",
                filter.kind
            )));
        }
        if filter.len() != self.bands() {
            return Err(Error::InvalidPrototype(format!(
                "prototype has {} taps, bank has {} bands",
                filter.len(),
                self.bands()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Analysis,
    Synthesis,
}

/// Real prototype filter `h(n)` or `g(n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeFilter {
    coeffs: Vec<f64>,
    kind: FilterKind,
}

impl PrototypeFilter {
    pub fn new(coeffs: Vec<f64>, kind: FilterKind) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidPrototype("empty coefficient list".into()));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidPrototype("non-finite coefficient".into()));
        }
        Ok(Self { coeffs, kind })
    }

    pub fn analysis(coeffs: Vec<f64>) -> Result<Self> {
        Self::new(coeffs, FilterKind::Analysis)
    }

    pub fn synthesis(coeffs: Vec<f64>) -> Result<Self> {
        Self::new(coeffs, FilterKind::Synthesis)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn kind(&self) -> FilterKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.coeffs.iter().sum()
    }

    /// Copy rescaled to unit coefficient sum.
    pub fn unit_sum(&self) -> Result<Self> {
        let s = self.sum();
        if s == 0.0 || !s.is_finite() {
            return Err(Error::InvalidPrototype("coefficient sum is zero".into()));
        }
        Self::new(self.coeffs.iter().map(|c| c / s).collect(), self.kind)
    }

    /// Evaluates `Σ_n c(n) vⁿ` by Horner's rule.
    pub fn polyval(&self, v: Complex64) -> Complex64 {
        polyval(&self.coeffs, v)
    }
}

pub(crate) fn polyval(coeffs: &[f64], v: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * v + c)
}

/// Band geometry after warping and decimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarpedBand {
    pub index: usize,
    /// Nominal prototype-domain centre `2πi/M`.
    pub omega_c: f64,
    /// Prototype-domain half-width `x`.
    pub half_width: f64,
    pub omega_l: f64,
    pub omega_h: f64,
}

impl WarpedBand {
    /// Band interval in undecimated bank frequency, `[Ω_l, Ω_h] / D_i`.
    pub fn bank_interval(&self, factor: usize) -> (f64, f64) {
        (self.omega_l / factor as f64, self.omega_h / factor as f64)
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if mu.is_finite() && mu.abs() < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidMu(mu))
    }
}

fn allpass_unchecked(mu: f64, omega: f64) -> Complex64 {
    let z = Complex64::from_polar(1.0, omega);
    (z * mu + 1.0) / (z + mu)
}

/// First-order allpass `A(e^{jω}) = (μe^{jω} + 1) / (e^{jω} + μ)`.
pub fn allpass_response(mu: f64, omega: f64) -> Result<Complex64> {
    check_mu(mu)?;
    Ok(allpass_unchecked(mu, omega))
}

/// Warping map `φ(ω)`: the negative unwrapped phase of
/// [`allpass_response`]. Continuous, strictly increasing, odd, with
/// `φ(ω + 2π) = φ(ω) + 2π`.
pub fn warp_frequency(mu: f64, omega: f64) -> Result<f64> {
    check_mu(mu)?;
    Ok(phi(mu, omega))
}

// arg A = -ω + 2·atan2(μ sin ω, 1 + μ cos ω); the atan2 term never wraps
// because 1 + μ cos ω > 0.
pub(crate) fn phi(mu: f64, omega: f64) -> f64 {
    omega - 2.0 * (mu * omega.sin()).atan2(1.0 + mu * omega.cos())
}

/// Principal-value arctangent form of the warping map; agrees with
/// [`warp_frequency`] modulo `π`.
pub fn warp_frequency_principal(mu: f64, omega: f64) -> Result<f64> {
    check_mu(mu)?;
    let num = (1.0 - mu * mu) * omega.sin();
    let den = (1.0 + mu * mu) * omega.cos() + 2.0 * mu;
    Ok((num / den).atan())
}

fn band_width_residual(mu: f64, centre: f64, x: f64, target: f64) -> f64 {
    phi(mu, centre + x) - phi(mu, centre - x) - target
}

/// Half-width `x` of band `i` in the prototype domain: the root of
/// `φ(c + x) − φ(c − x) = 2π / D_i` about the band centre `c = −2πi/M`,
/// found by golden-section search on the squared residual.
pub fn band_halfwidth(spec: &BankSpec, band: usize) -> Result<f64> {
    let m = spec.bands();
    if band >= m {
        return Err(Error::InvalidArgument(format!(
            "band {band} out of range for {m} bands"
        )));
    }
    let mu = spec.mu();
    let centre = -TWO_PI * band as f64 / m as f64;
    let target = TWO_PI / spec.factor(band) as f64;
    let (lo, hi) = (1e-6, PI);

    if band_width_residual(mu, centre, lo, target) > 0.0
        || band_width_residual(mu, centre, hi, target) < -1e-12
    {
        return Err(Error::NoBracket { band });
    }

    let objective = |x: f64| band_width_residual(mu, centre, x, target).powi(2);
    let x = golden_section(objective, lo, hi, 1e-12);

    if band_width_residual(mu, centre, x, target).abs() > 1e-9 {
        return Err(Error::NoBracket { band });
    }
    Ok(x)
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Integration limits `Ω_l`, `Ω_h` of band `i` after decimation.
pub fn band_edges(spec: &BankSpec, band: usize) -> Result<WarpedBand> {
    let x = band_halfwidth(spec, band)?;
    let m = spec.bands();
    let mu = spec.mu();
    let factor = spec.factor(band) as f64;
    let omega_c = TWO_PI * band as f64 / m as f64;
    let omega_l = factor * phi(mu, -omega_c - x);
    let omega_h_direct = factor * phi(mu, -omega_c + x);
    let omega_h = omega_l + TWO_PI;
    debug_assert!((omega_h - omega_h_direct).abs() < 1e-6);
    Ok(WarpedBand {
        index: band,
        omega_c,
        half_width: x,
        omega_l,
        omega_h,
    })
}

pub fn all_band_edges(spec: &BankSpec) -> Result<Vec<WarpedBand>> {
    (0..spec.bands()).map(|i| band_edges(spec, i)).collect()
}

/// Uniform half-open grid of `n` points on `[start, start + span)`.
pub fn uniform_grid(n: usize, start: f64, span: f64) -> Vec<f64> {
    let step = span / n as f64;
    (0..n).map(|p| start + step * p as f64).collect()
}

/// Midpoint grid of `n` points covering `[start, start + span]`.
pub fn midpoint_grid(n: usize, start: f64, span: f64) -> Vec<f64> {
    let step = span / n as f64;
    (0..n).map(|p| start + step * (p as f64 + 0.5)).collect()
}

/// `H_i(e^{jω}) = Σ_n h(n) W_M^{ni} A(e^{jω})ⁿ` at a single frequency.
pub(crate) fn analysis_response_at(
    spec: &BankSpec,
    h: &[f64],
    band: usize,
    omega: f64,
) -> Complex64 {
    polyval(h, spec.twiddle(band as i64) * spec.allpass(omega))
}

/// `G_i(e^{jω}) = Σ_n g(n) W_M^{-ni} A(e^{jω})^{M-n-1}` at a single frequency.
pub(crate) fn synthesis_response_at(
    spec: &BankSpec,
    g: &[f64],
    band: usize,
    omega: f64,
) -> Complex64 {
    let a = spec.allpass(omega);
    let m = g.len();
    // A is unimodular, so A^{M-1-n} = A^{M-1} conj(A)^n.
    a.powu(m as u32 - 1) * polyval(g, spec.twiddle(-(band as i64)) * a.conj())
}

pub fn analysis_band_response(
    spec: &BankSpec,
    h: &PrototypeFilter,
    band: usize,
    omega: &[f64],
) -> Result<Vec<Complex64>> {
    spec.check_prototype(h, FilterKind::Analysis)?;
    check_band(spec, band)?;
    Ok(omega
        .iter()
        .map(|&w| analysis_response_at(spec, h.coeffs(), band, w))
        .collect())
}

pub fn synthesis_band_response(
    spec: &BankSpec,
    g: &PrototypeFilter,
    band: usize,
    omega: &[f64],
) -> Result<Vec<Complex64>> {
    spec.check_prototype(g, FilterKind::Synthesis)?;
    check_band(spec, band)?;
    Ok(omega
        .iter()
        .map(|&w| synthesis_response_at(spec, g.coeffs(), band, w))
        .collect())
}

fn check_band(spec: &BankSpec, band: usize) -> Result<()> {
    if band < spec.bands() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "band {band} out of range for {} bands",
            spec.bands()
        )))
    }
}

/// Periodically time-varying response of the analysis-synthesis cascade,
/// split into the distortion part and the per-phase alias part.
#[derive(Debug, Clone)]
pub struct OverallTransfer {
    pub omega: Vec<f64>,
    /// `T_d(e^{jω})`.
    pub distortion: Vec<Complex64>,
    /// `T_a(e^{jω}, l)` indexed `[l][grid point]`, `l = 0..D_max`.
    pub alias: Vec<Vec<Complex64>>,
}

impl OverallTransfer {
    pub fn phases(&self) -> usize {
        self.alias.len()
    }

    /// `T_l = T_d + T_a(·, l)`.
    pub fn phase_response(&self, l: usize) -> Vec<Complex64> {
        self.distortion
            .iter()
            .zip(&self.alias[l])
            .map(|(d, a)| d + a)
            .collect()
    }

    /// `max_{ω,l} | 20 log10 |T_l| |`, the worst amplitude deviation in dB.
    pub fn max_deviation_db(&self) -> f64 {
        (0..self.phases())
            .flat_map(|l| self.phase_response(l))
            .map(|t| (20.0 * t.norm().log10()).abs())
            .fold(0.0, f64::max)
    }
}

/// Computes `T_d` in closed form and `T_a(·, l)` by direct summation over
/// bands and alias images; `l` runs over `0..D_max` for every band.
///
/// Both parts carry the `1/M` of the synthesis inverse DFT, so the band sum
/// `Σ_i H_i G_i` reduces to `A^{M-1} Σ h(n) g(n)` and `hᵀg = 1` gives a
/// unit-magnitude distortion term.
pub fn overall_transfer(
    spec: &BankSpec,
    h: &PrototypeFilter,
    g: &PrototypeFilter,
    omega: &[f64],
) -> Result<OverallTransfer> {
    spec.check_prototype(h, FilterKind::Analysis)?;
    spec.check_prototype(g, FilterKind::Synthesis)?;
    let m = spec.bands();
    let dmax = spec.max_factor();
    let hg: f64 = h.coeffs().iter().zip(g.coeffs()).map(|(a, b)| a * b).sum();

    let distortion = omega
        .iter()
        .map(|&w| spec.allpass(w).powu(m as u32 - 1) * hg)
        .collect();

    let inv_m = 1.0 / m as f64;
    let mut alias = vec![vec![Complex64::new(0.0, 0.0); omega.len()]; dmax];
    for (p, &w) in omega.iter().enumerate() {
        for band in 0..m {
            let factor = spec.factor(band);
            if factor == 1 {
                continue;
            }
            let gi = synthesis_response_at(spec, g.coeffs(), band, w) * inv_m;
            for d in 1..factor {
                let shift = TWO_PI * d as f64 / factor as f64;
                let term = gi * analysis_response_at(spec, h.coeffs(), band, w - shift);
                for (l, row) in alias.iter_mut().enumerate() {
                    // W_D^{-dl} = e^{j2πdl/D}
                    let phase = Complex64::from_polar(1.0, shift * l as f64);
                    row[p] += phase * term;
                }
            }
        }
    }

    Ok(OverallTransfer {
        omega: omega.to_vec(),
        distortion,
        alias,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn allpass_examples() {
        let a = allpass_response(0.5, 0.0).unwrap();
        assert_abs_diff_eq!(a.re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a.im, 0.0, epsilon = 1e-15);

        let a = allpass_response(0.0, 1.2).unwrap();
        let expect = Complex64::from_polar(1.0, -1.2);
        assert_abs_diff_eq!((a - expect).norm(), 0.0, epsilon = 1e-15);

        let a = allpass_response(0.5, PI).unwrap();
        assert_abs_diff_eq!(a.re, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn allpass_rejects_unstable_mu() {
        assert!(matches!(
            allpass_response(1.0, 0.3),
            Err(Error::InvalidMu(_))
        ));
        assert!(matches!(
            allpass_response(-1.5, 0.3),
            Err(Error::InvalidMu(_))
        ));
        assert!(warp_frequency(f64::NAN, 0.3).is_err());
    }

    #[test]
    fn warp_examples() {
        assert_abs_diff_eq!(warp_frequency(0.0, 0.777).unwrap(), 0.777, epsilon = 1e-15);
        assert_abs_diff_eq!(warp_frequency(0.5, PI).unwrap(), PI, epsilon = 1e-12);
        // -arg A(e^{jπ/2}) at μ = 0.5 is atan(0.75).
        let oracle = -allpass_response(0.5, PI / 2.0).unwrap().arg();
        assert_abs_diff_eq!(oracle, 0.75f64.atan(), epsilon = 1e-15);
        assert_abs_diff_eq!(
            warp_frequency(0.5, PI / 2.0).unwrap(),
            oracle,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            warp_frequency(0.5, PI / 2.0).unwrap(),
            0.6435011,
            epsilon = 1e-7
        );
    }

    #[test]
    fn principal_form_agrees_modulo_pi() {
        for k in 0..200 {
            let w = -PI + 0.0313 * k as f64;
            for mu in [-0.7, -0.2, 0.3, 0.5, 0.9] {
                let a = warp_frequency(mu, w).unwrap();
                let b = warp_frequency_principal(mu, w).unwrap();
                let r = (a - b) / PI;
                assert!((r - r.round()).abs() < 1e-9, "mu={mu} w={w}");
            }
        }
    }

    #[test]
    fn bank_allpass_inverts_warp() {
        let spec = BankSpec::uniform(8, 0.5, 2).unwrap();
        for k in 1..50 {
            let w = -3.0 + 0.12 * k as f64;
            let bank_phase = -spec.allpass(phi(0.5, w)).arg();
            assert_abs_diff_eq!(bank_phase, w, epsilon = 1e-12);
        }
    }

    #[test]
    fn halfwidth_identity_warp() {
        let spec = BankSpec::uniform(8, 0.0, 2).unwrap();
        for i in 0..8 {
            assert_abs_diff_eq!(band_halfwidth(&spec, i).unwrap(), PI / 2.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn halfwidth_out_of_range_band() {
        let spec = BankSpec::uniform(4, 0.5, 2).unwrap();
        assert!(band_halfwidth(&spec, 4).is_err());
    }

    #[test]
    fn full_band_width_for_unit_decimation() {
        let spec = BankSpec::uniform(4, 0.5, 1).unwrap();
        for i in 0..4 {
            let band = band_edges(&spec, i).unwrap();
            assert_abs_diff_eq!(band.half_width, PI, epsilon = 1e-9);
            assert_abs_diff_eq!(band.omega_h - band.omega_l, TWO_PI, epsilon = 1e-9);
        }
    }

    #[test]
    fn identity_warp_edges() {
        let spec = BankSpec::uniform(8, 0.0, 2).unwrap();
        let band = band_edges(&spec, 2).unwrap();
        // D·(-π/2 - π/2) = -2π, i.e. 0 shifted by one period of the alias sum.
        assert_abs_diff_eq!(band.omega_l, -TWO_PI, epsilon = 1e-9);
        assert_abs_diff_eq!(band.omega_h, 0.0, epsilon = 1e-9);
        let band0 = band_edges(&spec, 0).unwrap();
        assert_abs_diff_eq!(band0.omega_l, -PI, epsilon = 1e-9);
        assert_abs_diff_eq!(band0.omega_h, PI, epsilon = 1e-9);
    }

    #[test]
    fn unit_impulse_analysis_is_flat() {
        let spec = BankSpec::uniform(6, 0.4, 2).unwrap();
        let h = PrototypeFilter::analysis(vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let grid = uniform_grid(64, -PI, TWO_PI);
        for i in 0..6 {
            for v in analysis_band_response(&spec, &h, i, &grid).unwrap() {
                assert_abs_diff_eq!((v - 1.0).norm(), 0.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn unit_sum_prototype_has_unit_dc_gain() {
        let spec = BankSpec::uniform(4, 0.6, 2).unwrap();
        let h = PrototypeFilter::analysis(vec![0.1, 0.4, 0.3, 0.2]).unwrap();
        let v = analysis_band_response(&spec, &h, 0, &[0.0]).unwrap();
        assert_abs_diff_eq!((v[0] - 1.0).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn synthesis_impulse_is_allpass_power() {
        let spec = BankSpec::uniform(5, 0.3, 2).unwrap();
        let g = PrototypeFilter::synthesis(vec![1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let grid = uniform_grid(32, -PI, TWO_PI);
        let resp = synthesis_band_response(&spec, &g, 0, &grid).unwrap();
        for (v, &w) in resp.iter().zip(&grid) {
            assert_abs_diff_eq!(v.norm(), 1.0, epsilon = 1e-13);
            assert_abs_diff_eq!((v - spec.allpass(w).powu(4)).norm(), 0.0, epsilon = 1e-13);
        }

        let flat = BankSpec::uniform(5, 0.0, 2).unwrap();
        let resp = synthesis_band_response(&flat, &g, 0, &[0.9]).unwrap();
        assert_abs_diff_eq!(
            (resp[0] - Complex64::from_polar(1.0, -0.9 * 4.0)).norm(),
            0.0,
            epsilon = 1e-13
        );
    }

    #[test]
    fn kind_mismatch_rejected() {
        let spec = BankSpec::uniform(2, 0.0, 1).unwrap();
        let g = PrototypeFilter::synthesis(vec![1.0, 0.0]).unwrap();
        assert!(analysis_band_response(&spec, &g, 0, &[0.0]).is_err());
        let short = PrototypeFilter::analysis(vec![1.0]).unwrap();
        assert!(analysis_band_response(&spec, &short, 0, &[0.0]).is_err());
    }

    #[test]
    fn alias_free_bank_has_no_alias_term() {
        let spec = BankSpec::uniform(4, 0.5, 1).unwrap();
        let h = PrototypeFilter::analysis(vec![0.3, -0.2, 0.5, 0.1]).unwrap();
        let g = PrototypeFilter::synthesis(vec![0.2, 0.7, -0.1, 0.4]).unwrap();
        let t = overall_transfer(&spec, &h, &g, &uniform_grid(32, -PI, TWO_PI)).unwrap();
        assert_eq!(t.phases(), 1);
        assert!(t.alias[0].iter().all(|a| a.norm() == 0.0));
    }

    #[test]
    fn unit_inner_product_gives_unit_distortion() {
        let spec = BankSpec::uniform(4, 0.5, 2).unwrap();
        let h = PrototypeFilter::analysis(vec![0.5, 0.5, 1.0, 0.0]).unwrap();
        let g = PrototypeFilter::synthesis(vec![1.0, 0.0, 0.5, 3.0]).unwrap();
        let t = overall_transfer(&spec, &h, &g, &uniform_grid(64, -PI, TWO_PI)).unwrap();
        for d in &t.distortion {
            assert_abs_diff_eq!(d.norm(), 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn bank_spec_json_round_trip_and_validation() {
        let spec: BankSpec = serde_json::from_str(r#"{"M":3,"mu":0.5,"D":[1,2,4]}"#).unwrap();
        assert_eq!(spec.bands(), 3);
        assert_eq!(spec.max_factor(), 4);
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<BankSpec>(&text).unwrap(), spec);

        for bad in [
            r#"{"M":2,"mu":0.5,"D":[1,2,4]}"#,
            r#"{"M":1,"mu":1.5,"D":[1]}"#,
            r#"{"M":1,"mu":0.5,"D":[0]}"#,
            r#"{"M":1,"mu":0.5,"D":[1],"extra":0}"#,
        ] {
            assert!(serde_json::from_str::<BankSpec>(bad).is_err(), "{bad}");
        }
    }
}
