//! SAR-maximising analysis prototype design.
//!
//! The squared magnitude of every subband filter is affine in the symmetric
//! coefficients `c(k)` of `|Ĥ₀|²`, so the total alias power at fixed total
//! signal power is a linear program in `c`. The minimum-phase prototype is
//! then recovered from `c` by cepstral spectral factorisation.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cepstrum::{self, SpectralFactor};
use crate::error::{Error, Result};
use crate::model::SourceModel;
use crate::solver::{self, LinearProgram, LpResiduals};
use crate::warp::{self, BankSpec, PrototypeFilter, WarpedBand};

const TWO_PI: f64 = 2.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignOptions {
    /// Grid points per band for the alias rows.
    pub grid_n: usize,
    /// Relative magnitude floor replacing the strict positivity constraint.
    pub epsilon: f64,
    /// Multiplier on the equality constant (any positive value; the design
    /// is scale covariant).
    pub eq_scale: f64,
    pub fft_len: usize,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self {
            grid_n: 512,
            epsilon: 1e-6,
            eq_scale: 1.0,
            fft_len: cepstrum::DEFAULT_FFT_LEN,
        }
    }
}

impl DesignOptions {
    pub fn with_grid(grid_n: usize) -> Self {
        Self {
            grid_n,
            ..Self::default()
        }
    }
}

/// Symmetric magnitude-squared coefficients, `c(-k) = c(k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagnitudeSpec {
    pub c: Vec<f64>,
}

impl MagnitudeSpec {
    /// `|H_i(e^{jω})|² = c(0) + 2 Σ_{k≥1} c(k) Re[W_M^{ik} A(e^{jω})^k]`.
    pub fn band_magnitude_squared(&self, spec: &BankSpec, band: usize, omega: f64) -> f64 {
        dot(&self.c, &magnitude_row(spec, band, omega))
    }

    /// `|Ĥ₀(e^{jθ})|²` of the unwarped prototype.
    pub fn prototype_magnitude_squared(&self, theta: f64) -> f64 {
        self.c[0]
            + 2.0
                * self.c[1..]
                    .iter()
                    .enumerate()
                    .map(|(k, ck)| ck * ((k + 1) as f64 * theta).cos())
                    .sum::<f64>()
    }
}

/// Row `r` with `r·c = |H_i(e^{jω})|²`.
pub(crate) fn magnitude_row(spec: &BankSpec, band: usize, omega: f64) -> Vec<f64> {
    let v = spec.twiddle(band as i64) * spec.allpass(omega);
    let mut row = Vec::with_capacity(spec.bands());
    let mut p = num_complex::Complex64::new(1.0, 0.0);
    row.push(1.0);
    for _ in 1..spec.bands() {
        p *= v;
        row.push(2.0 * p.re);
    }
    row
}

fn prototype_rows(m: usize, n: usize) -> Vec<Vec<f64>> {
    prototype_rows_at(m, &warp::uniform_grid(n, 0.0, TWO_PI))
}

fn prototype_rows_at(m: usize, theta: &[f64]) -> Vec<Vec<f64>> {
    theta
        .iter()
        .map(|&th| {
            (0..m)
                .map(|k| {
                    if k == 0 {
                        1.0
                    } else {
                        2.0 * (k as f64 * th).cos()
                    }
                })
                .collect()
        })
        .collect()
}

/// Per-band alias and signal rows of the design LP.
#[derive(Debug, Clone)]
pub struct BandRows {
    pub band: WarpedBand,
    /// Alias grid `ω_p` over `[Ω_l, Ω_h)`.
    pub omega: Vec<f64>,
    /// `A^{(i)}`: one row per `ω_p`, alias images `d = 1..D_i` folded in,
    /// scaled so that the row sum is the band's alias power.
    pub alias: Vec<Vec<f64>>,
    /// `1ᵀB^{(i)}`: row whose product with `c` is `σ_i²`.
    pub signal: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct AliasLp {
    pub bands: Vec<BandRows>,
    pub grid_n: usize,
    /// Bands included in objective and equality.
    pub active: Vec<usize>,
    /// `|Ĥ₀(e^{jθ})|²` rows on a uniform `[0, 2π)` grid. Every band response
    /// is a warped rotation of the prototype, so this covers all bands.
    pub positivity: Vec<Vec<f64>>,
    pub eq_constant: f64,
    pub floor: f64,
}

impl AliasLp {
    /// `1ᵀA` restricted to the active bands.
    pub fn cost_row(&self) -> Vec<f64> {
        let m = self.dim();
        let mut cost = vec![0.0; m];
        for &i in &self.active {
            for row in &self.bands[i].alias {
                axpy(1.0, row, &mut cost);
            }
        }
        cost
    }

    /// `1ᵀB` restricted to the active bands.
    pub fn equality_row(&self) -> Vec<f64> {
        let mut eq = vec![0.0; self.dim()];
        for &i in &self.active {
            axpy(1.0, &self.bands[i].signal, &mut eq);
        }
        eq
    }

    /// Full multi-band alias power `Σ_i (σ_i^{(a)})²` at `c`.
    pub fn total_alias(&self, c: &[f64]) -> f64 {
        self.bands
            .iter()
            .flat_map(|b| b.alias.iter())
            .map(|row| dot(row, c))
            .sum()
    }

    pub fn total_signal(&self, c: &[f64]) -> f64 {
        self.bands.iter().map(|b| dot(&b.signal, c)).sum()
    }

    pub fn dim(&self) -> usize {
        self.bands.first().map_or(0, |b| b.signal.len())
    }

    pub fn to_linear_program(&self) -> LinearProgram {
        let ineq_matrix = self.positivity.clone();
        let ineq_rhs = vec![self.floor; ineq_matrix.len()];
        LinearProgram {
            cost: self.cost_row(),
            eq_matrix: vec![self.equality_row()],
            eq_rhs: vec![self.eq_constant],
            ineq_matrix,
            ineq_rhs,
        }
    }
}

/// Assembles the alias/signal rows for every band. `eq_constant` is set so
/// that the flat response `c = (1, 0, …, 0)` satisfies the equality, times
/// `options.eq_scale`.
pub fn build_alias_lp(
    spec: &BankSpec,
    model: &SourceModel,
    options: &DesignOptions,
) -> Result<AliasLp> {
    build_alias_lp_for(spec, model, options, (0..spec.bands()).collect())
}

fn build_alias_lp_for(
    spec: &BankSpec,
    model: &SourceModel,
    options: &DesignOptions,
    active: Vec<usize>,
) -> Result<AliasLp> {
    if options.grid_n < 64 {
        return Err(Error::InvalidArgument(format!(
            "grid_n must be at least 64, got {}",
            options.grid_n
        )));
    }
    if !(options.eq_scale > 0.0) || !(options.epsilon > 0.0) {
        return Err(Error::InvalidArgument(
            "eq_scale and epsilon must be positive".into(),
        ));
    }
    let n = options.grid_n;
    let m = spec.bands();
    let edges = warp::all_band_edges(spec)?;

    let bands: Vec<BandRows> = edges
        .into_par_iter()
        .map(|band| {
            let i = band.index;
            let factor = spec.factor(i);
            let omega = warp::uniform_grid(n, band.omega_l, TWO_PI);
            let alias = omega
                .iter()
                .map(|&w| {
                    let mut row = vec![0.0; m];
                    for d in 1..factor {
                        let nu = (w - TWO_PI * d as f64) / factor as f64;
                        axpy(
                            model.power(nu) / n as f64,
                            &magnitude_row(spec, i, nu),
                            &mut row,
                        );
                    }
                    row
                })
                .collect();

            let signal_grid = warp::uniform_grid(m * n, -PI, TWO_PI);
            let mut signal = vec![0.0; m];
            let weight = factor as f64 / signal_grid.len() as f64;
            for &w in &signal_grid {
                axpy(
                    weight * model.power(w),
                    &magnitude_row(spec, i, w),
                    &mut signal,
                );
            }
            BandRows {
                band,
                omega,
                alias,
                signal,
            }
        })
        .collect();

    let mut lp = AliasLp {
        bands,
        grid_n: n,
        active,
        positivity: prototype_rows(m, 4 * n),
        eq_constant: 0.0,
        floor: 0.0,
    };
    let flat = lp.equality_row()[0];
    if !(flat > 0.0) {
        return Err(Error::InvalidModel(
            "source model has no power in the designed bands".into(),
        ));
    }
    lp.eq_constant = flat * options.eq_scale;
    lp.floor = options.epsilon * options.eq_scale;
    Ok(lp)
}

#[derive(Debug, Clone)]
pub struct AnalysisDesign {
    pub magnitude: MagnitudeSpec,
    /// Minimum-phase prototype normalised to unit coefficient sum.
    pub prototype: PrototypeFilter,
    pub lp_objective: f64,
    pub lp_residuals: LpResiduals,
    pub lp_iterations: usize,
    /// Rounds of positivity refinement on the dense grid.
    pub cut_rounds: usize,
    pub factor: SpectralFactor,
    /// `max_θ | |Ĥ₀|² − s·c-magnitude |` with `s` the unit-sum rescaling.
    pub magnitude_error: f64,
}

/// Proposed design: minimise total alias power over all bands at fixed
/// total signal power.
pub fn solve_analysis(
    spec: &BankSpec,
    model: &SourceModel,
    options: &DesignOptions,
) -> Result<AnalysisDesign> {
    let lp = build_alias_lp(spec, model, options)?;
    finish_design(&lp, options)
}

/// Baseline: optimise only the widest band, `i = M/2` for `μ > 0`.
pub fn solve_analysis_method_b(
    spec: &BankSpec,
    model: &SourceModel,
    options: &DesignOptions,
) -> Result<AnalysisDesign> {
    if !(spec.mu() > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "widest-band baseline requires mu > 0, got {}",
            spec.mu()
        )));
    }
    let lp = build_alias_lp_for(spec, model, options, vec![spec.bands() / 2])?;
    finish_design(&lp, options)
}

fn finish_design(lp: &AliasLp, options: &DesignOptions) -> Result<AnalysisDesign> {
    let mut program = lp.to_linear_program();
    let m = lp.dim();
    let mut cuts = 0;
    // The positivity grid is finite, so the optimum can dip below zero
    // between grid points. Local minima found on a dense grid are added as
    // extra rows until the floor holds everywhere.
    let sol = loop {
        let sol = solver::solve_lp(&program)?;
        let dips = dense_dips(&sol.x, 0.5 * lp.floor);
        if dips.is_empty() {
            break sol;
        }
        cuts += 1;
        if cuts > MAX_CUT_ROUNDS {
            return Err(Error::NotConverged(format!(
                "magnitude floor still violated after {MAX_CUT_ROUNDS} refinement rounds"
            )));
        }
        for th in dips {
            program.ineq_matrix.extend(prototype_rows_at(m, &[th]));
            program.ineq_rhs.push(lp.floor);
        }
    };
    let residuals = program.residuals(&sol);
    let c = sol.x.clone();
    let (prototype, factor, magnitude_error) = prototype_from_magnitude(&c, options.fft_len)?;
    Ok(AnalysisDesign {
        magnitude: MagnitudeSpec { c },
        prototype,
        lp_objective: sol.objective,
        lp_residuals: residuals,
        lp_iterations: sol.iterations,
        cut_rounds: cuts,
        factor,
        magnitude_error,
    })
}

const MAX_CUT_ROUNDS: usize = 50;
const DENSE_GRID: usize = 1 << 16;

/// Local minima of `|Ĥ₀|²` on a dense grid that fall below `threshold`.
fn dense_dips(c: &[f64], threshold: f64) -> Vec<f64> {
    let mag = cepstrum::magnitude_squared_on_grid(c, DENSE_GRID);
    let n = mag.len();
    (0..n)
        .filter(|&k| {
            let v = mag[k];
            v < threshold && v <= mag[(k + n - 1) % n] && v <= mag[(k + 1) % n]
        })
        .map(|k| TWO_PI * k as f64 / n as f64)
        .collect()
}

/// Minimum-phase prototype with unit coefficient sum for the magnitude
/// specification `c`.
pub fn prototype_from_magnitude(
    c: &[f64],
    fft_len: usize,
) -> Result<(PrototypeFilter, SpectralFactor, f64)> {
    let factor = cepstrum::minimum_phase_factor(c, fft_len)?;
    let sum: f64 = factor.taps.iter().sum();
    if sum.abs() < 1e-300 {
        return Err(Error::Cepstrum(
            "recovered prototype has zero DC gain".into(),
        ));
    }
    let taps: Vec<f64> = factor.taps.iter().map(|v| v / sum).collect();
    let scale = 1.0 / (sum * sum);
    let n = factor.fft_len;
    let target = cepstrum::magnitude_squared_on_grid(c, n);
    let achieved = cepstrum::magnitude_squared_on_grid(&cepstrum::autocorrelation(&taps), n);
    let error = achieved
        .iter()
        .zip(&target)
        .map(|(a, t)| (a - scale * t).abs())
        .fold(0.0, f64::max);
    Ok((PrototypeFilter::analysis(taps)?, factor, error))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn unit_decimation_has_no_alias_rows() {
        let spec = BankSpec::uniform(4, 0.5, 1).unwrap();
        let lp =
            build_alias_lp(&spec, &SourceModel::white(), &DesignOptions::with_grid(64)).unwrap();
        assert!(lp.cost_row().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_band_flat_alias_cost() {
        // Oracle: with |H_i|² ≡ 1 each band's single alias image integrates
        // (1/2π)∫ 1 dω over a 2π-wide interval, giving 1 per band.
        let spec = BankSpec::uniform(2, 0.0, 2).unwrap();
        let lp =
            build_alias_lp(&spec, &SourceModel::white(), &DesignOptions::with_grid(64)).unwrap();
        let c = [1.0, 0.0];
        assert_abs_diff_eq!(dot(&lp.cost_row(), &c), 2.0, epsilon = 1e-12);
        // σ_i² = D_i · 1.
        assert_abs_diff_eq!(dot(&lp.equality_row(), &c), 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(lp.eq_constant, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn small_grid_rejected() {
        let spec = BankSpec::uniform(2, 0.0, 2).unwrap();
        assert!(
            build_alias_lp(&spec, &SourceModel::white(), &DesignOptions::with_grid(32)).is_err()
        );
    }

    #[test]
    fn magnitude_row_matches_direct_response() {
        let spec = BankSpec::uniform(5, 0.4, 2).unwrap();
        let h = [0.2, 0.5, -0.1, 0.3, 0.1];
        let c = MagnitudeSpec {
            c: cepstrum::autocorrelation(&h),
        };
        let proto = PrototypeFilter::analysis(h.to_vec()).unwrap();
        for band in 0..5 {
            for k in 0..20 {
                let w = -PI + 0.31 * k as f64;
                let direct =
                    warp::analysis_band_response(&spec, &proto, band, &[w]).unwrap()[0].norm_sqr();
                assert_abs_diff_eq!(
                    c.band_magnitude_squared(&spec, band, w),
                    direct,
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn method_b_requires_positive_mu() {
        let spec = BankSpec::uniform(4, 0.0, 2).unwrap();
        assert!(solve_analysis_method_b(
            &spec,
            &SourceModel::white(),
            &DesignOptions::with_grid(64)
        )
        .is_err());
    }

    #[test]
    fn small_design_is_minimum_phase_and_consistent() {
        let spec = BankSpec::uniform(8, 0.5, 2).unwrap();
        let design =
            solve_analysis(&spec, &SourceModel::white(), &DesignOptions::with_grid(128)).unwrap();
        assert_abs_diff_eq!(design.prototype.sum(), 1.0, epsilon = 1e-12);
        assert!(cepstrum::max_zero_radius(design.prototype.coeffs()) <= 1.0 + 1e-8);
        assert!(design.magnitude_error <= 1e-6, "{}", design.magnitude_error);
        let r = design.lp_residuals;
        assert!(r.equality <= 1e-8 && r.inequality >= -1e-9);
        assert!(r.stationarity <= 1e-6 && r.complementarity <= 1e-6);
    }
}
