//! Synthesis prototype design by minimum alias power at fixed `hᵀg = 1`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::solver::{self, EqualityQp, QpSolution};
use crate::warp::{self, BankSpec, FilterKind, PrototypeFilter};

const TWO_PI: f64 = 2.0 * PI;

pub const DEFAULT_GRID: usize = 1024;
/// Ridge relative to `trace(S) / M`.
pub const DEFAULT_RELATIVE_DELTA: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct SynthesisQp {
    /// `S = Σ_{l,n} Re[Q_ln Q_lnᴴ]`.
    pub s_mat: DMatrix<f64>,
    pub h: Vec<f64>,
    pub delta: f64,
    pub grid_n: usize,
}

impl SynthesisQp {
    /// Alias power `gᵀ S g` without the ridge.
    pub fn alias_power(&self, g: &[f64]) -> f64 {
        let m = g.len();
        let mut acc = 0.0;
        for i in 0..m {
            for j in 0..m {
                acc += g[i] * self.s_mat[(i, j)] * g[j];
            }
        }
        acc
    }

    pub fn to_equality_qp(&self) -> Result<EqualityQp> {
        EqualityQp::new(self.s_mat.clone(), self.h.clone(), self.delta)
    }
}

#[derive(Debug, Clone)]
pub struct SynthesisDesign {
    /// Solution with `hᵀg = 1`.
    pub raw: Vec<f64>,
    /// Same filter rescaled to unit coefficient sum.
    pub prototype: PrototypeFilter,
    pub solution: QpSolution,
}

/// Coherent alias form: `q_ln(k) = Σ_i Σ_{d≥1} W_{D_i}^{-dl} W_M^{-ki}
/// H_i(e^{jω_n} W_{D_i}^d) A(e^{jω_n})^{M-k-1}`, accumulated over every
/// phase `l < D_max` and grid point `ω_n`.
pub fn build_synthesis_qp(
    spec: &BankSpec,
    h: &PrototypeFilter,
    grid_n: usize,
    delta: Option<f64>,
) -> Result<SynthesisQp> {
    assemble(spec, h, grid_n, delta, Form::Coherent)
}

/// Per-term form `Σ_n Σ_i Σ_{d≥1} |G_i(e^{jω_n}) H_i(e^{jω_n} W_{D_i}^d)|²`
/// with no cross terms between bands or images. It carries the same
/// `D_max` phase count as the coherent form so that the two coincide when
/// only one term is present.
pub fn build_synthesis_qp_method_a(
    spec: &BankSpec,
    h: &PrototypeFilter,
    grid_n: usize,
    delta: Option<f64>,
) -> Result<SynthesisQp> {
    assemble(spec, h, grid_n, delta, Form::PerTerm)
}

#[derive(Clone, Copy)]
enum Form {
    Coherent,
    PerTerm,
}

fn assemble(
    spec: &BankSpec,
    h: &PrototypeFilter,
    grid_n: usize,
    delta: Option<f64>,
    form: Form,
) -> Result<SynthesisQp> {
    spec.check_prototype(h, FilterKind::Analysis)?;
    if grid_n == 0 {
        return Err(Error::InvalidArgument(
            "synthesis grid must be nonempty".into(),
        ));
    }
    if let Some(d) = delta {
        if !(d >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "delta must be >= 0, got {d}"
            )));
        }
    }
    let m = spec.bands();
    let dmax = spec.max_factor();
    let coeffs = h.coeffs();

    let s_mat = warp::uniform_grid(grid_n, -PI, TWO_PI)
        .into_par_iter()
        .map(|w| {
            let a = spec.allpass(w);
            let mut local = DMatrix::<f64>::zeros(m, m);
            // A^{M-1-k} for k = 0..M.
            let mut powers = vec![Complex64::new(1.0, 0.0); m];
            for k in (0..m.saturating_sub(1)).rev() {
                powers[k] = powers[k + 1] * a;
            }
            let base = |band: usize| -> Vec<Complex64> {
                (0..m)
                    .map(|k| spec.twiddle(-((k * band) as i64)) * powers[k])
                    .collect()
            };
            match form {
                Form::Coherent => {
                    let mut q = vec![vec![Complex64::new(0.0, 0.0); m]; dmax];
                    for band in 0..m {
                        let factor = spec.factor(band);
                        if factor == 1 {
                            continue;
                        }
                        let b = base(band);
                        for d in 1..factor {
                            let shift = TWO_PI * d as f64 / factor as f64;
                            let hv = warp::analysis_response_at(spec, coeffs, band, w - shift);
                            for (l, ql) in q.iter_mut().enumerate() {
                                let coef = Complex64::from_polar(1.0, shift * l as f64) * hv;
                                for (qk, bk) in ql.iter_mut().zip(&b) {
                                    *qk += coef * bk;
                                }
                            }
                        }
                    }
                    for ql in &q {
                        add_outer(&mut local, ql);
                    }
                }
                Form::PerTerm => {
                    let phase_weight = (dmax as f64).sqrt();
                    for band in 0..m {
                        let factor = spec.factor(band);
                        if factor == 1 {
                            continue;
                        }
                        let b = base(band);
                        for d in 1..factor {
                            let shift = TWO_PI * d as f64 / factor as f64;
                            let hv = warp::analysis_response_at(spec, coeffs, band, w - shift);
                            // Summed over the D_max phases, which leave |·|² unchanged.
                            let q: Vec<Complex64> =
                                b.iter().map(|bk| bk * hv * phase_weight).collect();
                            add_outer(&mut local, &q);
                        }
                    }
                }
            }
            local
        })
        .reduce(|| DMatrix::<f64>::zeros(m, m), |a, b| a + b);
    // Exact symmetry regardless of summation order.
    let s_mat = (&s_mat + s_mat.transpose()) * 0.5;

    let delta = delta.unwrap_or_else(|| {
        let rel = EqualityQp::relative_ridge(&s_mat, DEFAULT_RELATIVE_DELTA);
        if rel > 0.0 {
            rel
        } else {
            DEFAULT_RELATIVE_DELTA
        }
    });
    Ok(SynthesisQp {
        s_mat,
        h: coeffs.to_vec(),
        delta,
        grid_n,
    })
}

/// `S += Re[q qᴴ]`.
fn add_outer(s: &mut DMatrix<f64>, q: &[Complex64]) {
    let m = q.len();
    for i in 0..m {
        for j in 0..m {
            s[(i, j)] += (q[i] * q[j].conj()).re;
        }
    }
}

pub fn solve_synthesis(qp: &SynthesisQp) -> Result<SynthesisDesign> {
    let solution = solver::solve_eq_qp(&qp.to_equality_qp()?)?;
    let raw = solution.g.clone();
    let prototype = PrototypeFilter::synthesis(raw.clone())?.unit_sum()?;
    Ok(SynthesisDesign {
        raw,
        prototype,
        solution,
    })
}
