//! Dense linear programs with free variables:
//!
//! ```text
//!     minimize    cᵀx
//!     subject to  E x  = f
//!                 G x >= h
//! ```
//!
//! The problem is solved through its dual,
//!
//! ```text
//!     maximize    fᵀy + hᵀz
//!     subject to  Eᵀy + Gᵀz = c,   z >= 0,
//! ```
//!
//! whose standard form has only `dim(x)` rows, with a two-phase tableau
//! simplex. The primal point is recovered from the optimal basis, and the
//! dual pair `(y, z)` is returned alongside it as the optimality certificate.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub cost: Vec<f64>,
    pub eq_matrix: Vec<Vec<f64>>,
    pub eq_rhs: Vec<f64>,
    pub ineq_matrix: Vec<Vec<f64>>,
    pub ineq_rhs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpTolerances {
    /// Pivot and reduced-cost threshold, relative to the data scale.
    pub pivot: f64,
    /// Phase-1 residual above which the dual is declared infeasible.
    pub feasibility: f64,
    pub max_iterations: usize,
}

impl Default for LpTolerances {
    fn default() -> Self {
        Self {
            pivot: 1e-11,
            feasibility: 1e-9,
            max_iterations: 50_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Multipliers of the equality rows.
    pub eq_duals: Vec<f64>,
    /// Nonnegative multipliers of the inequality rows.
    pub ineq_duals: Vec<f64>,
    pub iterations: usize,
}

/// Residuals of the optimality conditions at a returned solution.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LpResiduals {
    pub equality: f64,
    /// Most negative inequality slack (zero if all satisfied).
    pub inequality: f64,
    pub stationarity: f64,
    pub complementarity: f64,
    pub dual_sign: f64,
    pub duality_gap: f64,
}

impl LinearProgram {
    pub fn dim(&self) -> usize {
        self.cost.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 {
            return Err(Error::InvalidArgument("LP has no variables".into()));
        }
        if self.eq_matrix.len() != self.eq_rhs.len()
            || self.ineq_matrix.len() != self.ineq_rhs.len()
        {
            return Err(Error::InvalidArgument("LP row/rhs count mismatch".into()));
        }
        let rows = self.eq_matrix.iter().chain(&self.ineq_matrix);
        for row in rows {
            if row.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "LP row has {} entries, expected {n}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("non-finite LP matrix entry".into()));
            }
        }
        let vectors = self.cost.iter().chain(&self.eq_rhs).chain(&self.ineq_rhs);
        if vectors.clone().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite LP vector entry".into()));
        }
        Ok(())
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        dot(&self.cost, x)
    }

    pub fn residuals(&self, sol: &LpSolution) -> LpResiduals {
        let x = &sol.x;
        let equality = self
            .eq_matrix
            .iter()
            .zip(&self.eq_rhs)
            .map(|(row, b)| (dot(row, x) - b).abs())
            .fold(0.0, f64::max);
        let slacks: Vec<f64> = self
            .ineq_matrix
            .iter()
            .zip(&self.ineq_rhs)
            .map(|(row, b)| dot(row, x) - b)
            .collect();
        let inequality = slacks.iter().fold(0.0f64, |m, &s| m.min(s));

        let mut grad = self.cost.clone();
        for (row, y) in self.eq_matrix.iter().zip(&sol.eq_duals) {
            axpy(-y, row, &mut grad);
        }
        for (row, z) in self.ineq_matrix.iter().zip(&sol.ineq_duals) {
            axpy(-z, row, &mut grad);
        }
        let stationarity = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        let complementarity = slacks
            .iter()
            .zip(&sol.ineq_duals)
            .map(|(s, z)| (s * z).abs())
            .fold(0.0, f64::max);
        let dual_sign = sol.ineq_duals.iter().fold(0.0f64, |m, &z| m.min(z)).abs();
        let dual_obj = dot(&self.eq_rhs, &sol.eq_duals) + dot(&self.ineq_rhs, &sol.ineq_duals);
        LpResiduals {
            equality,
            inequality,
            stationarity,
            complementarity,
            dual_sign,
            duality_gap: (sol.objective - dual_obj).abs(),
        }
    }
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    solve_lp_with(lp, &LpTolerances::default())
}

pub fn solve_lp_with(lp: &LinearProgram, tol: &LpTolerances) -> Result<LpSolution> {
    lp.validate()?;
    let n = lp.dim();
    let k = lp.eq_matrix.len();
    let m = lp.ineq_matrix.len();

    // Dual standard form: columns (y+, y-, z), rows indexed by x components.
    let ncols = 2 * k + m;
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(ncols);
    let mut profit = Vec::with_capacity(ncols);
    for (row, &b) in lp.eq_matrix.iter().zip(&lp.eq_rhs) {
        columns.push(row.clone());
        profit.push(b);
    }
    for (row, &b) in lp.eq_matrix.iter().zip(&lp.eq_rhs) {
        columns.push(row.iter().map(|v| -v).collect());
        profit.push(-b);
    }
    for (row, &b) in lp.ineq_matrix.iter().zip(&lp.ineq_rhs) {
        columns.push(row.clone());
        profit.push(b);
    }

    match maximize_standard_form(&columns, &lp.cost, &profit, tol)? {
        StandardOutcome::Optimal {
            values,
            basis,
            iterations,
        } => {
            let x = primal_from_basis(&columns, &profit, &basis, n)?;
            let u = refine_basic_values(&columns, &lp.cost, &basis, &values, n);
            let eq_duals = (0..k).map(|j| u[j] - u[k + j]).collect();
            let ineq_duals = u[2 * k..].to_vec();
            Ok(LpSolution {
                objective: lp.objective(&x),
                x,
                eq_duals,
                ineq_duals,
                iterations,
            })
        }
        StandardOutcome::Unbounded => Err(Error::Infeasible),
        StandardOutcome::Infeasible => {
            if primal_is_infeasible(lp, &columns, &profit, tol)? {
                Err(Error::Infeasible)
            } else {
                Err(Error::Unbounded)
            }
        }
    }
}

/// Farkas test: the primal is infeasible iff some `(y, z >= 0)` with
/// `Eᵀy + Gᵀz = 0` has `fᵀy + hᵀz > 0`. The ray is normalised by
/// `Σ|y| + Σz <= 1` so the auxiliary program is bounded.
fn primal_is_infeasible(
    lp: &LinearProgram,
    columns: &[Vec<f64>],
    profit: &[f64],
    tol: &LpTolerances,
) -> Result<bool> {
    let n = lp.dim();
    let mut aux_cols: Vec<Vec<f64>> = columns
        .iter()
        .map(|c| {
            let mut c = c.clone();
            c.push(1.0);
            c
        })
        .collect();
    let mut slack = vec![0.0; n];
    slack.push(1.0);
    aux_cols.push(slack);
    let mut aux_profit = profit.to_vec();
    aux_profit.push(0.0);
    let mut rhs = vec![0.0; n];
    rhs.push(1.0);

    let scale = profit.iter().fold(1.0f64, |m, p| m.max(p.abs()));
    match maximize_standard_form(&aux_cols, &rhs, &aux_profit, tol)? {
        StandardOutcome::Optimal { values, .. } => {
            let value = dot(&aux_profit, &values);
            Ok(value > tol.feasibility * scale)
        }
        // The auxiliary program is feasible (all-slack point) and bounded.
        _ => Err(Error::NotConverged("Farkas auxiliary program".into())),
    }
}

enum StandardOutcome {
    Optimal {
        values: Vec<f64>,
        basis: Vec<usize>,
        iterations: usize,
    },
    Infeasible,
    Unbounded,
}

/// Two-phase tableau simplex for `max pᵀu s.t. K u = r, u >= 0`, with `K`
/// given column-wise. Returned basis indices refer to `columns` (indices
/// `>= columns.len()` are leftover zero-level artificials on redundant rows).
fn maximize_standard_form(
    columns: &[Vec<f64>],
    rhs: &[f64],
    profit: &[f64],
    tol: &LpTolerances,
) -> Result<StandardOutcome> {
    let rows = rhs.len();
    let nvar = columns.len();
    let width = nvar + rows + 1;
    let rhs_col = nvar + rows;

    let data_scale = columns
        .iter()
        .flatten()
        .chain(rhs)
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-300);
    let pivot_tol = tol.pivot * data_scale;

    let mut tab = vec![0.0; rows * width];
    for r in 0..rows {
        let sign = if rhs[r] < 0.0 { -1.0 } else { 1.0 };
        for (j, col) in columns.iter().enumerate() {
            tab[r * width + j] = sign * col[r];
        }
        tab[r * width + nvar + r] = 1.0;
        tab[r * width + rhs_col] = sign * rhs[r];
    }
    let mut basis: Vec<usize> = (nvar..nvar + rows).collect();
    let mut iterations = 0;

    // Phase 1: minimise the artificial sum.
    let mut cost1 = vec![0.0; nvar + rows];
    for c in cost1.iter_mut().skip(nvar) {
        *c = 1.0;
    }
    let mut tableau = Tableau {
        tab,
        rows,
        width,
        basis: &mut basis,
        pivot_tol,
    };
    let phase1 = tableau.run(&cost1, nvar + rows, tol.max_iterations, &mut iterations)?;
    if phase1 == RunOutcome::Unbounded {
        return Err(Error::NotConverged("phase 1 reported unbounded".into()));
    }
    let infeasibility: f64 = (0..rows)
        .filter(|&r| tableau.basis[r] >= nvar)
        .map(|r| tableau.tab[r * width + rhs_col])
        .sum();
    let rhs_scale = rhs.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if infeasibility > tol.feasibility * rhs_scale {
        return Ok(StandardOutcome::Infeasible);
    }

    // Pivot remaining artificials out of the basis where possible.
    for r in 0..rows {
        if tableau.basis[r] < nvar {
            continue;
        }
        let entering = (0..nvar)
            .filter(|j| !tableau.basis.contains(j))
            .max_by(|&a, &b| {
                tableau.tab[r * width + a]
                    .abs()
                    .total_cmp(&tableau.tab[r * width + b].abs())
            });
        if let Some(j) = entering {
            if tableau.tab[r * width + j].abs() > pivot_tol {
                tableau.pivot(r, j);
            }
        }
    }

    // Phase 2 over the original columns only.
    let mut cost2 = vec![0.0; nvar + rows];
    for (c, p) in cost2.iter_mut().zip(profit) {
        *c = -p;
    }
    let phase2 = tableau.run(&cost2, nvar, tol.max_iterations, &mut iterations)?;
    if phase2 == RunOutcome::Unbounded {
        return Ok(StandardOutcome::Unbounded);
    }

    let mut values = vec![0.0; nvar];
    for r in 0..rows {
        let b = tableau.basis[r];
        if b < nvar {
            values[b] = tableau.tab[r * width + rhs_col].max(0.0);
        }
    }
    Ok(StandardOutcome::Optimal {
        values,
        basis: basis.clone(),
        iterations,
    })
}

#[derive(Debug, PartialEq, Eq)]
enum RunOutcome {
    Optimal,
    Unbounded,
}

struct Tableau<'a> {
    tab: Vec<f64>,
    rows: usize,
    width: usize,
    basis: &'a mut Vec<usize>,
    pivot_tol: f64,
}

impl Tableau<'_> {
    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.width;
        let p = self.tab[row * w + col];
        for v in &mut self.tab[row * w..(row + 1) * w] {
            *v /= p;
        }
        let pivot_row: Vec<f64> = self.tab[row * w..(row + 1) * w].to_vec();
        for r in 0..self.rows {
            if r == row {
                continue;
            }
            let factor = self.tab[r * w + col];
            if factor == 0.0 {
                continue;
            }
            for (v, pr) in self.tab[r * w..(r + 1) * w].iter_mut().zip(&pivot_row) {
                *v -= factor * pr;
            }
            self.tab[r * w + col] = 0.0;
        }
        self.basis[row] = col;
    }

    /// Minimises `costᵀu` over columns `0..allowed` from the current basis.
    fn run(
        &mut self,
        cost: &[f64],
        allowed: usize,
        max_iterations: usize,
        iterations: &mut usize,
    ) -> Result<RunOutcome> {
        let w = self.width;
        let rhs_col = w - 1;
        let cost_scale = cost.iter().fold(1e-300f64, |m, c| m.max(c.abs()));
        let dj_tol = 1e-12 * cost_scale;
        let mut degenerate_run = 0usize;

        loop {
            if *iterations >= max_iterations {
                return Err(Error::NotConverged(format!(
                    "simplex exceeded {max_iterations} iterations"
                )));
            }
            // Reduced costs d_j = c_j - c_Bᵀ B⁻¹ a_j.
            let mut reduced = cost[..allowed].to_vec();
            for r in 0..self.rows {
                let cb = cost[self.basis[r]];
                if cb == 0.0 {
                    continue;
                }
                let row = &self.tab[r * w..r * w + allowed];
                for (d, a) in reduced.iter_mut().zip(row) {
                    *d -= cb * a;
                }
            }
            for &b in self.basis.iter() {
                if b < allowed {
                    reduced[b] = 0.0;
                }
            }

            // Dantzig pricing, falling back to Bland's rule on long degenerate runs.
            let bland = degenerate_run > 50;
            let entering = if bland {
                reduced.iter().position(|&d| d < -dj_tol)
            } else {
                reduced
                    .iter()
                    .enumerate()
                    .filter(|(_, &d)| d < -dj_tol)
                    .min_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(j, _)| j)
            };
            let Some(col) = entering else {
                return Ok(RunOutcome::Optimal);
            };

            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.tab[r * w + col];
                if a > self.pivot_tol {
                    let ratio = self.tab[r * w + rhs_col].max(0.0) / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            let better = ratio < lratio - 1e-15 * lratio.abs().max(1.0)
                                || ((ratio - lratio).abs() <= 1e-15 * lratio.abs().max(1.0)
                                    && self.basis[r] < self.basis[lr]);
                            if better {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            let Some((row, ratio)) = leave else {
                return Ok(RunOutcome::Unbounded);
            };
            if ratio == 0.0 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(row, col);
            *iterations += 1;
        }
    }
}

/// Solves `Bᵀ x = p_B` for the dual of the standard-form program, which is
/// the primal point of the original LP.
fn primal_from_basis(
    columns: &[Vec<f64>],
    profit: &[f64],
    basis: &[usize],
    n: usize,
) -> Result<Vec<f64>> {
    let mut bt = DMatrix::<f64>::zeros(n, n);
    let mut pb = DVector::<f64>::zeros(n);
    for (r, &b) in basis.iter().enumerate() {
        if b < columns.len() {
            for i in 0..n {
                bt[(r, i)] = columns[b][i];
            }
            pb[r] = profit[b];
        } else {
            // Artificial on a redundant row: unit column, zero profit.
            bt[(r, b - columns.len())] = 1.0;
        }
    }
    let lu = bt.full_piv_lu();
    let x = lu
        .solve(&pb)
        .ok_or_else(|| Error::NotConverged("singular optimal basis".into()))?;
    Ok(x.iter().copied().collect())
}

/// Recomputes basic values `B⁻¹ r` from the original data to strip the
/// tableau's accumulated rounding.
fn refine_basic_values(
    columns: &[Vec<f64>],
    rhs: &[f64],
    basis: &[usize],
    values: &[f64],
    n: usize,
) -> Vec<f64> {
    let mut b = DMatrix::<f64>::zeros(n, n);
    for (r, &col) in basis.iter().enumerate() {
        if col < columns.len() {
            for i in 0..n {
                b[(i, r)] = columns[col][i];
            }
        } else {
            b[(col - columns.len(), r)] = 1.0;
        }
    }
    let r = DVector::from_column_slice(rhs);
    let mut out = values.to_vec();
    if let Some(ub) = b.full_piv_lu().solve(&r) {
        for (slot, &col) in basis.iter().enumerate() {
            if col < columns.len() {
                out[col] = ub[slot].max(0.0);
            }
        }
    }
    out
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

    fn simplex_pair(cost: [f64; 2], lower: f64) -> LinearProgram {
        LinearProgram {
            cost: cost.to_vec(),
            eq_matrix: vec![vec![1.0, 1.0]],
            eq_rhs: vec![1.0],
            ineq_matrix: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            ineq_rhs: vec![lower, lower],
        }
    }

    #[test]
    fn minimise_first_coordinate_on_simplex() {
        let sol = solve_lp(&simplex_pair([1.0, 0.0], 0.0)).unwrap();
        assert_abs_diff_eq!(sol.x[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.x[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn shifted_lower_bounds() {
        let lp = simplex_pair([1.0, 2.0], 0.25);
        let sol = solve_lp(&lp).unwrap();
        assert_abs_diff_eq!(sol.x[0], 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.x[1], 0.25, epsilon = 1e-12);
        let res = lp.residuals(&sol);
        assert!(res.stationarity < 1e-12 && res.complementarity < 1e-12 && res.dual_sign == 0.0);
        assert!(res.duality_gap < 1e-12);
    }

    #[test]
    fn infeasible_detected() {
        // x0 + x1 = 1 with x0, x1 >= 0.75.
        let lp = simplex_pair([1.0, 1.0], 0.75);
        assert!(matches!(solve_lp(&lp), Err(Error::Infeasible)));
    }

    #[test]
    fn unbounded_detected() {
        // minimise x0 subject to x0 + x1 = 1, x1 >= 0: x0 -> -inf.
        let lp = LinearProgram {
            cost: vec![1.0, 0.0],
            eq_matrix: vec![vec![1.0, 1.0]],
            eq_rhs: vec![1.0],
            ineq_matrix: vec![vec![0.0, 1.0]],
            ineq_rhs: vec![0.0],
        };
        assert!(matches!(solve_lp(&lp), Err(Error::Unbounded)));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut lp = simplex_pair([1.0, 0.0], 0.0);
        lp.ineq_matrix[1].push(3.0);
        assert!(solve_lp(&lp).is_err());
    }

    #[test]
    fn degenerate_vertex() {
        // Three constraints active at the optimum (0, 1) in two dimensions.
        let lp = LinearProgram {
            cost: vec![1.0, 1.0],
            eq_matrix: vec![vec![1.0, 1.0]],
            eq_rhs: vec![1.0],
            ineq_matrix: vec![
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![2.0, -1.0],
                vec![1.0, 1.0],
            ],
            ineq_rhs: vec![0.0, 0.0, -1.0, 1.0],
        };
        let sol = solve_lp(&lp).unwrap();
        assert_abs_diff_eq!(lp.objective(&sol.x), 1.0, epsilon = 1e-12);
        let res = lp.residuals(&sol);
        assert!(res.equality < 1e-12 && res.inequality > -1e-12);
    }
}
