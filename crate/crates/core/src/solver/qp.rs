//! `minimize gᵀ(S + δI)g  subject to  hᵀg = 1`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EqualityQp {
    /// Symmetric positive-semidefinite `S`, row-major `n × n`.
    pub quad: DMatrix<f64>,
    pub lin_constraint: Vec<f64>,
    pub ridge: f64,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub g: Vec<f64>,
    /// Multiplier `λ` in `(S + δI) g = λ h`.
    pub multiplier: f64,
    /// `‖(S + δI)g − λh‖₂`.
    pub stationarity: f64,
    /// `|hᵀg − 1|`.
    pub feasibility: f64,
}

impl EqualityQp {
    pub fn new(quad: DMatrix<f64>, lin_constraint: Vec<f64>, ridge: f64) -> Result<Self> {
        let n = lin_constraint.len();
        if quad.nrows() != n || quad.ncols() != n {
            return Err(Error::InvalidArgument(format!(
                "quadratic form is {}x{}, constraint has {n} entries",
                quad.nrows(),
                quad.ncols()
            )));
        }
        if !(ridge >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "ridge must be >= 0, got {ridge}"
            )));
        }
        let scale = quad.amax().max(1e-300);
        for i in 0..n {
            for j in 0..i {
                if (quad[(i, j)] - quad[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidArgument(
                        "quadratic form is not symmetric".into(),
                    ));
                }
            }
        }
        Ok(Self {
            quad,
            lin_constraint,
            ridge,
        })
    }

    /// Relative ridge `scale · trace(S) / n`.
    pub fn relative_ridge(quad: &DMatrix<f64>, scale: f64) -> f64 {
        scale * quad.trace() / quad.nrows() as f64
    }

    fn regularised(&self) -> DMatrix<f64> {
        let n = self.lin_constraint.len();
        &self.quad + DMatrix::<f64>::identity(n, n) * self.ridge
    }

    pub fn objective(&self, g: &[f64]) -> f64 {
        let g = DVector::from_column_slice(g);
        (g.transpose() * self.regularised() * &g)[(0, 0)]
    }
}

/// Solves the KKT system `[[S+δI, h], [hᵀ, 0]] [g; −λ] = [0; 1]`.
///
/// In the positive-definite case this is the closed form
/// `g = (S+δI)⁻¹h / (hᵀ(S+δI)⁻¹h)`.
pub fn solve_eq_qp(qp: &EqualityQp) -> Result<QpSolution> {
    let n = qp.lin_constraint.len();
    let h = DVector::from_column_slice(&qp.lin_constraint);
    let h_norm = h.norm();
    if h_norm == 0.0 || !h_norm.is_finite() {
        return Err(Error::SingularKkt("constraint vector is zero".into()));
    }
    let p = qp.regularised();

    // Cholesky path when S + δI is positive definite.
    let g = if let Some(chol) = p.clone().cholesky() {
        let y = chol.solve(&h);
        let denom = h.dot(&y);
        if denom <= 0.0 || !denom.is_finite() {
            return Err(Error::SingularKkt("hᵀ(S+δI)⁻¹h is not positive".into()));
        }
        y / denom
    } else {
        let mut kkt = DMatrix::<f64>::zeros(n + 1, n + 1);
        kkt.view_mut((0, 0), (n, n)).copy_from(&p);
        for i in 0..n {
            kkt[(i, n)] = h[i];
            kkt[(n, i)] = h[i];
        }
        let mut rhs = DVector::<f64>::zeros(n + 1);
        rhs[n] = 1.0;
        let lu = kkt.clone().full_piv_lu();
        let scale = kkt.amax();
        let min_pivot = (0..n + 1)
            .map(|i| lu.u()[(i, i)].abs())
            .fold(f64::INFINITY, f64::min);
        if min_pivot <= 1e-13 * scale {
            return Err(Error::SingularKkt(
                "S + δI is singular along the constraint".into(),
            ));
        }
        let sol = lu
            .solve(&rhs)
            .ok_or_else(|| Error::SingularKkt("KKT matrix is singular".into()))?;
        sol.rows(0, n).into_owned()
    };

    // Exact normalisation of the equality.
    let hg = h.dot(&g);
    let g = g / hg;
    let pg = &p * &g;
    let multiplier = pg.dot(&h) / h.dot(&h);
    let stationarity = (&pg - &h * multiplier).norm();
    let feasibility = (h.dot(&g) - 1.0).abs();
    Ok(QpSolution {
        g: g.iter().copied().collect(),
        multiplier,
        stationarity,
        feasibility,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn solve(quad: DMatrix<f64>, h: Vec<f64>, ridge: f64) -> Result<QpSolution> {
        solve_eq_qp(&EqualityQp::new(quad, h, ridge)?)
    }

    #[test]
    fn minimum_norm_point() {
        let sol = solve(DMatrix::zeros(2, 2), vec![1.0, 1.0], 1.0).unwrap();
        assert_abs_diff_eq!(sol.g[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(sol.g[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn diagonal_closed_form() {
        // λ(1, 1/4) / (1 + 1/4)
        let sol = solve(
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0])),
            vec![1.0, 1.0],
            0.0,
        )
        .unwrap();
        assert_abs_diff_eq!(sol.g[0], 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(sol.g[1], 0.2, epsilon = 1e-15);
        assert!(sol.stationarity <= 1e-9 * 2f64.sqrt());
        assert!(sol.feasibility <= 1e-12);
    }

    #[test]
    fn single_feasible_direction() {
        let sol = solve(DMatrix::identity(2, 2), vec![0.0, 3.0], 0.0).unwrap();
        assert_abs_diff_eq!(sol.g[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sol.g[1], 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn semidefinite_but_nonsingular_kkt() {
        // minimise g1² subject to g0 + g1 = 1 → (1, 0).
        let sol = solve(
            DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0])),
            vec![1.0, 1.0],
            0.0,
        )
        .unwrap();
        assert_abs_diff_eq!(sol.g[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.g[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn singular_cases_rejected() {
        assert!(matches!(
            solve(DMatrix::identity(2, 2), vec![0.0, 0.0], 1.0),
            Err(Error::SingularKkt(_))
        ));
        // S = 0, δ = 0: every feasible point is optimal.
        assert!(matches!(
            solve(DMatrix::zeros(3, 3), vec![1.0, 2.0, 3.0], 0.0),
            Err(Error::SingularKkt(_))
        ));
    }

    #[test]
    fn asymmetric_form_rejected() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(EqualityQp::new(q, vec![1.0, 1.0], 0.0).is_err());
    }
}
