//! Pieces shared by the two ADMM solvers: residual bookkeeping, the
//! adaptive penalty rule, and cached `(G + rho I)^{-1}` solves through one
//! symmetric eigendecomposition of `G`.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2, Zip};

/// Residuals of one ADMM iteration and the tolerances they are held to.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Residuals {
    pub r_pri: f64,
    pub r_dual: f64,
    pub r_lambda: f64,
    pub eps_pri: f64,
    pub eps_dual: f64,
}

impl Residuals {
    pub fn converged(&self, eps_lambda: f64) -> bool {
        self.r_pri <= self.eps_pri && self.r_dual <= self.eps_dual && self.r_lambda <= eps_lambda
    }
}

/// Stopping tolerances shared by both ADMM loops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmTolerances {
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub eps_lambda: f64,
}

pub(crate) fn frob(x: ArrayView2<f64>) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn frob_diff(x: ArrayView2<f64>, y: ArrayView2<f64>) -> f64 {
    let mut acc = 0.0;
    Zip::from(x).and(y).for_each(|a, b| acc += (a - b) * (a - b));
    acc.sqrt()
}

/// `|lambda_new - lambda_old| / lambda_new`, with `0/0 = 0` and `x/0 = 1`.
pub fn lambda_residual(lambda_new: f64, lambda_old: f64) -> f64 {
    let d = (lambda_new - lambda_old).abs();
    if lambda_new == 0.0 {
        if d == 0.0 {
            0.0
        } else {
            1.0
        }
    } else {
        d / lambda_new
    }
}

/// Doubles `rho` when the primal residual dominates by 10x, halves it when
/// the dual residual does.
pub fn next_rho(rho: f64, r_pri: f64, r_dual: f64) -> f64 {
    if r_pri > 10.0 * r_dual {
        2.0 * rho
    } else if r_dual > 10.0 * r_pri {
        0.5 * rho
    } else {
        rho
    }
}

/// Residuals for consensus `A = B` with `sqrt(dim)` scaling of the absolute tolerance.
#[allow(clippy::too_many_arguments)]
pub fn residuals(
    a: ArrayView2<f64>,
    b_new: ArrayView2<f64>,
    b_old: ArrayView2<f64>,
    upsilon: ArrayView2<f64>,
    lambda_new: f64,
    lambda_old: f64,
    rho: f64,
    tol: &AdmmTolerances,
) -> Residuals {
    let root = (a.len() as f64).sqrt();
    Residuals {
        r_pri: frob_diff(a, b_new),
        r_dual: rho * frob_diff(b_new, b_old),
        r_lambda: lambda_residual(lambda_new, lambda_old),
        eps_pri: root * tol.eps_abs + tol.eps_rel * frob(a).max(frob(b_new)),
        eps_dual: root * tol.eps_abs + tol.eps_rel * frob(upsilon),
    }
}

/// `G = V diag(mu) V^T`; solves `(G + rho I) X = R` for any `rho > 0`
/// with two matrix products.
#[derive(Debug, Clone)]
pub struct ShiftedSolver {
    vecs: Array2<f64>,
    vecs_t: Array2<f64>,
    vals: Array1<f64>,
}

impl ShiftedSolver {
    pub fn new(gram: ArrayView2<f64>) -> Self {
        let n = gram.nrows();
        let m = DMatrix::from_fn(n, n, |i, j| 0.5 * (gram[[i, j]] + gram[[j, i]]));
        let eig = SymmetricEigen::new(m);
        let vecs = Array2::from_shape_fn((n, n), |(i, j)| eig.eigenvectors[(i, j)]);
        let vals = Array1::from_iter(eig.eigenvalues.iter().map(|v| v.max(0.0)));
        Self {
            vecs_t: vecs.t().to_owned(),
            vecs,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.vals.len()
    }

    pub fn eigenvalues(&self) -> &Array1<f64> {
        &self.vals
    }

    /// `V^T`, rows are the eigenvectors of `G`.
    pub fn basis_t(&self) -> &Array2<f64> {
        &self.vecs_t
    }

    pub fn solve(&self, rhs: ArrayView2<f64>, rho: f64) -> Array2<f64> {
        let mut t = self.vecs_t.dot(&rhs);
        for (mut row, mu) in t.rows_mut().into_iter().zip(self.vals.iter()) {
            let s = 1.0 / (mu + rho);
            row.mapv_inplace(|v| v * s);
        }
        self.vecs.dot(&t)
    }
}
