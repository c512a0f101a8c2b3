//! Sparse recovery of the radar echo from signed data once the RFI estimate
//! has been removed from the thresholds: MM on the probit likelihood with an
//! `l1` penalty, each MM step solved by consensus ADMM over the PRIs.
//!
//! The ADMM iterates `B` and `Upsilon` are kept in the eigenbasis of `D^T D`.
//! Every update is either column-averaging, an inner product, a Frobenius
//! norm or the diagonal `(D^T D + rho I)^{-1}` solve, and all of them commute
//! with that orthogonal change of basis, so one iteration costs `O(NM)`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};

use crate::admm::{frob, frob_diff, lambda_residual, next_rho, AdmmTolerances, Residuals, ShiftedSolver};
use crate::error::{Error, Result};
use crate::freq_init::AdmmRecord;
use crate::likelihood::{aux_from_matrix, log_phi};
use crate::signal::{Dictionary, SignedMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErConfig {
    /// Sparsity weight on the scaled echo coefficients.
    pub zeta2: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub eps_lambda: f64,
    pub admm_cap: usize,
    pub mm_cap: usize,
    pub mm_tol: f64,
    pub rho0: f64,
}

impl Default for ErConfig {
    fn default() -> Self {
        Self {
            zeta2: 0.04,
            eps_abs: 1e-3,
            eps_rel: 1e-7,
            eps_lambda: 1e-3,
            admm_cap: 100,
            mm_cap: 50,
            mm_tol: 1e-7,
            rho0: 1.0,
        }
    }
}

impl ErConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.eps_abs, self.eps_rel, self.eps_lambda, self.mm_tol, self.rho0];
        if !(self.zeta2 >= 0.0) || positive.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::invalid("echo-recovery weights and tolerances must be positive"));
        }
        if self.admm_cap == 0 || self.mm_cap == 0 {
            return Err(Error::invalid("echo-recovery iteration caps must be positive"));
        }
        Ok(())
    }

    fn tolerances(&self) -> AdmmTolerances {
        AdmmTolerances {
            eps_abs: self.eps_abs,
            eps_rel: self.eps_rel,
            eps_lambda: self.eps_lambda,
        }
    }
}

pub fn soft_threshold(x: f64, a: f64) -> f64 {
    if x <= -a {
        x + a
    } else if x >= a {
        x - a
    } else {
        0.0
    }
}

/// `softthreshold(mean_m(B[:, m] - Upsilon[:, m] / rho), zeta2 / rho)`.
pub fn update_gamma(b: ArrayView2<f64>, upsilon: ArrayView2<f64>, rho: f64, zeta2: f64) -> Array1<f64> {
    let m = b.ncols() as f64;
    let mut avg = (&b - &(&upsilon / rho)).sum_axis(Axis(1));
    avg.mapv_inplace(|v| soft_threshold(v / m, zeta2 / rho));
    avg
}

/// `lambda = max(0, <U, DB - Z~> / ||U||^2)`.
pub fn update_lambda_er(u: ArrayView2<f64>, db: ArrayView2<f64>, z: ArrayView2<f64>) -> Result<f64> {
    crate::mmrelax::update_lambda(u, db, z)
}

/// `D` together with the eigendecomposition of `D^T D`.
#[derive(Debug, Clone)]
pub struct EchoSolver {
    d: Array2<f64>,
    solver: ShiftedSolver,
    vecs_t: Array2<f64>,
}

impl EchoSolver {
    pub fn new(dict: &Dictionary) -> Self {
        Self::from_matrix(dict.matrix.clone())
    }

    pub fn from_matrix(d: Array2<f64>) -> Self {
        let gram = d.t().dot(&d);
        let solver = ShiftedSolver::new(gram.view());
        let vecs_t = solver.basis_t().clone();
        Self { d, solver, vecs_t }
    }

    pub fn n(&self) -> usize {
        self.d.ncols()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.d
    }

    /// `B = (D^T D + rho I)^{-1} (lambda D^T U + D^T Z~ + Upsilon + rho Gamma)`.
    #[allow(clippy::too_many_arguments)]
    pub fn update_b(
        &self,
        u: ArrayView2<f64>,
        z: ArrayView2<f64>,
        upsilon: ArrayView2<f64>,
        gamma: ArrayView1<f64>,
        lambda: f64,
        rho: f64,
    ) -> Array2<f64> {
        let dt = self.d.t();
        let mut rhs = dt.dot(&u) * lambda + dt.dot(&z) + upsilon;
        for mut col in rhs.columns_mut() {
            col.scaled_add(rho, &gamma);
        }
        self.solver.solve(rhs.view(), rho)
    }
}

/// `zeta2 M ||gamma~||_1 + sum f(Y (D gamma~ - lambda U))`.
pub fn er_objective(y: &SignedMatrix, u: ArrayView2<f64>, dg: ArrayView1<f64>, gamma: ArrayView1<f64>, lambda: f64, zeta2: f64) -> f64 {
    let mut data = 0.0;
    for (yc, uc) in y.data().columns().into_iter().zip(u.columns()) {
        for ((&s, &u), &d) in yc.iter().zip(uc.iter()).zip(dg.iter()) {
            data -= log_phi(f64::from(s) * (d - lambda * u));
        }
    }
    zeta2 * y.m_slow() as f64 * gamma.iter().map(|g| g.abs()).sum::<f64>() + data
}

#[derive(Debug, Clone)]
pub struct ErResult {
    /// `D gamma~ / lambda`.
    pub s_hat: Array1<f64>,
    pub gamma_tilde: Array1<f64>,
    pub lambda: f64,
    /// Final consensus copies `B` in the original basis.
    pub b: Array2<f64>,
    /// Objective before the first and after every accepted MM step.
    pub objective_trace: Vec<f64>,
    pub admm: Vec<AdmmRecord>,
    /// An MM step would have raised the objective and was discarded.
    pub stalled: bool,
    /// Every signed entry had the same value; nothing was fitted.
    pub degenerate: bool,
}

/// Recovers the echo from `Y` given the RFI estimate `R^` (same units as `H`).
pub fn recover_echo(
    y: &SignedMatrix,
    h: ArrayView2<f64>,
    r_hat: ArrayView2<f64>,
    dict: &Dictionary,
    cfg: &ErConfig,
    lambda_init: f64,
) -> Result<ErResult> {
    recover_echo_with(&EchoSolver::new(dict), y, h, r_hat, cfg, lambda_init)
}

/// Same as [`recover_echo`] with a prepared solver, so the eigendecomposition
/// can be shared across runs with the same dictionary.
pub fn recover_echo_with(
    es: &EchoSolver,
    y: &SignedMatrix,
    h: ArrayView2<f64>,
    r_hat: ArrayView2<f64>,
    cfg: &ErConfig,
    lambda_init: f64,
) -> Result<ErResult> {
    cfg.validate()?;
    if h.dim() != y.dim() {
        return Err(Error::shape(y.dim(), h.dim()));
    }
    if r_hat.dim() != y.dim() {
        return Err(Error::shape(y.dim(), r_hat.dim()));
    }
    let (n, m) = y.dim();
    if es.d.dim() != (n, n) {
        return Err(Error::shape((n, n), es.d.dim()));
    }
    if !(lambda_init > 0.0) || !lambda_init.is_finite() {
        return Err(Error::invalid(format!("initial lambda must be positive, got {lambda_init}")));
    }
    let u = &h - &r_hat;
    let uu: f64 = u.iter().map(|v| v * v).sum();
    if uu == 0.0 {
        return Err(Error::ZeroDenominator("echo recovery (U = H - R^ is zero)"));
    }

    let first = y.data()[[0, 0]];
    if y.data().iter().all(|&v| v == first) {
        return Ok(ErResult {
            s_hat: Array1::zeros(n),
            gamma_tilde: Array1::zeros(n),
            lambda: lambda_init,
            b: Array2::zeros((n, m)),
            objective_trace: Vec::new(),
            admm: Vec::new(),
            stalled: false,
            degenerate: true,
        });
    }

    let tol = cfg.tolerances();
    let root = ((n * m) as f64).sqrt();
    let vt = &es.vecs_t;
    let mu = es.solver.eigenvalues();
    let dt = es.d.t();
    // D^T U in the eigenbasis; fixed for the whole run.
    let dtu_hat = vt.dot(&dt.dot(&u));

    let mut gamma = Array1::<f64>::zeros(n);
    let mut lambda = lambda_init;
    let mut b_hat = Array2::<f64>::zeros((n, m));
    let mut ups_hat = Array2::<f64>::zeros((n, m));
    let mut dg = es.d.dot(&gamma);
    let mut objective = er_objective(y, u.view(), dg.view(), gamma.view(), lambda, cfg.zeta2);
    let mut objective_trace = vec![objective];
    let mut admm = Vec::new();
    let mut stalled = false;

    for _ in 0..cfg.mm_cap {
        let r_tilde = broadcast(dg.view(), m);
        let z = aux_from_matrix(y, u.view(), r_tilde.view(), lambda);
        let dtz_hat = vt.dot(&dt.dot(&z));
        let uz: f64 = u.iter().zip(z.iter()).map(|(a, b)| a * b).sum();

        let mut g = gamma.clone();
        let mut lam = lambda;
        let mut bh = b_hat.clone();
        let mut yh = ups_hat.clone();
        let mut rho = cfg.rho0;
        let mut record = AdmmRecord {
            iterations: 0,
            converged: false,
            residuals: Residuals::default(),
        };
        let mut evaluated = None;
        for _ in 0..cfg.admm_cap {
            // gamma~ from the column mean, mapped back to the original basis.
            let mean_hat = (&bh - &(&yh / rho)).sum_axis(Axis(1)) / m as f64;
            g = vt.t().dot(&mean_hat);
            g.mapv_inplace(|v| soft_threshold(v, cfg.zeta2 / rho));
            let g_hat = vt.dot(&g);

            // <U, D B - Z~> = <V^T D^T U, B^> - <U, Z~>, using the previous B.
            let num: f64 = dtu_hat.iter().zip(bh.iter()).map(|(a, b)| a * b).sum::<f64>() - uz;
            let lam_new = (num / uu).max(0.0);

            let mut bh_new = &dtu_hat * lam_new + &dtz_hat + &yh;
            for (i, mut row) in bh_new.rows_mut().into_iter().enumerate() {
                let s = 1.0 / (mu[i] + rho);
                let shift = rho * g_hat[i];
                row.mapv_inplace(|v| (v + shift) * s);
            }
            for (i, mut row) in yh.rows_mut().into_iter().enumerate() {
                let gi = g_hat[i];
                Zip::from(&mut row).and(bh_new.row(i)).for_each(|y, &b| *y += rho * (gi - b));
            }

            let mut r_pri2 = 0.0;
            for (i, row) in bh_new.rows().into_iter().enumerate() {
                r_pri2 += row.iter().map(|b| (g_hat[i] - b) * (g_hat[i] - b)).sum::<f64>();
            }
            let gamma_norm = (m as f64).sqrt() * g.iter().map(|v| v * v).sum::<f64>().sqrt();
            let res = Residuals {
                r_pri: r_pri2.sqrt(),
                r_dual: rho * frob_diff(bh_new.view(), bh.view()),
                r_lambda: lambda_residual(lam_new, lam),
                eps_pri: root * tol.eps_abs + tol.eps_rel * gamma_norm.max(frob(bh_new.view())),
                eps_dual: root * tol.eps_abs + tol.eps_rel * frob(yh.view()),
            };
            bh = bh_new;
            lam = lam_new;
            rho = next_rho(rho, res.r_pri, res.r_dual);
            record.iterations += 1;
            record.residuals = res;
            // Residual convergence only ends the step once the iterate also
            // lowers the objective; otherwise keep iterating up to the cap.
            if res.converged(cfg.eps_lambda) {
                let dg_next = es.d.dot(&g);
                let obj_next = er_objective(y, u.view(), dg_next.view(), g.view(), lam, cfg.zeta2);
                if obj_next <= objective {
                    record.converged = true;
                    evaluated = Some((dg_next, obj_next));
                    break;
                }
            }
        }
        admm.push(record);

        let (dg_next, obj_next) = match evaluated {
            Some(v) => v,
            None => {
                let dg_next = es.d.dot(&g);
                let obj_next = er_objective(y, u.view(), dg_next.view(), g.view(), lam, cfg.zeta2);
                (dg_next, obj_next)
            }
        };
        if obj_next > objective {
            stalled = true;
            break;
        }
        let rel = (objective - obj_next).abs() / objective.abs().max(f64::MIN_POSITIVE);
        gamma = g;
        lambda = lam;
        b_hat = bh;
        ups_hat = yh;
        dg = dg_next;
        objective = obj_next;
        objective_trace.push(objective);
        if rel < cfg.mm_tol {
            break;
        }
    }

    if lambda == 0.0 {
        return Err(Error::ScaleUnidentifiable);
    }
    Ok(ErResult {
        s_hat: &dg / lambda,
        gamma_tilde: gamma,
        lambda,
        b: vt.t().dot(&b_hat),
        objective_trace,
        admm,
        stalled,
        degenerate: false,
    })
}

fn broadcast(col: ArrayView1<f64>, m: usize) -> Array2<f64> {
    let mut out = Array2::zeros((col.len(), m));
    for mut c in out.columns_mut() {
        c.assign(&col);
    }
    out
}
