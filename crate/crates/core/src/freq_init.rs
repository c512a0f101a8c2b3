//! Fast frequency initialization: a group-sparse fit of the RFI on a fixed
//! frequency grid, solved by MM around ADMM. The strongest grid rows give
//! the coarse frequencies that seed the MM RELAX stages.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView2, Zip};

use crate::admm::{next_rho, residuals, AdmmTolerances, Residuals, ShiftedSolver};
use crate::error::{Error, Result};
use crate::likelihood::{aux_from_matrix, log_phi};
use crate::signal::SignedMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiConfig {
    /// Group-sparsity weight.
    pub zeta1: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub eps_lambda: f64,
    pub admm_cap: usize,
    pub mm_cap: usize,
    pub mm_tol: f64,
    /// Grid size; `None` uses `Q = N`.
    pub grid_size: Option<usize>,
    /// Penalty at the start of every MM step.
    pub rho0: f64,
}

impl Default for FiConfig {
    fn default() -> Self {
        Self {
            zeta1: 1.0,
            eps_abs: 1e-3,
            eps_rel: 1e-7,
            eps_lambda: 1e-3,
            admm_cap: 10,
            mm_cap: 5,
            mm_tol: 1e-7,
            grid_size: None,
            rho0: 1.0,
        }
    }
}

impl FiConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.eps_abs, self.eps_rel, self.eps_lambda, self.mm_tol, self.rho0];
        if !(self.zeta1 >= 0.0) || positive.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::invalid("freq-init weights and tolerances must be positive"));
        }
        if self.admm_cap == 0 || self.mm_cap == 0 || self.grid_size == Some(0) {
            return Err(Error::invalid("freq-init caps and grid size must be positive"));
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

/// `F = [cos(w_q n) | sin(w_q n)]` on `w_q = q pi / Q`, `q = 0..Q`, with the
/// eigendecomposition of `F^T F` for the penalized solves.
#[derive(Debug, Clone)]
pub struct GridDictionary {
    pub f: Array2<f64>,
    pub q: usize,
    solver: ShiftedSolver,
}

impl GridDictionary {
    pub fn new(n: usize, q: usize) -> Result<Self> {
        if n == 0 || q == 0 {
            return Err(Error::invalid("grid dictionary needs N, Q >= 1"));
        }
        let f = Array2::from_shape_fn((n, 2 * q), |(i, j)| {
            let w = Self::grid_frequency_of(j % q, q);
            if j < q {
                (w * i as f64).cos()
            } else {
                (w * i as f64).sin()
            }
        });
        let gram = f.t().dot(&f);
        let solver = ShiftedSolver::new(gram.view());
        Ok(Self { f, q, solver })
    }

    fn grid_frequency_of(index: usize, q: usize) -> f64 {
        index as f64 * PI / q as f64
    }

    /// `w` of grid row `index` (0-based).
    pub fn frequency(&self, index: usize) -> f64 {
        Self::grid_frequency_of(index, self.q)
    }

    /// `(F^T F + rho I)^{-1} rhs`.
    pub fn solve(&self, rhs: ArrayView2<f64>, rho: f64) -> Array2<f64> {
        self.solver.solve(rhs, rho)
    }
}

/// Row-wise group shrinkage of `rho B - Upsilon`, divided by `rho`.
pub fn update_a(b: ArrayView2<f64>, upsilon: ArrayView2<f64>, rho: f64, zeta1: f64) -> Array2<f64> {
    let mut out = &b * rho - &upsilon;
    for mut row in out.rows_mut() {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        let c = if norm > 0.0 { (1.0 - zeta1 / norm).max(0.0) } else { 0.0 };
        row.mapv_inplace(|v| c * v / rho);
    }
    out
}

/// `lambda = max(0, <H, FB - Z~> / ||H||^2)`.
pub fn update_lambda_fi(h: ArrayView2<f64>, fb: ArrayView2<f64>, z: ArrayView2<f64>) -> Result<f64> {
    crate::mmrelax::update_lambda(h, fb, z)
}

/// `B = (F^T F + rho I)^{-1} (lambda F^T H + F^T Z~ + Upsilon + rho A)`.
pub fn update_b(
    grid: &GridDictionary,
    h: ArrayView2<f64>,
    z: ArrayView2<f64>,
    upsilon: ArrayView2<f64>,
    a: ArrayView2<f64>,
    lambda: f64,
    rho: f64,
) -> Array2<f64> {
    let ft = grid.f.t();
    let rhs = ft.dot(&h) * lambda + ft.dot(&z) + upsilon + &(&a * rho);
    grid.solve(rhs.view(), rho)
}

/// `Upsilon + rho (A - B)`.
pub fn update_upsilon(upsilon: ArrayView2<f64>, a: ArrayView2<f64>, b: ArrayView2<f64>, rho: f64) -> Array2<f64> {
    let mut out = upsilon.to_owned();
    Zip::from(&mut out).and(a).and(b).for_each(|u, &a, &b| *u += rho * (a - b));
    out
}

/// Residuals of one iteration plus the penalty for the next one.
#[allow(clippy::too_many_arguments)]
pub fn residuals_and_rho(
    a: ArrayView2<f64>,
    b_new: ArrayView2<f64>,
    b_old: ArrayView2<f64>,
    upsilon: ArrayView2<f64>,
    lambda_new: f64,
    lambda_old: f64,
    rho: f64,
    tol: &AdmmTolerances,
) -> (Residuals, f64) {
    let r = residuals(a, b_new, b_old, upsilon, lambda_new, lambda_old, rho, tol);
    (r, next_rho(rho, r.r_pri, r.r_dual))
}

/// ADMM iterate carried across MM steps.
#[derive(Debug, Clone)]
pub struct AdmmFiState {
    pub a_tilde: Array2<f64>,
    pub b: Array2<f64>,
    pub upsilon: Array2<f64>,
    pub lambda: f64,
    pub rho: f64,
    pub residuals: Residuals,
}

/// Per-MM-step ADMM diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmRecord {
    pub iterations: usize,
    pub converged: bool,
    pub residuals: Residuals,
}

#[derive(Debug, Clone)]
pub struct FiResult {
    /// Up to `K_max` grid frequencies, strongest first.
    pub freqs: Vec<f64>,
    /// Grid row of each returned frequency.
    pub rows: Vec<usize>,
    pub lambda: f64,
    /// Scaled amplitudes `A~` (`2Q x M`).
    pub a_tilde: Array2<f64>,
    /// Row l1 norms of the magnitude matrix, one per grid frequency.
    pub row_l1: Vec<f64>,
    /// Penalized likelihood before the first and after every accepted MM step.
    pub objective_trace: Vec<f64>,
    pub admm: Vec<AdmmRecord>,
    /// An MM step would have raised the objective (inexact ADMM) and was discarded.
    pub stalled: bool,
}

/// `zeta1 ||A~||_{1,2} + sum f(Y (F A~ - lambda H))`.
pub fn fi_objective(
    y: &SignedMatrix,
    h: ArrayView2<f64>,
    fa: ArrayView2<f64>,
    a_tilde: ArrayView2<f64>,
    lambda: f64,
    zeta1: f64,
) -> f64 {
    let group: f64 = a_tilde
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
        .sum();
    let mut data = 0.0;
    Zip::from(y.data()).and(h).and(fa).for_each(|&s, &h, &r| {
        data -= log_phi(f64::from(s) * (r - lambda * h));
    });
    zeta1 * group + data
}

/// Runs the MM/ADMM group-sparse fit and returns the `k_max` strongest
/// non-DC grid frequencies.
pub fn fast_freq_init(y: &SignedMatrix, h: ArrayView2<f64>, cfg: &FiConfig, k_max: usize) -> Result<FiResult> {
    cfg.validate()?;
    let q = cfg.grid_size.unwrap_or(y.n_fast());
    let grid = GridDictionary::new(y.n_fast(), q)?;
    fast_freq_init_with_grid(&grid, y, h, cfg, k_max)
}

pub fn fast_freq_init_with_grid(
    grid: &GridDictionary,
    y: &SignedMatrix,
    h: ArrayView2<f64>,
    cfg: &FiConfig,
    k_max: usize,
) -> Result<FiResult> {
    cfg.validate()?;
    if h.dim() != y.dim() {
        return Err(Error::shape(y.dim(), h.dim()));
    }
    if grid.f.nrows() != y.n_fast() {
        return Err(Error::shape((y.n_fast(), 2 * grid.q), grid.f.dim()));
    }
    let q = grid.q;
    if k_max == 0 || k_max >= q {
        return Err(Error::invalid(format!("K_max must lie in 1..{q}, got {k_max}")));
    }
    let m = y.m_slow();
    let h_max = h.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if h_max == 0.0 {
        return Err(Error::ZeroDenominator("freq-init (all-zero H)"));
    }
    let tol = cfg.tolerances();
    let ft = grid.f.t();
    let fth = ft.dot(&h);
    let hh: f64 = h.iter().map(|v| v * v).sum();

    let mut st = AdmmFiState {
        a_tilde: Array2::zeros((2 * q, m)),
        b: Array2::zeros((2 * q, m)),
        upsilon: Array2::zeros((2 * q, m)),
        lambda: 1.0 / h_max,
        rho: cfg.rho0,
        residuals: Residuals::default(),
    };
    let mut fa = grid.f.dot(&st.a_tilde);
    let mut objective = fi_objective(y, h, fa.view(), st.a_tilde.view(), st.lambda, cfg.zeta1);
    let mut objective_trace = vec![objective];
    let mut admm = Vec::new();
    let mut stalled = false;

    for _ in 0..cfg.mm_cap {
        let z = aux_from_matrix(y, h, fa.view(), st.lambda);
        let ftz = ft.dot(&z);
        let hz: f64 = h.iter().zip(z.iter()).map(|(a, b)| a * b).sum();
        let mut next = st.clone();
        next.rho = cfg.rho0;
        let mut record = AdmmRecord {
            iterations: 0,
            converged: false,
            residuals: Residuals::default(),
        };
        for _ in 0..cfg.admm_cap {
            next.a_tilde = update_a(next.b.view(), next.upsilon.view(), next.rho, cfg.zeta1);
            // <H, F B - Z~> = <F^T H, B> - <H, Z~>, using the previous B.
            let num: f64 = fth.iter().zip(next.b.iter()).map(|(a, b)| a * b).sum::<f64>() - hz;
            let lambda_new = (num / hh).max(0.0);
            let rhs = &fth * lambda_new + &ftz + &next.upsilon + &(&next.a_tilde * next.rho);
            let b_new = grid.solve(rhs.view(), next.rho);
            next.upsilon = update_upsilon(next.upsilon.view(), next.a_tilde.view(), b_new.view(), next.rho);
            let (res, rho_next) = residuals_and_rho(
                next.a_tilde.view(),
                b_new.view(),
                next.b.view(),
                next.upsilon.view(),
                lambda_new,
                next.lambda,
                next.rho,
                &tol,
            );
            next.b = b_new;
            next.lambda = lambda_new;
            next.rho = rho_next;
            next.residuals = res;
            record.iterations += 1;
            record.residuals = res;
            if res.converged(cfg.eps_lambda) {
                record.converged = true;
                break;
            }
        }
        admm.push(record);
        let fa_next = grid.f.dot(&next.a_tilde);
        let obj_next = fi_objective(y, h, fa_next.view(), next.a_tilde.view(), next.lambda, cfg.zeta1);
        if obj_next > objective {
            stalled = true;
            break;
        }
        let rel = (objective - obj_next).abs() / objective.abs().max(f64::MIN_POSITIVE);
        st = next;
        fa = fa_next;
        objective = obj_next;
        objective_trace.push(objective);
        if rel < cfg.mm_tol {
            break;
        }
    }

    let (rows, row_l1) = rank_rows(st.a_tilde.view(), q, st.lambda, k_max);
    Ok(FiResult {
        freqs: rows.iter().map(|&r| grid.frequency(r)).collect(),
        rows,
        lambda: st.lambda,
        a_tilde: st.a_tilde,
        row_l1,
        objective_trace,
        admm,
        stalled,
    })
}

/// Row l1 norms of `sqrt(cos^2 + sin^2)` on the unscaled amplitudes and the
/// `k_max` strongest non-DC rows (descending, ties to the lower row).
/// All-zero magnitudes give an empty list.
pub(crate) fn rank_rows(a_tilde: ArrayView2<f64>, q: usize, lambda: f64, k_max: usize) -> (Vec<usize>, Vec<f64>) {
    let scale = if lambda > 0.0 { 1.0 / lambda } else { 1.0 };
    let row_l1: Vec<f64> = (0..q)
        .map(|r| {
            a_tilde
                .row(r)
                .iter()
                .zip(a_tilde.row(q + r))
                .map(|(c, s)| scale * c.hypot(*s))
                .sum()
        })
        .collect();
    let mut order: Vec<usize> = (1..q).filter(|&r| row_l1[r] > 0.0).collect();
    order.sort_by(|&i, &j| row_l1[j].total_cmp(&row_l1[i]).then(i.cmp(&j)));
    order.truncate(k_max);
    (order, row_l1)
}
