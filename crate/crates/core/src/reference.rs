//! Slow reference estimator for small problems: the exact profile likelihood
//! over a frequency grid, where each grid point solves the convex fit of all
//! amplitudes and `lambda` by damped Newton.
//!
//! With one sinusoid this is a brute-force ML search followed by a bounded
//! scalar refinement around the best grid point. With more sinusoids each
//! frequency is searched on the grid in turn with the others held fixed,
//! cycling until the likelihood stops improving.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::likelihood::{f_prime, nll_from_matrix, ScaledParams};
use crate::relax::brent_minimize;
use crate::signal::SignedMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceConfig {
    /// Grid points on `(0, pi)`; point `q` sits at `q pi / grid_size`.
    pub grid_size: usize,
    /// Refine each grid winner on its neighbouring cell.
    pub refine: bool,
    pub newton_cap: usize,
    pub cycle_cap: usize,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self {
            grid_size: 4096,
            refine: true,
            newton_cap: 100,
            cycle_cap: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceFit {
    pub params: ScaledParams,
    pub nll: f64,
}

/// `f''(x)` for `f = -log Phi`, written through `f'` as `f' (f' - x)`.
fn f_second(x: f64, fp: f64) -> f64 {
    (fp * (fp - x)).clamp(0.0, 1.0)
}

/// Minimizes the negative log-likelihood over amplitudes and `lambda >= 0`
/// at fixed frequencies.
pub fn convex_fit(y: &SignedMatrix, h: ArrayView2<f64>, freqs: &[f64], newton_cap: usize) -> Result<ReferenceFit> {
    if h.dim() != y.dim() {
        return Err(Error::shape(y.dim(), h.dim()));
    }
    let (n, m) = y.dim();
    let k = freqs.len();
    let block = 2 * k;
    let dim = block * m + 1;
    let basis = Array2::from_shape_fn((n, block), |(t, j)| {
        let arg = freqs[j / 2] * t as f64;
        if j % 2 == 0 {
            arg.cos()
        } else {
            arg.sin()
        }
    });
    let h_max = h.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if h_max == 0.0 {
        return Err(Error::ZeroDenominator("reference fit (all-zero H)"));
    }

    let ys = y.to_f64();
    let eval = |theta: &DVector<f64>| -> f64 {
        let lambda = theta[dim - 1];
        let mut r = Array2::zeros((n, m));
        for mm in 0..m {
            for t in 0..n {
                let mut acc = 0.0;
                for j in 0..block {
                    acc += basis[[t, j]] * theta[mm * block + j];
                }
                r[[t, mm]] = acc;
            }
        }
        nll_from_matrix(y, h, r.view(), lambda)
    };

    let mut theta = DVector::zeros(dim);
    theta[dim - 1] = 1.0 / h_max;
    let mut value = eval(&theta);
    let mut x_row = vec![0.0; block + 1];
    for _ in 0..newton_cap {
        let mut grad = DVector::<f64>::zeros(dim);
        let mut hess = DMatrix::<f64>::zeros(dim, dim);
        let lambda = theta[dim - 1];
        for mm in 0..m {
            let off = mm * block;
            for t in 0..n {
                let s = ys[[t, mm]];
                let mut r = 0.0;
                for j in 0..block {
                    x_row[j] = s * basis[[t, j]];
                    r += basis[[t, j]] * theta[off + j];
                }
                x_row[block] = -s * h[[t, mm]];
                let x = s * (r - lambda * h[[t, mm]]);
                let fp = f_prime(x);
                let fpp = f_second(x, fp);
                let idx = |j: usize| if j < block { off + j } else { dim - 1 };
                for i in 0..=block {
                    grad[idx(i)] += fp * x_row[i];
                    for j in 0..=block {
                        hess[(idx(i), idx(j))] += fpp * x_row[i] * x_row[j];
                    }
                }
            }
        }
        let ridge = 1e-12 * (1.0 + hess.diagonal().amax());
        for i in 0..dim {
            hess[(i, i)] += ridge;
        }
        let step = match hess.clone().cholesky() {
            Some(c) => c.solve(&(-&grad)),
            None => -&grad,
        };
        let decrement = -grad.dot(&step);
        if decrement <= 1e-14 * value.abs().max(1.0) {
            break;
        }
        let mut t = 1.0;
        if step[dim - 1] < 0.0 {
            t = f64::min(t, -theta[dim - 1] / step[dim - 1]);
        }
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &theta + &step * t;
            let v = eval(&cand);
            if v <= value - 1e-4 * t * decrement {
                theta = cand;
                value = v;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    let amps_a = Array2::from_shape_fn((k, m), |(kk, mm)| theta[mm * block + 2 * kk]);
    let amps_b = Array2::from_shape_fn((k, m), |(kk, mm)| theta[mm * block + 2 * kk + 1]);
    Ok(ReferenceFit {
        params: ScaledParams {
            freqs: freqs.to_vec(),
            amps_a,
            amps_b,
            lambda: theta[dim - 1].max(0.0),
        },
        nll: value,
    })
}

/// Profile-likelihood search for `k` sinusoids.
pub fn grid_ml(y: &SignedMatrix, h: ArrayView2<f64>, k: usize, cfg: &ReferenceConfig) -> Result<ReferenceFit> {
    if k == 0 {
        return convex_fit(y, h, &[], cfg.newton_cap);
    }
    if cfg.grid_size < 2 {
        return Err(Error::invalid("reference grid needs at least 2 points"));
    }
    let g = cfg.grid_size;
    let cell = PI / g as f64;
    let profile = |freqs: &[f64]| convex_fit(y, h, freqs, cfg.newton_cap).map(|f| f.nll);

    // Best frequency for slot `slot` with the others fixed.
    let search = |freqs: &mut Vec<f64>, slot: usize| -> Result<f64> {
        let mut best = (f64::INFINITY, 0.0);
        for q in 1..g {
            freqs[slot] = q as f64 * cell;
            let v = profile(freqs)?;
            if v < best.0 {
                best = (v, freqs[slot]);
            }
        }
        freqs[slot] = best.1;
        if !cfg.refine {
            return Ok(best.0);
        }
        let lo = (best.1 - cell).max(0.5 * cell);
        let hi = (best.1 + cell).min(PI - 0.5 * cell);
        let mut scratch = freqs.clone();
        let (w, v) = brent_minimize(
            |w| {
                scratch[slot] = w;
                profile(&scratch).unwrap_or(f64::INFINITY)
            },
            lo,
            hi,
            1e-10,
        );
        if v < best.0 {
            freqs[slot] = w;
            Ok(v)
        } else {
            Ok(best.0)
        }
    };

    let mut freqs = Vec::with_capacity(k);
    let mut nll = f64::INFINITY;
    for slot in 0..k {
        freqs.push(0.0);
        nll = search(&mut freqs, slot)?;
        if slot == 0 {
            continue;
        }
        for _ in 0..cfg.cycle_cap {
            let before = nll;
            for s in 0..=slot {
                nll = search(&mut freqs, s)?;
            }
            if before - nll <= 1e-10 * before.abs() {
                break;
            }
        }
    }
    let fit = convex_fit(y, h, &freqs, cfg.newton_cap)?;
    debug_assert!((fit.nll - nll).abs() <= 1e-9 * nll.abs().max(1.0));
    Ok(fit)
}
