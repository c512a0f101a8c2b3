//! One-bit BIC for the number of RFI sources, and numerical checks of the
//! large-`N` limits behind its `K (3 + 2M) ln N` penalty.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::likelihood::{log_phi, neg_log_likelihood, ScaledParams};
use crate::mmrelax::{fit_lambda_only, mmrelax_stages, MmConfig, MmState};
use crate::signal::{RfiParams, SignedMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BicScore {
    pub k: usize,
    /// Twice the negative log-likelihood at the fitted parameters.
    pub nll_term: f64,
    pub penalty: f64,
    pub total: f64,
}

/// `k (3 + 2M) ln N`.
pub fn bic_penalty(k: usize, n_fast: usize, m_slow: usize) -> f64 {
    k as f64 * (3.0 + 2.0 * m_slow as f64) * (n_fast as f64).ln()
}

/// Score of a fitted model with `k` sinusoids; `+inf` when `lambda = 0`.
pub fn bic_score(y: &SignedMatrix, h: ArrayView2<f64>, fitted: &ScaledParams, k: usize) -> Result<BicScore> {
    if fitted.n_sources() != k {
        return Err(Error::invalid(format!(
            "fitted model has {} sinusoids, scored as {k}",
            fitted.n_sources()
        )));
    }
    let penalty = bic_penalty(k, y.n_fast(), y.m_slow());
    let nll_term = if fitted.lambda > 0.0 {
        2.0 * neg_log_likelihood(y, h, fitted)?
    } else {
        f64::INFINITY
    };
    Ok(BicScore {
        k,
        nll_term,
        penalty,
        total: nll_term + penalty,
    })
}

#[derive(Debug, Clone)]
pub struct OrderSelection {
    pub k_hat: usize,
    pub params: ScaledParams,
    /// One score per candidate `0..=K_max`.
    pub scores: Vec<BicScore>,
    /// Solver output for every candidate, index = order.
    pub fits: Vec<MmState>,
}

/// Fits orders `0..=k_max` (the sinusoid orders by the staged MM solver
/// seeded with `inits`) and returns the BIC minimizer, ties to the smaller
/// order. `k_max` is capped at the number of available inits.
pub fn select_order(
    y: &SignedMatrix,
    h: ArrayView2<f64>,
    k_max: usize,
    inits: &[f64],
    lambda_init: f64,
    cfg: &MmConfig,
) -> Result<OrderSelection> {
    if k_max == 0 {
        return Err(Error::invalid("K_max must be >= 1"));
    }
    let k_max = k_max.min(inits.len());
    let mut fits = vec![fit_lambda_only(y, h)?];
    if k_max > 0 {
        fits.extend(mmrelax_stages(y, h, k_max, inits, lambda_init, cfg)?);
    }
    let scores = fits
        .iter()
        .enumerate()
        .map(|(k, f)| bic_score(y, h, &f.params, k))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (k, s) in scores.iter().enumerate() {
        if s.total < scores[best].total {
            best = k;
        }
    }
    Ok(OrderSelection {
        k_hat: best,
        params: fits[best].params.clone(),
        scores,
        fits,
    })
}

/// `xi(x) = [1/Phi(x) + 1/Phi(-x)] e^{-x^2}`, evaluated in the log domain.
pub fn xi(x: f64) -> f64 {
    let x2 = x * x;
    (-x2 - log_phi(x)).exp() + (-x2 - log_phi(-x)).exp()
}

/// One normalized block of `J_1` at a given `N` next to its large-`N` limit.
#[derive(Debug, Clone, PartialEq)]
pub struct FimCheck {
    pub entry: &'static str,
    pub n: usize,
    pub finite: f64,
    pub limit: f64,
    /// Relative error, or absolute error when the limit is zero.
    pub error: f64,
}

/// Evaluates the normalized `J_1` blocks for source 0 in PRI 0 (plus the
/// cross-source frequency block when `K >= 2`) at every `N` in `n_list`.
///
/// `levels[m]` is the threshold used throughout PRI `m`. The RFI is written
/// as `A sin(w n + phi)` with `A = hypot(a, b)` and `phi = atan2(a, b)`.
pub fn fim_limit_check(params: &RfiParams, levels: &[f64], n_list: &[usize]) -> Result<Vec<FimCheck>> {
    params.validate()?;
    let m_slow = params.m_slow();
    if levels.len() != m_slow {
        return Err(Error::shape((1, m_slow), (1, levels.len())));
    }
    let n_min = *n_list.iter().min().ok_or_else(|| Error::invalid("empty N list"))?;
    let margin = 2.0 * PI * 8.0 / n_min as f64;
    if params.freqs.iter().any(|&w| w < margin || w > PI - margin) {
        return Err(Error::invalid(format!(
            "frequencies must lie in [{margin:.4}, {:.4}] for N = {n_min}",
            PI - margin
        )));
    }
    if params.n_sources() == 0 {
        return Err(Error::invalid("need at least one sinusoid"));
    }
    let k_src = params.n_sources();
    let amp = params.magnitudes();
    let phase = Array2::from_shape_fn(amp.dim(), |(k, m)| params.amps_a[[k, m]].atan2(params.amps_b[[k, m]]));
    let sigma = params.sigma;
    let s2 = sigma * sigma;
    let a00 = amp[[0, 0]];
    let sum_a2_src0: f64 = amp.row(0).iter().map(|a| a * a).sum();
    let sum_a2_all: f64 = amp.iter().map(|a| a * a).sum();
    let sigma_h2: f64 = levels.iter().map(|l| l * l).sum();

    let mut out = Vec::new();
    for &n in n_list {
        let nf = n as f64;
        let (mut ww, mut wa, mut wp, mut ws) = (0.0, 0.0, 0.0, 0.0);
        let (mut aa, mut ap, mut as_, mut pp, mut ps, mut ss) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let mut ww_cross = 0.0;
        for m in 0..m_slow {
            for i in 0..n {
                let t = i as f64;
                let mut r = 0.0;
                for k in 0..k_src {
                    r += amp[[k, m]] * (params.freqs[k] * t + phase[[k, m]]).sin();
                }
                let u_sigma = -(r - levels[m]) / sigma;
                let arg0 = params.freqs[0] * t + phase[[0, m]];
                let d_w = t * amp[[0, m]] * arg0.cos();
                ww += d_w * d_w;
                ws += d_w * u_sigma;
                ss += u_sigma * u_sigma;
                if k_src >= 2 {
                    let arg1 = params.freqs[1] * t + phase[[1, m]];
                    ww_cross += d_w * t * amp[[1, m]] * arg1.cos();
                }
                if m == 0 {
                    let d_a = arg0.sin();
                    let d_p = a00 * arg0.cos();
                    wa += d_w * d_a;
                    wp += d_w * d_p;
                    aa += d_a * d_a;
                    ap += d_a * d_p;
                    as_ += d_a * u_sigma;
                    pp += d_p * d_p;
                    ps += d_p * u_sigma;
                }
            }
        }
        let mut push = |entry: &'static str, finite: f64, limit: f64| {
            let error = if limit == 0.0 {
                finite.abs()
            } else {
                ((finite - limit) / limit).abs()
            };
            out.push(FimCheck { entry, n, finite, limit, error });
        };
        push("omega-omega", ww / (s2 * nf.powi(3)), sum_a2_src0 / (6.0 * s2));
        push("omega-A", wa / (s2 * nf * nf), 0.0);
        push("omega-phi", wp / (s2 * nf * nf), a00 * a00 / (4.0 * s2));
        push("omega-sigma", ws / (s2 * nf * nf), 0.0);
        push("A-A", aa / (s2 * nf), 1.0 / (2.0 * s2));
        push("A-phi", ap / (s2 * nf), 0.0);
        push("A-sigma", as_ / (s2 * nf), -a00 / (2.0 * sigma * s2));
        push("phi-phi", pp / (s2 * nf), a00 * a00 / (2.0 * s2));
        push("phi-sigma", ps / (s2 * nf), 0.0);
        push("sigma-sigma", ss / (s2 * nf), (0.5 * sum_a2_all + sigma_h2) / (s2 * s2));
        if k_src >= 2 {
            push("omega-omega cross", ww_cross / (s2 * nf.powi(3)), 0.0);
        }
    }
    Ok(out)
}
