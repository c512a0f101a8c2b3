//! Maximum-likelihood RFI estimation from signed data by majorization-
//! minimization: every MM step replaces the one-bit likelihood by a least
//! squares fit of `R~ - lambda H` to an auxiliary matrix `Z~`, which a
//! cyclic RELAX pass then decreases one sinusoid at a time.

use ndarray::{Array1, Array2, ArrayView2, Zip};

use crate::error::{Error, Result};
use crate::likelihood::{aux_from_matrix, nll_from_matrix, surrogate, ScaledParams};
use crate::relax::{brent_minimize, fit_amp_phase, SinusoidComponent, SpectrumEngine, DEFAULT_PAD_FACTOR};
use crate::signal::SignedMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmConfig {
    /// Maximum number of MM iterations.
    pub t_m: usize,
    /// Maximum number of inner cyclic iterations per MM step.
    pub t_c: usize,
    /// Relative change of the likelihood that ends the MM loop.
    pub tol_outer: f64,
    /// Relative change of the surrogate that ends the inner loop.
    pub tol_inner: f64,
    /// `N1 = pad_factor * N`.
    pub pad_factor: usize,
}

impl Default for MmConfig {
    fn default() -> Self {
        Self {
            t_m: 20,
            t_c: 20,
            tol_outer: 1e-7,
            tol_inner: 1e-9,
            pad_factor: DEFAULT_PAD_FACTOR,
        }
    }
}

impl MmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_m == 0 || self.t_c == 0 || self.pad_factor == 0 {
            return Err(Error::invalid("MM iteration caps and padding factor must be positive"));
        }
        if !(self.tol_outer > 0.0 && self.tol_inner > 0.0) {
            return Err(Error::invalid("MM tolerances must be positive"));
        }
        Ok(())
    }
}

/// Result of one MM solve.
#[derive(Debug, Clone)]
pub struct MmState {
    pub params: ScaledParams,
    /// Negative log-likelihood at `params`.
    pub nll: f64,
    pub mm_iter: usize,
    /// Inner iterations summed over all MM steps.
    pub inner_iter: usize,
    /// Likelihood before the first and after every MM step.
    pub nll_trace: Vec<f64>,
    /// Surrogate values inside each MM step, starting from its initial point.
    pub surrogate_trace: Vec<Vec<f64>>,
    /// Every row of `Y` is constant, so frequencies are barely identifiable.
    pub low_information: bool,
}

/// `lambda = max(0, <H, R - Z~> / ||H||^2)`.
pub fn update_lambda(h: ArrayView2<f64>, r: ArrayView2<f64>, z: ArrayView2<f64>) -> Result<f64> {
    if r.dim() != h.dim() || z.dim() != h.dim() {
        return Err(Error::shape(h.dim(), if r.dim() != h.dim() { r.dim() } else { z.dim() }));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    Zip::from(h).and(r).and(z).for_each(|&h, &r, &z| {
        num += h * (r - z);
        den += h * h;
    });
    if den == 0.0 {
        return Err(Error::ZeroDenominator("lambda update (all-zero H)"));
    }
    Ok((num / den).max(0.0))
}

fn components(p: &ScaledParams) -> Vec<SinusoidComponent> {
    (0..p.n_sources())
        .map(|k| SinusoidComponent {
            omega: p.freqs[k],
            per_pri_a: p.amps_a.row(k).to_owned(),
            per_pri_b: p.amps_b.row(k).to_owned(),
        })
        .collect()
}

fn params_from(comps: &[SinusoidComponent], m: usize, lambda: f64) -> ScaledParams {
    let k = comps.len();
    let mut a = Array2::zeros((k, m));
    let mut b = Array2::zeros((k, m));
    for (i, c) in comps.iter().enumerate() {
        a.row_mut(i).assign(&c.per_pri_a);
        b.row_mut(i).assign(&c.per_pri_b);
    }
    ScaledParams {
        freqs: comps.iter().map(|c| c.omega).collect(),
        amps_a: a,
        amps_b: b,
        lambda,
    }
}

fn check_inputs(y: &SignedMatrix, h: ArrayView2<f64>, init: &ScaledParams) -> Result<()> {
    if h.dim() != y.dim() {
        return Err(Error::shape(y.dim(), h.dim()));
    }
    if init.amps_a.dim() != (init.n_sources(), y.m_slow()) || init.amps_b.dim() != init.amps_a.dim() {
        return Err(Error::shape((init.n_sources(), y.m_slow()), init.amps_a.dim()));
    }
    if !(init.lambda >= 0.0) {
        return Err(Error::invalid("initial lambda must be >= 0"));
    }
    Ok(())
}

fn relative_change(prev: f64, now: f64) -> f64 {
    (prev - now).abs() / prev.abs().max(f64::MIN_POSITIVE)
}

/// MM iterations for a fixed number of sinusoids, starting from `init`.
pub fn mm_solve_k(y: &SignedMatrix, h: ArrayView2<f64>, init: &ScaledParams, cfg: &MmConfig) -> Result<MmState> {
    cfg.validate()?;
    check_inputs(y, h, init)?;
    let engine = SpectrumEngine::new(y.n_fast(), cfg.pad_factor * y.n_fast())?;
    mm_solve_with_engine(&engine, y, h, init, cfg)
}

pub(crate) fn mm_solve_with_engine(
    engine: &SpectrumEngine,
    y: &SignedMatrix,
    h: ArrayView2<f64>,
    init: &ScaledParams,
    cfg: &MmConfig,
) -> Result<MmState> {
    let (n, m) = y.dim();
    let k_total = init.n_sources();
    let mut comps = components(init);
    let mut lambda = init.lambda;
    let mut r_sum = init.rfi_matrix(n);
    let mut nll = nll_from_matrix(y, h, r_sum.view(), lambda);
    let mut nll_trace = vec![nll];
    let mut surrogate_trace = Vec::new();
    let mut inner_total = 0;
    let mut mm_iter = 0;
    let mut v = Array2::zeros((n, m));

    while mm_iter < cfg.t_m {
        let z = aux_from_matrix(y, h, r_sum.view(), lambda);
        let mut g = surrogate(h, r_sum.view(), lambda, z.view());
        let mut g_trace = vec![g];
        // The first cyclic update goes to the last component.
        let mut k = k_total.saturating_sub(1);
        for _ in 0..cfg.t_c {
            lambda = update_lambda(h, r_sum.view(), z.view())?;
            if k_total > 0 {
                Zip::from(&mut v)
                    .and(&z)
                    .and(h)
                    .and(&r_sum)
                    .for_each(|v, &z, &h, &r| *v = z + lambda * h - r);
                comps[k].accumulate(&mut v, 1.0);
                let updated = engine.estimate_component(v.view(), Some(comps[k].omega))?;
                comps[k].accumulate(&mut r_sum, -1.0);
                updated.accumulate(&mut r_sum, 1.0);
                comps[k] = updated;
                k = (k + 1) % k_total;
            }
            inner_total += 1;
            let g_new = surrogate(h, r_sum.view(), lambda, z.view());
            g_trace.push(g_new);
            let done = relative_change(g, g_new) < cfg.tol_inner;
            g = g_new;
            if done {
                break;
            }
        }
        surrogate_trace.push(g_trace);
        mm_iter += 1;
        let nll_new = nll_from_matrix(y, h, r_sum.view(), lambda);
        nll_trace.push(nll_new);
        let done = relative_change(nll, nll_new) < cfg.tol_outer;
        nll = nll_new;
        if done {
            break;
        }
    }

    Ok(MmState {
        params: params_from(&comps, m, lambda),
        nll,
        mm_iter,
        inner_iter: inner_total,
        nll_trace,
        surrogate_trace,
        low_information: y.is_low_information(),
    })
}

/// Convex one-dimensional fit of `lambda` with no sinusoids at all.
pub fn fit_lambda_only(y: &SignedMatrix, h: ArrayView2<f64>) -> Result<MmState> {
    if h.dim() != y.dim() {
        return Err(Error::shape(y.dim(), h.dim()));
    }
    let zero = Array2::zeros(y.dim());
    let f = |l: f64| nll_from_matrix(y, h, zero.view(), l);
    let mut hi = 1.0 / h.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    // Expand until the convex objective turns upward or stops changing.
    let mut f_hi = f(hi);
    for _ in 0..200 {
        let f_next = f(2.0 * hi);
        if f_next >= f_hi {
            break;
        }
        hi *= 2.0;
        f_hi = f_next;
    }
    let (l, _) = brent_minimize(f, 0.0, 2.0 * hi, 1e-12 * hi);
    let f0 = f(0.0);
    let (lambda, nll) = if f0 <= f(l) { (0.0, f0) } else { (l, f(l)) };
    Ok(MmState {
        params: ScaledParams::empty(y.m_slow(), lambda),
        nll,
        mm_iter: 0,
        inner_iter: 0,
        nll_trace: vec![nll],
        surrogate_trace: Vec::new(),
        low_information: y.is_low_information(),
    })
}

/// Grows the model one sinusoid at a time, seeding sinusoid `k` at
/// `freq_inits[k - 1]` and re-running the MM solver over all of them.
/// Returns the solution of every stage `1..=k_hat`.
pub fn mmrelax_stages(
    y: &SignedMatrix,
    h: ArrayView2<f64>,
    k_hat: usize,
    freq_inits: &[f64],
    lambda_init: f64,
    cfg: &MmConfig,
) -> Result<Vec<MmState>> {
    cfg.validate()?;
    if k_hat == 0 {
        return Err(Error::invalid("model order must be >= 1"));
    }
    if freq_inits.len() < k_hat {
        return Err(Error::NotEnoughInits {
            needed: k_hat,
            got: freq_inits.len(),
        });
    }
    if h.dim() != y.dim() {
        return Err(Error::shape(y.dim(), h.dim()));
    }
    let (n, m) = y.dim();
    let engine = SpectrumEngine::new(n, cfg.pad_factor * n)?;
    let mut current = ScaledParams::empty(m, lambda_init.max(0.0));
    let mut stages = Vec::with_capacity(k_hat);
    for &w in &freq_inits[..k_hat] {
        let seeded = seed_component(y, h, &current, w)?;
        let state = mm_solve_with_engine(&engine, y, h, &seeded, cfg)?;
        current = state.params.clone();
        stages.push(state);
    }
    Ok(stages)
}

/// Final stage of [`mmrelax_stages`].
pub fn mmrelax_full(
    y: &SignedMatrix,
    h: ArrayView2<f64>,
    k_hat: usize,
    freq_inits: &[f64],
    lambda_init: f64,
    cfg: &MmConfig,
) -> Result<MmState> {
    let mut stages = mmrelax_stages(y, h, k_hat, freq_inits, lambda_init, cfg)?;
    Ok(stages.pop().expect("k_hat >= 1 gives at least one stage"))
}

/// Appends a sinusoid at `omega` whose amplitudes are the least-squares fit
/// of `Z~ + lambda H` minus the existing sinusoids.
fn seed_component(y: &SignedMatrix, h: ArrayView2<f64>, current: &ScaledParams, omega: f64) -> Result<ScaledParams> {
    let n = y.n_fast();
    let r = current.rfi_matrix(n);
    let z = aux_from_matrix(y, h, r.view(), current.lambda);
    let mut v = z;
    Zip::from(&mut v)
        .and(h)
        .and(&r)
        .for_each(|v, &h, &r| *v += current.lambda * h - r);
    let (a, b) = fit_amp_phase(v.view(), omega)?;
    let mut comps = components(current);
    comps.push(SinusoidComponent {
        omega,
        per_pri_a: a,
        per_pri_b: b,
    });
    Ok(params_from(&comps, y.m_slow(), current.lambda))
}

/// Per-source amplitude `sqrt(a~^2 + b~^2) / lambda`, averaged over PRIs.
pub fn mean_amplitudes(p: &ScaledParams) -> Array1<f64> {
    let m = p.m_slow().max(1) as f64;
    Array1::from_shape_fn(p.n_sources(), |k| {
        let s: f64 = p
            .amps_a
            .row(k)
            .iter()
            .zip(p.amps_b.row(k))
            .map(|(a, b)| a.hypot(*b))
            .sum();
        s / m / p.lambda
    })
}
