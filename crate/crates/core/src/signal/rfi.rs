use std::f64::consts::PI;

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};

/// Simulated RFI source frequencies, in Hz.
pub const TABLE5_FREQUENCIES_HZ: [f64; 5] = [500e6, 350e6, 700e6, 900e6, 1050e6];
/// Amplitude of each source relative to the first one.
pub const TABLE5_AMPLITUDE_RATIOS: [f64; 5] = [1.0, 0.95, 0.8, 0.87, 0.9];

/// RNG stream reserved for RFI phases.
pub(crate) const PHASE_STREAM: u64 = 1;

/// `K` sinusoidal interferers with per-PRI in-phase/quadrature amplitudes.
///
/// `R[n, m] = sum_k a[k, m] cos(w_k n) + b[k, m] sin(w_k n)` with `n` 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct RfiParams {
    pub freqs: Vec<f64>,
    pub amps_a: Array2<f64>,
    pub amps_b: Array2<f64>,
    pub sigma: f64,
}

impl RfiParams {
    pub fn new(freqs: Vec<f64>, amps_a: Array2<f64>, amps_b: Array2<f64>, sigma: f64) -> Result<Self> {
        let p = Self {
            freqs,
            amps_a,
            amps_b,
            sigma,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.freqs.len();
        if self.amps_a.nrows() != k || self.amps_b.dim() != self.amps_a.dim() {
            return Err(Error::shape(self.amps_a.dim(), self.amps_b.dim()));
        }
        if let Some(w) = self.freqs.iter().find(|w| !(0.0..PI).contains(*w)) {
            return Err(Error::invalid(format!("frequency {w} outside [0, pi)")));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::invalid(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.amps_a.iter().chain(self.amps_b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("RFI amplitudes must be finite"));
        }
        Ok(())
    }

    pub fn n_sources(&self) -> usize {
        self.freqs.len()
    }

    pub fn m_slow(&self) -> usize {
        self.amps_a.ncols()
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    /// Multiplies every amplitude by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            freqs: self.freqs.clone(),
            amps_a: &self.amps_a * c,
            amps_b: &self.amps_b * c,
            sigma: self.sigma,
        }
    }

    /// Per-source, per-PRI magnitude `sqrt(a^2 + b^2)`.
    pub fn magnitudes(&self) -> Array2<f64> {
        Array2::from_shape_fn(self.amps_a.dim(), |(k, m)| {
            self.amps_a[[k, m]].hypot(self.amps_b[[k, m]])
        })
    }
}

/// Evaluates the cos/sin sum for every fast-time sample and PRI.
pub fn synthesize_rfi(params: &RfiParams, n_fast: usize, m_slow: usize) -> Result<Array2<f64>> {
    params.validate()?;
    if params.m_slow() != m_slow {
        return Err(Error::shape((params.n_sources(), m_slow), params.amps_a.dim()));
    }
    Ok(sinusoid_matrix(
        &params.freqs,
        params.amps_a.view(),
        params.amps_b.view(),
        n_fast,
    ))
}

/// `N x M` sum of sinusoids with amplitudes given as `K x M` arrays.
pub(crate) fn sinusoid_matrix(
    freqs: &[f64],
    amps_a: ArrayView2<f64>,
    amps_b: ArrayView2<f64>,
    n_fast: usize,
) -> Array2<f64> {
    let m_slow = amps_a.ncols();
    let mut out = Array2::zeros((n_fast, m_slow));
    for (k, &w) in freqs.iter().enumerate() {
        let a = amps_a.row(k);
        let b = amps_b.row(k);
        for n in 0..n_fast {
            let (s, c) = (w * n as f64).sin_cos();
            let mut row = out.row_mut(n);
            for m in 0..m_slow {
                row[m] += a[m] * c + b[m] * s;
            }
        }
    }
    out
}

/// Five-source RFI with fixed amplitudes `A1 * ratio_k` and phases drawn
/// i.i.d. uniform on `[0, 2 pi)` per source and PRI.
///
/// `sigma` of the returned parameters is 1; callers set the noise level.
pub fn simulate_table5_rfi(a1: f64, fs: f64, m_slow: usize, seed: u64) -> Result<RfiParams> {
    if !(a1.is_finite() && a1 > 0.0) {
        return Err(Error::invalid(format!("A1 must be positive, got {a1}")));
    }
    if m_slow == 0 {
        return Err(Error::invalid("M must be at least 1"));
    }
    let f_max = TABLE5_FREQUENCIES_HZ.iter().cloned().fold(0.0, f64::max);
    if !(fs > 2.0 * f_max) {
        return Err(Error::invalid(format!(
            "sampling rate {fs} Hz cannot represent {f_max} Hz"
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(PHASE_STREAM);
    let k = TABLE5_FREQUENCIES_HZ.len();
    let freqs = TABLE5_FREQUENCIES_HZ
        .iter()
        .map(|f| 2.0 * PI * f / fs)
        .collect();
    let mut amps_a = Array2::zeros((k, m_slow));
    let mut amps_b = Array2::zeros((k, m_slow));
    for src in 0..k {
        let amp = a1 * TABLE5_AMPLITUDE_RATIOS[src];
        for m in 0..m_slow {
            let phi = rng.random_range(0.0..2.0 * PI);
            let (s, c) = phi.sin_cos();
            amps_a[[src, m]] = amp * s;
            amps_b[[src, m]] = amp * c;
        }
    }
    RfiParams::new(freqs, amps_a, amps_b, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn single(w: f64, a: f64, b: f64, m: usize) -> RfiParams {
        RfiParams::new(
            vec![w],
            Array2::from_elem((1, m), a),
            Array2::from_elem((1, m), b),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn dc_cosine_is_all_ones() {
        let r = synthesize_rfi(&single(0.0, 1.0, 0.0, 3), 7, 3).unwrap();
        assert!(r.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn quarter_period_sine() {
        let r = synthesize_rfi(&single(PI / 2.0, 0.0, 1.0, 2), 8, 2).unwrap();
        let expect = [0.0, 1.0, 0.0, -1.0, 0.0, 1.0, 0.0, -1.0];
        for (n, e) in expect.iter().enumerate() {
            assert_abs_diff_eq!(r[[n, 1]], *e, epsilon = 1e-12);
        }
    }

    #[test]
    fn five_hundred_mhz_at_eight_ghz_has_period_sixteen() {
        let w = 2.0 * PI * 500e6 / 8e9;
        assert_abs_diff_eq!(w, 0.392_699_081_698_724_1, epsilon = 1e-12);
        let r = synthesize_rfi(&single(w, 1.3, -0.4, 1), 64, 1).unwrap();
        for n in 0..48 {
            assert_abs_diff_eq!(r[[n, 0]], r[[n + 16, 0]], epsilon = 1e-10);
        }
    }

    #[test]
    fn table5_amplitudes_and_phases() {
        let p = simulate_table5_rfi(2.0, 8e9, 16, 7).unwrap();
        let mags = p.magnitudes();
        for m in 0..16 {
            assert_abs_diff_eq!(mags[[2, m]], 0.8 * 2.0, epsilon = 1e-12);
            for k in 0..5 {
                let expect = 2.0 * TABLE5_AMPLITUDE_RATIOS[k];
                let sq = p.amps_a[[k, m]].powi(2) + p.amps_b[[k, m]].powi(2);
                assert_abs_diff_eq!(sq, expect * expect, epsilon = 1e-12);
            }
        }
        let q = simulate_table5_rfi(2.0, 8e9, 16, 8).unwrap();
        assert_ne!(p.amps_a, q.amps_a);
        assert_eq!(p.magnitudes().mapv(|v| (v * 1e9).round()), q.magnitudes().mapv(|v| (v * 1e9).round()));
        assert_eq!(p, simulate_table5_rfi(2.0, 8e9, 16, 7).unwrap());
    }

    #[test]
    fn rejects_out_of_range_frequency() {
        let bad = RfiParams::new(vec![PI], Array2::zeros((1, 1)), Array2::zeros((1, 1)), 1.0);
        assert!(bad.is_err());
        assert!(simulate_table5_rfi(1.0, 2e9, 4, 0).is_err());
    }
}
