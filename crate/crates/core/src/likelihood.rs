//! One-bit Gaussian likelihood primitives.
//!
//! With `lambda = 1/sigma` and amplitudes divided by `sigma`, the negative
//! log-likelihood of a signed matrix is
//! `l = sum -log Phi(Y (R~ - lambda H))`, convex in the amplitudes and
//! `lambda` at fixed frequencies.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use ndarray::{Array2, ArrayView2, Zip};

use crate::error::{Error, Result};
use crate::signal::{rfi::sinusoid_matrix, RfiParams, SignedMatrix};

/// Crossover between the erfc branch and the asymptotic tail series.
const TAIL_SWITCH: f64 = -8.0;
/// Terms kept in the tail series `1 - 1/x^2 + 3/x^4 - ...`; four are not
/// enough for 1e-8 relative accuracy just past the crossover.
const TAIL_TERMS: usize = 12;
/// Beyond this magnitude the derivative correction is below f64 resolution.
pub const F_PRIME_CLAMP: f64 = 40.0;

fn log_phi_density(x: f64) -> f64 {
    -0.5 * x * x - 0.5 * (2.0 * PI).ln()
}

/// `sum_k (-1)^k (2k-1)!! / x^(2k)` for `k = 0..TAIL_TERMS`, so that
/// `Phi(x) = phi(x) / |x| * tail_series(x)` for `x << 0`.
fn tail_series(x: f64) -> f64 {
    let inv = 1.0 / (x * x);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..TAIL_TERMS {
        term *= -((2 * k - 1) as f64) * inv;
        sum += term;
    }
    sum
}

/// `log Phi(x)` for the standard normal CDF, accurate deep into the left tail.
pub fn log_phi(x: f64) -> f64 {
    if x >= 0.0 {
        (-0.5 * libm::erfc(x * FRAC_1_SQRT_2)).ln_1p()
    } else if x >= TAIL_SWITCH {
        (0.5 * libm::erfc(-x * FRAC_1_SQRT_2)).ln()
    } else {
        log_phi_density(x) - (-x).ln() + tail_series(x).ln()
    }
}

/// Derivative of `f(x) = -log Phi(x)`, i.e. `-phi(x) / Phi(x)`.
pub fn f_prime(x: f64) -> f64 {
    let x = x.clamp(-F_PRIME_CLAMP, F_PRIME_CLAMP);
    if x >= TAIL_SWITCH {
        -(log_phi_density(x) - log_phi(x)).exp()
    } else {
        x / tail_series(x)
    }
}

/// RFI parameters divided by `sigma`, together with `lambda = 1/sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledParams {
    pub freqs: Vec<f64>,
    /// `K x M` scaled in-phase amplitudes.
    pub amps_a: Array2<f64>,
    /// `K x M` scaled quadrature amplitudes.
    pub amps_b: Array2<f64>,
    pub lambda: f64,
}

impl ScaledParams {
    /// Model with no sinusoids.
    pub fn empty(m_slow: usize, lambda: f64) -> Self {
        Self {
            freqs: Vec::new(),
            amps_a: Array2::zeros((0, m_slow)),
            amps_b: Array2::zeros((0, m_slow)),
            lambda,
        }
    }

    pub fn from_rfi(p: &RfiParams) -> Self {
        Self {
            freqs: p.freqs.clone(),
            amps_a: &p.amps_a / p.sigma,
            amps_b: &p.amps_b / p.sigma,
            lambda: 1.0 / p.sigma,
        }
    }

    /// Undoes the scaling; needs `lambda > 0`.
    pub fn to_rfi(&self) -> Result<RfiParams> {
        if !(self.lambda > 0.0) {
            return Err(Error::ScaleUnidentifiable);
        }
        RfiParams::new(
            self.freqs.clone(),
            &self.amps_a / self.lambda,
            &self.amps_b / self.lambda,
            1.0 / self.lambda,
        )
    }

    pub fn n_sources(&self) -> usize {
        self.freqs.len()
    }

    pub fn m_slow(&self) -> usize {
        self.amps_a.ncols()
    }

    /// Scaled RFI matrix `R~` with `n_fast` rows.
    pub fn rfi_matrix(&self, n_fast: usize) -> Array2<f64> {
        sinusoid_matrix(&self.freqs, self.amps_a.view(), self.amps_b.view(), n_fast)
    }

    fn check(&self, y: &SignedMatrix, h: ArrayView2<f64>) -> Result<()> {
        if h.dim() != y.dim() {
            return Err(Error::shape(y.dim(), h.dim()));
        }
        if self.amps_a.dim() != (self.n_sources(), y.m_slow()) || self.amps_b.dim() != self.amps_a.dim() {
            return Err(Error::shape((self.n_sources(), y.m_slow()), self.amps_a.dim()));
        }
        Ok(())
    }
}

/// `l = sum -log Phi(Y (R~ - lambda H))` given the scaled RFI matrix directly.
pub fn nll_from_matrix(y: &SignedMatrix, h: ArrayView2<f64>, r_tilde: ArrayView2<f64>, lambda: f64) -> f64 {
    let mut total = 0.0;
    Zip::from(y.data()).and(h).and(r_tilde).for_each(|&s, &h, &r| {
        total -= log_phi(f64::from(s) * (r - lambda * h));
    });
    total
}

pub fn neg_log_likelihood(y: &SignedMatrix, h: ArrayView2<f64>, p: &ScaledParams) -> Result<f64> {
    p.check(y, h)?;
    let r = p.rfi_matrix(y.n_fast());
    Ok(nll_from_matrix(y, h, r.view(), p.lambda))
}

/// `Z~ = Y (X - f'(X))` with `X = Y (R~ - lambda H)`.
pub fn aux_from_matrix(y: &SignedMatrix, h: ArrayView2<f64>, r_tilde: ArrayView2<f64>, lambda: f64) -> Array2<f64> {
    let mut z = Array2::zeros(y.dim());
    Zip::from(&mut z)
        .and(y.data())
        .and(h)
        .and(r_tilde)
        .for_each(|z, &s, &h, &r| {
            let s = f64::from(s);
            let x = s * (r - lambda * h);
            *z = s * (x - f_prime(x));
        });
    z
}

pub fn majorizer_aux(y: &SignedMatrix, h: ArrayView2<f64>, p: &ScaledParams) -> Result<Array2<f64>> {
    p.check(y, h)?;
    let r = p.rfi_matrix(y.n_fast());
    Ok(aux_from_matrix(y, h, r.view(), p.lambda))
}

/// Quadratic part of the majorizer, `1/2 ||R~ - lambda H - Z~||^2`.
///
/// Since `f'' <= 1`, `l(p) <= surrogate(p) + c` with the constant fixed by
/// touching `l` at the point `Z~` was built from.
pub fn surrogate(h: ArrayView2<f64>, r_tilde: ArrayView2<f64>, lambda: f64, z: ArrayView2<f64>) -> f64 {
    let mut total = 0.0;
    Zip::from(h).and(r_tilde).and(z).for_each(|&h, &r, &z| {
        let d = r - lambda * h - z;
        total += d * d;
    });
    0.5 * total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{sign_sample, ThresholdMatrix};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use ndarray::{arr2, Array2};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // High-precision values from tests/oracles/normal_tail.py.
    const LOG_PHI_ORACLE: [(f64, f64); 16] = [
        (0.0, -0.693_147_180_559_945_309_4),
        (1.0, -0.172_753_779_023_449_889_5),
        (-1.0, -1.841_021_645_009_263_506),
        (3.0, -0.001_350_809_964_748_193_799),
        (-3.0, -6.607_726_221_510_349_543),
        (-5.0, -15.064_998_393_988_725_74),
        (-7.5, -31.075_890_902_890_001_24),
        (-8.0, -35.013_437_159_914_549_90),
        (-8.5, -39.197_396_428_217_669_29),
        (-10.0, -53.231_285_150_512_470_58),
        (-15.0, -116.131_384_845_711_695_2),
        (-20.0, -203.917_155_371_097_263_9),
        (-30.0, -454.321_243_956_343_197_1),
        (-40.0, -804.608_442_013_753_788_2),
        (5.0, -2.866_516_129_637_635_934e-7),
        (10.0, -7.619_853_024_160_526_066e-24),
    ];

    const F_PRIME_ORACLE: [(f64, f64); 9] = [
        (0.0, -0.797_884_560_802_865_355_9),
        (2.0, -0.055_247_862_678_989_959_10),
        (-2.0, -2.373_215_532_822_840_867),
        (-7.9, -8.022_817_246_208_780_618),
        (-8.1, -8.219_951_901_046_749_207),
        (-10.0, -10.098_093_233_962_511_96),
        (-25.0, -25.039_873_012_057_562_58),
        (-40.0, -40.024_968_847_207_263_72),
        (20.0, -5.520_948_362_159_763_190e-88),
    ];

    #[test]
    fn log_phi_matches_high_precision_values() {
        for (x, want) in LOG_PHI_ORACLE {
            let got = log_phi(x);
            if x >= -8.0 {
                assert_abs_diff_eq!(got, want, epsilon = 1e-12);
            }
            if x <= -8.0 || want.abs() < 1e-3 {
                assert_relative_eq!(got, want, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn log_phi_far_right_tail_is_tiny_but_negative() {
        let v = log_phi(10.0);
        assert!(v < 0.0 && v > -1e-20);
        assert!(log_phi(-40.0).is_finite());
    }

    #[test]
    fn complementary_identity_at_one() {
        let lhs = log_phi(-1.0);
        let rhs = (-log_phi(1.0).exp()).ln_1p();
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-13);
        assert_abs_diff_eq!(rhs, -1.841_021_645_009_263_506, epsilon = 1e-12);
    }

    #[test]
    fn f_prime_matches_high_precision_values() {
        for (x, want) in F_PRIME_ORACLE {
            assert_relative_eq!(f_prime(x), want, max_relative = 1e-9);
        }
        assert!(f_prime(20.0) < 0.0 && f_prime(20.0) > -1e-80);
        assert_eq!(f_prime(-1e6), f_prime(-40.0));
    }

    #[test]
    fn f_prime_is_increasing() {
        let mut prev = f_prime(-40.0);
        let mut x = -40.0;
        while x < 40.0 {
            x += 0.01;
            let v = f_prime(x);
            assert!(v >= prev, "f' decreased at {x}");
            prev = v;
        }
    }

    #[test]
    fn toy_likelihood_matches_oracle() {
        let y = SignedMatrix::new(arr2(&[[1], [-1]])).unwrap();
        let h = arr2(&[[-0.3], [0.5]]);
        let p = ScaledParams {
            freqs: vec![0.9],
            amps_a: arr2(&[[0.7]]),
            amps_b: arr2(&[[-0.4]]),
            lambda: 1.3,
        };
        let v = neg_log_likelihood(&y, h.view(), &p).unwrap();
        assert_abs_diff_eq!(v, 0.503_123_141_957_771_929_8, epsilon = 1e-10);
    }

    #[test]
    fn zero_parameters_give_log_two_per_entry() {
        let y = SignedMatrix::new(Array2::from_elem((4, 3), -1)).unwrap();
        let h = Array2::from_elem((4, 3), 7.0);
        let p = ScaledParams::empty(3, 0.0);
        let v = neg_log_likelihood(&y, h.view(), &p).unwrap();
        assert_abs_diff_eq!(v, 12.0 * 2f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn aux_at_zero_argument_and_far_tail() {
        let h = Array2::zeros((1, 2));
        let r = Array2::zeros((1, 2));
        let y = SignedMatrix::new(arr2(&[[1, -1]])).unwrap();
        let z = aux_from_matrix(&y, h.view(), r.view(), 0.0);
        assert_abs_diff_eq!(z[[0, 0]], 0.797_884_560_802_865_4, epsilon = 1e-12);
        assert_abs_diff_eq!(z[[0, 1]], -0.797_884_560_802_865_4, epsilon = 1e-12);

        let r = arr2(&[[30.0, -30.0]]);
        let z = aux_from_matrix(&y, h.view(), r.view(), 0.0);
        assert_eq!(z[[0, 0]], 30.0);
        assert_eq!(z[[0, 1]], -30.0);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let y = SignedMatrix::new(Array2::from_elem((2, 2), 1)).unwrap();
        let p = ScaledParams::empty(2, 1.0);
        assert!(neg_log_likelihood(&y, Array2::zeros((2, 3)).view(), &p).is_err());
    }

    fn random_params(rng: &mut ChaCha8Rng, k: usize, m: usize) -> ScaledParams {
        ScaledParams {
            freqs: (0..k).map(|_| rng.random_range(0.1..3.0)).collect(),
            amps_a: Array2::from_shape_fn((k, m), |_| rng.random_range(-3.0..3.0)),
            amps_b: Array2::from_shape_fn((k, m), |_| rng.random_range(-3.0..3.0)),
            lambda: rng.random_range(0.0..2.0),
        }
    }

    fn random_instance(seed: u64) -> (SignedMatrix, Array2<f64>, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let thr = ThresholdMatrix::new(2.0, 6, 4).unwrap();
        let s = Array2::from_shape_fn((6, 4), |_| rng.random_range(-3.0..3.0));
        let y = sign_sample(s.view(), &thr).unwrap();
        (y, thr.matrix(), rng)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn majorizer_bounds_likelihood_and_touches_it(seed in any::<u64>()) {
            let (y, h, mut rng) = random_instance(seed);
            let p0 = random_params(&mut rng, 2, 4);
            let mut p = random_params(&mut rng, 2, 4);
            p.freqs = p0.freqs.clone();
            let r0 = p0.rfi_matrix(6);
            let z = aux_from_matrix(&y, h.view(), r0.view(), p0.lambda);
            let l0 = nll_from_matrix(&y, h.view(), r0.view(), p0.lambda);
            let c = l0 - surrogate(h.view(), r0.view(), p0.lambda, z.view());
            let r = p.rfi_matrix(6);
            let g = surrogate(h.view(), r.view(), p.lambda, z.view()) + c;
            let l = nll_from_matrix(&y, h.view(), r.view(), p.lambda);
            prop_assert!(g >= l - 1e-9 * l.abs().max(1.0));
        }

        #[test]
        fn likelihood_is_midpoint_convex(seed in any::<u64>()) {
            let (y, h, mut rng) = random_instance(seed);
            let p = random_params(&mut rng, 1, 4);
            let mut q = random_params(&mut rng, 1, 4);
            q.freqs = p.freqs.clone();
            let mid = ScaledParams {
                freqs: p.freqs.clone(),
                amps_a: (&p.amps_a + &q.amps_a) / 2.0,
                amps_b: (&p.amps_b + &q.amps_b) / 2.0,
                lambda: (p.lambda + q.lambda) / 2.0,
            };
            let f = |x: &ScaledParams| neg_log_likelihood(&y, h.view(), x).unwrap();
            prop_assert!(f(&mid) <= 0.5 * (f(&p) + f(&q)) + 1e-10);
        }

        #[test]
        fn sigma_scaling_leaves_likelihood_unchanged(seed in any::<u64>(), c in 0.1f64..10.0) {
            let (y, h, mut rng) = random_instance(seed);
            let scaled = random_params(&mut rng, 2, 4);
            let mut scaled = scaled;
            scaled.lambda = scaled.lambda.max(0.05);
            let rfi = scaled.to_rfi().unwrap();
            let bigger = RfiParams::new(rfi.freqs.clone(), &rfi.amps_a * c, &rfi.amps_b * c, rfi.sigma * c).unwrap();
            let h_c = &h * c;
            let a = neg_log_likelihood(&y, h.view(), &ScaledParams::from_rfi(&rfi)).unwrap();
            let b = neg_log_likelihood(&y, h_c.view(), &ScaledParams::from_rfi(&bigger)).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }
}
