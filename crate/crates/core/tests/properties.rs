//! Invariants and small Monte-Carlo checks that cut across modules.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{num_complex::Complex, FftPlanner};

use onebit_rfi::baseline::digital_integration;
use onebit_rfi::bic::{bic_penalty, bic_score};
use onebit_rfi::echo::{recover_echo, ErConfig};
use onebit_rfi::freq_init::{fast_freq_init, FiConfig};
use onebit_rfi::harness::{simulate, ExperimentConfig};
use onebit_rfi::likelihood::ScaledParams;
use onebit_rfi::mmrelax::{mean_amplitudes, mmrelax_full, MmConfig};
use onebit_rfi::signal::{broadcast_columns, sign_sample, synthesize_rfi, RfiParams, SignedMatrix, ThresholdMatrix};

fn gaussian(rng: &mut ChaCha8Rng, n: usize, m: usize, std: f64) -> Array2<f64> {
    Array2::from_shape_fn((n, m), |_| {
        let z: f64 = StandardNormal.sample(rng);
        std * z
    })
}

fn tones(rng: &mut ChaCha8Rng, freqs: &[f64], mags: &[f64], m: usize) -> RfiParams {
    let k = freqs.len();
    let phases = Array2::from_shape_fn((k, m), |_| rng.random_range(0.0..2.0 * PI));
    let scale = Array2::from_shape_fn((k, m), |(i, _)| mags[i]);
    RfiParams::new(
        freqs.to_vec(),
        &scale * &phases.mapv(f64::sin),
        &scale * &phases.mapv(f64::cos),
        1.0,
    )
    .unwrap()
}

fn signed_against_unit_ramp(x: &Array2<f64>) -> (SignedMatrix, Array2<f64>) {
    let thr = ThresholdMatrix::new(1.0, x.nrows(), x.ncols()).unwrap();
    (sign_sample(x.view(), &thr).unwrap(), thr.matrix())
}

fn angular_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rows_of_a_slow_time_constant_signal_are_non_increasing(
        column in prop::collection::vec(-3.0..3.0f64, 1..40),
        m in 2usize..24,
        h in 0.1..4.0f64,
    ) {
        let thr = ThresholdMatrix::new(h, column.len(), m).unwrap();
        let x = broadcast_columns(&column, m);
        let y = sign_sample(x.view(), &thr).unwrap();
        for row in y.data().rows() {
            prop_assert!(row.windows(2).into_iter().all(|p| p[1] <= p[0]));
        }
    }

    #[test]
    fn single_pri_tone_peaks_at_its_bin(n_pow in 5u32..9, bin_frac in 0.05..0.45f64, phase in 0.0..2.0 * PI) {
        let n = 1usize << n_pow;
        let bin = ((bin_frac * n as f64) as usize).max(1);
        let w = 2.0 * PI * bin as f64 / n as f64;
        let p = RfiParams::new(
            vec![w],
            Array2::from_elem((1, 1), phase.sin()),
            Array2::from_elem((1, 1), phase.cos()),
            1.0,
        )
        .unwrap();
        let r = synthesize_rfi(&p, n, 1).unwrap();
        let mut buf: Vec<Complex<f64>> = r.column(0).iter().map(|&v| Complex::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let peak = (0..=n / 2).max_by(|&a, &b| buf[a].norm().total_cmp(&buf[b].norm())).unwrap();
        prop_assert_eq!(peak, bin);
    }

    #[test]
    fn di_drops_by_one_step_per_extra_minus_one(
        seed in any::<u64>(),
        n in 1usize..20,
        m in 2usize..20,
        h in 0.5..5.0f64,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = Array2::from_shape_fn((n, m), |_| if rng.random_bool(0.5) { 1i8 } else { -1 });
        let thr = ThresholdMatrix::new(h, n, m).unwrap();
        let before = digital_integration(&SignedMatrix::new(data.clone()).unwrap(), &thr).unwrap();
        let row = rng.random_range(0..n);
        if let Some(j) = (0..m).find(|&j| data[(row, j)] == 1) {
            data[(row, j)] = -1;
            let after = digital_integration(&SignedMatrix::new(data).unwrap(), &thr).unwrap();
            for t in 0..n {
                let expected = if t == row { before[t] - thr.step() } else { before[t] };
                prop_assert!((after[t] - expected).abs() <= 1e-12 * h);
            }
        }
    }

    #[test]
    fn bic_penalty_is_linear_in_order(k in 0usize..20, n in 2usize..100_000, m in 1usize..10_000) {
        let unit = (3.0 + 2.0 * m as f64) * (n as f64).ln();
        let p = bic_penalty(k, n, m);
        prop_assert!((p - k as f64 * unit).abs() <= 1e-9 * p.abs().max(1.0));
        prop_assert!((bic_penalty(k + 1, n, m) - p - unit).abs() <= 1e-9 * unit);
    }
}

/// Frequency of grid row `q` when the grid has one row per fast-time sample.
fn grid_freq(q: usize, n: usize) -> f64 {
    q as f64 * PI / n as f64
}

#[test]
fn freq_init_returns_an_on_grid_tone_exactly() {
    let (n, m, sigma) = (64, 16, 0.05);
    // a^2 / 2 = 100 sigma^2 puts the tone at 20 dB INR.
    let amp = sigma * 200f64.sqrt();
    let mut hits = 0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let w = grid_freq(rng.random_range(4..60), n);
        let p = tones(&mut rng, &[w], &[amp], m);
        let x = synthesize_rfi(&p, n, m).unwrap() + gaussian(&mut rng, n, m, sigma);
        let (y, h) = signed_against_unit_ramp(&x);
        let fi = fast_freq_init(&y, h.view(), &FiConfig::default(), 1).unwrap();
        if fi.freqs[0] == w {
            hits += 1;
        }
    }
    assert!(hits >= 9, "{hits}/10 instances returned the tone's grid point");
}

#[test]
fn freq_init_ranks_the_stronger_of_two_tones_first() {
    let mut hits = 0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        let (n, m) = (64, 64);
        let w_strong = grid_freq(rng.random_range(8..28), n);
        let w_weak = grid_freq(rng.random_range(36..56), n);
        // Noise comparable to the tones dithers the sign nonlinearity, so its
        // harmonics stay below the weaker tone.
        let p = tones(&mut rng, &[w_weak, w_strong], &[0.2, 0.4], m);
        let x = synthesize_rfi(&p, n, m).unwrap() + gaussian(&mut rng, n, m, 0.2);
        let (y, h) = signed_against_unit_ramp(&x);
        let fi = fast_freq_init(&y, h.view(), &FiConfig::default(), 2).unwrap();
        if fi.freqs == [w_strong, w_weak] {
            hits += 1;
        }
    }
    assert!(hits >= 9, "{hits}/10 instances ranked the tones by power");
}

#[test]
fn freq_init_on_pure_noise_has_no_dominant_row() {
    let (n, m) = (64, 16);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let x = gaussian(&mut rng, n, m, 0.5);
    let (y, h) = signed_against_unit_ramp(&x);
    let fi = fast_freq_init(&y, h.view(), &FiConfig::default(), 3).unwrap();
    let mut norms = fi.row_l1.clone();
    norms.sort_by(f64::total_cmp);
    let median = norms[norms.len() / 2];
    let top = norms[norms.len() - 1];
    assert!(top < 3.0 * median.max(1e-12) || top < 1e-9, "top {top} median {median}");
}

#[test]
fn freq_init_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (n, m) = (64, 8);
    let p = tones(&mut rng, &[1.1], &[0.6], m);
    let x = synthesize_rfi(&p, n, m).unwrap() + gaussian(&mut rng, n, m, 0.1);
    let (y, h) = signed_against_unit_ramp(&x);
    let a = fast_freq_init(&y, h.view(), &FiConfig::default(), 2).unwrap();
    let b = fast_freq_init(&y, h.view(), &FiConfig::default(), 2).unwrap();
    assert_eq!(a.freqs, b.freqs);
    assert_eq!(a.a_tilde, b.a_tilde);
    assert_eq!(a.objective_trace, b.objective_trace);
}

#[test]
fn true_frequencies_score_better_than_perturbed_ones() {
    let mut wins = 0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let (n, m, sigma) = (128, 8, 0.2);
        let w = rng.random_range(0.5..2.5);
        let p = tones(&mut rng, &[w], &[0.6], m).with_sigma(sigma);
        let x = synthesize_rfi(&p, n, m).unwrap() + gaussian(&mut rng, n, m, sigma);
        let (y, h) = signed_against_unit_ramp(&x);
        let truth = ScaledParams::from_rfi(&p);
        let mut off = truth.clone();
        off.freqs[0] += 4.0 * PI / n as f64;
        let s_true = bic_score(&y, h.view(), &truth, 1).unwrap();
        let s_off = bic_score(&y, h.view(), &off, 1).unwrap();
        if s_true.total <= s_off.total {
            wins += 1;
        }
    }
    assert!(wins >= 9, "truth won on {wins}/10");
}

#[test]
fn mm_without_rfi_keeps_amplitudes_below_the_noise_level() {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(700 + seed);
        let (n, m, sigma) = (64, 8, 0.3);
        let x = gaussian(&mut rng, n, m, sigma);
        let (y, h) = signed_against_unit_ramp(&x);
        let w = rng.random_range(0.3..2.8);
        let st = mmrelax_full(&y, h.view(), 1, &[w], 1.0, &MmConfig::default()).unwrap();
        let amp = mean_amplitudes(&st.params)[0];
        assert!(amp < sigma, "seed {seed}: amplitude {amp} vs sigma {sigma}");
    }
}

#[test]
fn single_sinusoid_fit_picks_the_tone_with_more_mass() {
    let mut hits = 0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
        let (n, m) = (64, 8);
        let w_big = rng.random_range(0.5..1.3);
        let w_small = rng.random_range(1.8..2.6);
        let p = tones(&mut rng, &[w_big, w_small], &[0.7, 0.25], m);
        let x = synthesize_rfi(&p, n, m).unwrap() + gaussian(&mut rng, n, m, 0.1);
        let (y, h) = signed_against_unit_ramp(&x);
        let fi = fast_freq_init(&y, h.view(), &FiConfig::default(), 1).unwrap();
        let st = mmrelax_full(&y, h.view(), 1, &fi.freqs, fi.lambda, &MmConfig::default()).unwrap();
        if angular_gap(st.params.freqs[0], w_big) < angular_gap(st.params.freqs[0], w_small) {
            hits += 1;
        }
    }
    assert!(hits >= 9, "{hits}/10 fits chose the larger tone");
}

fn noise_lambda(cfg: &ExperimentConfig, noise: &Array2<f64>) -> f64 {
    let rms = (noise.iter().map(|v| v * v).sum::<f64>() / (cfg.n * cfg.m) as f64).sqrt();
    1.0 / rms
}

fn correlation(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    a.dot(b) / (a.dot(a).sqrt() * b.dot(b).sqrt())
}

#[test]
fn doubling_the_sparsity_weight_never_adds_atoms() {
    let cfg = ExperimentConfig {
        m: 32,
        sinr_db: Some(-30.0),
        ..ExperimentConfig::desk()
    };
    let acq = simulate(&cfg, 3).unwrap();
    let lambda = noise_lambda(&cfg, acq.noise.as_ref().unwrap());
    let h = acq.thresholds.matrix();
    let mut last = usize::MAX;
    for zeta2 in [0.01, 0.02, 0.04, 0.08, 0.16] {
        let er_cfg = ErConfig {
            zeta2,
            ..ErConfig::default()
        };
        let er = recover_echo(&acq.signed, h.view(), acq.rfi.view(), &acq.dictionary, &er_cfg, lambda).unwrap();
        let nnz = er.gamma_tilde.iter().filter(|v| **v != 0.0).count();
        assert!(nnz <= last, "zeta2 {zeta2}: {nnz} atoms after {last}");
        last = nnz;
    }
}

#[test]
fn recovery_with_exact_rfi_tracks_the_echo() {
    let cfg = ExperimentConfig {
        m: 1024,
        sinr_db: Some(-30.0),
        inr_db: Some(10.0),
        ..ExperimentConfig::desk()
    };
    let acq = simulate(&cfg, 5).unwrap();
    let lambda = noise_lambda(&cfg, acq.noise.as_ref().unwrap());
    let h = acq.thresholds.matrix();
    let er = recover_echo(&acq.signed, h.view(), acq.rfi.view(), &acq.dictionary, &cfg.er, lambda).unwrap();
    let last = er.admm.last().unwrap();
    assert!(
        last.residuals.r_pri <= last.residuals.eps_pri || last.iterations == cfg.er.admm_cap,
        "final ADMM run neither reached consensus nor its cap"
    );
    let corr = correlation(&acq.echo, &er.s_hat);
    assert!(corr > 0.95, "correlation {corr}");
}
