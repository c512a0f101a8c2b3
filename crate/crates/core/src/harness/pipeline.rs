//! simulate -> sample -> DI -> freq-init -> MM RELAX + BIC -> echo recovery -> metrics.

use std::time::Instant;

use ndarray::{Array1, Array2};

use super::config::{Estimator, ExperimentConfig, RfiMode};
use super::report::{RunReport, Timings};
use crate::baseline::digital_integration;
use crate::bic::{bic_score, select_order, BicScore};
use crate::echo::{recover_echo_with, EchoSolver, ErResult};
use crate::error::{Error, Result};
use crate::freq_init::{fast_freq_init, FiResult};
use crate::likelihood::ScaledParams;
use crate::mmrelax::fit_lambda_only;
use crate::obm::load_measured_rfi;
use crate::reference::grid_ml;
use crate::signal::{
    broadcast_columns, build_dictionary, inr_db, make_pulse, nre_db, sign_sample, simulate_table5_rfi, sinr_db,
    synthesize_rfi, Dictionary, Scenario, SignedMatrix, ThresholdMatrix,
};

/// Everything produced by one simulated acquisition.
#[derive(Debug, Clone)]
pub struct Acquisition {
    pub thresholds: ThresholdMatrix,
    pub dictionary: Dictionary,
    pub gamma: Vec<f64>,
    /// Fast-time echo `s = D gamma`.
    pub echo: Array1<f64>,
    pub rfi: Array2<f64>,
    /// Separate noise; `None` for measured RFI, which already contains it.
    pub noise: Option<Array2<f64>>,
    pub signed: SignedMatrix,
    /// Factor applied to the unit-scale RFI (the largest tone amplitude in
    /// table5 mode).
    pub rfi_scale: f64,
    pub sinr_db: Option<f64>,
    pub inr_db: Option<f64>,
}

/// Seed of sweep point `index`, derived from the base seed.
pub fn point_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn frob(x: &Array2<f64>) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Positive root of `|c P + e0 E|^2 = target^2`.
fn scale_for_norm(p: &Array2<f64>, e: &Array2<f64>, e0: f64, target: f64) -> Result<f64> {
    let pp = frob(p).powi(2);
    let pe: f64 = p.iter().zip(e.iter()).map(|(a, b)| a * b).sum::<f64>() * e0;
    let ee = (frob(e) * e0).powi(2);
    if pp == 0.0 {
        return Err(Error::invalid("cannot reach the SINR target with zero RFI"));
    }
    let disc = pe * pe - pp * (ee - target * target);
    let root = (-pe + disc.max(0.0).sqrt()) / pp;
    if disc < 0.0 || root <= 0.0 {
        return Err(Error::invalid("noise alone already exceeds the requested SINR"));
    }
    Ok(root)
}

/// Builds S, R, E and the signed matrix. SINR and INR targets are met in
/// closed form because both norms are linear in the RFI scale.
pub fn simulate(cfg: &ExperimentConfig, seed: u64) -> Result<Acquisition> {
    cfg.validate()?;
    let (n, m) = (cfg.n, cfg.m);
    let thresholds = ThresholdMatrix::new(cfg.h, n, m)?;
    let pulse = make_pulse(cfg.fs, cfg.pulse_len, cfg.band)?;
    let dictionary = build_dictionary(&pulse, n)?;
    let mut gamma = vec![0.0; n];
    for t in &cfg.targets {
        gamma[t.position] += t.amplitude;
    }
    let echo = dictionary.synthesize(&gamma);
    let s_mat = broadcast_columns(echo.as_slice().expect("contiguous"), m);
    let unit_noise = Scenario {
        echo: vec![0.0; n],
        rfi: None,
        noise_std: 1.0,
        seed,
    }
    .noise(m)?;

    let (rfi, noise, rfi_scale) = match &cfg.rfi {
        RfiMode::None => (Array2::zeros((n, m)), Some(&unit_noise * cfg.noise_std), 0.0),
        RfiMode::Table5 => {
            let unit = synthesize_rfi(&simulate_table5_rfi(1.0, cfg.fs, m, seed)?, n, m)?;
            // E = e0 E1 + c e1 E1: INR mode ties the noise to the RFI scale c.
            let (e0, e1) = match cfg.inr_db {
                Some(inr) => (0.0, frob(&unit) / frob(&unit_noise) / 10f64.powf(inr / 20.0)),
                None => (cfg.noise_std, 0.0),
            };
            let c = match cfg.sinr_db {
                Some(sinr) => {
                    let p = &unit + &(&unit_noise * e1);
                    scale_for_norm(&p, &unit_noise, e0, frob(&s_mat) / 10f64.powf(sinr / 20.0))?
                }
                None => cfg.a1,
            };
            (&unit * c, Some(&unit_noise * (e0 + c * e1)), c)
        }
        RfiMode::File(path) => {
            let raw = load_measured_rfi(path, Some((n, m)))?;
            let c = match cfg.sinr_db {
                Some(sinr) => {
                    scale_for_norm(&raw, &raw, 0.0, frob(&s_mat) / 10f64.powf(sinr / 20.0))?
                }
                None => 1.0,
            };
            (raw * c, None, c)
        }
    };

    let mut total = &s_mat + &rfi;
    if let Some(e) = &noise {
        total += e;
    }
    let signed = sign_sample(total.view(), &thresholds)?;
    let has_rfi = !matches!(cfg.rfi, RfiMode::None);
    let sinr = if has_rfi {
        Some(sinr_db(s_mat.view(), rfi.view(), noise.as_ref().map(|e| e.view()))?)
    } else {
        None
    };
    let inr = match (&noise, has_rfi) {
        (Some(e), true) if frob(e) > 0.0 => Some(inr_db(rfi.view(), e.view())?),
        _ => None,
    };
    Ok(Acquisition {
        thresholds,
        dictionary,
        gamma,
        echo,
        rfi,
        noise,
        signed,
        rfi_scale,
        sinr_db: sinr,
        inr_db: inr,
    })
}

#[derive(Debug, Clone)]
pub struct RfiEstimate {
    pub k_hat: usize,
    pub params: ScaledParams,
    /// Estimated RFI in the units of `H`.
    pub r_hat: Array2<f64>,
    pub scores: Vec<BicScore>,
    pub fi: Option<FiResult>,
    /// MM iterations summed over every candidate order.
    pub mm_iters: usize,
}

/// Estimates the RFI order and parameters from signed data.
pub fn estimate_rfi(y: &SignedMatrix, thr: &ThresholdMatrix, cfg: &ExperimentConfig) -> Result<RfiEstimate> {
    let h = thr.matrix();
    let n = y.n_fast();
    let (params, scores, fi, mm_iters) = match cfg.estimator {
        Estimator::Mm => {
            let fi = fast_freq_init(y, h.view(), &cfg.fi, cfg.k_max.min(cfg.fi.grid_size.unwrap_or(n) - 1))?;
            if fi.freqs.is_empty() {
                let zero = fit_lambda_only(y, h.view())?;
                let score = bic_score(y, h.view(), &zero.params, 0)?;
                (zero.params, vec![score], Some(fi), 0)
            } else {
                let sel = select_order(y, h.view(), cfg.k_max, &fi.freqs, fi.lambda, &cfg.mm)?;
                let iters = sel.fits.iter().map(|f| f.mm_iter).sum();
                (sel.params, sel.scores, Some(fi), iters)
            }
        }
        Estimator::Reference => {
            let mut best: Option<(ScaledParams, f64)> = None;
            let mut scores = Vec::new();
            for k in 0..=cfg.k_max {
                let fit = grid_ml(y, h.view(), k, &cfg.reference)?;
                let s = bic_score(y, h.view(), &fit.params, k)?;
                if best.as_ref().is_none_or(|(_, t)| s.total < *t) {
                    best = Some((fit.params, s.total));
                }
                scores.push(s);
            }
            (best.expect("k = 0 is always scored").0, scores, None, 0)
        }
    };
    let r_hat = if params.n_sources() > 0 && params.lambda > 0.0 {
        params.rfi_matrix(n) / params.lambda
    } else {
        Array2::zeros(y.dim())
    };
    Ok(RfiEstimate {
        k_hat: params.n_sources(),
        params,
        r_hat,
        scores,
        fi,
        mm_iters,
    })
}

/// Echo recovery against `R^`, starting from `lambda` (or `1/h` when the
/// RFI fit left it at zero).
pub fn recover(
    es: &EchoSolver,
    y: &SignedMatrix,
    thr: &ThresholdMatrix,
    r_hat: &Array2<f64>,
    lambda: f64,
    cfg: &ExperimentConfig,
) -> Result<ErResult> {
    let lambda_init = if lambda > 0.0 { lambda } else { 1.0 / thr.h() };
    recover_echo_with(es, y, thr.matrix().view(), r_hat.view(), &cfg.er, lambda_init)
}

/// Full run on one seed, returning the report and its stage timings.
pub fn run_pipeline(cfg: &ExperimentConfig, seed: u64) -> Result<(RunReport, Timings)> {
    let es = EchoSolver::new(&build_dictionary(&make_pulse(cfg.fs, cfg.pulse_len, cfg.band)?, cfg.n)?);
    run_pipeline_with(&es, cfg, seed)
}

pub fn run_pipeline_with(es: &EchoSolver, cfg: &ExperimentConfig, seed: u64) -> Result<(RunReport, Timings)> {
    let mut timings = Timings::default();
    let start = Instant::now();
    let acq = simulate(cfg, seed)?;
    timings.simulate = start.elapsed().as_secs_f64();

    let t = Instant::now();
    let s_di = digital_integration(&acq.signed, &acq.thresholds)?;
    timings.di = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let est = estimate_rfi(&acq.signed, &acq.thresholds, cfg)?;
    timings.rfi = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let er = recover(es, &acq.signed, &acq.thresholds, &est.r_hat, est.params.lambda, cfg)?;
    timings.recover = t.elapsed().as_secs_f64();
    timings.total = start.elapsed().as_secs_f64();

    let report = RunReport {
        seed,
        sinr_target_db: cfg.sinr_db.filter(|_| !matches!(cfg.rfi, RfiMode::None)),
        sinr_db: acq.sinr_db,
        inr_db: acq.inr_db,
        rfi_scale: acq.rfi_scale,
        k_hat: est.k_hat,
        omegas: est.params.freqs.clone(),
        lambda: est.params.lambda,
        nre_proposed_db: nre_db(acq.echo.view(), er.s_hat.view())?,
        nre_di_db: nre_db(acq.echo.view(), s_di.view())?,
        fi_admm_iters: est.fi.as_ref().map_or(0, |f| f.admm.iter().map(|a| a.iterations).sum()),
        fi_stalled: est.fi.as_ref().is_some_and(|f| f.stalled),
        mm_iters: est.mm_iters,
        er_lambda: er.lambda,
        er_mm_iters: er.objective_trace.len().saturating_sub(1),
        er_admm_iters: er.admm.iter().map(|a| a.iterations).sum(),
        er_stalled: er.stalled,
        er_degenerate: er.degenerate,
    };
    Ok((report, timings))
}

/// Runs every `(INR, SINR)` pair of the sweep lists, INR outermost.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<(RunReport, Timings)>> {
    let es = EchoSolver::new(&build_dictionary(&make_pulse(cfg.fs, cfg.pulse_len, cfg.band)?, cfg.n)?);
    let mut out = Vec::new();
    let mut index = 0;
    for &inr in &cfg.sweep_inr_db {
        for &sinr in &cfg.sweep_sinr_db {
            let point = ExperimentConfig {
                sinr_db: Some(sinr),
                inr_db: Some(inr),
                ..cfg.clone()
            };
            out.push(run_pipeline_with(&es, &point, point_seed(cfg.seed, index))?);
            index += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            n: 128,
            m: 32,
            targets: vec![super::super::config::Target { position: 40, amplitude: 300.0 }],
            k_max: 3,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn sinr_and_inr_targets_are_met() {
        for (sinr, inr) in [(-30.0, 10.0), (-40.0, 0.0), (-35.0, 20.0)] {
            let cfg = ExperimentConfig {
                sinr_db: Some(sinr),
                inr_db: Some(inr),
                ..small()
            };
            let acq = simulate(&cfg, 4).unwrap();
            assert_abs_diff_eq!(acq.sinr_db.unwrap(), sinr, epsilon = 1e-9);
            assert_abs_diff_eq!(acq.inr_db.unwrap(), inr, epsilon = 1e-9);
        }
        // Absolute noise level: the quadratic root still lands on the target.
        let cfg = ExperimentConfig {
            inr_db: None,
            noise_std: 3.0,
            ..small()
        };
        let acq = simulate(&cfg, 5).unwrap();
        assert_abs_diff_eq!(acq.sinr_db.unwrap(), -35.0, epsilon = 1e-9);
    }

    #[test]
    fn unreachable_sinr_is_an_error() {
        let cfg = ExperimentConfig {
            inr_db: None,
            noise_std: 1e4,
            sinr_db: Some(-10.0),
            ..small()
        };
        assert!(simulate(&cfg, 1).is_err());
    }

    #[test]
    fn rfi_free_run_has_no_rfi_and_a_clean_echo() {
        let cfg = ExperimentConfig {
            rfi: RfiMode::None,
            ..small()
        };
        let acq = simulate(&cfg, 1).unwrap();
        assert!(acq.rfi.iter().all(|&v| v == 0.0));
        assert!(acq.sinr_db.is_none());
        assert_eq!(acq.echo.len(), 128);
        assert_abs_diff_eq!(acq.echo[40], 0.0);
    }

    #[test]
    fn seeds_per_point_differ() {
        assert_eq!(point_seed(7, 0), 7);
        assert_ne!(point_seed(7, 1), point_seed(7, 2));
    }
}
