//! `onebit`: simulation, estimation and recovery from the command line.
//!
//! Matrices are read and written as `OBM1` files; reports are CSV.
//! Exit codes: 2 usage, 3 I/O, 4 config, 5 dimension mismatch, 6 file format,
//! 7 solver failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ndarray::Array2;

use onebit_rfi::baseline::digital_integration;
use onebit_rfi::echo::EchoSolver;
use onebit_rfi::harness::{
    estimate_rfi, plot_csv, recover, reports_csv, run_pipeline, run_sweep, simulate, timings_csv, ExperimentConfig,
};
use onebit_rfi::obm;
use onebit_rfi::signal::{build_dictionary, make_pulse, sign_sample, ThresholdMatrix};
use onebit_rfi::Error;

#[derive(Parser)]
#[command(name = "onebit", version, about = "RFI estimation and echo recovery for one-bit radar data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat `key = value` experiment config; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct Levels {
    #[arg(long, allow_negative_numbers = true)]
    sinr_db: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    inr_db: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one acquisition and write every component.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        levels: Levels,
    },
    /// Write signed data, either simulated or from a real matrix `--input`.
    Sample {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        levels: Levels,
        /// Real `N x M` matrix to compare against the threshold ramp.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Digital-integration baseline from signed data.
    Di {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
    },
    /// RFI order selection and parameter estimation from signed data.
    RfiEst {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        kmax: Option<usize>,
    },
    /// Echo recovery from signed data and an RFI estimate.
    Recover {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        /// Estimated RFI (`N x M` real, threshold units); zero when omitted.
        #[arg(long)]
        rfi: Option<PathBuf>,
        /// Initial scale `1 / sigma`; `1 / h` when omitted.
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Full run on one seed: writes report.csv and timings.csv.
    Pipeline {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        levels: Levels,
        #[arg(long)]
        kmax: Option<usize>,
    },
    /// SINR x INR sweep: writes report.csv, timings.csv and plot.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated SINR list in dB.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        sinr_db: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        inr_db: Option<Vec<f64>>,
        #[arg(long)]
        kmax: Option<usize>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 3,
        Error::Config { .. } => 4,
        Error::ShapeMismatch { .. } => 5,
        Error::Format { .. } => 6,
        _ => 7,
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn apply_levels(cfg: &mut ExperimentConfig, levels: &Levels) {
    if levels.sinr_db.is_some() {
        cfg.sinr_db = levels.sinr_db;
    }
    if levels.inr_db.is_some() {
        cfg.inr_db = levels.inr_db;
    }
}

fn apply_kmax(cfg: &mut ExperimentConfig, kmax: Option<usize>) -> Result<(), Error> {
    if let Some(k) = kmax {
        cfg.k_max = k;
    }
    cfg.validate()
}

fn out_dir(common: &Common) -> Result<&Path, Error> {
    fs::create_dir_all(&common.out).map_err(|source| Error::Io {
        path: common.out.clone(),
        source,
    })?;
    Ok(&common.out)
}

fn write_text(path: PathBuf, text: &str) -> Result<(), Error> {
    fs::write(&path, text).map_err(|source| Error::Io { path, source })
}

fn column(v: &ndarray::Array1<f64>) -> Array2<f64> {
    v.clone().insert_axis(ndarray::Axis(1))
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate { common, levels } => {
            let mut cfg = load_config(&common)?;
            apply_levels(&mut cfg, &levels);
            let acq = simulate(&cfg, cfg.seed)?;
            let dir = out_dir(&common)?;
            obm::write_real(&dir.join("echo.obm"), &column(&acq.echo))?;
            let gamma = ndarray::Array1::from(acq.gamma.clone());
            obm::write_real(&dir.join("gamma.obm"), &column(&gamma))?;
            obm::write_real(&dir.join("rfi.obm"), &acq.rfi)?;
            if let Some(e) = &acq.noise {
                obm::write_real(&dir.join("noise.obm"), e)?;
            }
            obm::write_real(&dir.join("thresholds.obm"), &acq.thresholds.matrix())?;
            obm::write_signed(&dir.join("signed.obm"), &acq.signed)?;
            println!(
                "N={} M={} rfi_scale={} sinr_db={} inr_db={}",
                cfg.n,
                cfg.m,
                acq.rfi_scale,
                fmt_db(acq.sinr_db),
                fmt_db(acq.inr_db)
            );
        }
        Command::Sample { common, levels, input } => {
            let mut cfg = load_config(&common)?;
            apply_levels(&mut cfg, &levels);
            let signed = match input {
                Some(path) => {
                    let x = obm::read_real(&path)?;
                    let thr = ThresholdMatrix::new(cfg.h, x.nrows(), x.ncols())?;
                    sign_sample(x.view(), &thr)?
                }
                None => simulate(&cfg, cfg.seed)?.signed,
            };
            let dir = out_dir(&common)?;
            obm::write_signed(&dir.join("signed.obm"), &signed)?;
            println!("signed {} x {}", signed.n_fast(), signed.m_slow());
        }
        Command::Di { common, input } => {
            let cfg = load_config(&common)?;
            let y = obm::read_signed(&input)?;
            let thr = ThresholdMatrix::new(cfg.h, y.n_fast(), y.m_slow())?;
            let s = digital_integration(&y, &thr)?;
            obm::write_real(&out_dir(&common)?.join("di.obm"), &column(&s))?;
        }
        Command::RfiEst { common, input, kmax } => {
            let mut cfg = load_config(&common)?;
            apply_kmax(&mut cfg, kmax)?;
            let y = obm::read_signed(&input)?;
            let thr = ThresholdMatrix::new(cfg.h, y.n_fast(), y.m_slow())?;
            let est = estimate_rfi(&y, &thr, &cfg)?;
            let dir = out_dir(&common)?;
            obm::write_real(&dir.join("rfi_hat.obm"), &est.r_hat)?;
            let mut bic = String::from("k,nll_term,penalty,total\n");
            for s in &est.scores {
                bic.push_str(&format!("{},{},{},{}\n", s.k, s.nll_term, s.penalty, s.total));
            }
            write_text(dir.join("bic.csv"), &bic)?;
            let amps = onebit_rfi::mmrelax::mean_amplitudes(&est.params);
            let mut tones = String::from("k,omega,mean_amplitude\n");
            for (k, (w, a)) in est.params.freqs.iter().zip(amps.iter()).enumerate() {
                tones.push_str(&format!("{},{},{}\n", k + 1, w, a));
            }
            write_text(dir.join("rfi.csv"), &tones)?;
            println!("k_hat={} lambda={}", est.k_hat, est.params.lambda);
        }
        Command::Recover {
            common,
            input,
            rfi,
            lambda,
        } => {
            let cfg = load_config(&common)?;
            let y = obm::read_signed(&input)?;
            let thr = ThresholdMatrix::new(cfg.h, y.n_fast(), y.m_slow())?;
            let r_hat = match rfi {
                Some(p) => obm::read_real(&p)?,
                None => Array2::zeros(y.dim()),
            };
            if r_hat.dim() != y.dim() {
                return Err(Error::ShapeMismatch {
                    expected: y.dim(),
                    got: r_hat.dim(),
                });
            }
            let dict = build_dictionary(&make_pulse(cfg.fs, cfg.pulse_len, cfg.band)?, y.n_fast())?;
            let es = EchoSolver::new(&dict);
            let er = recover(&es, &y, &thr, &r_hat, lambda.unwrap_or(0.0), &cfg)?;
            obm::write_real(&out_dir(&common)?.join("echo_hat.obm"), &column(&er.s_hat))?;
            println!("lambda={} mm_steps={}", er.lambda, er.objective_trace.len().saturating_sub(1));
        }
        Command::Pipeline { common, levels, kmax } => {
            let mut cfg = load_config(&common)?;
            apply_levels(&mut cfg, &levels);
            apply_kmax(&mut cfg, kmax)?;
            let (report, timings) = run_pipeline(&cfg, cfg.seed)?;
            let dir = out_dir(&common)?;
            write_text(dir.join("report.csv"), &reports_csv([&report]))?;
            write_text(dir.join("timings.csv"), &timings_csv([(report.seed, &timings)]))?;
            println!(
                "k_hat={} nre_proposed_db={:.3} nre_di_db={:.3}",
                report.k_hat, report.nre_proposed_db, report.nre_di_db
            );
        }
        Command::Sweep {
            common,
            sinr_db,
            inr_db,
            kmax,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(v) = sinr_db {
                cfg.sweep_sinr_db = v;
            }
            if let Some(v) = inr_db {
                cfg.sweep_inr_db = v;
            }
            apply_kmax(&mut cfg, kmax)?;
            let rows = run_sweep(&cfg)?;
            let reports: Vec<_> = rows.iter().map(|(r, _)| r).collect();
            let dir = out_dir(&common)?;
            write_text(dir.join("report.csv"), &reports_csv(reports.iter().copied()))?;
            write_text(dir.join("timings.csv"), &timings_csv(rows.iter().map(|(r, t)| (r.seed, t))))?;
            let plot = plot_csv(reports.iter().copied());
            write_text(dir.join("plot.csv"), &plot)?;
            print!("{plot}");
        }
    }
    Ok(())
}

fn fmt_db(v: Option<f64>) -> String {
    v.map_or_else(|| "none".into(), |x| format!("{x:.3}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
