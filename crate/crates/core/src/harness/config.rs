//! Flat `key = value` experiment configuration. `#` starts a comment, keys
//! are applied in file order, so `preset = desk` followed by `m = 1024`
//! yields `M = 1024`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::echo::ErConfig;
use crate::error::{Error, Result};
use crate::freq_init::FiConfig;
use crate::mmrelax::MmConfig;
use crate::reference::ReferenceConfig;

/// Slow-time length of the `desk` preset.
pub const DESK_M: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub enum RfiMode {
    /// Five simulated tones with the tabulated frequencies and amplitude ratios.
    Table5,
    /// Measured record in an `OBM1` real matrix, cropped to `N x M`.
    File(PathBuf),
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    /// Frequency initialization, staged MM RELAX and BIC.
    Mm,
    /// Exact profile-likelihood grid search (small problems only).
    Reference,
}

/// One point scatterer: echo pulse centred on fast-time sample `position` (0-based).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    pub position: usize,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub m: usize,
    pub fs: f64,
    pub h: f64,
    pub pulse_len: usize,
    pub band: (f64, f64),
    pub targets: Vec<Target>,
    pub rfi: RfiMode,
    /// Largest simulated RFI amplitude, used when no SINR target is set.
    pub a1: f64,
    pub sinr_db: Option<f64>,
    /// Noise is scaled to this INR when set, otherwise `noise_std` is used as is.
    pub inr_db: Option<f64>,
    pub noise_std: f64,
    pub seed: u64,
    pub k_max: usize,
    pub estimator: Estimator,
    pub mm: MmConfig,
    pub fi: FiConfig,
    pub er: ErConfig,
    pub reference: ReferenceConfig,
    pub sweep_sinr_db: Vec<f64>,
    pub sweep_inr_db: Vec<f64>,
}

/// Six scatterers whose echo peaks sit just inside the default threshold
/// range `h = 400`, which is sized to the echo.
pub fn default_targets() -> Vec<Target> {
    [(80, 380.0), (150, -260.0), (220, 320.0), (300, 200.0), (370, -340.0), (440, 240.0)]
        .into_iter()
        .map(|(position, amplitude)| Target { position, amplitude })
        .collect()
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 512,
            m: 8192,
            fs: 8e9,
            h: 400.0,
            pulse_len: 21,
            band: (300e6, 1100e6),
            targets: default_targets(),
            rfi: RfiMode::Table5,
            a1: 50.0,
            sinr_db: Some(-35.0),
            inr_db: Some(10.0),
            noise_std: 0.0,
            seed: 1,
            k_max: 8,
            estimator: Estimator::Mm,
            mm: MmConfig::default(),
            fi: FiConfig::default(),
            er: ErConfig::default(),
            reference: ReferenceConfig::default(),
            sweep_sinr_db: vec![-30.0, -35.0, -40.0],
            sweep_inr_db: vec![0.0, 10.0],
        }
    }
}

fn parse_num<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config {
        line,
        msg: format!("`{key}`: cannot parse `{v}`"),
    })
}

fn parse_opt(line: usize, key: &str, v: &str) -> Result<Option<f64>> {
    if v.eq_ignore_ascii_case("none") {
        Ok(None)
    } else {
        parse_num(line, key, v).map(Some)
    }
}

fn parse_list(line: usize, key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|s| parse_num(line, key, s.trim())).collect()
}

fn parse_targets(line: usize, v: &str) -> Result<Vec<Target>> {
    if v.eq_ignore_ascii_case("none") {
        return Ok(Vec::new());
    }
    v.split(',')
        .map(|item| {
            let (p, a) = item.split_once(':').ok_or_else(|| Error::Config {
                line,
                msg: format!("target `{}` is not `position:amplitude`", item.trim()),
            })?;
            Ok(Target {
                position: parse_num(line, "targets", p.trim())?,
                amplitude: parse_num(line, "targets", a.trim())?,
            })
        })
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".into(), |x| x.to_string())
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Desk-scale defaults (`M = 512`).
    pub fn desk() -> Self {
        Self {
            m: DESK_M,
            ..Self::default()
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                msg: format!("expected `key = value`, got `{content}`"),
            })?;
            cfg.set(line, key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Applies one `key = value` pair; `line` is only used in error messages.
    pub fn set(&mut self, line: usize, key: &str, v: &str) -> Result<()> {
        match key {
            "preset" => match v {
                "desk" => self.m = DESK_M,
                "paper" | "full" => self.m = 8192,
                _ => {
                    return Err(Error::Config {
                        line,
                        msg: format!("unknown preset `{v}`"),
                    })
                }
            },
            "n" => self.n = parse_num(line, key, v)?,
            "m" => self.m = parse_num(line, key, v)?,
            "fs" => self.fs = parse_num(line, key, v)?,
            "h" => self.h = parse_num(line, key, v)?,
            "pulse_len" => self.pulse_len = parse_num(line, key, v)?,
            "band_lo" => self.band.0 = parse_num(line, key, v)?,
            "band_hi" => self.band.1 = parse_num(line, key, v)?,
            "targets" => self.targets = parse_targets(line, v)?,
            "rfi" => {
                self.rfi = match v {
                    "table5" => RfiMode::Table5,
                    "none" => RfiMode::None,
                    _ => match v.strip_prefix("file:") {
                        Some(p) => RfiMode::File(PathBuf::from(p.trim())),
                        None => {
                            return Err(Error::Config {
                                line,
                                msg: format!("rfi must be table5, none or file:PATH, got `{v}`"),
                            })
                        }
                    },
                }
            }
            "a1" => self.a1 = parse_num(line, key, v)?,
            "sinr_db" => self.sinr_db = parse_opt(line, key, v)?,
            "inr_db" => self.inr_db = parse_opt(line, key, v)?,
            "noise_std" => self.noise_std = parse_num(line, key, v)?,
            "seed" => self.seed = parse_num(line, key, v)?,
            "k_max" => self.k_max = parse_num(line, key, v)?,
            "estimator" => {
                self.estimator = match v {
                    "mm" => Estimator::Mm,
                    "reference" => Estimator::Reference,
                    _ => {
                        return Err(Error::Config {
                            line,
                            msg: format!("estimator must be mm or reference, got `{v}`"),
                        })
                    }
                }
            }
            "mm.t_m" => self.mm.t_m = parse_num(line, key, v)?,
            "mm.t_c" => self.mm.t_c = parse_num(line, key, v)?,
            "mm.tol_outer" => self.mm.tol_outer = parse_num(line, key, v)?,
            "mm.tol_inner" => self.mm.tol_inner = parse_num(line, key, v)?,
            "mm.pad_factor" => self.mm.pad_factor = parse_num(line, key, v)?,
            "fi.zeta1" => self.fi.zeta1 = parse_num(line, key, v)?,
            "fi.eps_abs" => self.fi.eps_abs = parse_num(line, key, v)?,
            "fi.eps_rel" => self.fi.eps_rel = parse_num(line, key, v)?,
            "fi.eps_lambda" => self.fi.eps_lambda = parse_num(line, key, v)?,
            "fi.admm_cap" => self.fi.admm_cap = parse_num(line, key, v)?,
            "fi.mm_cap" => self.fi.mm_cap = parse_num(line, key, v)?,
            "fi.mm_tol" => self.fi.mm_tol = parse_num(line, key, v)?,
            "fi.grid_size" => {
                self.fi.grid_size = if v.eq_ignore_ascii_case("n") || v.eq_ignore_ascii_case("none") {
                    None
                } else {
                    Some(parse_num(line, key, v)?)
                }
            }
            "fi.rho0" => self.fi.rho0 = parse_num(line, key, v)?,
            "er.zeta2" => self.er.zeta2 = parse_num(line, key, v)?,
            "er.eps_abs" => self.er.eps_abs = parse_num(line, key, v)?,
            "er.eps_rel" => self.er.eps_rel = parse_num(line, key, v)?,
            "er.eps_lambda" => self.er.eps_lambda = parse_num(line, key, v)?,
            "er.admm_cap" => self.er.admm_cap = parse_num(line, key, v)?,
            "er.mm_cap" => self.er.mm_cap = parse_num(line, key, v)?,
            "er.mm_tol" => self.er.mm_tol = parse_num(line, key, v)?,
            "er.rho0" => self.er.rho0 = parse_num(line, key, v)?,
            "reference.grid_size" => self.reference.grid_size = parse_num(line, key, v)?,
            "sweep.sinr_db" => self.sweep_sinr_db = parse_list(line, key, v)?,
            "sweep.inr_db" => self.sweep_inr_db = parse_list(line, key, v)?,
            _ => {
                return Err(Error::Config {
                    line,
                    msg: format!("unknown key `{key}`"),
                })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config { line: 0, msg });
        if self.n < self.pulse_len {
            return bad(format!("N = {} is shorter than the pulse ({})", self.n, self.pulse_len));
        }
        if self.m < 2 {
            return bad(format!("M must be >= 2, got {}", self.m));
        }
        if !(self.h > 0.0) || !(self.fs > 0.0) {
            return bad("h and fs must be positive".into());
        }
        if self.k_max == 0 {
            return bad("k_max must be >= 1".into());
        }
        if !(self.noise_std >= 0.0) || !(self.a1 >= 0.0) {
            return bad("a1 and noise_std must be >= 0".into());
        }
        if let Some(t) = self.targets.iter().find(|t| t.position >= self.n) {
            return bad(format!("target at {} lies outside N = {}", t.position, self.n));
        }
        self.mm.validate().map_err(|e| Error::Config { line: 0, msg: e.to_string() })?;
        self.fi.validate().map_err(|e| Error::Config { line: 0, msg: e.to_string() })?;
        self.er.validate().map_err(|e| Error::Config { line: 0, msg: e.to_string() })?;
        Ok(())
    }

    /// Full config as parseable text.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("n", self.n.to_string());
        kv("m", self.m.to_string());
        kv("fs", self.fs.to_string());
        kv("h", self.h.to_string());
        kv("pulse_len", self.pulse_len.to_string());
        kv("band_lo", self.band.0.to_string());
        kv("band_hi", self.band.1.to_string());
        let targets = if self.targets.is_empty() {
            "none".to_string()
        } else {
            self.targets
                .iter()
                .map(|t| format!("{}:{}", t.position, t.amplitude))
                .collect::<Vec<_>>()
                .join(",")
        };
        kv("targets", targets);
        kv(
            "rfi",
            match &self.rfi {
                RfiMode::Table5 => "table5".into(),
                RfiMode::None => "none".into(),
                RfiMode::File(p) => format!("file:{}", p.display()),
            },
        );
        kv("a1", self.a1.to_string());
        kv("sinr_db", fmt_opt(self.sinr_db));
        kv("inr_db", fmt_opt(self.inr_db));
        kv("noise_std", self.noise_std.to_string());
        kv("seed", self.seed.to_string());
        kv("k_max", self.k_max.to_string());
        kv(
            "estimator",
            match self.estimator {
                Estimator::Mm => "mm".into(),
                Estimator::Reference => "reference".into(),
            },
        );
        kv("mm.t_m", self.mm.t_m.to_string());
        kv("mm.t_c", self.mm.t_c.to_string());
        kv("mm.tol_outer", self.mm.tol_outer.to_string());
        kv("mm.tol_inner", self.mm.tol_inner.to_string());
        kv("mm.pad_factor", self.mm.pad_factor.to_string());
        kv("fi.zeta1", self.fi.zeta1.to_string());
        kv("fi.eps_abs", self.fi.eps_abs.to_string());
        kv("fi.eps_rel", self.fi.eps_rel.to_string());
        kv("fi.eps_lambda", self.fi.eps_lambda.to_string());
        kv("fi.admm_cap", self.fi.admm_cap.to_string());
        kv("fi.mm_cap", self.fi.mm_cap.to_string());
        kv("fi.mm_tol", self.fi.mm_tol.to_string());
        kv("fi.grid_size", self.fi.grid_size.map_or_else(|| "n".into(), |q| q.to_string()));
        kv("fi.rho0", self.fi.rho0.to_string());
        kv("er.zeta2", self.er.zeta2.to_string());
        kv("er.eps_abs", self.er.eps_abs.to_string());
        kv("er.eps_rel", self.er.eps_rel.to_string());
        kv("er.eps_lambda", self.er.eps_lambda.to_string());
        kv("er.admm_cap", self.er.admm_cap.to_string());
        kv("er.mm_cap", self.er.mm_cap.to_string());
        kv("er.mm_tol", self.er.mm_tol.to_string());
        kv("er.rho0", self.er.rho0.to_string());
        kv("reference.grid_size", self.reference.grid_size.to_string());
        kv("sweep.sinr_db", fmt_list(&self.sweep_sinr_db));
        kv("sweep.inr_db", fmt_list(&self.sweep_inr_db));
        s
    }
}
