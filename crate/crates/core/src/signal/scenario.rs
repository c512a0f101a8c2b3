use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{broadcast_columns, sign_sample, synthesize_rfi, RfiParams, SignedMatrix, ThresholdMatrix};
use crate::error::{Error, Result};

/// Identity of the generator behind every random draw, for run metadata.
pub const RNG_NAME: &str = "ChaCha20Rng";

/// RNG stream reserved for additive noise.
pub(crate) const NOISE_STREAM: u64 = 2;

/// Echo plus optional RFI and white Gaussian noise.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub echo: Vec<f64>,
    pub rfi: Option<RfiParams>,
    pub noise_std: f64,
    pub seed: u64,
}

/// Every component of one simulated acquisition.
#[derive(Debug, Clone)]
pub struct ScenarioSample {
    pub echo: Array2<f64>,
    pub rfi: Array2<f64>,
    pub noise: Array2<f64>,
    pub signed: SignedMatrix,
}

impl ScenarioSample {
    /// `S + R + E`.
    pub fn total(&self) -> Array2<f64> {
        &self.echo + &self.rfi + &self.noise
    }
}

impl Scenario {
    pub fn n_fast(&self) -> usize {
        self.echo.len()
    }

    /// Noise matrix drawn row-major from the scenario's noise stream.
    pub fn noise(&self, m_slow: usize) -> Result<Array2<f64>> {
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::invalid(format!("noise std must be >= 0, got {}", self.noise_std)));
        }
        let n = self.n_fast();
        if self.noise_std == 0.0 {
            return Ok(Array2::zeros((n, m_slow)));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(NOISE_STREAM);
        let mut out = Array2::zeros((n, m_slow));
        for v in out.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = self.noise_std * z;
        }
        Ok(out)
    }

    /// Builds S, R and E and takes one-bit comparisons against `thresholds`.
    pub fn sample(&self, thresholds: &ThresholdMatrix) -> Result<ScenarioSample> {
        let (n, m) = thresholds.dim();
        if self.n_fast() != n {
            return Err(Error::shape((n, m), (self.n_fast(), m)));
        }
        let echo = broadcast_columns(&self.echo, m);
        let rfi = match &self.rfi {
            Some(p) => synthesize_rfi(p, n, m)?,
            None => Array2::zeros((n, m)),
        };
        let noise = self.noise(m)?;
        let total = &echo + &rfi + &noise;
        let signed = sign_sample(total.view(), thresholds)?;
        Ok(ScenarioSample {
            echo,
            rfi,
            noise,
            signed,
        })
    }
}
