use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Band edges are taken where the magnitude spectrum drops 10 dB below its peak.
const BAND_DROP_DB: f64 = 10.0;
/// Allowed shortfall of the -10 dB band relative to the requested band.
const BAND_SLACK: f64 = 0.15;
const SPECTRUM_POINTS: usize = 2048;

/// Sampled transmit impulse; `center_index` is 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Pulse {
    pub samples: Vec<f64>,
    pub center_index: usize,
    /// Gaussian width in samples used to generate the pulse.
    pub width: f64,
}

impl Pulse {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// 0-based offset of the center sample.
    pub fn center(&self) -> usize {
        self.center_index - 1
    }
}

fn gaussian_derivative(len: usize, width: f64) -> Vec<f64> {
    let c = (len / 2) as f64;
    let raw: Vec<f64> = (0..len)
        .map(|i| {
            let t = i as f64 - c;
            -t * (-t * t / (2.0 * width * width)).exp()
        })
        .collect();
    let peak = raw.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    raw.into_iter().map(|v| v / peak).collect()
}

/// DTFT basis on `SPECTRUM_POINTS` frequencies spanning `[0, fs/2]`.
struct SpectrumBasis {
    freqs: Vec<f64>,
    cos: Vec<f64>,
    sin: Vec<f64>,
    len: usize,
}

impl SpectrumBasis {
    fn new(len: usize, fs: f64) -> Self {
        let freqs: Vec<f64> = (0..SPECTRUM_POINTS)
            .map(|i| fs / 2.0 * i as f64 / (SPECTRUM_POINTS - 1) as f64)
            .collect();
        let mut cos = Vec::with_capacity(SPECTRUM_POINTS * len);
        let mut sin = Vec::with_capacity(SPECTRUM_POINTS * len);
        for f in &freqs {
            let w = 2.0 * PI * f / fs;
            for n in 0..len {
                let (s, c) = (w * n as f64).sin_cos();
                cos.push(c);
                sin.push(s);
            }
        }
        Self { freqs, cos, sin, len }
    }

    fn magnitudes(&self, samples: &[f64]) -> Vec<(f64, f64)> {
        self.freqs
            .iter()
            .enumerate()
            .map(|(i, &f)| {
                let c = &self.cos[i * self.len..(i + 1) * self.len];
                let s = &self.sin[i * self.len..(i + 1) * self.len];
                let re: f64 = samples.iter().zip(c).map(|(x, c)| x * c).sum();
                let im: f64 = samples.iter().zip(s).map(|(x, s)| x * s).sum();
                (f, re.hypot(im))
            })
            .collect()
    }
}

/// Peak frequency and the edges of the contiguous -10 dB band around it.
#[cfg(test)]
pub(crate) fn spectral_band(samples: &[f64], fs: f64) -> (f64, f64, f64) {
    band_from_basis(&SpectrumBasis::new(samples.len(), fs), samples)
}

fn band_from_basis(basis: &SpectrumBasis, samples: &[f64]) -> (f64, f64, f64) {
    let spec = basis.magnitudes(samples);
    let (ipk, &(fpk, mpk)) = spec
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("spectrum is non-empty");
    let floor = mpk * 10f64.powf(-BAND_DROP_DB / 20.0);
    let crossing = |i: usize, j: usize| {
        let (f0, m0) = spec[i];
        let (f1, m1) = spec[j];
        f0 + (floor - m0) * (f1 - f0) / (m1 - m0)
    };
    let mut lo = spec[0].0;
    for i in (1..=ipk).rev() {
        if spec[i - 1].1 < floor {
            lo = crossing(i - 1, i);
            break;
        }
    }
    let mut hi = spec[spec.len() - 1].0;
    for i in ipk..spec.len() - 1 {
        if spec[i + 1].1 < floor {
            hi = crossing(i, i + 1);
            break;
        }
    }
    (fpk, lo, hi)
}

/// First derivative of a Gaussian, `len` samples, with the width chosen by a
/// deterministic scan so that the -10 dB band is centred (in log frequency)
/// on `[f_lo, f_hi]` and covers it to within 15%.
pub fn make_pulse(fs: f64, len: usize, band: (f64, f64)) -> Result<Pulse> {
    let (f_lo, f_hi) = band;
    if len < 3 || len % 2 == 0 {
        return Err(Error::InfeasiblePulse(format!("length must be odd and >= 3, got {len}")));
    }
    if !(f_lo > 0.0 && f_hi > f_lo) {
        return Err(Error::InfeasiblePulse(format!("bad band [{f_lo}, {f_hi}]")));
    }
    if !(fs > 2.0 * f_hi) {
        return Err(Error::InfeasiblePulse(format!(
            "fs = {fs} Hz does not exceed twice the upper band edge {f_hi} Hz"
        )));
    }

    let basis = SpectrumBasis::new(len, fs);
    let mut best: Option<(f64, f64)> = None;
    let max_width = len as f64 / 2.0;
    let mut width = 0.3;
    while width <= max_width {
        let samples = gaussian_derivative(len, width);
        let (_, lo, hi) = band_from_basis(&basis, &samples);
        if lo > 0.0 {
            let margin = (f_lo / lo).ln().min((hi / f_hi).ln());
            if best.is_none_or(|(_, m)| margin > m) {
                best = Some((width, margin));
            }
        }
        width += 0.01;
    }

    let (width, _) = best.ok_or_else(|| Error::InfeasiblePulse("no admissible width".into()))?;
    let samples = gaussian_derivative(len, width);
    let (_, lo, hi) = band_from_basis(&basis, &samples);
    if lo > f_lo * (1.0 + BAND_SLACK) || hi < f_hi * (1.0 - BAND_SLACK) {
        return Err(Error::InfeasiblePulse(format!(
            "-10 dB band [{lo:.4e}, {hi:.4e}] Hz does not cover [{f_lo:.4e}, {f_hi:.4e}] Hz"
        )));
    }
    Ok(Pulse {
        samples,
        center_index: len / 2 + 1,
        width,
    })
}
