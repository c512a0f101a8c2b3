//! Signal model for CTBV one-bit sampling: signed measurements, the
//! slow-time threshold ramp, RFI and echo generators, and evaluation metrics.
//!
//! Matrices are `N x M` with fast-time along rows and slow-time (PRI index)
//! along columns.

mod dictionary;
mod metrics;
mod pulse;
pub(crate) mod rfi;
mod scenario;

pub use dictionary::{build_dictionary, Dictionary};
pub use metrics::{inr_db, nre_db, sinr_db, Decibels};
pub use pulse::{make_pulse, Pulse};
pub use rfi::{
    simulate_table5_rfi, synthesize_rfi, RfiParams, TABLE5_AMPLITUDE_RATIOS, TABLE5_FREQUENCIES_HZ,
};
pub use scenario::{Scenario, ScenarioSample, RNG_NAME};

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// `N x M` matrix of one-bit comparisons, every entry `+1` or `-1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedMatrix {
    data: Array2<i8>,
}

impl SignedMatrix {
    pub fn new(data: Array2<i8>) -> Result<Self> {
        let (n, m) = data.dim();
        if n == 0 || m == 0 {
            return Err(Error::invalid("signed matrix must be at least 1x1"));
        }
        if data.iter().any(|&v| v != 1 && v != -1) {
            return Err(Error::invalid("signed matrix entries must be +1 or -1"));
        }
        Ok(Self { data })
    }

    pub fn n_fast(&self) -> usize {
        self.data.nrows()
    }

    pub fn m_slow(&self) -> usize {
        self.data.ncols()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.data.dim()
    }

    pub fn data(&self) -> &Array2<i8> {
        &self.data
    }

    pub fn into_inner(self) -> Array2<i8> {
        self.data
    }

    /// Entries as `f64` (`+1.0` / `-1.0`).
    pub fn to_f64(&self) -> Array2<f64> {
        self.data.mapv(f64::from)
    }

    /// Element-wise negation; still a valid signed matrix.
    pub fn negated(&self) -> Self {
        Self {
            data: self.data.mapv(|v| -v),
        }
    }

    /// True when every row is constant, i.e. no row ever crosses a threshold.
    pub fn is_low_information(&self) -> bool {
        self.data
            .rows()
            .into_iter()
            .all(|row| row.iter().all(|&v| v == row[0]))
    }
}

/// Threshold ramp `H[n, m] = -h + 2 (m - 1) h / (M - 1)`, constant along fast time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdMatrix {
    h: f64,
    n_fast: usize,
    m_slow: usize,
}

impl ThresholdMatrix {
    pub fn new(h: f64, n_fast: usize, m_slow: usize) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::invalid(format!("threshold half-range must be positive, got {h}")));
        }
        if n_fast == 0 {
            return Err(Error::invalid("threshold matrix needs N >= 1"));
        }
        if m_slow < 2 {
            return Err(Error::invalid("threshold ramp needs M >= 2"));
        }
        Ok(Self { h, n_fast, m_slow })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_fast(&self) -> usize {
        self.n_fast
    }

    pub fn m_slow(&self) -> usize {
        self.m_slow
    }

    pub fn dim(&self) -> (usize, usize) {
        (self.n_fast, self.m_slow)
    }

    /// Ramp step `2h / (M - 1)`.
    pub fn step(&self) -> f64 {
        2.0 * self.h / (self.m_slow - 1) as f64
    }

    /// Threshold applied during PRI `m` (0-based).
    pub fn level(&self, m: usize) -> f64 {
        -self.h + m as f64 * self.step()
    }

    pub fn levels(&self) -> Vec<f64> {
        (0..self.m_slow).map(|m| self.level(m)).collect()
    }

    pub fn matrix(&self) -> Array2<f64> {
        let levels = self.levels();
        Array2::from_shape_fn(self.dim(), |(_, m)| levels[m])
    }
}

/// `sign(x)` with `sign(0) = +1`.
#[inline]
pub fn sign(x: f64) -> i8 {
    if x >= 0.0 {
        1
    } else {
        -1
    }
}

/// One-bit comparison of `signal` against the threshold ramp.
pub fn sign_sample(signal: ArrayView2<f64>, thresholds: &ThresholdMatrix) -> Result<SignedMatrix> {
    if signal.dim() != thresholds.dim() {
        return Err(Error::shape(thresholds.dim(), signal.dim()));
    }
    let levels = thresholds.levels();
    let data = Array2::from_shape_fn(signal.dim(), |(n, m)| sign(signal[[n, m]] - levels[m]));
    Ok(SignedMatrix { data })
}

/// Column `m` of an `N x M` matrix built from a fast-time vector, repeated over slow time.
pub fn broadcast_columns(column: &[f64], m_slow: usize) -> Array2<f64> {
    Array2::from_shape_fn((column.len(), m_slow), |(n, _)| column[n])
}
