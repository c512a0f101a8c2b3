use ndarray::{Array1, Array2};

use super::Pulse;
use crate::error::{Error, Result};

/// `N x N` shift dictionary: column `j` holds the pulse with its center
/// sample on row `j`, truncated at the borders.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    pub matrix: Array2<f64>,
    pub pulse: Pulse,
}

impl Dictionary {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    /// Echo `D gamma`.
    pub fn synthesize(&self, gamma: &[f64]) -> Array1<f64> {
        self.matrix.dot(&Array1::from(gamma.to_vec()))
    }

    /// Range of columns whose pulse copy is not truncated.
    pub fn interior(&self) -> std::ops::Range<usize> {
        let c = self.pulse.center();
        let tail = self.pulse.len() - 1 - c;
        c..self.n() - tail
    }
}

pub fn build_dictionary(pulse: &Pulse, n: usize) -> Result<Dictionary> {
    let p = pulse.len();
    if n < p {
        return Err(Error::invalid(format!("dictionary size {n} is shorter than the pulse ({p})")));
    }
    let c = pulse.center() as isize;
    let mut matrix = Array2::zeros((n, n));
    for j in 0..n as isize {
        for (i, &v) in pulse.samples.iter().enumerate() {
            let row = j + i as isize - c;
            if (0..n as isize).contains(&row) {
                matrix[[row as usize, j as usize]] = v;
            }
        }
    }
    Ok(Dictionary {
        matrix,
        pulse: pulse.clone(),
    })
}
