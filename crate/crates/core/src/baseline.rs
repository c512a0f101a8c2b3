//! Digital-integration (DI) reconstruction: each row's count of `+1`
//! comparisons, mapped back through the threshold ramp.

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::signal::{SignedMatrix, ThresholdMatrix};

/// `s[n] = dh * sum_m (Y[n, m] + 1) / 2 - h - dh`.
pub fn digital_integration(y: &SignedMatrix, thresholds: &ThresholdMatrix) -> Result<Array1<f64>> {
    if y.dim() != thresholds.dim() {
        return Err(Error::shape(thresholds.dim(), y.dim()));
    }
    if y.m_slow() < 2 {
        return Err(Error::invalid("digital integration needs M >= 2"));
    }
    let dh = thresholds.step();
    let h = thresholds.h();
    Ok(y
        .data()
        .rows()
        .into_iter()
        .map(|row| {
            let count = row.iter().filter(|&&v| v == 1).count();
            dh * count as f64 - h - dh
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{broadcast_columns, sign_sample};
    use ndarray::Array2;
    use proptest::prelude::*;

    fn di_of(column: &[f64], h: f64, m: usize) -> Array1<f64> {
        let thr = ThresholdMatrix::new(h, column.len(), m).unwrap();
        let y = sign_sample(broadcast_columns(column, m).view(), &thr).unwrap();
        digital_integration(&y, &thr).unwrap()
    }

    #[test]
    fn hand_worked_five_level_cases() {
        assert_eq!(di_of(&[0.0], 400.0, 5).to_vec(), vec![0.0]);
        assert_eq!(di_of(&[250.0], 400.0, 5).to_vec(), vec![200.0]);
    }

    #[test]
    fn all_negative_rows_give_lowest_level() {
        let thr = ThresholdMatrix::new(400.0, 3, 5).unwrap();
        let y = SignedMatrix::new(Array2::from_elem((3, 5), -1)).unwrap();
        let s = digital_integration(&y, &thr).unwrap();
        assert!(s.iter().all(|&v| v == -600.0));
    }

    proptest! {
        #[test]
        fn quantization_error_is_at_most_one_step(
            s in prop::collection::vec(-400.0f64..=400.0, 1..40),
            m in 2usize..64,
        ) {
            let thr = ThresholdMatrix::new(400.0, s.len(), m).unwrap();
            let est = di_of(&s, 400.0, m);
            for (a, b) in est.iter().zip(&s) {
                prop_assert!((a - b).abs() <= thr.step());
            }
        }
    }
}
