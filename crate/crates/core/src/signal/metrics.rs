use ndarray::{ArrayView1, ArrayView2, Zip};

use crate::error::{Error, Result};

/// Level in dB; `-inf` marks an exactly zero numerator.
pub type Decibels = f64;

fn norm2(x: ArrayView2<f64>) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn ratio_db(num: f64, den: f64, what: &'static str) -> Result<Decibels> {
    if den == 0.0 {
        return Err(Error::ZeroDenominator(what));
    }
    Ok(20.0 * (num / den).log10())
}

/// `20 log10(||S|| / ||R + E||)`, or `||S|| / ||R||` when no separate noise
/// is available (measured RFI already contains it).
pub fn sinr_db(
    echo: ArrayView2<f64>,
    rfi: ArrayView2<f64>,
    noise: Option<ArrayView2<f64>>,
) -> Result<Decibels> {
    if rfi.dim() != echo.dim() {
        return Err(Error::shape(echo.dim(), rfi.dim()));
    }
    let den = match noise {
        Some(e) => {
            if e.dim() != rfi.dim() {
                return Err(Error::shape(rfi.dim(), e.dim()));
            }
            let mut acc = 0.0;
            Zip::from(&rfi).and(&e).for_each(|r, e| acc += (r + e) * (r + e));
            acc.sqrt()
        }
        None => norm2(rfi),
    };
    ratio_db(norm2(echo), den, "SINR")
}

/// `20 log10(||R|| / ||E||)`.
pub fn inr_db(rfi: ArrayView2<f64>, noise: ArrayView2<f64>) -> Result<Decibels> {
    if rfi.dim() != noise.dim() {
        return Err(Error::shape(rfi.dim(), noise.dim()));
    }
    ratio_db(norm2(rfi), norm2(noise), "INR")
}

/// Normalized recovery error `20 log10(||s - s_hat|| / ||s||)`.
pub fn nre_db(truth: ArrayView1<f64>, estimate: ArrayView1<f64>) -> Result<Decibels> {
    if truth.len() != estimate.len() {
        return Err(Error::shape((truth.len(), 1), (estimate.len(), 1)));
    }
    let err = truth
        .iter()
        .zip(estimate.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let norm = truth.iter().map(|v| v * v).sum::<f64>().sqrt();
    ratio_db(err, norm, "NRE")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{arr1, arr2, Array1};

    #[test]
    fn sinr_of_unit_echo_against_ten() {
        let s = arr2(&[[1.0]]);
        let r = arr2(&[[6.0]]);
        let e = arr2(&[[4.0]]);
        assert_abs_diff_eq!(sinr_db(s.view(), r.view(), Some(e.view())).unwrap(), -20.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sinr_db(s.view(), (&r + &e).view(), None).unwrap(), -20.0, epsilon = 1e-12);
    }

    #[test]
    fn nre_edge_cases() {
        let s = arr1(&[1.0, -2.0, 0.5]);
        assert_eq!(nre_db(s.view(), s.view()).unwrap(), f64::NEG_INFINITY);
        assert_eq!(format!("{}", nre_db(s.view(), s.view()).unwrap()), "-inf");
        assert_abs_diff_eq!(nre_db(s.view(), Array1::zeros(3).view()).unwrap(), 0.0, epsilon = 1e-12);
        assert!(matches!(
            nre_db(Array1::zeros(3).view(), s.view()),
            Err(Error::ZeroDenominator(_))
        ));
    }

    #[test]
    fn inr_rejects_zero_noise() {
        let r = arr2(&[[1.0, 2.0]]);
        assert!(inr_db(r.view(), arr2(&[[0.0, 0.0]]).view()).is_err());
        assert_abs_diff_eq!(inr_db(r.view(), r.view()).unwrap(), 0.0, epsilon = 1e-12);
    }
}
