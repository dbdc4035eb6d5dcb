use serde::Serialize;

use crate::fit::ModelFit;
use crate::scalar::Real;

/// Absolute standardized residual above which an observation is flagged.
pub const OUTLIER_THRESHOLD: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StandardizedResiduals<T> {
    /// NaN where the observation was excluded.
    pub values: Vec<T>,
    /// Indices with `|r*| > 3`.
    pub outliers: Vec<usize>,
    /// Indices with leverage `s_ii >= 1`.
    pub excluded: Vec<usize>,
}

/// Internally studentized residuals `e_i / (sigma sqrt(1 - s_ii))`, or
/// `e_i / sigma` without leverages.
pub fn studentize<T: Real>(
    residuals: &[T],
    sigma: T,
    hat_diagonal: Option<&[T]>,
) -> StandardizedResiduals<T> {
    let mut excluded = Vec::new();
    let values: Vec<T> = residuals
        .iter()
        .enumerate()
        .map(|(i, &e)| match hat_diagonal {
            Some(h) if h[i] >= T::one() => {
                excluded.push(i);
                T::nan()
            }
            Some(h) => e / (sigma * (T::one() - h[i]).sqrt()),
            None => e / sigma,
        })
        .collect();
    if !excluded.is_empty() {
        log::warn!(
            "{} observation(s) with leverage >= 1 excluded from standardization",
            excluded.len()
        );
    }
    let limit = T::lit(OUTLIER_THRESHOLD);
    let outliers = values
        .iter()
        .enumerate()
        .filter(|(_, &r)| r.abs() > limit)
        .map(|(i, _)| i)
        .collect();
    StandardizedResiduals {
        values,
        outliers,
        excluded,
    }
}

pub fn standardized_residuals<T: Real>(fit: &ModelFit<T>) -> StandardizedResiduals<T> {
    studentize(fit.residuals(), fit.sigma2().sqrt(), fit.hat_diagonal())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_residuals_give_equal_scores() {
        let r = studentize(&[0.5; 10], 1.0, None);
        assert!(r.values.iter().all(|&v| v == 0.5));
        assert!(r.outliers.is_empty());
    }

    #[test]
    fn one_inflated_residual_is_flagged() {
        let mut e = vec![0.1, -0.2, 0.3, -0.1, 0.2, 0.0, -0.3, 0.1];
        e[4] = 10.0;
        let r = studentize(&e, 1.0, None);
        assert_eq!(r.outliers, vec![4]);
    }

    #[test]
    fn full_leverage_is_excluded() {
        let r = studentize(&[1.0, 2.0], 1.0, Some(&[0.5, 1.0]));
        assert_eq!(r.excluded, vec![1]);
        assert!((r.values[0] - 2f64.sqrt()).abs() < 1e-12);
        assert!(r.values[1].is_nan());
    }
}
