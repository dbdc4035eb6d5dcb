//! Result types shared by every estimator.

use serde::Serialize;

use crate::global::GlobalFit;
use crate::gwr::GwrFit;
use crate::mixed::MxGwrFit;
use crate::multiscale::MsGwrFit;
use crate::scalar::Real;
use crate::stats::t_two_sided_p;

/// Estimate, standard error and pseudo t-test for one global coefficient.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientSummary<T> {
    pub term: String,
    pub estimate: T,
    pub std_error: T,
    pub t_value: T,
    pub p_value: T,
}

impl<T: Real> CoefficientSummary<T> {
    pub fn new(term: impl Into<String>, estimate: T, std_error: T, df: f64) -> Self {
        let (t_value, p_value) = t_test(estimate, std_error, df);
        Self {
            term: term.into(),
            estimate,
            std_error,
            t_value,
            p_value,
        }
    }

    pub fn significant(&self, alpha: T) -> bool {
        self.p_value < alpha
    }
}

pub(crate) fn t_test<T: Real>(estimate: T, se: T, df: f64) -> (T, T) {
    if se > T::zero() {
        let t = estimate / se;
        (t, t_two_sided_p(t, df))
    } else if estimate == T::zero() {
        (T::nan(), T::one())
    } else {
        // exact fit: infinitely precise nonzero estimate
        (T::infinity() * estimate.signum(), T::zero())
    }
}

/// Per-location estimates of one term.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientSurface<T> {
    pub term: String,
    pub estimate: Vec<T>,
    pub std_error: Vec<T>,
    pub t_value: Vec<T>,
    pub p_value: Vec<T>,
}

impl<T: Real> CoefficientSurface<T> {
    pub fn from_estimates(
        term: impl Into<String>,
        estimate: Vec<T>,
        std_error: Vec<T>,
        df: f64,
    ) -> Self {
        let (t_value, p_value) = estimate
            .iter()
            .zip(&std_error)
            .map(|(&b, &se)| t_test(b, se, df))
            .unzip();
        Self {
            term: term.into(),
            estimate,
            std_error,
            t_value,
            p_value,
        }
    }

    /// A global coefficient repeated at every location.
    pub fn constant(summary: &CoefficientSummary<T>, n: usize) -> Self {
        Self {
            term: summary.term.clone(),
            estimate: vec![summary.estimate; n],
            std_error: vec![summary.std_error; n],
            t_value: vec![summary.t_value; n],
            p_value: vec![summary.p_value; n],
        }
    }

    pub fn len(&self) -> usize {
        self.estimate.len()
    }

    pub fn is_empty(&self) -> bool {
        self.estimate.is_empty()
    }

    pub fn significant(&self, alpha: T) -> Vec<bool> {
        self.p_value.iter().map(|&p| p < alpha).collect()
    }
}

/// Any fitted model, for code that treats them uniformly (reports,
/// residual diagnostics, surface export).
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", content = "fit", rename_all = "snake_case")]
pub enum ModelFit<T: Real> {
    Global(GlobalFit<T>),
    Gwr(GwrFit<T>),
    Mixed(MxGwrFit<T>),
    Multiscale(MsGwrFit<T>),
}

impl<T: Real> ModelFit<T> {
    pub fn label(&self) -> &'static str {
        match self {
            ModelFit::Global(g) => g.model.label(),
            ModelFit::Gwr(_) => "GWR",
            ModelFit::Mixed(_) => "MX-GWR",
            ModelFit::Multiscale(_) => "MS-GWR",
        }
    }

    pub fn residuals(&self) -> &[T] {
        match self {
            ModelFit::Global(f) => &f.residuals,
            ModelFit::Gwr(f) => &f.residuals,
            ModelFit::Mixed(f) => &f.residuals,
            ModelFit::Multiscale(f) => &f.residuals,
        }
    }

    pub fn fitted(&self) -> &[T] {
        match self {
            ModelFit::Global(f) => &f.fitted,
            ModelFit::Gwr(f) => &f.fitted,
            ModelFit::Mixed(f) => &f.fitted,
            ModelFit::Multiscale(f) => &f.fitted,
        }
    }

    /// Residual variance estimate.
    pub fn sigma2(&self) -> T {
        match self {
            ModelFit::Global(f) => f.sigma2,
            ModelFit::Gwr(f) => f.sigma2,
            ModelFit::Mixed(f) => f.sigma2,
            ModelFit::Multiscale(f) => f.sigma2,
        }
    }

    pub fn aicc(&self) -> T {
        match self {
            ModelFit::Global(f) => f.aicc,
            ModelFit::Gwr(f) => f.aicc,
            ModelFit::Mixed(f) => f.aicc,
            ModelFit::Multiscale(f) => f.aicc,
        }
    }

    pub fn r_squared(&self) -> T {
        match self {
            ModelFit::Global(f) => f.r_squared,
            ModelFit::Gwr(f) => f.r_squared,
            ModelFit::Mixed(f) => f.r_squared,
            ModelFit::Multiscale(f) => f.r_squared,
        }
    }

    /// Diagonal of the hat matrix, when the estimator defines one.
    pub fn hat_diagonal(&self) -> Option<&[T]> {
        match self {
            ModelFit::Global(f) => f.hat_diagonal.as_deref(),
            ModelFit::Gwr(f) => Some(&f.hat_diagonal),
            ModelFit::Mixed(f) => Some(&f.hat_diagonal),
            ModelFit::Multiscale(f) => Some(&f.hat_diagonal),
        }
    }

    pub fn coords(&self) -> Option<&[[T; 2]]> {
        match self {
            ModelFit::Global(_) => None,
            ModelFit::Gwr(f) => Some(&f.coords),
            ModelFit::Mixed(f) => Some(&f.coords),
            ModelFit::Multiscale(f) => Some(&f.coords),
        }
    }

    /// Per-location coefficient surfaces for every term, in term order.
    /// Global fits have none. Global terms of a mixed fit appear as
    /// constant surfaces.
    pub fn surfaces(&self) -> Option<Vec<CoefficientSurface<T>>> {
        match self {
            ModelFit::Global(_) => None,
            ModelFit::Gwr(f) => Some(f.surfaces.clone()),
            ModelFit::Mixed(f) => Some(f.all_surfaces()),
            ModelFit::Multiscale(f) => Some(f.surfaces.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_se_conventions() {
        let s = CoefficientSummary::new("a", 2.0f64, 0.0, 10.0);
        assert!(s.t_value.is_infinite());
        assert_eq!(s.p_value, 0.0);
        let s = CoefficientSummary::new("a", 0.0f64, 0.0, 10.0);
        assert_eq!(s.p_value, 1.0);
    }
}
