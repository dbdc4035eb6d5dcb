//! Fixed-coefficient models: ordinary least squares and the spatially
//! autocorrelated error model (exponential covariance, REML).

mod sam;

pub use sam::{fit_sam, reml_profile, NuggetMode, RemlEvaluation, SamOptions};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::dataset::SpatialDataset;
use crate::error::{Error, Result};
use crate::fit::CoefficientSummary;
use crate::formula::{Design, Formula};
use crate::gwr::aicc;
use crate::linalg::{dependent_columns, spd_inverse};
use crate::scalar::{mean, Real};
use crate::stats::f_upper_p;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GlobalModel {
    Ols,
    Sam,
}

impl GlobalModel {
    pub fn label(self) -> &'static str {
        match self {
            GlobalModel::Ols => "LINEAR",
            GlobalModel::Sam => "SAM",
        }
    }
}

/// Exponential covariance parameters of a SAM fit:
/// `Cov = sill * ((1 - nugget) * exp(-h / range) + nugget * I)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceParams<T> {
    pub sill: T,
    pub partial_sill: T,
    pub range: T,
    pub nugget_proportion: T,
    pub reml_loglik: T,
    pub ln_det_v: T,
    /// Covariance parameters counted in the AICc penalty.
    pub estimated_parameters: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct GlobalFit<T> {
    pub model: GlobalModel,
    pub response: String,
    pub coefficients: Vec<CoefficientSummary<T>>,
    pub residuals: Vec<T>,
    pub fitted: Vec<T>,
    pub rss: T,
    /// Residual variance (`rss / (n - p)` for OLS, the REML sill for SAM).
    pub sigma2: T,
    pub r_squared: T,
    pub adj_r_squared: T,
    pub aicc: T,
    pub n: usize,
    pub df_residual: usize,
    /// Overall F test of all slopes against an intercept-only model (OLS).
    pub f_statistic: Option<T>,
    pub f_p_value: Option<T>,
    pub hat_diagonal: Option<Vec<T>>,
    /// Residual sum of squares is zero: the response is reproduced exactly.
    pub degenerate: bool,
    pub covariance: Option<CovarianceParams<T>>,
}

impl<T: Real> GlobalFit<T> {
    pub fn coefficient(&self, term: &str) -> Option<&CoefficientSummary<T>> {
        self.coefficients.iter().find(|c| c.term == term)
    }

    pub fn estimates(&self) -> Vec<T> {
        self.coefficients.iter().map(|c| c.estimate).collect()
    }
}

pub(crate) fn collinearity_error<T: Real>(design: &Design<T>) -> Option<Error> {
    let dep = dependent_columns(&design.x);
    if dep.is_empty() {
        None
    } else {
        Some(Error::Collinearity {
            columns: dep.iter().map(|&j| design.terms[j].clone()).collect(),
        })
    }
}

pub(crate) fn total_ss<T: Real>(y: &[T]) -> T {
    let mu = mean(y);
    y.iter()
        .fold(T::zero(), |acc, &v| acc + (v - mu) * (v - mu))
}

/// Ordinary least squares with classical standard errors.
pub fn fit_ols<T: Real>(ds: &SpatialDataset<T>, formula: &Formula) -> Result<GlobalFit<T>> {
    let design = Design::new(ds, formula)?;
    ols_design(&design, &formula.response)
}

pub(crate) fn ols_design<T: Real>(design: &Design<T>, response: &str) -> Result<GlobalFit<T>> {
    if let Some(err) = collinearity_error(design) {
        return Err(err);
    }
    let (n, p) = (design.n(), design.p());
    let x = &design.x;
    let xtx = x.transpose() * x;
    let xtx_inv = spd_inverse(&xtx).ok_or_else(|| Error::Collinearity {
        columns: design.terms.clone(),
    })?;
    let beta = &xtx_inv * (x.transpose() * &design.y);
    let fitted = x * &beta;
    let residuals = &design.y - &fitted;
    let rss = residuals.norm_squared();
    let tss = total_ss(design.y.as_slice());
    let df = n - p;
    let degenerate = rss <= T::machine_epsilon() * T::from_usize_lossy(n) * tss.max(T::one());
    if degenerate {
        log::warn!("OLS fit is exact (RSS = {rss}); standard errors are degenerate");
    }
    let sigma2 = if degenerate {
        T::zero()
    } else {
        rss / T::from_usize_lossy(df)
    };

    let coefficients = (0..p)
        .map(|j| {
            let se = (xtx_inv[(j, j)] * sigma2).max(T::zero()).sqrt();
            CoefficientSummary::new(design.terms[j].clone(), beta[j], se, df as f64)
        })
        .collect();

    let hat_diagonal = (0..n)
        .map(|i| {
            let xi = x.row(i);
            (xi * &xtx_inv * xi.transpose())[(0, 0)]
        })
        .collect();

    let r_squared = if tss > T::zero() {
        T::one() - rss / tss
    } else {
        T::nan()
    };
    let nf = T::from_usize_lossy(n);
    let adj_r_squared =
        T::one() - (T::one() - r_squared) * (nf - T::one()) / T::from_usize_lossy(df);
    let (f_statistic, f_p_value) = if p > 1 {
        let f = ((tss - rss) / T::from_usize_lossy(p - 1)) / (rss / T::from_usize_lossy(df));
        (Some(f), Some(f_upper_p(f, (p - 1) as f64, df as f64)))
    } else {
        (None, None)
    };
    let aicc = if degenerate {
        -T::infinity()
    } else {
        aicc(rss, n, T::from_usize_lossy(p))?
    };

    Ok(GlobalFit {
        model: GlobalModel::Ols,
        response: response.to_string(),
        coefficients,
        residuals: residuals.as_slice().to_vec(),
        fitted: fitted.as_slice().to_vec(),
        rss,
        sigma2,
        r_squared,
        adj_r_squared,
        aicc,
        n,
        df_residual: df,
        f_statistic,
        f_p_value,
        hat_diagonal: Some(hat_diagonal),
        degenerate,
        covariance: None,
    })
}

/// `(X'X)^{-1}X'` for a full-rank design.
pub(crate) fn ols_projection<T: Real>(x: &DMatrix<T>) -> Option<DMatrix<T>> {
    let inv = spd_inverse(&(x.transpose() * x))?;
    Some(inv * x.transpose())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn toy(n: usize, seed: u64) -> SpatialDataset<f64> {
        // deterministic pseudo-random toy data
        let mut s = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        let mut next = || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let coords: Vec<[f64; 2]> = (0..n)
            .map(|i| [(i % 10) as f64 * 100.0, (i / 10) as f64 * 100.0])
            .collect();
        let a: Vec<f64> = (0..n).map(|_| next() * 4.0).collect();
        let b: Vec<f64> = (0..n).map(|_| next() * 2.0 + 3.0).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| 1.0 + 2.0 * a[i] - 0.5 * b[i] + next())
            .collect();
        SpatialDataset::builder()
            .coords(coords)
            .response("y", y)
            .predictor("a", a)
            .predictor("b", b)
            .build()
            .unwrap()
    }

    #[test]
    fn residuals_orthogonal_to_design() {
        let ds = toy(60, 3);
        let f = Formula::new("y", ["a", "b"]);
        let fit = fit_ols(&ds, &f).unwrap();
        let d = Design::new(&ds, &f).unwrap();
        let e = nalgebra::DVector::from_column_slice(&fit.residuals);
        let xte = d.x.transpose() * &e;
        assert!(xte.norm() < 1e-8 * d.x.norm() * e.norm());
        assert!((0.0..=1.0).contains(&fit.r_squared));
        for c in &fit.coefficients {
            assert!((0.0..=1.0).contains(&c.p_value));
        }
        let hat_sum: f64 = fit.hat_diagonal.as_ref().unwrap().iter().sum();
        assert!((hat_sum - 3.0).abs() < 1e-10);
    }

    #[test]
    fn aicc_uses_parameter_count() {
        let ds = toy(60, 4);
        let fit = fit_ols(&ds, &Formula::new("y", ["a", "b"])).unwrap();
        assert!((fit.aicc - aicc(fit.rss, 60, 3.0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn exact_fit_is_flagged() {
        let base = toy(30, 5);
        let y = base.variable("y").unwrap().to_vec();
        let ds = SpatialDataset::builder()
            .coords(base.coords().to_vec())
            .response("y", y.clone())
            .predictor("y_copy", y)
            .build()
            .unwrap();
        let fit = fit_ols(&ds, &Formula::new("y", ["y_copy"])).unwrap();
        assert!(fit.degenerate);
        assert!(fit.rss < 1e-20);
        assert!((fit.coefficients[1].estimate - 1.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_design_names_column() {
        let base = toy(30, 6);
        let a = base.variable("a").unwrap().to_vec();
        let ds = SpatialDataset::builder()
            .coords(base.coords().to_vec())
            .response("y", base.variable("y").unwrap().to_vec())
            .predictor("a", a.clone())
            .predictor("a2", a.iter().map(|v| 2.0 * v + 1.0).collect())
            .build()
            .unwrap();
        match fit_ols(&ds, &Formula::new("y", ["a", "a2"])) {
            Err(Error::Collinearity { columns }) => assert_eq!(columns, vec!["a2".to_string()]),
            other => panic!("expected collinearity error, got {other:?}"),
        }
    }

    #[test]
    fn recovers_exact_linear_relationship() {
        let base = toy(40, 7);
        let a = base.variable("a").unwrap();
        let b = base.variable("b").unwrap();
        let y: Vec<f64> = a
            .iter()
            .zip(b)
            .map(|(a, b)| 0.5 - 1.5 * a + 4.0 * b)
            .collect();
        let ds = SpatialDataset::builder()
            .coords(base.coords().to_vec())
            .response("y", y)
            .predictor("a", a.to_vec())
            .predictor("b", b.to_vec())
            .build()
            .unwrap();
        let fit = fit_ols(&ds, &Formula::new("y", ["a", "b"])).unwrap();
        for (got, want) in fit.estimates().iter().zip([0.5, -1.5, 4.0]) {
            assert!((got - want).abs() < 1e-8);
        }
    }

    proptest! {
        #[test]
        fn slopes_shift_invariant(seed in 0u64..500, shift in -50.0f64..50.0) {
            let ds = toy(40, seed);
            let f = Formula::new("y", ["a", "b"]);
            let base = fit_ols(&ds, &f).unwrap();
            let shifted_a: Vec<f64> = ds.variable("a").unwrap().iter().map(|v| v + shift).collect();
            let ds2 = ds.with_variable("a", shifted_a, crate::dataset::TransformRecord::Center { variable: "a".into(), mean: -shift }).unwrap();
            let moved = fit_ols(&ds2, &f).unwrap();
            for k in 1..3 {
                prop_assert!((base.coefficients[k].estimate - moved.coefficients[k].estimate).abs() < 1e-10);
            }
        }
    }
}
