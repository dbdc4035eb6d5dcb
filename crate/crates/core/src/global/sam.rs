//! Spatially autocorrelated error model fitted by restricted maximum
//! likelihood.
//!
//! The error covariance is `sigma2 * V(range, nugget)` with
//! `V = (1 - nugget) * exp(-H / range) + nugget * I`. `beta` and `sigma2`
//! are profiled out, leaving a two-parameter search: a coarse grid over
//! log-range and nugget, refined by Nelder–Mead.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{collinearity_error, total_ss, CovarianceParams, GlobalFit, GlobalModel};
use crate::dataset::{DistanceMatrix, SpatialDataset};
use crate::error::{Error, Result};
use crate::fit::CoefficientSummary;
use crate::formula::{Design, Formula};
use crate::gwr::aicc;
use crate::linalg::spd_inverse;
use crate::optim::nelder_mead;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NuggetMode<T> {
    /// Estimate the nugget proportion in `[0, 1]`.
    Estimate,
    /// No nugget (`nugget = 0`).
    Off,
    /// Hold the nugget proportion at a given value.
    Fixed(T),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct SamOptions<T> {
    pub nugget: NuggetMode<T>,
    /// Search interval for the range; defaults to
    /// `[min positive distance, 2 * max distance]`.
    pub range_bounds: Option<(T, T)>,
    pub grid_ranges: usize,
    /// Relative change in the restricted log-likelihood at convergence.
    pub tolerance: T,
    pub max_iterations: usize,
}

impl<T: Real> Default for SamOptions<T> {
    fn default() -> Self {
        Self {
            nugget: NuggetMode::Estimate,
            range_bounds: None,
            grid_ranges: 16,
            tolerance: T::lit(1e-8),
            max_iterations: 400,
        }
    }
}

/// Restricted likelihood at one covariance parameter pair.
#[derive(Debug, Clone)]
pub struct RemlEvaluation<T: Real> {
    pub range: T,
    pub nugget: T,
    pub loglik: T,
    pub beta: DVector<T>,
    /// `(X'V^{-1}X)^{-1}`.
    pub gls_cov: DMatrix<T>,
    pub sigma2: T,
    /// Squared norm of the whitened residuals.
    pub whitened_rss: T,
    pub ln_det_v: T,
    pub jittered: bool,
}

fn correlation_matrix<T: Real>(dm: &DistanceMatrix<T>, range: T, nugget: T) -> DMatrix<T> {
    let n = dm.n();
    let one = T::one();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            one
        } else {
            (one - nugget) * (-dm.get(i, j) / range).exp()
        }
    })
}

/// Profiled restricted log-likelihood
/// `-1/2 [ln|V| + ln|X'V^{-1}X| + (n - p) ln sigma2_R]` and the GLS
/// quantities at that point.
pub fn reml_profile<T: Real>(
    design: &Design<T>,
    dm: &DistanceMatrix<T>,
    range: T,
    nugget: T,
) -> Result<RemlEvaluation<T>> {
    let (n, p) = (design.n(), design.p());
    let v = correlation_matrix(dm, range, nugget);
    let (chol, jittered) = match v.clone().cholesky() {
        Some(c) => (c, false),
        None => {
            let jitter = T::lit(1e-10);
            let mut vj = v;
            for i in 0..n {
                vj[(i, i)] += jitter;
            }
            let c = vj.cholesky().ok_or_else(|| {
                Error::Optimization(format!(
                    "covariance not positive definite at range {range}, nugget {nugget}"
                ))
            })?;
            log::warn!("jitter added to covariance at range {range}, nugget {nugget}");
            (c, true)
        }
    };
    let l = chol.l();
    let ln_det_v = (0..n).fold(T::zero(), |acc, i| acc + l[(i, i)].ln()) * T::lit(2.0);
    let z_x = l
        .solve_lower_triangular(&design.x)
        .ok_or_else(|| Error::Optimization("triangular solve failed".into()))?;
    let z_y = l
        .solve_lower_triangular(&design.y)
        .ok_or_else(|| Error::Optimization("triangular solve failed".into()))?;
    let g = z_x.transpose() * &z_x;
    let g_chol = g.clone().cholesky().ok_or_else(|| Error::Collinearity {
        columns: design.terms.clone(),
    })?;
    let ln_det_g = {
        let lg = g_chol.l();
        (0..p).fold(T::zero(), |acc, i| acc + lg[(i, i)].ln()) * T::lit(2.0)
    };
    let beta = g_chol.solve(&(z_x.transpose() * &z_y));
    let r = &z_y - &z_x * &beta;
    let whitened_rss = r.norm_squared();
    let df = T::from_usize_lossy(n - p);
    let sigma2 = whitened_rss / df;
    let loglik = -T::lit(0.5) * (ln_det_v + ln_det_g + df * sigma2.ln());
    let gls_cov = spd_inverse(&g).ok_or_else(|| Error::Collinearity {
        columns: design.terms.clone(),
    })?;
    Ok(RemlEvaluation {
        range,
        nugget,
        loglik,
        beta,
        gls_cov,
        sigma2,
        whitened_rss,
        ln_det_v,
        jittered,
    })
}

/// Fits the SAM. Reuses a precomputed distance matrix when given.
pub fn fit_sam<T: Real>(
    ds: &SpatialDataset<T>,
    formula: &Formula,
    dm: &DistanceMatrix<T>,
    options: &SamOptions<T>,
) -> Result<GlobalFit<T>> {
    let design = Design::new(ds, formula)?;
    if let Some(err) = collinearity_error(&design) {
        return Err(err);
    }
    let (n, p) = (design.n(), design.p());
    if n < p + 2 {
        return Err(Error::InsufficientData { n, m: formula.m() });
    }

    let (lo, hi) = options.range_bounds.unwrap_or_else(|| {
        let lo = dm.min_positive_distance();
        let lo = if lo.is_finite() { lo } else { T::one() };
        (lo, T::lit(2.0) * dm.max_pair_distance().max(lo))
    });
    if !(lo > T::zero() && hi > lo) {
        return Err(Error::Contract(format!(
            "invalid range bounds [{lo}, {hi}]"
        )));
    }
    let (ln_lo, ln_hi) = (lo.ln(), hi.ln());
    let nuggets: Vec<T> = match options.nugget {
        NuggetMode::Estimate => (0..20).map(|k| T::lit(0.05 * k as f64)).collect(),
        NuggetMode::Off => vec![T::zero()],
        NuggetMode::Fixed(v) => {
            if !(v >= T::zero() && v <= T::one()) {
                return Err(Error::Contract(format!(
                    "nugget proportion {v} outside [0, 1]"
                )));
            }
            vec![v]
        }
    };
    let g = options.grid_ranges.max(2);
    let grid: Vec<(T, T)> = (0..g)
        .flat_map(|a| {
            let t = T::from_usize_lossy(a) / T::from_usize_lossy(g - 1);
            let range = (ln_lo + t * (ln_hi - ln_lo)).exp();
            nuggets.iter().map(move |&nu| (range, nu))
        })
        .collect();

    // grid cells are independent; collect preserves grid order
    let grid_values: Vec<Option<T>> = grid
        .par_iter()
        .map(|&(range, nu)| reml_profile(&design, dm, range, nu).ok().map(|e| e.loglik))
        .collect();
    let mut trace: Vec<(f64, f64, f64)> = grid
        .iter()
        .zip(&grid_values)
        .map(|(&(r, nu), v)| (r.as_f64(), nu.as_f64(), v.map_or(f64::NAN, |v| v.as_f64())))
        .collect();
    let (best_idx, _) = grid_values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .fold(None, |best: Option<(usize, T)>, (i, v)| match best {
            Some((_, bv)) if bv >= v => best,
            _ => Some((i, v)),
        })
        .ok_or_else(|| Error::NonConvergence {
            message: "restricted likelihood undefined on the whole grid".into(),
            trace: trace.clone(),
        })?;
    let (r0, nu0) = grid[best_idx];

    let estimate_nugget = matches!(options.nugget, NuggetMode::Estimate);
    let fixed_nugget = nu0;
    let clamp_params = |v: &[T]| -> (T, T) {
        let ln_r = v[0].max(ln_lo).min(ln_hi);
        let nu = if estimate_nugget {
            v[1].max(T::zero()).min(T::one())
        } else {
            fixed_nugget
        };
        (ln_r.exp(), nu)
    };
    let mut objective = |v: &[T]| -> T {
        let (range, nu) = clamp_params(v);
        let val = reml_profile(&design, dm, range, nu).map(|e| e.loglik);
        trace.push((
            range.as_f64(),
            nu.as_f64(),
            val.as_ref().map_or(f64::NAN, |v| v.as_f64()),
        ));
        match val {
            Ok(v) => -v,
            Err(_) => T::infinity(),
        }
    };
    let ln_step = (ln_hi - ln_lo) / T::from_usize_lossy(g - 1) * T::lit(0.5);
    let (x0, step) = if estimate_nugget {
        let nu_step = if nu0 > T::lit(0.5) {
            -T::lit(0.025)
        } else {
            T::lit(0.025)
        };
        (vec![r0.ln(), nu0], vec![ln_step, nu_step])
    } else {
        (vec![r0.ln()], vec![ln_step])
    };
    let nm = nelder_mead(
        &mut objective,
        &x0,
        &step,
        options.tolerance,
        options.max_iterations,
    );
    if !nm.converged {
        return Err(Error::NonConvergence {
            message: format!("no convergence after {} simplex iterations", nm.iterations),
            trace,
        });
    }
    let (range, nugget) = clamp_params(&nm.x);
    let evaluations = trace.len();
    let best = reml_profile(&design, dm, range, nugget)?;
    log::info!(
        "REML: range {range}, nugget {nugget}, loglik {} after {evaluations} evaluations",
        best.loglik
    );

    let beta = &best.beta;
    let fitted = &design.x * beta;
    let residuals = &design.y - &fitted;
    let rss = residuals.norm_squared();
    let df = n - p;
    let coefficients = (0..p)
        .map(|j| {
            let se = (best.gls_cov[(j, j)] * best.sigma2).max(T::zero()).sqrt();
            CoefficientSummary::new(design.terms[j].clone(), beta[j], se, df as f64)
        })
        .collect();
    let tss = total_ss(design.y.as_slice());
    let r_squared = T::one() - rss / tss;
    let adj_r_squared =
        T::one() - (T::one() - r_squared) * T::from_usize_lossy(n - 1) / T::from_usize_lossy(df);

    // AICc on the likelihood scale: the whitened residual variance scaled
    // by |V|^(1/n) plays the role of the residual variance.
    let covariance_parameters = if estimate_nugget { 2 } else { 1 };
    let effective_rss = best.whitened_rss * (best.ln_det_v / T::from_usize_lossy(n)).exp();
    let aicc_value = aicc(
        effective_rss,
        n,
        T::from_usize_lossy(p + covariance_parameters),
    )?;

    Ok(GlobalFit {
        model: GlobalModel::Sam,
        response: formula.response.clone(),
        coefficients,
        residuals: residuals.as_slice().to_vec(),
        fitted: fitted.as_slice().to_vec(),
        rss,
        sigma2: best.sigma2,
        r_squared,
        adj_r_squared,
        aicc: aicc_value,
        n,
        df_residual: df,
        f_statistic: None,
        f_p_value: None,
        hat_diagonal: None,
        degenerate: false,
        covariance: Some(CovarianceParams {
            sill: best.sigma2,
            partial_sill: best.sigma2 * (T::one() - nugget),
            range,
            nugget_proportion: nugget,
            reml_loglik: best.loglik,
            ln_det_v: best.ln_det_v,
            estimated_parameters: covariance_parameters,
            evaluations,
        }),
    })
}
