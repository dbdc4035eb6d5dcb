//! Standard GWR: one weighted least-squares fit per calibration location,
//! with hat-matrix bookkeeping for effective parameters and AICc.

mod bandwidth;

pub use bandwidth::{
    optimize_bandwidth, optimize_bandwidth_design, search_bounds, BandwidthCurve, Criterion,
    CurvePoint, SearchBounds,
};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{DistanceMatrix, SpatialDataset};
use crate::error::{Error, Result};
use crate::fit::CoefficientSurface;
use crate::formula::{Design, Formula};
use crate::global::total_ss;
use crate::kernel::{check_neighbourhood, weights_for_location, KernelSpec};
use crate::linalg::{spd_inverse, weighted_cross, weighted_gram};
use crate::scalar::{ordered_sum, Real};
use crate::stats::pseudo_t_df;

/// Above this many observations only the traces of the hat matrix are kept.
pub const HAT_MATERIALIZE_LIMIT: usize = 5_000;

/// Corrected Akaike information criterion
/// `2n ln(sigma) + n ln(2 pi) + n (n + trS) / (n - 2 - trS)` with
/// `sigma = sqrt(rss / n)`.
pub fn aicc<T: Real>(rss: T, n: usize, tr_s: T) -> Result<T> {
    let nf = T::from_usize_lossy(n);
    let denom = nf - T::lit(2.0) - tr_s;
    if !(denom > T::zero()) {
        return Err(Error::Saturated(denom.as_f64()));
    }
    let sigma = (rss / nf).sqrt();
    Ok(T::lit(2.0) * nf * sigma.ln() + nf * T::two_pi().ln() + nf * (nf + tr_s) / denom)
}

/// Local regression at one calibration location.
#[derive(Debug, Clone)]
pub struct LocalFit<T: Real> {
    pub beta: DVector<T>,
    /// Row `i` of the hat matrix: `x_i' (X'W_iX)^{-1} X'W_i`.
    pub hat_row: Vec<T>,
    /// `C_i C_i'` with `C_i = (X'W_iX)^{-1} X'W_i`; times sigma2 gives the
    /// coefficient covariance.
    pub coef_cov: DMatrix<T>,
}

/// `(X'WX)^{-1}`, failing with the location index on singularity.
fn local_inverse<T: Real>(i: usize, x: &DMatrix<T>, w: &[T]) -> Result<DMatrix<T>> {
    let g = weighted_gram(x, w);
    spd_inverse(&g).ok_or(Error::LocalSingularity { locations: vec![i] })
}

/// `C_i = (X'W_iX)^{-1} X'W_i` (p x n) at location `i`.
pub(crate) fn local_projection<T: Real>(i: usize, x: &DMatrix<T>, w: &[T]) -> Result<DMatrix<T>> {
    let (n, p) = (x.nrows(), x.ncols());
    check_neighbourhood(i, w, p + 1)?;
    let a_inv = local_inverse(i, x, w)?;
    let mut c = DMatrix::<T>::zeros(p, n);
    for j in 0..n {
        if w[j] == T::zero() {
            continue;
        }
        for a in 0..p {
            let mut s = T::zero();
            for b in 0..p {
                s += a_inv[(a, b)] * x[(j, b)];
            }
            c[(a, j)] = s * w[j];
        }
    }
    Ok(c)
}

pub(crate) fn local_fit_weights<T: Real>(
    i: usize,
    design: &Design<T>,
    w: &[T],
) -> Result<LocalFit<T>> {
    let x = &design.x;
    let (n, p) = (x.nrows(), x.ncols());
    let c = local_projection(i, x, w)?;
    let beta = &c * &design.y;
    let xi = x.row(i);
    let hat_row: Vec<T> = (0..n)
        .map(|j| {
            let mut s = T::zero();
            for a in 0..p {
                s += xi[a] * c[(a, j)];
            }
            s
        })
        .collect();
    let coef_cov = &c * c.transpose();
    Ok(LocalFit {
        beta,
        hat_row,
        coef_cov,
    })
}

/// Weighted least-squares fit at location `i`.
pub fn local_fit<T: Real>(
    i: usize,
    design: &Design<T>,
    dm: &DistanceMatrix<T>,
    spec: &KernelSpec<T>,
) -> Result<LocalFit<T>> {
    let w = weights_for_location(i, dm, spec)?;
    local_fit_weights(i, design, &w)
}

#[derive(Debug, Clone, Serialize)]
pub struct GwrFit<T: Real> {
    pub spec: KernelSpec<T>,
    pub response: String,
    pub terms: Vec<String>,
    pub surfaces: Vec<CoefficientSurface<T>>,
    pub fitted: Vec<T>,
    pub residuals: Vec<T>,
    pub hat_diagonal: Vec<T>,
    /// Full hat matrix, kept for n up to [`HAT_MATERIALIZE_LIMIT`].
    #[serde(skip)]
    pub hat: Option<DMatrix<T>>,
    pub tr_s: T,
    pub tr_sts: T,
    /// `2 tr(S) - tr(S'S)`.
    pub enp: T,
    pub df: f64,
    pub rss: T,
    pub sigma2: T,
    pub aicc: T,
    pub r_squared: T,
    pub n: usize,
    pub coords: Vec<[T; 2]>,
}

impl<T: Real> GwrFit<T> {
    pub fn surface(&self, term: &str) -> Option<&CoefficientSurface<T>> {
        self.surfaces.iter().find(|s| s.term == term)
    }

    /// Coefficient at location `i` for every term.
    pub fn coefficients_at(&self, i: usize) -> Vec<T> {
        self.surfaces.iter().map(|s| s.estimate[i]).collect()
    }
}

struct LocalOutput<T: Real> {
    beta: DVector<T>,
    fitted: T,
    hat_row: Option<Vec<T>>,
    hat_diag: T,
    row_sq: T,
    coef_var: Vec<T>,
}

/// Fits a standard GWR calibrated at every data point.
pub fn fit_gwr<T: Real>(
    ds: &SpatialDataset<T>,
    formula: &Formula,
    dm: &DistanceMatrix<T>,
    spec: &KernelSpec<T>,
) -> Result<GwrFit<T>> {
    let design = Design::new(ds, formula)?;
    gwr_design(&design, &formula.response, dm, spec)
}

pub(crate) fn gwr_design<T: Real>(
    design: &Design<T>,
    response: &str,
    dm: &DistanceMatrix<T>,
    spec: &KernelSpec<T>,
) -> Result<GwrFit<T>> {
    let n = design.n();
    let p = design.p();
    if dm.n() != n {
        return Err(Error::Contract(
            "distance matrix does not match the data".into(),
        ));
    }
    spec.bandwidth.validate(n)?;
    let keep_hat = n <= HAT_MATERIALIZE_LIMIT;

    let outputs: Vec<Result<LocalOutput<T>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let lf = local_fit(i, design, dm, spec)?;
            let xi = design.x.row(i);
            let fitted = (xi * &lf.beta)[(0, 0)];
            let row_sq = ordered_sum(lf.hat_row.iter().map(|&s| s * s));
            Ok(LocalOutput {
                fitted,
                hat_diag: lf.hat_row[i],
                row_sq,
                coef_var: (0..p).map(|a| lf.coef_cov[(a, a)]).collect(),
                hat_row: keep_hat.then_some(lf.hat_row),
                beta: lf.beta,
            })
        })
        .collect();

    let failing: Vec<usize> = outputs
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_err())
        .map(|(i, _)| i)
        .collect();
    if !failing.is_empty() {
        if failing.len() == 1 {
            if let Some(Err(e)) = outputs.into_iter().nth(failing[0]) {
                return Err(e);
            }
        }
        return Err(Error::LocalSingularity { locations: failing });
    }
    let outputs: Vec<LocalOutput<T>> = outputs.into_iter().map(|r| r.expect("checked")).collect();

    let fitted: Vec<T> = outputs.iter().map(|o| o.fitted).collect();
    let residuals: Vec<T> = design.y.iter().zip(&fitted).map(|(&y, &f)| y - f).collect();
    let rss = ordered_sum(residuals.iter().map(|&e| e * e));
    let hat_diagonal: Vec<T> = outputs.iter().map(|o| o.hat_diag).collect();
    let tr_s = ordered_sum(hat_diagonal.iter().copied());
    let tr_sts = ordered_sum(outputs.iter().map(|o| o.row_sq));
    let enp = T::lit(2.0) * tr_s - tr_sts;
    let nf = T::from_usize_lossy(n);
    let sigma2 = rss / (nf - enp);
    let df = pseudo_t_df(n, enp);
    let aicc_value = aicc(rss, n, tr_s)?;
    let tss = total_ss(design.y.as_slice());

    let surfaces = (0..p)
        .map(|a| {
            let est: Vec<T> = outputs.iter().map(|o| o.beta[a]).collect();
            let se: Vec<T> = outputs
                .iter()
                .map(|o| (o.coef_var[a] * sigma2).max(T::zero()).sqrt())
                .collect();
            CoefficientSurface::from_estimates(design.terms[a].clone(), est, se, df)
        })
        .collect();

    let hat = keep_hat.then(|| {
        let mut h = DMatrix::<T>::zeros(n, n);
        for (i, o) in outputs.iter().enumerate() {
            if let Some(row) = &o.hat_row {
                for (j, &v) in row.iter().enumerate() {
                    h[(i, j)] = v;
                }
            }
        }
        h
    });

    Ok(GwrFit {
        spec: *spec,
        response: response.to_string(),
        terms: design.terms.clone(),
        surfaces,
        fitted,
        residuals,
        hat_diagonal,
        hat,
        tr_s,
        tr_sts,
        enp,
        df,
        rss,
        sigma2,
        aicc: aicc_value,
        r_squared: T::one() - rss / tss,
        n,
        coords: dm.coords().to_vec(),
    })
}

/// Summary of one GWR calibration used by bandwidth searches.
#[derive(Debug, Clone, Copy)]
pub(crate) struct CriterionParts<T> {
    pub rss: T,
    pub tr_s: T,
    pub tr_sts: T,
}

/// RSS and hat traces for one bandwidth, without assembling surfaces.
pub(crate) fn criterion_parts<T: Real>(
    design: &Design<T>,
    dm: &DistanceMatrix<T>,
    spec: &KernelSpec<T>,
) -> Result<CriterionParts<T>> {
    let n = design.n();
    let p = design.p();
    spec.bandwidth.validate(n)?;
    let x = &design.x;
    let y = design.y.as_slice();
    let parts: Vec<Result<(T, T, T)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let w = weights_for_location(i, dm, spec)?;
            check_neighbourhood(i, &w, p + 1)?;
            let a_inv = local_inverse(i, x, &w)?;
            let beta = &a_inv * weighted_cross(x, &w, y);
            let xi = x.row(i).transpose();
            let fitted = xi.dot(&beta);
            // hat row: (A^{-1} x_i)' x_j w_j
            let v = &a_inv * &xi;
            let mut s_ii = T::zero();
            let mut row_sq = T::zero();
            for j in 0..n {
                if w[j] == T::zero() {
                    continue;
                }
                let s = x.row(j).transpose().dot(&v) * w[j];
                if j == i {
                    s_ii = s;
                }
                row_sq += s * s;
            }
            let e = y[i] - fitted;
            Ok((e * e, s_ii, row_sq))
        })
        .collect();
    let mut rss = T::zero();
    let mut tr_s = T::zero();
    let mut tr_sts = T::zero();
    let mut failing = Vec::new();
    for (i, part) in parts.into_iter().enumerate() {
        match part {
            Ok((e2, s, r)) => {
                rss += e2;
                tr_s += s;
                tr_sts += r;
            }
            Err(_) => failing.push(i),
        }
    }
    if !failing.is_empty() {
        return Err(Error::LocalSingularity { locations: failing });
    }
    Ok(CriterionParts { rss, tr_s, tr_sts })
}

/// Leave-one-out cross-validation score `sum_i (y_i - yhat_(i))^2`, where
/// the fit at `i` ignores observation `i`. Singular leave-one-out fits make
/// the score infinite.
pub fn cv_score<T: Real>(
    ds: &SpatialDataset<T>,
    formula: &Formula,
    dm: &DistanceMatrix<T>,
    spec: &KernelSpec<T>,
) -> Result<T> {
    let design = Design::new(ds, formula)?;
    cv_design(&design, dm, spec)
}

pub(crate) fn cv_design<T: Real>(
    design: &Design<T>,
    dm: &DistanceMatrix<T>,
    spec: &KernelSpec<T>,
) -> Result<T> {
    let n = design.n();
    let p = design.p();
    spec.bandwidth.validate(n)?;
    let x = &design.x;
    let y = design.y.as_slice();
    let terms: Vec<Option<T>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut w = weights_for_location(i, dm, spec).ok()?;
            w[i] = T::zero();
            if w.iter().filter(|&&v| v > T::zero()).count() < p {
                return None;
            }
            let inv = spd_inverse(&weighted_gram(x, &w))?;
            let b = inv * weighted_cross(x, &w, y);
            let e = y[i] - x.row(i).transpose().dot(&b);
            Some(e * e)
        })
        .collect();
    let singular = terms.iter().filter(|t| t.is_none()).count();
    if singular > 0 {
        log::warn!(
            "{singular} singular leave-one-out fit(s) at bandwidth {}; CV score is infinite",
            spec.bandwidth
        );
        return Ok(T::infinity());
    }
    Ok(ordered_sum(terms.into_iter().flatten()))
}
