//! Mixed (semiparametric) GWR: some coefficients held constant over space,
//! the rest estimated locally at one shared bandwidth.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{DistanceMatrix, SpatialDataset};
use crate::error::{Error, Result};
use crate::fit::{CoefficientSummary, CoefficientSurface};
use crate::formula::{is_intercept, Design, Formula, INTERCEPT};
use crate::global::total_ss;
use crate::gwr::{aicc, local_projection};
use crate::kernel::{weights_for_location, KernelSpec};
use crate::linalg::{dependent_columns, spd_inverse};
use crate::scalar::{ordered_sum, Real};
use crate::stats::pseudo_t_df;

#[derive(Debug, Clone, Serialize)]
pub struct MxGwrFit<T: Real> {
    pub spec: KernelSpec<T>,
    pub response: String,
    /// All terms in formula order.
    pub terms: Vec<String>,
    pub global_terms: Vec<String>,
    pub local_terms: Vec<String>,
    pub global: Vec<CoefficientSummary<T>>,
    pub local_surfaces: Vec<CoefficientSurface<T>>,
    pub fitted: Vec<T>,
    pub residuals: Vec<T>,
    pub hat_diagonal: Vec<T>,
    pub rss: T,
    pub tr_s: T,
    pub tr_sts: T,
    pub enp: T,
    pub df: f64,
    pub sigma2: T,
    pub aicc: T,
    pub r_squared: T,
    pub n: usize,
    pub coords: Vec<[T; 2]>,
}

impl<T: Real> MxGwrFit<T> {
    pub fn global_coefficient(&self, term: &str) -> Option<&CoefficientSummary<T>> {
        self.global.iter().find(|c| c.term == term)
    }

    pub fn surface(&self, term: &str) -> Option<&CoefficientSurface<T>> {
        self.local_surfaces.iter().find(|s| s.term == term)
    }

    /// Surfaces for every term in formula order; global terms are constant.
    pub fn all_surfaces(&self) -> Vec<CoefficientSurface<T>> {
        self.terms
            .iter()
            .map(|t| match self.surface(t) {
                Some(s) => s.clone(),
                None => {
                    let c = self.global_coefficient(t).expect("term is global or local");
                    CoefficientSurface::constant(c, self.n)
                }
            })
            .collect()
    }
}

fn canonical(name: &str) -> &str {
    if is_intercept(name) {
        INTERCEPT
    } else {
        name
    }
}

/// Splits design columns into (global, local) index sets. Terms named in
/// neither list are local; the intercept may be named in either.
fn partition(
    terms: &[String],
    global_vars: &[String],
    local_vars: &[String],
) -> Result<(Vec<usize>, Vec<usize>)> {
    for v in global_vars.iter().chain(local_vars) {
        if !terms.iter().any(|t| t == canonical(v)) {
            return Err(Error::UnknownVariable(v.clone()));
        }
    }
    if let Some(v) = global_vars
        .iter()
        .find(|g| local_vars.iter().any(|l| canonical(l) == canonical(g)))
    {
        return Err(Error::Contract(format!(
            "`{v}` is listed as both global and local"
        )));
    }
    let is_global = |t: &str| global_vars.iter().any(|g| canonical(g) == t);
    let (global, local): (Vec<usize>, Vec<usize>) =
        (0..terms.len()).partition(|&k| is_global(&terms[k]));
    Ok((global, local))
}

/// Fits a mixed GWR: `global_vars` get one coefficient each, every other
/// term (the intercept too, unless listed as global) varies over space at
/// bandwidth `spec`.
pub fn fit_mxgwr<T: Real>(
    ds: &SpatialDataset<T>,
    formula: &Formula,
    dm: &DistanceMatrix<T>,
    global_vars: &[String],
    local_vars: &[String],
    spec: &KernelSpec<T>,
) -> Result<MxGwrFit<T>> {
    let design = Design::new(ds, formula)?;
    let n = design.n();
    if dm.n() != n {
        return Err(Error::Contract(
            "distance matrix does not match the data".into(),
        ));
    }
    spec.bandwidth.validate(n)?;
    let (ga, lb) = partition(&design.terms, global_vars, local_vars)?;
    let xa = design.select(&ga).x;
    let xb = design.select(&lb).x;
    let y = &design.y;
    let (pa, pb) = (ga.len(), lb.len());

    // S_B, the GWR smoother of the local columns
    let mut sb = DMatrix::<T>::zeros(n, n);
    if pb > 0 {
        let rows: Vec<Result<Vec<T>>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let w = weights_for_location(i, dm, spec)?;
                let c = local_projection(i, &xb, &w)?;
                let xi = xb.row(i);
                Ok((0..n).map(|j| (xi * c.column(j))[(0, 0)]).collect())
            })
            .collect();
        let failing: Vec<usize> = rows
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.is_err().then_some(i))
            .collect();
        if !failing.is_empty() {
            return Err(Error::LocalSingularity { locations: failing });
        }
        for (i, row) in rows.into_iter().enumerate() {
            for (j, v) in row?.into_iter().enumerate() {
                sb[(i, j)] = v;
            }
        }
    }
    let resid_op = DMatrix::<T>::identity(n, n) - &sb;

    // global part: projection P with beta_A = P y
    let (beta_a, proj) = if pa > 0 {
        let xa_t = &resid_op * &xa;
        let dependent = dependent_columns(&xa_t);
        if !dependent.is_empty() {
            return Err(Error::Collinearity {
                columns: dependent
                    .iter()
                    .map(|&k| design.terms[ga[k]].clone())
                    .collect(),
            });
        }
        let inv = spd_inverse(&(xa_t.transpose() * &xa_t)).ok_or_else(|| Error::Collinearity {
            columns: ga.iter().map(|&k| design.terms[k].clone()).collect(),
        })?;
        let proj = inv * xa_t.transpose() * &resid_op;
        (&proj * y, Some((proj, xa_t)))
    } else {
        (DVector::zeros(0), None)
    };

    let mut hat = sb.clone();
    if let Some((proj, xa_t)) = &proj {
        hat += xa_t * proj;
    }
    let fitted = &hat * y;
    let residuals = y - &fitted;
    let rss = residuals.norm_squared();
    let hat_diagonal: Vec<T> = (0..n).map(|i| hat[(i, i)]).collect();
    let tr_s = ordered_sum(hat_diagonal.iter().copied());
    let tr_sts = ordered_sum(hat.iter().map(|&v| v * v));
    let enp = T::lit(2.0) * tr_s - tr_sts;
    let nf = T::from_usize_lossy(n);
    let sigma2 = rss / (nf - enp);
    let df = pseudo_t_df(n, enp);

    let global = match &proj {
        Some((proj, _)) => {
            let cov = proj * proj.transpose();
            (0..pa)
                .map(|a| {
                    let se = (cov[(a, a)] * sigma2).max(T::zero()).sqrt();
                    CoefficientSummary::new(design.terms[ga[a]].clone(), beta_a[a], se, df)
                })
                .collect()
        }
        None => Vec::new(),
    };

    let local_surfaces = if pb > 0 {
        let partial = match &proj {
            Some(_) => y - &xa * &beta_a,
            None => y.clone(),
        };
        let locals: Vec<(Vec<T>, Vec<T>)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let w = weights_for_location(i, dm, spec)?;
                let c = local_projection(i, &xb, &w)?;
                let beta = &c * &partial;
                // coefficient map as a function of y: C_i (I - X_A P)
                let d = match &proj {
                    Some((p, _)) => &c - (&c * &xa) * p,
                    None => c,
                };
                let var = (0..pb).map(|a| d.row(a).norm_squared()).collect();
                Ok((beta.as_slice().to_vec(), var))
            })
            .collect::<Result<Vec<_>>>()?;
        (0..pb)
            .map(|a| {
                let est = locals.iter().map(|(b, _)| b[a]).collect();
                let se = locals
                    .iter()
                    .map(|(_, v)| (v[a] * sigma2).max(T::zero()).sqrt())
                    .collect();
                CoefficientSurface::from_estimates(design.terms[lb[a]].clone(), est, se, df)
            })
            .collect()
    } else {
        Vec::new()
    };

    Ok(MxGwrFit {
        spec: *spec,
        response: formula.response.clone(),
        terms: design.terms.clone(),
        global_terms: ga.iter().map(|&k| design.terms[k].clone()).collect(),
        local_terms: lb.iter().map(|&k| design.terms[k].clone()).collect(),
        global,
        local_surfaces,
        fitted: fitted.as_slice().to_vec(),
        residuals: residuals.as_slice().to_vec(),
        hat_diagonal,
        rss,
        tr_s,
        tr_sts,
        enp,
        df,
        sigma2,
        aicc: aicc(rss, n, tr_s)?,
        r_squared: T::one() - rss / total_ss(y.as_slice()),
        n,
        coords: dm.coords().to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::global::fit_ols;
    use crate::gwr::fit_gwr;
    use crate::kernel::KernelType;

    fn toy() -> (SpatialDataset<f64>, Formula) {
        let ds = crate::global::tests::toy(60, 3);
        let f = Formula::new("y", ["a", "b"]);
        (ds, f)
    }

    #[test]
    fn all_global_is_ols() {
        let (ds, f) = toy();
        let dm = DistanceMatrix::new(&ds);
        let spec = KernelSpec::fixed(KernelType::Bisquare, 3.0);
        let all: Vec<String> = f.terms();
        let mx = fit_mxgwr(&ds, &f, &dm, &all, &[], &spec).unwrap();
        let ols = fit_ols(&ds, &f).unwrap();
        for (a, b) in mx.global.iter().zip(&ols.coefficients) {
            assert!((a.estimate - b.estimate).abs() < 1e-8);
            assert!((a.std_error - b.std_error).abs() < 1e-8);
            assert!((a.p_value - b.p_value).abs() < 1e-8);
        }
        assert!((mx.aicc - ols.aicc).abs() < 1e-8);
    }

    #[test]
    fn all_local_is_gwr() {
        let (ds, f) = toy();
        let dm = DistanceMatrix::new(&ds);
        let spec = KernelSpec::adaptive(KernelType::Bisquare, 30);
        let mx = fit_mxgwr(&ds, &f, &dm, &[], &[], &spec).unwrap();
        let g = fit_gwr(&ds, &f, &dm, &spec).unwrap();
        assert!((mx.aicc - g.aicc).abs() < 1e-8);
        for (a, b) in mx.local_surfaces.iter().zip(&g.surfaces) {
            for i in 0..ds.n() {
                assert!((a.estimate[i] - b.estimate[i]).abs() < 1e-8);
                assert!((a.std_error[i] - b.std_error[i]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn fitted_is_global_plus_local_parts() {
        let (ds, f) = toy();
        let dm = DistanceMatrix::new(&ds);
        let spec = KernelSpec::adaptive(KernelType::Bisquare, 25);
        let mx = fit_mxgwr(&ds, &f, &dm, &["b".to_string()], &[], &spec).unwrap();
        let b = mx.global_coefficient("b").unwrap().estimate;
        let xa = ds.variable("a").unwrap();
        let xb = ds.variable("b").unwrap();
        let s0 = mx.surface(INTERCEPT).unwrap();
        let s1 = mx.surface("a").unwrap();
        for i in 0..ds.n() {
            let v = s0.estimate[i] + s1.estimate[i] * xa[i] + b * xb[i];
            assert!((v - mx.fitted[i]).abs() < 1e-8);
        }
        assert_eq!(mx.all_surfaces().len(), 3);
    }

    #[test]
    fn unknown_and_overlapping_terms_are_rejected() {
        let (ds, f) = toy();
        let dm = DistanceMatrix::new(&ds);
        let spec = KernelSpec::fixed(KernelType::Bisquare, 3.0);
        assert!(matches!(
            fit_mxgwr(&ds, &f, &dm, &["zz".to_string()], &[], &spec),
            Err(Error::UnknownVariable(_))
        ));
        assert!(fit_mxgwr(&ds, &f, &dm, &["a".to_string()], &["a".to_string()], &spec).is_err());
    }
}
