//! Multiscale GWR: one bandwidth per term, estimated by backfitting.
//!
//! Each sweep refits every additive term `f_k = x_k * beta_k(u, v)` as a
//! univariate GWR of its partial residual. In the final calibration the
//! per-term coefficient operators `B_k` (with `beta_k = B_k y`) are tracked
//! alongside, giving the hat matrix `S = sum_k diag(x_k) B_k` for standard
//! errors and AICc.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{center, DistanceMatrix, SpatialDataset};
use crate::error::{Error, Result};
use crate::fit::CoefficientSurface;
use crate::formula::{Design, Formula};
use crate::global::{ols_design, total_ss};
use crate::gwr::{
    aicc, optimize_bandwidth_design, search_bounds, Criterion, HAT_MATERIALIZE_LIMIT,
};
use crate::kernel::{
    check_neighbourhood, weights_for_location, Bandwidth, BandwidthForm, KernelSpec, KernelType,
};
use crate::scalar::{ordered_sum, Real};
use crate::stats::pseudo_t_df;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MsGwrOptions {
    pub max_sweeps: usize,
    /// Convergence threshold on the relative change in RSS between sweeps.
    pub soc_tol: f64,
    /// Select bandwidths on centred predictors, then refit the raw data.
    pub center_for_bandwidths: bool,
}

impl Default for MsGwrOptions {
    fn default() -> Self {
        Self {
            max_sweeps: 100,
            soc_tol: 1e-5,
            center_for_bandwidths: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord<T> {
    pub sweep: usize,
    pub rss: T,
    /// `|RSS_prev - RSS| / RSS`.
    pub soc: T,
    pub bandwidths: Vec<T>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MsGwrFit<T: Real> {
    pub kernel: KernelType,
    pub form: BandwidthForm,
    pub response: String,
    pub terms: Vec<String>,
    pub bandwidths: Vec<Bandwidth<T>>,
    pub surfaces: Vec<CoefficientSurface<T>>,
    /// Additive components `f_k`, one per term.
    pub components: Vec<Vec<T>>,
    pub fitted: Vec<T>,
    pub residuals: Vec<T>,
    pub hat_diagonal: Vec<T>,
    /// `tr(R_k)` for each term.
    pub term_enp: Vec<T>,
    pub rss: T,
    pub tr_s: T,
    pub tr_sts: T,
    pub enp: T,
    pub df: f64,
    pub sigma2: T,
    pub aicc: T,
    pub r_squared: T,
    pub n: usize,
    pub max_pair_distance: T,
    pub coords: Vec<[T; 2]>,
    /// Sweeps of the bandwidth-selecting run (empty for preset bandwidths).
    pub selection_trace: Vec<SweepRecord<T>>,
    /// Sweeps of the final calibration.
    pub trace: Vec<SweepRecord<T>>,
    pub converged: bool,
    pub centered_for_bandwidths: bool,
}

impl<T: Real> MsGwrFit<T> {
    pub fn surface(&self, term: &str) -> Option<&CoefficientSurface<T>> {
        self.surfaces.iter().find(|s| s.term == term)
    }

    /// Bandwidth of each term relative to its maximum: `b / d_max` for
    /// fixed bandwidths, `N / n` for adaptive ones.
    pub fn bandwidth_ratios(&self) -> Vec<T> {
        self.bandwidths
            .iter()
            .map(|b| match b {
                Bandwidth::Fixed(d) => *d / self.max_pair_distance,
                Bandwidth::Adaptive(k) => T::from_usize_lossy(*k) / T::from_usize_lossy(self.n),
            })
            .collect()
    }
}

fn to_bandwidth<T: Real>(form: BandwidthForm, value: T) -> Bandwidth<T> {
    match form {
        BandwidthForm::Fixed => Bandwidth::Fixed(value),
        BandwidthForm::Adaptive => Bandwidth::Adaptive(value.as_f64().round() as usize),
    }
}

fn collect_rows<R: Send>(rows: Vec<Result<R>>) -> Result<Vec<R>> {
    let failing: Vec<usize> = rows
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.is_err().then_some(i))
        .collect();
    match failing.len() {
        0 => Ok(rows.into_iter().map(|r| r.expect("checked")).collect()),
        1 => Err(rows
            .into_iter()
            .nth(failing[0])
            .and_then(|r| r.err())
            .expect("checked")),
        _ => Err(Error::LocalSingularity { locations: failing }),
    }
}

/// Row `i` of the univariate smoother: `a_ij = w_ij x_j / sum_l w_il x_l^2`,
/// stored sparsely.
fn smoother_row<T: Real>(
    i: usize,
    x: &[T],
    dm: &DistanceMatrix<T>,
    spec: &KernelSpec<T>,
) -> Result<Vec<(u32, T)>> {
    let w = weights_for_location(i, dm, spec)?;
    check_neighbourhood(i, &w, 2)?;
    let denom = ordered_sum(w.iter().zip(x).map(|(&w, &x)| w * x * x));
    if !(denom > T::zero()) {
        return Err(Error::LocalSingularity { locations: vec![i] });
    }
    Ok(w.iter()
        .zip(x)
        .enumerate()
        .filter(|(_, (&w, _))| w > T::zero())
        .map(|(j, (&w, &x))| (j as u32, w * x / denom))
        .collect())
}

fn smoother_rows<T: Real>(
    x: &[T],
    dm: &DistanceMatrix<T>,
    spec: &KernelSpec<T>,
) -> Result<Vec<Vec<(u32, T)>>> {
    collect_rows(
        (0..x.len())
            .into_par_iter()
            .map(|i| smoother_row(i, x, dm, spec))
            .collect(),
    )
}

/// Coefficient surface of the univariate GWR of `eps` on `x`.
fn smooth_term<T: Real>(
    x: &[T],
    eps: &[T],
    dm: &DistanceMatrix<T>,
    spec: &KernelSpec<T>,
) -> Result<Vec<T>> {
    collect_rows(
        (0..x.len())
            .into_par_iter()
            .map(|i| {
                let row = smoother_row(i, x, dm, spec)?;
                Ok(ordered_sum(row.iter().map(|&(j, a)| a * eps[j as usize])))
            })
            .collect(),
    )
}

fn rss_of<T: Real>(resid: &[T]) -> T {
    ordered_sum(resid.iter().map(|&e| e * e))
}

fn soc<T: Real>(prev: T, rss: T) -> T {
    let d = (prev - rss).abs();
    if rss > T::zero() {
        d / rss
    } else {
        d
    }
}

struct Backfit<T> {
    components: Vec<Vec<T>>,
    betas: Vec<Vec<T>>,
    residuals: Vec<T>,
}

/// Starting point: OLS coefficients as constant surfaces.
fn ols_start<T: Real>(design: &Design<T>) -> Result<(Backfit<T>, Vec<T>)> {
    let ols = ols_design(design, "")?;
    let beta = ols.estimates();
    let n = design.n();
    let betas: Vec<Vec<T>> = beta.iter().map(|&b| vec![b; n]).collect();
    let components = (0..design.p())
        .map(|k| (0..n).map(|i| design.x[(i, k)] * beta[k]).collect())
        .collect();
    Ok((
        Backfit {
            components,
            betas,
            residuals: ols.residuals,
        },
        beta,
    ))
}

fn column<T: Real>(design: &Design<T>, k: usize) -> Vec<T> {
    design.x.column(k).iter().copied().collect()
}

/// Backfitting that re-selects each term's bandwidth by AICc every sweep
/// until it settles.
fn select_bandwidths<T: Real>(
    design: &Design<T>,
    dm: &DistanceMatrix<T>,
    kernel: KernelType,
    form: BandwidthForm,
    options: &MsGwrOptions,
) -> Result<(Vec<Bandwidth<T>>, Vec<SweepRecord<T>>, bool)> {
    let (n, p) = (design.n(), design.p());
    let bounds = search_bounds(dm, form, p)?;
    let (mut state, _) = ols_start(design)?;
    let columns: Vec<Vec<T>> = (0..p).map(|k| column(design, k)).collect();
    let mut bw: Vec<Option<T>> = vec![None; p];
    let mut frozen = vec![false; p];
    let mut rss_prev = rss_of(&state.residuals);
    let mut trace = Vec::new();
    let mut converged = false;

    for sweep in 1..=options.max_sweeps {
        for k in 0..p {
            let eps: Vec<T> = (0..n)
                .map(|i| state.residuals[i] + state.components[k][i])
                .collect();
            if !frozen[k] {
                let sub = design
                    .select(&[k])
                    .with_response(nalgebra::DVector::from_column_slice(&eps));
                let (b, _) =
                    optimize_bandwidth_design(&sub, dm, kernel, form, Criterion::Aicc, bounds)?;
                let b = b.value();
                if let Some(old) = bw[k] {
                    let settled = match form {
                        BandwidthForm::Fixed => (b - old).abs() < T::lit(0.01) * old,
                        BandwidthForm::Adaptive => (b - old).abs() < T::one(),
                    };
                    if settled {
                        frozen[k] = true;
                        log::debug!("bandwidth of `{}` frozen at {b}", design.terms[k]);
                    }
                }
                bw[k] = Some(b);
            }
            let spec = KernelSpec::new(kernel, to_bandwidth(form, bw[k].expect("selected above")));
            let beta = smooth_term(&columns[k], &eps, dm, &spec)?;
            for i in 0..n {
                let f = columns[k][i] * beta[i];
                state.residuals[i] = eps[i] - f;
                state.components[k][i] = f;
            }
            state.betas[k] = beta;
        }
        let rss = rss_of(&state.residuals);
        let change = soc(rss_prev, rss);
        let bandwidths: Vec<T> = bw.iter().map(|b| b.expect("selected")).collect();
        log::info!(
            "bandwidth selection sweep {sweep}: RSS = {rss}, SOC = {change:e}, bandwidths = {:?}",
            bandwidths.iter().map(|b| b.as_f64()).collect::<Vec<_>>()
        );
        trace.push(SweepRecord {
            sweep,
            rss,
            soc: change,
            bandwidths,
        });
        rss_prev = rss;
        if change < T::lit(options.soc_tol) {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!(
            "MS-GWR bandwidth selection did not converge in {} sweeps",
            options.max_sweeps
        );
    }
    let bandwidths = bw
        .into_iter()
        .map(|b| to_bandwidth(form, b.expect("selected")))
        .collect();
    Ok((bandwidths, trace, converged))
}

/// Dense row-major n x n matrix.
#[derive(Clone)]
struct Square<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> Square<T> {
    fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    fn diag(&self, i: usize) -> T {
        self.data[i * self.n + i]
    }
}

/// Coefficient operators `B_k` for the projected backfit.
struct Operators<T> {
    b: Vec<Square<T>>,
    s: Square<T>,
}

impl<T: Real> Operators<T> {
    /// OLS start: every row of `B_k` is row `k` of `(X'X)^{-1} X'`.
    fn ols(design: &Design<T>) -> Result<Self> {
        let (n, p) = (design.n(), design.p());
        let proj = crate::global::ols_projection(&design.x).ok_or_else(|| Error::Collinearity {
            columns: design.terms.clone(),
        })?;
        let b = (0..p)
            .map(|k| {
                let mut m = Square::zeros(n);
                let r: Vec<T> = proj.row(k).iter().copied().collect();
                for i in 0..n {
                    m.data[i * n..(i + 1) * n].copy_from_slice(&r);
                }
                m
            })
            .collect();
        let mut ops = Self {
            b,
            s: Square::zeros(n),
        };
        ops.refresh_hat(design);
        Ok(ops)
    }

    /// `S = sum_k diag(x_k) B_k`, rebuilt from scratch.
    fn refresh_hat(&mut self, design: &Design<T>) {
        let n = design.n();
        let p = self.b.len();
        let b = &self.b;
        self.s
            .data
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(i, row)| {
                for (l, v) in row.iter_mut().enumerate() {
                    let mut s = T::zero();
                    for k in 0..p {
                        s += design.x[(i, k)] * b[k].data[i * n + l];
                    }
                    *v = s;
                }
            });
    }

    /// `B_k <- A_k (I - S + diag(x_k) B_k)`.
    fn update(&mut self, design: &Design<T>, k: usize, rows: &[Vec<(u32, T)>]) {
        let n = design.n();
        let mut m = Square::zeros(n);
        {
            let s = &self.s;
            let bk = &self.b[k];
            m.data.par_chunks_mut(n).enumerate().for_each(|(j, row)| {
                let xj = design.x[(j, k)];
                let (sr, br) = (s.row(j), bk.row(j));
                for l in 0..n {
                    row[l] = xj * br[l] - sr[l];
                }
                row[j] += T::one();
            });
        }
        let mut next = Square::zeros(n);
        next.data
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(i, out)| {
                for &(j, a) in &rows[i] {
                    let src = m.row(j as usize);
                    for (o, &v) in out.iter_mut().zip(src) {
                        *o += a * v;
                    }
                }
            });
        self.b[k] = next;
        self.refresh_hat(design);
    }
}

/// Backfitting with every bandwidth held fixed.
fn backfit_fixed<T: Real>(
    design: &Design<T>,
    dm: &DistanceMatrix<T>,
    kernel: KernelType,
    bandwidths: &[Bandwidth<T>],
    options: &MsGwrOptions,
) -> Result<(Backfit<T>, Option<Operators<T>>, Vec<SweepRecord<T>>, bool)> {
    let (n, p) = (design.n(), design.p());
    let track = n <= HAT_MATERIALIZE_LIMIT;
    if !track {
        log::warn!("n = {n} exceeds {HAT_MATERIALIZE_LIMIT}; MS-GWR standard errors and AICc are not computed");
    }
    let columns: Vec<Vec<T>> = (0..p).map(|k| column(design, k)).collect();
    let specs: Vec<KernelSpec<T>> = bandwidths
        .iter()
        .map(|&b| KernelSpec::new(kernel, b))
        .collect();
    let rows: Vec<Vec<Vec<(u32, T)>>> = if track {
        (0..p)
            .map(|k| smoother_rows(&columns[k], dm, &specs[k]))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let (mut state, _) = ols_start(design)?;
    let mut ops = if track {
        Some(Operators::ols(design)?)
    } else {
        None
    };
    let mut rss_prev = rss_of(&state.residuals);
    let bw_values: Vec<T> = bandwidths.iter().map(|b| b.value()).collect();
    let mut trace = Vec::new();
    let mut converged = false;

    for sweep in 1..=options.max_sweeps {
        for k in 0..p {
            let eps: Vec<T> = (0..n)
                .map(|i| state.residuals[i] + state.components[k][i])
                .collect();
            let beta = if track {
                rows[k]
                    .iter()
                    .map(|r| ordered_sum(r.iter().map(|&(j, a)| a * eps[j as usize])))
                    .collect()
            } else {
                smooth_term(&columns[k], &eps, dm, &specs[k])?
            };
            for i in 0..n {
                let f = columns[k][i] * beta[i];
                state.residuals[i] = eps[i] - f;
                state.components[k][i] = f;
            }
            state.betas[k] = beta;
            if let Some(ops) = ops.as_mut() {
                ops.update(design, k, &rows[k]);
            }
        }
        let rss = rss_of(&state.residuals);
        let change = soc(rss_prev, rss);
        log::info!("backfitting sweep {sweep}: RSS = {rss}, SOC = {change:e}");
        trace.push(SweepRecord {
            sweep,
            rss,
            soc: change,
            bandwidths: bw_values.clone(),
        });
        rss_prev = rss;
        if change < T::lit(options.soc_tol) {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!(
            "MS-GWR backfitting did not converge in {} sweeps",
            options.max_sweeps
        );
    }
    Ok((state, ops, trace, converged))
}

fn assemble<T: Real>(
    design: &Design<T>,
    response: &str,
    dm: &DistanceMatrix<T>,
    kernel: KernelType,
    bandwidths: Vec<Bandwidth<T>>,
    state: Backfit<T>,
    ops: Option<Operators<T>>,
    trace: Vec<SweepRecord<T>>,
    converged: bool,
) -> Result<MsGwrFit<T>> {
    let (n, p) = (design.n(), design.p());
    let y = design.y.as_slice();
    let fitted: Vec<T> = (0..n).map(|i| y[i] - state.residuals[i]).collect();
    let rss = rss_of(&state.residuals);
    let nf = T::from_usize_lossy(n);

    let (hat_diagonal, term_enp, tr_s, tr_sts) = match &ops {
        Some(ops) => {
            let hat: Vec<T> = (0..n).map(|i| ops.s.diag(i)).collect();
            let term_enp = (0..p)
                .map(|k| ordered_sum((0..n).map(|i| design.x[(i, k)] * ops.b[k].diag(i))))
                .collect();
            let tr_s = ordered_sum(hat.iter().copied());
            let tr_sts = ordered_sum(ops.s.data.iter().map(|&v| v * v));
            (hat, term_enp, tr_s, tr_sts)
        }
        None => (vec![T::nan(); n], vec![T::nan(); p], T::nan(), T::nan()),
    };
    let enp = T::lit(2.0) * tr_s - tr_sts;
    let sigma2 = rss / (nf - enp);
    let df = if enp.is_finite() {
        pseudo_t_df(n, enp)
    } else {
        f64::NAN
    };
    let aicc_value = if tr_s.is_finite() {
        aicc(rss, n, tr_s)?
    } else {
        T::nan()
    };

    let surfaces = (0..p)
        .map(|k| {
            let se: Vec<T> = match &ops {
                Some(ops) => (0..n)
                    .map(|i| {
                        let v = ordered_sum(ops.b[k].row(i).iter().map(|&b| b * b));
                        (v * sigma2).max(T::zero()).sqrt()
                    })
                    .collect(),
                None => vec![T::nan(); n],
            };
            CoefficientSurface::from_estimates(
                design.terms[k].clone(),
                state.betas[k].clone(),
                se,
                df,
            )
        })
        .collect();

    Ok(MsGwrFit {
        kernel,
        form: bandwidths
            .first()
            .map(|b| b.form())
            .unwrap_or(BandwidthForm::Fixed),
        response: response.to_string(),
        terms: design.terms.clone(),
        bandwidths,
        surfaces,
        components: state.components,
        fitted,
        residuals: state.residuals,
        hat_diagonal,
        term_enp,
        rss,
        tr_s,
        tr_sts,
        enp,
        df,
        sigma2,
        aicc: aicc_value,
        r_squared: T::one() - rss / total_ss(y),
        n,
        max_pair_distance: dm.max_pair_distance(),
        coords: dm.coords().to_vec(),
        selection_trace: Vec::new(),
        trace,
        converged,
        centered_for_bandwidths: false,
    })
}

/// MS-GWR calibration with preset per-term bandwidths (intercept first).
pub fn msgwr_fixed_bandwidths<T: Real>(
    ds: &SpatialDataset<T>,
    formula: &Formula,
    dm: &DistanceMatrix<T>,
    kernel: KernelType,
    bandwidths: &[Bandwidth<T>],
    options: &MsGwrOptions,
) -> Result<MsGwrFit<T>> {
    let design = Design::new(ds, formula)?;
    if bandwidths.len() != design.p() {
        return Err(Error::Contract(format!(
            "{} bandwidths given for {} terms",
            bandwidths.len(),
            design.p()
        )));
    }
    if dm.n() != design.n() {
        return Err(Error::Contract(
            "distance matrix does not match the data".into(),
        ));
    }
    for b in bandwidths {
        b.validate(design.n())?;
    }
    let (state, ops, trace, converged) = backfit_fixed(&design, dm, kernel, bandwidths, options)?;
    assemble(
        &design,
        &formula.response,
        dm,
        kernel,
        bandwidths.to_vec(),
        state,
        ops,
        trace,
        converged,
    )
}

/// Fits an MS-GWR, selecting every term's bandwidth by AICc.
pub fn fit_msgwr<T: Real>(
    ds: &SpatialDataset<T>,
    formula: &Formula,
    dm: &DistanceMatrix<T>,
    kernel: KernelType,
    form: BandwidthForm,
    options: &MsGwrOptions,
) -> Result<MsGwrFit<T>> {
    if dm.n() != ds.n() {
        return Err(Error::Contract(
            "distance matrix does not match the data".into(),
        ));
    }
    let selection = if options.center_for_bandwidths {
        let vars: Vec<&str> = formula.predictors.iter().map(String::as_str).collect();
        let (centred, _) = center(ds, &vars, false)?;
        Design::new(&centred, formula)?
    } else {
        Design::new(ds, formula)?
    };
    let (bandwidths, selection_trace, selected) =
        select_bandwidths(&selection, dm, kernel, form, options)?;
    let mut fit = msgwr_fixed_bandwidths(ds, formula, dm, kernel, &bandwidths, options)?;
    fit.selection_trace = selection_trace;
    fit.converged &= selected;
    fit.centered_for_bandwidths = options.center_for_bandwidths;
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::global::fit_ols;
    use crate::gwr::fit_gwr;

    fn toy() -> (SpatialDataset<f64>, Formula) {
        (
            crate::global::tests::toy(60, 5),
            Formula::new("y", ["a", "b"]),
        )
    }

    #[test]
    fn global_boxcar_bandwidths_reproduce_ols() {
        let (ds, f) = toy();
        let dm = DistanceMatrix::new(&ds);
        let bws = vec![Bandwidth::Adaptive(ds.n()); 3];
        let fit = msgwr_fixed_bandwidths(
            &ds,
            &f,
            &dm,
            KernelType::Boxcar,
            &bws,
            &MsGwrOptions::default(),
        )
        .unwrap();
        let ols = fit_ols(&ds, &f).unwrap();
        for (s, c) in fit.surfaces.iter().zip(&ols.coefficients) {
            for &b in &s.estimate {
                assert!((b - c.estimate).abs() < 1e-6);
            }
        }
        assert!((fit.aicc - ols.aicc).abs() < 1e-6);
        assert!((fit.tr_s - 3.0).abs() < 1e-8);
        assert!(fit.converged);
    }

    #[test]
    fn components_and_residuals_add_up() {
        let (ds, f) = toy();
        let dm = DistanceMatrix::new(&ds);
        let bws = vec![
            Bandwidth::Fixed(350.0),
            Bandwidth::Fixed(900.0),
            Bandwidth::Fixed(500.0),
        ];
        let fit = msgwr_fixed_bandwidths(
            &ds,
            &f,
            &dm,
            KernelType::Bisquare,
            &bws,
            &MsGwrOptions::default(),
        )
        .unwrap();
        let y = ds.response().values.clone();
        for i in 0..ds.n() {
            let s: f64 = fit.components.iter().map(|c| c[i]).sum::<f64>() + fit.residuals[i];
            assert!((s - y[i]).abs() < 1e-8);
        }
        for w in fit.trace.windows(2) {
            assert!(w[1].rss <= w[0].rss * (1.0 + 1e-12));
        }
    }

    #[test]
    fn tracked_hat_reproduces_fitted_values() {
        let (ds, f) = toy();
        let dm = DistanceMatrix::new(&ds);
        let bws = vec![
            Bandwidth::Adaptive(20),
            Bandwidth::Adaptive(45),
            Bandwidth::Adaptive(60),
        ];
        // S y = fitted holds after every sweep, converged or not
        let opts = MsGwrOptions {
            max_sweeps: 7,
            ..Default::default()
        };
        let design = Design::new(&ds, &f).unwrap();
        let (state, ops, trace, _) =
            backfit_fixed(&design, &dm, KernelType::Bisquare, &bws, &opts).unwrap();
        assert_eq!(trace.len(), 7);
        let ops = ops.unwrap();
        let y = ds.response().values.clone();
        for i in 0..ds.n() {
            let sy: f64 = ops.s.row(i).iter().zip(&y).map(|(a, b)| a * b).sum();
            assert!((sy - (y[i] - state.residuals[i])).abs() < 1e-8);
        }
    }

    #[test]
    fn single_local_term_matches_gwr() {
        // an intercept-only MS-GWR is a GWR of y on a constant
        let (ds, _) = toy();
        let f = Formula::new("y", Vec::<String>::new());
        let dm = DistanceMatrix::new(&ds);
        let spec = KernelSpec::adaptive(KernelType::Bisquare, 25);
        let ms = msgwr_fixed_bandwidths(
            &ds,
            &f,
            &dm,
            KernelType::Bisquare,
            &[spec.bandwidth],
            &MsGwrOptions::default(),
        )
        .unwrap();
        let g = fit_gwr(&ds, &f, &dm, &spec).unwrap();
        assert!((ms.aicc - g.aicc).abs() < 1e-8);
        for i in 0..ds.n() {
            assert!((ms.surfaces[0].estimate[i] - g.surfaces[0].estimate[i]).abs() < 1e-10);
            assert!((ms.surfaces[0].std_error[i] - g.surfaces[0].std_error[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn selection_never_ends_worse_than_ols() {
        let (ds, f) = toy();
        let dm = DistanceMatrix::new(&ds);
        let fit = fit_msgwr(
            &ds,
            &f,
            &dm,
            KernelType::Bisquare,
            BandwidthForm::Adaptive,
            &MsGwrOptions::default(),
        )
        .unwrap();
        let ols = fit_ols(&ds, &f).unwrap();
        assert!(fit.rss <= ols.rss + 1e-9);
        assert_eq!(fit.bandwidths.len(), 3);
        assert!(!fit.selection_trace.is_empty());
        assert!(fit.bandwidth_ratios().iter().all(|&r| r > 0.0 && r <= 1.0));
    }
}
