use serde::{Deserialize, Serialize};

use super::{aicc, criterion_parts, cv_design};
use crate::dataset::{DistanceMatrix, SpatialDataset};
use crate::error::{Error, Result};
use crate::formula::{Design, Formula};
use crate::kernel::{Bandwidth, BandwidthForm, KernelSpec, KernelType};
use crate::optim::{golden_section, golden_section_integer};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Aicc,
    Cv,
}

impl std::str::FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aicc" => Ok(Criterion::Aicc),
            "cv" => Ok(Criterion::Cv),
            other => Err(Error::Contract(format!("unknown criterion `{other}`"))),
        }
    }
}

/// Curves whose criterion varies by less than this are flagged as plateaued.
pub const PLATEAU_AICC_RANGE: f64 = 2.0;
/// Adaptive bandwidths below this fraction of n are flagged as over-fitting.
pub const OVERFIT_FRACTION: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchBounds<T> {
    pub lower: T,
    pub upper: T,
}

/// Search interval guaranteeing at least `2p` neighbours in every local fit
/// (`p` design columns, intercept included). Fixed: from the distance at
/// which the sparsest location reaches `2p` neighbours up to the largest
/// pairwise distance. Adaptive: `[2p, n]`.
pub fn search_bounds<T: Real>(
    dm: &DistanceMatrix<T>,
    form: BandwidthForm,
    p: usize,
) -> Result<SearchBounds<T>> {
    let n = dm.n();
    let k = 2 * p;
    if k > n {
        return Err(Error::InsufficientData {
            n,
            m: p.saturating_sub(1),
        });
    }
    Ok(match form {
        BandwidthForm::Adaptive => SearchBounds {
            lower: T::from_usize_lossy(k),
            upper: T::from_usize_lossy(n),
        },
        BandwidthForm::Fixed => {
            let sparsest = (0..n)
                .map(|i| dm.kth_neighbour_distance(i, k))
                .fold(T::zero(), |m, d| if d > m { d } else { m });
            // nudge past the k-th neighbour so it carries nonzero weight
            let lower = sparsest * T::lit(1.0 + 1e-6);
            let upper = dm.max_pair_distance();
            SearchBounds {
                lower: lower.min(upper),
                upper,
            }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint<T> {
    pub bandwidth: T,
    /// Criterion value; infinite where the calibration failed.
    pub value: T,
    /// Effective number of parameters, `2 tr(S) - tr(S'S)`.
    pub enp: T,
}

/// Criterion evaluated at every bandwidth the search visited.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandwidthCurve<T> {
    pub criterion: Criterion,
    pub form: BandwidthForm,
    pub kernel: KernelType,
    /// Strictly increasing in bandwidth.
    pub points: Vec<CurvePoint<T>>,
    pub bounds: SearchBounds<T>,
    pub chosen: T,
    pub plateau: bool,
    pub boundary_minimum: bool,
    pub overfit: bool,
    pub enp_non_monotone: bool,
}

impl<T: Real> BandwidthCurve<T> {
    fn finalize(
        criterion: Criterion,
        form: BandwidthForm,
        kernel: KernelType,
        mut points: Vec<CurvePoint<T>>,
        bounds: SearchBounds<T>,
        n: usize,
        tol: T,
    ) -> Result<Self> {
        points.sort_by(|a, b| {
            a.bandwidth
                .partial_cmp(&b.bandwidth)
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        points.dedup_by(|a, b| a.bandwidth == b.bandwidth);
        let best = points
            .iter()
            .filter(|p| p.value.is_finite())
            .min_by(|a, b| {
                a.value
                    .partial_cmp(&b.value)
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .copied()
            .ok_or_else(|| {
                Error::Optimization(format!(
                    "every candidate bandwidth failed ({} evaluated in [{}, {}])",
                    points.len(),
                    bounds.lower,
                    bounds.upper
                ))
            })?;
        let finite: Vec<T> = points
            .iter()
            .map(|p| p.value)
            .filter(|v| v.is_finite())
            .collect();
        let (lo, hi) = finite
            .iter()
            .fold((T::infinity(), -T::infinity()), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let plateau = criterion == Criterion::Aicc
            && finite.len() > 1
            && hi - lo < T::lit(PLATEAU_AICC_RANGE);
        let near = |a: T, b: T| (a - b).abs() <= tol;
        let boundary_minimum =
            near(best.bandwidth, bounds.lower) || near(best.bandwidth, bounds.upper);
        let overfit = form == BandwidthForm::Adaptive
            && best.bandwidth < T::lit(OVERFIT_FRACTION) * T::from_usize_lossy(n);
        let enp_non_monotone = points
            .windows(2)
            .filter(|w| w[0].enp.is_finite() && w[1].enp.is_finite())
            .any(|w| w[1].enp > w[0].enp + T::lit(1e-8) * w[0].enp.abs().max(T::one()));
        if enp_non_monotone {
            log::warn!("effective number of parameters is not monotone along the bandwidth curve");
        }
        Ok(Self {
            criterion,
            form,
            kernel,
            points,
            bounds,
            chosen: best.bandwidth,
            plateau,
            boundary_minimum,
            overfit,
            enp_non_monotone,
        })
    }

    /// Whether the criterion decreases then increases (one interior
    /// local minimum along the evaluated points).
    pub fn is_unimodal(&self) -> bool {
        let v: Vec<T> = self
            .points
            .iter()
            .map(|p| p.value)
            .filter(|v| v.is_finite())
            .collect();
        let mut descending = true;
        for w in v.windows(2) {
            if descending {
                if w[1] > w[0] {
                    descending = false;
                }
            } else if w[1] < w[0] {
                return false;
            }
        }
        true
    }

    pub fn bandwidth(&self) -> Bandwidth<T> {
        match self.form {
            BandwidthForm::Fixed => Bandwidth::Fixed(self.chosen),
            BandwidthForm::Adaptive => Bandwidth::Adaptive(self.chosen.as_f64().round() as usize),
        }
    }
}

fn evaluate<T: Real>(
    design: &Design<T>,
    dm: &DistanceMatrix<T>,
    spec: &KernelSpec<T>,
    criterion: Criterion,
) -> CurvePoint<T> {
    let parts = criterion_parts(design, dm, spec);
    let enp = parts
        .as_ref()
        .map(|p| T::lit(2.0) * p.tr_s - p.tr_sts)
        .unwrap_or_else(|_| T::nan());
    let value = match criterion {
        Criterion::Aicc => parts
            .ok()
            .and_then(|p| aicc(p.rss, design.n(), p.tr_s).ok())
            .unwrap_or_else(T::infinity),
        Criterion::Cv => cv_design(design, dm, spec).unwrap_or_else(|_| T::infinity()),
    };
    log::debug!("bandwidth {}: {:?} = {value}", spec.bandwidth, criterion);
    CurvePoint {
        bandwidth: spec.bandwidth.value(),
        value,
        enp,
    }
}

/// Convergence tolerance of the fixed-distance golden-section search.
pub(crate) fn fixed_tolerance<T: Real>(dm: &DistanceMatrix<T>) -> T {
    T::lit(0.1).max(T::lit(1e-4) * dm.max_pair_distance())
}

/// Golden-section bandwidth search for a design within explicit bounds.
pub fn optimize_bandwidth_design<T: Real>(
    design: &Design<T>,
    dm: &DistanceMatrix<T>,
    kernel: KernelType,
    form: BandwidthForm,
    criterion: Criterion,
    bounds: SearchBounds<T>,
) -> Result<(Bandwidth<T>, BandwidthCurve<T>)> {
    let n = design.n();
    let mut points = Vec::new();
    let tol = match form {
        BandwidthForm::Fixed => {
            let tol = fixed_tolerance(dm);
            golden_section(
                |b: T| {
                    let pt = evaluate(design, dm, &KernelSpec::fixed(kernel, b), criterion);
                    points.push(pt);
                    pt.value
                },
                bounds.lower,
                bounds.upper,
                tol,
            );
            tol
        }
        BandwidthForm::Adaptive => {
            let lo = bounds.lower.as_f64().round() as usize;
            let hi = (bounds.upper.as_f64().round() as usize).min(n);
            golden_section_integer(
                |k: usize| {
                    let pt = evaluate(design, dm, &KernelSpec::adaptive(kernel, k), criterion);
                    points.push(pt);
                    pt.value
                },
                lo.max(1),
                hi.max(lo.max(1)),
            );
            T::one()
        }
    };
    let curve = BandwidthCurve::finalize(criterion, form, kernel, points, bounds, n, tol)?;
    Ok((curve.bandwidth(), curve))
}

/// Finds the bandwidth minimizing `criterion` for a standard GWR.
pub fn optimize_bandwidth<T: Real>(
    ds: &SpatialDataset<T>,
    formula: &Formula,
    dm: &DistanceMatrix<T>,
    kernel: KernelType,
    form: BandwidthForm,
    criterion: Criterion,
) -> Result<(Bandwidth<T>, BandwidthCurve<T>)> {
    let design = Design::new(ds, formula)?;
    let bounds = search_bounds(dm, form, design.p())?;
    optimize_bandwidth_design(&design, dm, kernel, form, criterion, bounds)
}
