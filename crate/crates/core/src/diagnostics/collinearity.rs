use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{DistanceMatrix, SpatialDataset};
use crate::error::{Error, Result};
use crate::formula::{Design, Formula};
use crate::kernel::{weights_for_location, KernelSpec};
use crate::linalg::spd_inverse;
use crate::scalar::Real;

pub const CN_THRESHOLD: f64 = 30.0;
pub const VIF_THRESHOLD: f64 = 10.0;
pub const VDP_THRESHOLD: f64 = 0.5;
pub const CORRELATION_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlobalCollinearity<T> {
    /// Design terms, intercept first.
    pub terms: Vec<String>,
    /// Pearson correlations between predictors (intercept excluded).
    pub correlations: Vec<Vec<T>>,
    /// Predictor pairs with `|r| > 0.8`.
    pub correlated_pairs: Vec<(String, String, T)>,
    /// One per predictor (intercept excluded).
    pub vif: Vec<T>,
    pub condition_number: T,
    /// Largest singular value over each singular value, ascending.
    pub condition_indices: Vec<T>,
    /// `vdp[j][k]`: share of term `k`'s variance attached to condition index `j`.
    pub vdp: Vec<Vec<T>>,
    /// Terms involved in an exact linear dependency.
    pub dependency: Vec<String>,
    pub cn_flag: bool,
    pub vif_flags: Vec<String>,
    /// Terms with a VDP above 0.5 on the largest condition index.
    pub vdp_flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalCollinearity<T> {
    pub terms: Vec<String>,
    pub condition_number: Vec<T>,
    /// `vif[k][i]` for predictor `k` at location `i`.
    pub vif: Vec<Vec<T>>,
    /// `vdp[i][j][k]` at location `i`.
    pub vdp: Vec<Vec<Vec<T>>>,
    /// Weighted correlation surfaces for each predictor pair.
    pub gw_correlations: Vec<(String, String, Vec<T>)>,
    /// Locations with a condition number above 30.
    pub cn_flagged: Vec<usize>,
    /// Locations where the weighted design is exactly singular.
    pub singular: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollinearityReport<T> {
    pub global: GlobalCollinearity<T>,
    pub local: Option<LocalCollinearity<T>>,
}

struct Decomposition<T> {
    condition_number: T,
    condition_indices: Vec<T>,
    vdp: Vec<Vec<T>>,
    singular: bool,
    /// Columns loading on a zero singular value.
    null_terms: Vec<usize>,
}

/// Condition number, indices and variance-decomposition proportions of a
/// design after scaling every column to unit length. Zero singular values
/// give an infinite condition number; their proportions are the limit of the
/// usual formula, so each term's proportions still sum to one.
fn decompose<T: Real>(x: &DMatrix<T>) -> Decomposition<T> {
    let p = x.ncols();
    let mut xs = x.clone();
    for mut c in xs.column_iter_mut() {
        let norm = c.norm();
        if norm > T::zero() {
            c /= norm;
        }
    }
    let svd = xs.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let d: Vec<T> = order.iter().map(|&j| svd.singular_values[j]).collect();
    let d_max = d.first().copied().unwrap_or_else(T::zero);
    let tiny = d_max * T::machine_epsilon() * T::from_usize_lossy(x.nrows().max(p)) * T::lit(10.0);
    let zero: Vec<bool> = d.iter().map(|&s| s <= tiny).collect();
    let singular = zero.iter().any(|&z| z) || d.len() < p;
    let condition_indices: Vec<T> = d
        .iter()
        .zip(&zero)
        .map(|(&s, &z)| if z { T::infinity() } else { d_max / s })
        .collect();
    let condition_number = if singular {
        T::infinity()
    } else {
        condition_indices.last().copied().unwrap_or_else(T::one)
    };
    let r = d.len();
    let mut vdp = vec![vec![T::zero(); p]; r];
    let mut null_terms = Vec::new();
    for k in 0..p {
        // v_kj^2 restricted to the zero singular values, when any touch term k
        let v2 = |j: usize| {
            let v = v_t[(order[j], k)];
            v * v
        };
        let null_mass: T = (0..r)
            .filter(|&j| zero[j])
            .fold(T::zero(), |a, j| a + v2(j));
        if null_mass > T::lit(1e-12) {
            null_terms.push(k);
        }
        if null_mass > tiny * tiny {
            for j in (0..r).filter(|&j| zero[j]) {
                vdp[j][k] = v2(j) / null_mass;
            }
        } else {
            let phi: Vec<T> = (0..r)
                .map(|j| {
                    if zero[j] {
                        T::zero()
                    } else {
                        v2(j) / (d[j] * d[j])
                    }
                })
                .collect();
            let total = phi.iter().fold(T::zero(), |a, &v| a + v);
            for j in 0..r {
                vdp[j][k] = phi[j] / total;
            }
        }
    }
    Decomposition {
        condition_number,
        condition_indices,
        vdp,
        singular,
        null_terms,
    }
}

fn weighted_mean<T: Real>(v: impl Iterator<Item = T> + Clone, w: &[T]) -> T {
    let sw = w.iter().fold(T::zero(), |a, &b| a + b);
    v.zip(w).fold(T::zero(), |a, (x, &wi)| a + x * wi) / sw
}

/// Weighted Pearson correlation.
fn weighted_correlation<T: Real>(a: &[T], b: &[T], w: &[T]) -> T {
    let ma = weighted_mean(a.iter().copied(), w);
    let mb = weighted_mean(b.iter().copied(), w);
    let (mut sab, mut saa, mut sbb) = (T::zero(), T::zero(), T::zero());
    for i in 0..a.len() {
        let (da, db) = (a[i] - ma, b[i] - mb);
        sab += w[i] * da * db;
        saa += w[i] * da * da;
        sbb += w[i] * db * db;
    }
    sab / (saa * sbb).sqrt()
}

/// VIF of each non-intercept column of `x` (intercept in column 0) from
/// weighted auxiliary regressions.
fn weighted_vifs<T: Real>(x: &DMatrix<T>, w: &[T]) -> Vec<T> {
    let (n, p) = (x.nrows(), x.ncols());
    (1..p)
        .map(|k| {
            let others: Vec<usize> = (0..p).filter(|&j| j != k).collect();
            let z = x.select_columns(others.iter());
            let y: Vec<T> = x.column(k).iter().copied().collect();
            let my = weighted_mean(y.iter().copied(), w);
            let tss = (0..n).fold(T::zero(), |a, i| a + w[i] * (y[i] - my) * (y[i] - my));
            if !(tss > T::zero()) {
                return T::infinity();
            }
            let mut g = DMatrix::<T>::zeros(p - 1, p - 1);
            let mut c = nalgebra::DVector::<T>::zeros(p - 1);
            for i in 0..n {
                for a in 0..p - 1 {
                    c[a] += w[i] * z[(i, a)] * y[i];
                    for b in 0..p - 1 {
                        g[(a, b)] += w[i] * z[(i, a)] * z[(i, b)];
                    }
                }
            }
            let Some(inv) = spd_inverse(&g) else {
                return T::infinity();
            };
            let beta = inv * c;
            let rss = (0..n).fold(T::zero(), |a, i| {
                let e = y[i] - (z.row(i) * &beta)[(0, 0)];
                a + w[i] * e * e
            });
            let r2 = T::one() - rss / tss;
            if r2 >= T::one() - T::lit(1e-12) {
                T::infinity()
            } else {
                T::one() / (T::one() - r2)
            }
        })
        .collect()
}

/// Global collinearity diagnostics of the formula's design.
pub fn global_collinearity<T: Real>(
    ds: &SpatialDataset<T>,
    formula: &Formula,
) -> Result<GlobalCollinearity<T>> {
    if formula.m() < 2 {
        return Err(Error::Contract(
            "collinearity diagnostics need at least two predictors".into(),
        ));
    }
    let design = Design::new(ds, formula)?;
    let x = &design.x;
    let (n, p) = (design.n(), design.p());
    let ones = vec![T::one(); n];
    let preds: Vec<Vec<T>> = (1..p)
        .map(|k| x.column(k).iter().copied().collect())
        .collect();
    let correlations: Vec<Vec<T>> = preds
        .iter()
        .map(|a| {
            preds
                .iter()
                .map(|b| weighted_correlation(a, b, &ones))
                .collect()
        })
        .collect();
    let names = &design.terms[1..];
    let mut correlated_pairs = Vec::new();
    for a in 0..p - 1 {
        for b in a + 1..p - 1 {
            if correlations[a][b].abs() > T::lit(CORRELATION_THRESHOLD) {
                correlated_pairs.push((names[a].clone(), names[b].clone(), correlations[a][b]));
            }
        }
    }
    let vif = weighted_vifs(x, &ones);
    let dec = decompose(x);
    let dependency = if dec.singular {
        let dep: Vec<String> = dec
            .null_terms
            .iter()
            .map(|&k| design.terms[k].clone())
            .collect();
        log::warn!("design is exactly collinear; dependent columns: {dep:?}");
        dep
    } else {
        Vec::new()
    };
    let vif_flags = names
        .iter()
        .zip(&vif)
        .filter(|(_, &v)| v > T::lit(VIF_THRESHOLD))
        .map(|(t, _)| t.clone())
        .collect();
    let vdp_flags = dec
        .vdp
        .last()
        .map(|row| {
            (0..p)
                .filter(|&k| row[k] > T::lit(VDP_THRESHOLD))
                .map(|k| design.terms[k].clone())
                .collect()
        })
        .unwrap_or_default();
    Ok(GlobalCollinearity {
        terms: design.terms.clone(),
        correlations,
        correlated_pairs,
        vif,
        cn_flag: dec.condition_number > T::lit(CN_THRESHOLD),
        condition_number: dec.condition_number,
        condition_indices: dec.condition_indices,
        vdp: dec.vdp,
        dependency,
        vif_flags,
        vdp_flags,
    })
}

/// Geographically weighted collinearity diagnostics at every data point.
pub fn local_collinearity<T: Real>(
    ds: &SpatialDataset<T>,
    formula: &Formula,
    dm: &DistanceMatrix<T>,
    spec: &KernelSpec<T>,
) -> Result<LocalCollinearity<T>> {
    let design = Design::new(ds, formula)?;
    let x = &design.x;
    let (n, p) = (design.n(), design.p());
    spec.bandwidth.validate(n)?;
    let preds: Vec<Vec<T>> = (1..p)
        .map(|k| x.column(k).iter().copied().collect())
        .collect();
    let pairs: Vec<(usize, usize)> = (0..p - 1)
        .flat_map(|a| (a + 1..p - 1).map(move |b| (a, b)))
        .collect();

    struct Local<T> {
        cn: T,
        vif: Vec<T>,
        vdp: Vec<Vec<T>>,
        corr: Vec<T>,
        singular: bool,
    }
    let locals: Vec<Local<T>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let w = weights_for_location(i, dm, spec)?;
            let mut xw = x.clone();
            for (r, &wi) in w.iter().enumerate() {
                let s = wi.sqrt();
                for c in 0..p {
                    xw[(r, c)] *= s;
                }
            }
            let dec = decompose(&xw);
            Ok(Local {
                cn: dec.condition_number,
                vif: weighted_vifs(x, &w),
                vdp: dec.vdp,
                corr: pairs
                    .iter()
                    .map(|&(a, b)| weighted_correlation(&preds[a], &preds[b], &w))
                    .collect(),
                singular: dec.singular,
            })
        })
        .collect::<Result<_>>()?;

    let names = &design.terms[1..];
    Ok(LocalCollinearity {
        terms: design.terms.clone(),
        condition_number: locals.iter().map(|l| l.cn).collect(),
        vif: (0..p - 1)
            .map(|k| locals.iter().map(|l| l.vif[k]).collect())
            .collect(),
        gw_correlations: pairs
            .iter()
            .enumerate()
            .map(|(q, &(a, b))| {
                (
                    names[a].clone(),
                    names[b].clone(),
                    locals.iter().map(|l| l.corr[q]).collect(),
                )
            })
            .collect(),
        cn_flagged: (0..n)
            .filter(|&i| locals[i].cn > T::lit(CN_THRESHOLD))
            .collect(),
        singular: (0..n).filter(|&i| locals[i].singular).collect(),
        vdp: locals.into_iter().map(|l| l.vdp).collect(),
    })
}

/// Correlation surface of a single variable with itself, for checking.
#[cfg(test)]
fn self_correlation<T: Real>(v: &[T], w: &[T]) -> T {
    weighted_correlation(v, v, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelType;

    fn ds(cols: Vec<(&str, Vec<f64>)>, allow: bool) -> SpatialDataset<f64> {
        let n = cols[0].1.len();
        let mut b = SpatialDataset::builder()
            .coords(
                (0..n)
                    .map(|i| [(i % 5) as f64 * 10.0, (i / 5) as f64 * 10.0])
                    .collect(),
            )
            .response("y", (0..n).map(|i| (i as f64 * 0.37).sin()).collect())
            .allow_identical_columns(allow);
        for (name, v) in cols {
            b = b.predictor(name, v);
        }
        b.build().unwrap()
    }

    #[test]
    fn orthogonal_design_is_perfectly_conditioned() {
        // centred, mutually orthogonal predictors: every column orthogonal to the intercept
        let a = vec![1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
        let b = vec![1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0];
        let d = ds(vec![("a", a), ("b", b)], false);
        let g = global_collinearity(&d, &Formula::new("y", ["a", "b"])).unwrap();
        assert!((g.condition_number - 1.0).abs() < 1e-10);
        for v in &g.vif {
            assert!((v - 1.0).abs() < 1e-10);
        }
        for k in 0..3 {
            let s: f64 = g.vdp.iter().map(|row| row[k]).sum();
            assert!((s - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn duplicated_column_is_infinitely_collinear() {
        let a: Vec<f64> = (0..20).map(|i| (i as f64 * 1.3).cos()).collect();
        let d = ds(vec![("a", a.clone()), ("a2", a)], true);
        let f = Formula::new("y", ["a", "a2"]);
        let g = global_collinearity(&d, &f).unwrap();
        assert!(g.condition_number.is_infinite());
        assert!(g.vif.iter().all(|v| v.is_infinite()));
        assert!(!g.dependency.is_empty());
        for k in 0..3 {
            let s: f64 = g.vdp.iter().map(|row| row[k]).sum();
            assert!((s - 1.0).abs() < 1e-8);
        }
        let dm = DistanceMatrix::new(&d);
        let l = local_collinearity(&d, &f, &dm, &KernelSpec::adaptive(KernelType::Bisquare, 12))
            .unwrap();
        assert!(l.condition_number.iter().all(|c| c.is_infinite()));
    }

    #[test]
    fn full_boxcar_window_reproduces_global() {
        let a: Vec<f64> = (0..25).map(|i| (i as f64 * 0.7).sin()).collect();
        let b: Vec<f64> = (0..25)
            .map(|i| (i as f64 * 0.3).cos() + 0.2 * a[i])
            .collect();
        let d = ds(vec![("a", a.clone()), ("b", b)], false);
        let f = Formula::new("y", ["a", "b"]);
        let g = global_collinearity(&d, &f).unwrap();
        let dm = DistanceMatrix::new(&d);
        let l =
            local_collinearity(&d, &f, &dm, &KernelSpec::adaptive(KernelType::Boxcar, 25)).unwrap();
        for i in 0..25 {
            assert!((l.condition_number[i] - g.condition_number).abs() < 1e-9 * g.condition_number);
            assert!((l.vif[0][i] - g.vif[0]).abs() < 1e-9);
        }
        let w: Vec<f64> = (0..25).map(|i| 1.0 / (1.0 + i as f64)).collect();
        assert!((self_correlation(&a, &w) - 1.0).abs() < 1e-12);
    }
}
