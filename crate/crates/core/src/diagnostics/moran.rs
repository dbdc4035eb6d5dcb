use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::weights::WeightMatrix;
use crate::error::{Error, Result};
use crate::global::ols_projection;
use crate::scalar::{mean, ordered_sum, Real};
use crate::stats::normal_two_sided_p;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MoranMode {
    Raw,
    ResidualAdjusted,
}

/// What the values are: a raw variable, or regression residuals from the
/// given design matrix.
#[derive(Debug, Clone, Copy)]
pub enum MoranInput<'a, T: Real> {
    Raw,
    ResidualAdjusted(&'a DMatrix<T>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PermutationTest<T> {
    pub permutations: usize,
    pub seed: u64,
    /// `(1 + #{|I_perm - E[I]| >= |I - E[I]|}) / (1 + permutations)`.
    pub p_value: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MoranResult<T> {
    pub i: T,
    pub expectation: T,
    pub variance: T,
    pub z: T,
    /// Two-sided normal p-value.
    pub p_value: T,
    pub mode: MoranMode,
    pub permutation: Option<PermutationTest<T>>,
}

fn statistic<T: Real>(v: &[T], w: &WeightMatrix<T>, s0: T) -> T {
    let n = T::from_usize_lossy(v.len());
    let lag = w.lag(v);
    let num = ordered_sum(v.iter().zip(&lag).map(|(&a, &b)| a * b));
    let den = ordered_sum(v.iter().map(|&a| a * a));
    n / s0 * num / den
}

fn centred<T: Real>(values: &[T], mode: MoranMode) -> Vec<T> {
    match mode {
        MoranMode::Raw => {
            let mu = mean(values);
            values.iter().map(|&v| v - mu).collect()
        }
        MoranMode::ResidualAdjusted => values.to_vec(),
    }
}

/// Moran's I with its analytic moments.
///
/// Raw mode centres the values and uses the normality-assumption variance.
/// Residual-adjusted mode takes OLS residuals of `X` as given and uses the
/// exact moments of `e'We / e'e` under `M = I - X(X'X)^{-1}X'`.
pub fn morans_i<T: Real>(
    values: &[T],
    w: &WeightMatrix<T>,
    input: MoranInput<'_, T>,
) -> Result<MoranResult<T>> {
    let n = values.len();
    if w.n() != n {
        return Err(Error::Contract(format!(
            "weights are {}x{} but {n} values given",
            w.n(),
            w.n()
        )));
    }
    if n < 3 {
        return Err(Error::DegenerateInput(
            "Moran's I needs at least 3 values".into(),
        ));
    }
    let mu = mean(values);
    let spread = values.iter().fold(T::zero(), |a, &v| a.max((v - mu).abs()));
    if !(spread > T::machine_epsilon() * mu.abs().max(T::one()) * T::lit(16.0)) {
        return Err(Error::DegenerateInput(
            "Moran's I of a constant vector is undefined".into(),
        ));
    }
    let s0 = w.s0();
    if !(s0 > T::zero()) {
        return Err(Error::DegenerateInput(
            "weight matrix has no nonzero weights".into(),
        ));
    }
    let mode = match input {
        MoranInput::Raw => MoranMode::Raw,
        MoranInput::ResidualAdjusted(_) => MoranMode::ResidualAdjusted,
    };
    let v = centred(values, mode);
    let i = statistic(&v, w, s0);
    let nf = T::from_usize_lossy(n);
    let (expectation, variance) = match input {
        MoranInput::Raw => raw_moments(w, nf, s0),
        MoranInput::ResidualAdjusted(x) => residual_moments(w, x, s0)?,
    };
    let z = (i - expectation) / variance.sqrt();
    Ok(MoranResult {
        i,
        expectation,
        variance,
        z,
        p_value: normal_two_sided_p(z),
        mode,
        permutation: None,
    })
}

fn raw_moments<T: Real>(w: &WeightMatrix<T>, n: T, s0: T) -> (T, T) {
    let nn = w.n();
    let e = -T::one() / (n - T::one());
    let dense = w.to_dense();
    let mut s1 = T::zero();
    for i in 0..nn {
        for j in 0..nn {
            let s = dense[(i, j)] + dense[(j, i)];
            s1 += s * s;
        }
    }
    s1 *= T::lit(0.5);
    let s2 = ordered_sum((0..nn).map(|i| {
        let s = dense.row(i).sum() + dense.column(i).sum();
        s * s
    }));
    let var =
        (n * n * s1 - n * s2 + T::lit(3.0) * s0 * s0) / (s0 * s0 * (n * n - T::one())) - e * e;
    (e, var)
}

fn residual_moments<T: Real>(w: &WeightMatrix<T>, x: &DMatrix<T>, s0: T) -> Result<(T, T)> {
    let n = x.nrows();
    if n != w.n() {
        return Err(Error::Contract(
            "design rows do not match the weight matrix".into(),
        ));
    }
    let p = x.ncols();
    let proj = ols_projection(x).ok_or_else(|| Error::Collinearity { columns: vec![] })?;
    let m = DMatrix::<T>::identity(n, n) - x * proj;
    let dense = w.to_dense();
    let mw = &m * &dense;
    let mwt = &m * dense.transpose();
    let nf = T::from_usize_lossy(n);
    let dof = T::from_usize_lossy(n - p);
    let tr_mw = mw.trace();
    let e = nf * tr_mw / (dof * s0);
    // tr(MWMW') and tr(MWMW)
    let mut tr_mwmwt = T::zero();
    let mut tr_mw2 = T::zero();
    for i in 0..n {
        for j in 0..n {
            tr_mwmwt += mw[(i, j)] * mwt[(j, i)];
            tr_mw2 += mw[(i, j)] * mw[(j, i)];
        }
    }
    let scale = nf / s0;
    let var =
        scale * scale * (tr_mwmwt + tr_mw2 + tr_mw * tr_mw) / (dof * (dof + T::lit(2.0))) - e * e;
    Ok((e, var))
}

/// As [`morans_i`], adding a permutation p-value. Trial `t` shuffles the
/// values with ChaCha8 seeded by `seed` on stream `t`, so the result does
/// not depend on the number of worker threads.
pub fn morans_i_permutation<T: Real>(
    values: &[T],
    w: &WeightMatrix<T>,
    input: MoranInput<'_, T>,
    permutations: usize,
    seed: u64,
) -> Result<MoranResult<T>> {
    let mut result = morans_i(values, w, input)?;
    let v = centred(values, result.mode);
    let s0 = w.s0();
    let observed = (result.i - result.expectation).abs();
    let exceed: usize = (0..permutations)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let mut shuffled = v.clone();
            shuffled.shuffle(&mut rng);
            usize::from((statistic(&shuffled, w, s0) - result.expectation).abs() >= observed)
        })
        .sum();
    result.permutation = Some(PermutationTest {
        permutations,
        seed,
        p_value: T::from_usize_lossy(exceed + 1) / T::from_usize_lossy(permutations + 1),
    });
    Ok(result)
}
