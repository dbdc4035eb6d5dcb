use serde::{Deserialize, Serialize};

use crate::dataset::DistanceMatrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Neighbour definition for a spatial weight matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", content = "value", rename_all = "snake_case")]
pub enum WeightScheme<T> {
    /// The k nearest other points, weight 1.
    Knn(usize),
    /// Every other point within the distance, weight 1.
    DistanceBand(T),
    /// Every other point, weight `d^-power`.
    InverseDistance(T),
}

impl<T: Real> Default for WeightScheme<T> {
    fn default() -> Self {
        WeightScheme::Knn(8)
    }
}

impl<T: Real> std::fmt::Display for WeightScheme<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WeightScheme::Knn(k) => write!(f, "knn:{k}"),
            WeightScheme::DistanceBand(d) => write!(f, "band:{d}"),
            WeightScheme::InverseDistance(p) => write!(f, "idw:{p}"),
        }
    }
}

impl<T: Real> std::str::FromStr for WeightScheme<T> {
    type Err = Error;

    /// `knn:8`, `band:250` or `idw:2`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::Contract(format!(
                "invalid weight scheme `{s}` (expected knn:<k>, band:<metres> or idw:<power>)"
            ))
        };
        let (kind, value) = s.split_once(':').ok_or_else(bad)?;
        let real = || value.trim().parse::<f64>().map(T::lit).map_err(|_| bad());
        match kind.trim() {
            "knn" => value
                .trim()
                .parse()
                .map(WeightScheme::Knn)
                .map_err(|_| bad()),
            "band" | "distance_band" => real().map(WeightScheme::DistanceBand),
            "idw" | "inverse_distance" => real().map(WeightScheme::InverseDistance),
            _ => Err(bad()),
        }
    }
}

/// Sparse spatial weights, one row per observation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightMatrix<T> {
    n: usize,
    rows: Vec<Vec<(usize, T)>>,
    pub scheme: WeightScheme<T>,
    pub row_standardized: bool,
    /// Rows with no neighbours.
    pub islands: Vec<usize>,
}

impl<T: Real> WeightMatrix<T> {
    /// Builds a matrix from explicit rows of `(column, weight)`. Diagonal
    /// entries and zero weights are dropped.
    pub fn from_rows(
        rows: Vec<Vec<(usize, T)>>,
        scheme: WeightScheme<T>,
        row_standardize: bool,
    ) -> Result<Self> {
        let n = rows.len();
        let mut clean = Vec::with_capacity(n);
        for (i, row) in rows.into_iter().enumerate() {
            let mut r: Vec<(usize, T)> = Vec::with_capacity(row.len());
            for (j, w) in row {
                if j >= n {
                    return Err(Error::Contract(format!(
                        "weight column {j} out of range for n = {n}"
                    )));
                }
                if !(w >= T::zero()) || !w.is_finite() {
                    return Err(Error::Contract(format!(
                        "weight ({i}, {j}) must be finite and nonnegative"
                    )));
                }
                if j != i && w > T::zero() {
                    r.push((j, w));
                }
            }
            r.sort_by_key(|&(j, _)| j);
            clean.push(r);
        }
        let islands: Vec<usize> = (0..n).filter(|&i| clean[i].is_empty()).collect();
        if !islands.is_empty() {
            log::warn!(
                "{} observation(s) have no neighbours: {:?}",
                islands.len(),
                islands
            );
        }
        if row_standardize {
            for r in clean.iter_mut() {
                let s = r.iter().fold(T::zero(), |a, &(_, w)| a + w);
                if s > T::zero() {
                    for e in r.iter_mut() {
                        e.1 /= s;
                    }
                }
            }
        }
        Ok(Self {
            n,
            rows: clean,
            scheme,
            row_standardized: row_standardize,
            islands,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[(usize, T)] {
        &self.rows[i]
    }

    /// Number of nonzero weights in row `i`.
    pub fn nonzeros(&self, i: usize) -> usize {
        self.rows[i].len()
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.rows[i]
            .binary_search_by_key(&j, |&(c, _)| c)
            .map(|k| self.rows[i][k].1)
            .unwrap_or_else(|_| T::zero())
    }

    /// Sum of all weights.
    pub fn s0(&self) -> T {
        self.rows
            .iter()
            .flat_map(|r| r.iter().map(|&(_, w)| w))
            .fold(T::zero(), |a, w| a + w)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<T> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, w) in r {
                m[(i, j)] = w;
            }
        }
        m
    }

    /// `W v`.
    pub fn lag(&self, v: &[T]) -> Vec<T> {
        self.rows
            .iter()
            .map(|r| r.iter().fold(T::zero(), |a, &(j, w)| a + w * v[j]))
            .collect()
    }
}

/// Builds spatial weights over the points of `dm`.
pub fn build_weight_matrix<T: Real>(
    dm: &DistanceMatrix<T>,
    scheme: WeightScheme<T>,
    row_standardize: bool,
) -> Result<WeightMatrix<T>> {
    let n = dm.n();
    let rows: Vec<Vec<(usize, T)>> = match scheme {
        WeightScheme::Knn(k) => {
            if k == 0 || k >= n {
                return Err(Error::Contract(format!(
                    "knn requires 0 < k < n (k = {k}, n = {n})"
                )));
            }
            (0..n)
                .map(|i| {
                    dm.neighbours(i)
                        .iter()
                        .map(|&j| j as usize)
                        .filter(|&j| j != i)
                        .take(k)
                        .map(|j| (j, T::one()))
                        .collect()
                })
                .collect()
        }
        WeightScheme::DistanceBand(d) => {
            if !(d > T::zero()) {
                return Err(Error::Contract(format!(
                    "distance band must be positive (got {d})"
                )));
            }
            (0..n)
                .map(|i| {
                    let row = dm.row(i);
                    (0..n)
                        .filter(|&j| j != i && row[j] <= d)
                        .map(|j| (j, T::one()))
                        .collect()
                })
                .collect()
        }
        WeightScheme::InverseDistance(power) => {
            if !(power > T::zero()) {
                return Err(Error::Contract(format!(
                    "inverse-distance power must be positive (got {power})"
                )));
            }
            if !dm.coincident_pairs().is_empty() {
                log::warn!("coincident points get no inverse-distance weight between them");
            }
            (0..n)
                .map(|i| {
                    let row = dm.row(i);
                    (0..n)
                        .filter(|&j| j != i && row[j] > T::zero())
                        .map(|j| (j, row[j].powf(-power)))
                        .collect()
                })
                .collect()
        }
    };
    WeightMatrix::from_rows(rows, scheme, row_standardize)
}
