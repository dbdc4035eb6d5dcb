//! Model formulas and the design matrices built from them.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::SpatialDataset;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Name of the intercept term in every coefficient table.
pub const INTERCEPT: &str = "Intercept";

pub fn is_intercept(name: &str) -> bool {
    name.eq_ignore_ascii_case(INTERCEPT)
}

/// Response plus predictors; an intercept is always included.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Formula {
    pub response: String,
    pub predictors: Vec<String>,
}

impl Formula {
    pub fn new<S: Into<String>>(
        response: impl Into<String>,
        predictors: impl IntoIterator<Item = S>,
    ) -> Self {
        Self {
            response: response.into(),
            predictors: predictors.into_iter().map(Into::into).collect(),
        }
    }

    /// Term names in design-column order: intercept first.
    pub fn terms(&self) -> Vec<String> {
        std::iter::once(INTERCEPT.to_string())
            .chain(self.predictors.iter().cloned())
            .collect()
    }

    /// Number of predictors, intercept excluded.
    pub fn m(&self) -> usize {
        self.predictors.len()
    }
}

impl std::fmt::Display for Formula {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ~ {}", self.response, self.predictors.join(" + "))
    }
}

impl std::str::FromStr for Formula {
    type Err = Error;

    /// `y ~ a + b + c`
    fn from_str(s: &str) -> Result<Self> {
        let (lhs, rhs) = s
            .split_once('~')
            .ok_or_else(|| Error::Contract(format!("formula `{s}` has no `~`")))?;
        let predictors: Vec<String> = rhs
            .split('+')
            .map(str::trim)
            .filter(|t| !t.is_empty() && *t != "1")
            .map(String::from)
            .collect();
        Ok(Formula::new(lhs.trim(), predictors))
    }
}

/// Dense design: `x` is n × (m+1) with a leading column of ones.
#[derive(Debug, Clone)]
pub struct Design<T: Real> {
    pub x: DMatrix<T>,
    pub y: DVector<T>,
    pub terms: Vec<String>,
}

impl<T: Real> Design<T> {
    pub fn new(ds: &SpatialDataset<T>, formula: &Formula) -> Result<Self> {
        let n = ds.n();
        let y = DVector::from_column_slice(ds.variable(&formula.response)?);
        let mut cols: Vec<&[T]> = Vec::with_capacity(formula.m());
        for p in &formula.predictors {
            if is_intercept(p) {
                return Err(Error::Contract(
                    "the intercept is implicit; do not list it as a predictor".into(),
                ));
            }
            if *p == formula.response {
                return Err(Error::Contract(format!(
                    "`{p}` is both response and predictor"
                )));
            }
            cols.push(ds.variable(p)?);
        }
        if n < formula.m() + 2 {
            return Err(Error::InsufficientData { n, m: formula.m() });
        }
        let x = DMatrix::from_fn(n, formula.m() + 1, |i, j| {
            if j == 0 {
                T::one()
            } else {
                cols[j - 1][i]
            }
        });
        Ok(Self {
            x,
            y,
            terms: formula.terms(),
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// Number of columns including the intercept.
    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn term_index(&self, name: &str) -> Result<usize> {
        self.terms
            .iter()
            .position(|t| t == name || (is_intercept(name) && is_intercept(t)))
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// Sub-design restricted to the given column indices (response kept).
    pub fn select(&self, columns: &[usize]) -> Design<T> {
        let x = self.x.select_columns(columns.iter());
        Design {
            x,
            y: self.y.clone(),
            terms: columns.iter().map(|&c| self.terms[c].clone()).collect(),
        }
    }

    pub fn with_response(&self, y: DVector<T>) -> Design<T> {
        Design {
            x: self.x.clone(),
            y,
            terms: self.terms.clone(),
        }
    }
}
