//! Point-support regression data: loading, validation, transforms and the
//! pairwise distance index.
//!
//! Row order of the input is the observation index used everywhere else in
//! the crate.

mod distance;
mod io;
mod scaling;

pub use distance::DistanceMatrix;
pub use io::{load_csv, read_csv, ColumnSchema};
pub use scaling::{center, invert_scaling, ScalingDirection, ScalingEntry, ScalingRecord};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Elementwise transform applied to a single variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    NaturalLog,
    Sqrt,
    None,
}

impl Transform {
    pub fn name(self) -> &'static str {
        match self {
            Transform::NaturalLog => "natural_log",
            Transform::Sqrt => "sqrt",
            Transform::None => "none",
        }
    }

    fn admissible<T: Real>(self, v: T) -> bool {
        match self {
            Transform::NaturalLog => v > T::zero(),
            Transform::Sqrt => v >= T::zero(),
            Transform::None => true,
        }
    }

    fn apply<T: Real>(self, v: T) -> T {
        match self {
            Transform::NaturalLog => v.ln(),
            Transform::Sqrt => v.sqrt(),
            Transform::None => v,
        }
    }
}

impl std::str::FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "natural_log" | "ln" | "log" => Ok(Transform::NaturalLog),
            "sqrt" => Ok(Transform::Sqrt),
            "none" => Ok(Transform::None),
            other => Err(Error::Contract(format!("unknown transform `{other}`"))),
        }
    }
}

/// One step of the preprocessing pipeline, in the order it was applied.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum TransformRecord<T> {
    Elementwise {
        variable: String,
        transform: Transform,
    },
    Center {
        variable: String,
        mean: T,
    },
    Standardize {
        variable: String,
        mean: T,
        sd: T,
    },
    Uncenter {
        variable: String,
        mean: T,
    },
    Unstandardize {
        variable: String,
        mean: T,
        sd: T,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable<T> {
    pub name: String,
    pub values: Vec<T>,
}

/// Observations with planar coordinates (metres), one response and named
/// predictors. Immutable once built; every transform returns a new dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialDataset<T> {
    ids: Vec<String>,
    coords: Vec<[T; 2]>,
    response: Variable<T>,
    predictors: Vec<Variable<T>>,
    transform_log: Vec<TransformRecord<T>>,
    allow_identical_columns: bool,
}

#[derive(Debug, Default)]
pub struct DatasetBuilder<T> {
    ids: Option<Vec<String>>,
    coords: Vec<[T; 2]>,
    response: Option<Variable<T>>,
    predictors: Vec<Variable<T>>,
    allow_identical_columns: bool,
}

impl<T: Real> DatasetBuilder<T> {
    pub fn ids(mut self, ids: Vec<String>) -> Self {
        self.ids = Some(ids);
        self
    }

    pub fn coords(mut self, coords: Vec<[T; 2]>) -> Self {
        self.coords = coords;
        self
    }

    pub fn response(mut self, name: impl Into<String>, values: Vec<T>) -> Self {
        self.response = Some(Variable {
            name: name.into(),
            values,
        });
        self
    }

    pub fn predictor(mut self, name: impl Into<String>, values: Vec<T>) -> Self {
        self.predictors.push(Variable {
            name: name.into(),
            values,
        });
        self
    }

    /// Accept byte-identical columns (collinearity is then left to the
    /// estimators and diagnostics to report).
    pub fn allow_identical_columns(mut self, allow: bool) -> Self {
        self.allow_identical_columns = allow;
        self
    }

    pub fn build(self) -> Result<SpatialDataset<T>> {
        let response = self
            .response
            .ok_or_else(|| Error::Contract("dataset needs a response".into()))?;
        let n = self.coords.len();
        let ids = self
            .ids
            .unwrap_or_else(|| (1..=n).map(|i| i.to_string()).collect());
        let ds = SpatialDataset {
            ids,
            coords: self.coords,
            response,
            predictors: self.predictors,
            transform_log: Vec::new(),
            allow_identical_columns: self.allow_identical_columns,
        };
        ds.validate()?;
        Ok(ds)
    }
}

impl<T: Real> SpatialDataset<T> {
    pub fn builder() -> DatasetBuilder<T> {
        DatasetBuilder {
            ids: None,
            coords: Vec::new(),
            response: None,
            predictors: Vec::new(),
            allow_identical_columns: false,
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.coords.len();
        let m = self.predictors.len();
        if self.ids.len() != n {
            return Err(Error::Contract(format!(
                "{} ids for {n} coordinates",
                self.ids.len()
            )));
        }
        for var in std::iter::once(&self.response).chain(&self.predictors) {
            if var.values.len() != n {
                return Err(Error::Contract(format!(
                    "variable `{}` has {} values, expected {n}",
                    var.name,
                    var.values.len()
                )));
            }
            if let Some(row) = var.values.iter().position(|v| !v.is_finite()) {
                return Err(Error::Parse {
                    row: row + 1,
                    column: var.name.clone(),
                    message: "value is not finite".into(),
                });
            }
        }
        if let Some(row) = self
            .coords
            .iter()
            .position(|c| !c[0].is_finite() || !c[1].is_finite())
        {
            return Err(Error::Parse {
                row: row + 1,
                column: "coordinates".into(),
                message: "coordinate is not finite".into(),
            });
        }
        if n < m + 3 {
            return Err(Error::InsufficientData { n, m });
        }
        let mut names: Vec<&str> = self.variable_names();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Contract(format!(
                "duplicate variable name `{}`",
                w[0]
            )));
        }
        if !self.allow_identical_columns {
            for a in 0..m {
                for b in a + 1..m {
                    if self.predictors[a].values == self.predictors[b].values {
                        return Err(Error::Contract(format!(
                            "predictors `{}` and `{}` are identical",
                            self.predictors[a].name, self.predictors[b].name
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.coords.len()
    }

    /// Number of predictors (intercept excluded).
    pub fn m(&self) -> usize {
        self.predictors.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn coords(&self) -> &[[T; 2]] {
        &self.coords
    }

    pub fn response(&self) -> &Variable<T> {
        &self.response
    }

    pub fn predictors(&self) -> &[Variable<T>] {
        &self.predictors
    }

    pub fn transform_log(&self) -> &[TransformRecord<T>] {
        &self.transform_log
    }

    pub fn variable_names(&self) -> Vec<&str> {
        std::iter::once(self.response.name.as_str())
            .chain(self.predictors.iter().map(|p| p.name.as_str()))
            .collect()
    }

    /// Values of the response or a predictor by name.
    pub fn variable(&self, name: &str) -> Result<&[T]> {
        self.variable_ref(name).map(|v| v.values.as_slice())
    }

    fn variable_ref(&self, name: &str) -> Result<&Variable<T>> {
        std::iter::once(&self.response)
            .chain(&self.predictors)
            .find(|v| v.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    fn variable_mut(&mut self, name: &str) -> Result<&mut Variable<T>> {
        if self.response.name == name {
            return Ok(&mut self.response);
        }
        self.predictors
            .iter_mut()
            .find(|v| v.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// Replaces a variable's values and appends to the transform log.
    pub(crate) fn with_variable(
        &self,
        name: &str,
        values: Vec<T>,
        record: TransformRecord<T>,
    ) -> Result<Self> {
        let mut out = self.clone();
        out.variable_mut(name)?.values = values;
        out.transform_log.push(record);
        Ok(out)
    }

    /// Same observations with different coordinates; used by permutation
    /// and synthetic tests.
    pub fn with_coords(&self, coords: Vec<[T; 2]>) -> Result<Self> {
        let mut out = self.clone();
        out.coords = coords;
        out.validate()?;
        Ok(out)
    }

    /// Reorders observations: row `k` of the result is row `order[k]` here.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let n = self.n();
        let mut seen = vec![false; n];
        if order.len() != n
            || order
                .iter()
                .any(|&i| i >= n || std::mem::replace(&mut seen[i], true))
        {
            return Err(Error::Contract("not a permutation of the rows".into()));
        }
        let pick = |v: &Variable<T>| Variable {
            name: v.name.clone(),
            values: order.iter().map(|&i| v.values[i]).collect(),
        };
        Ok(Self {
            ids: order.iter().map(|&i| self.ids[i].clone()).collect(),
            coords: order.iter().map(|&i| self.coords[i]).collect(),
            response: pick(&self.response),
            predictors: self.predictors.iter().map(pick).collect(),
            transform_log: self.transform_log.clone(),
            allow_identical_columns: self.allow_identical_columns,
        })
    }
}

/// Applies an elementwise transform to one variable.
pub fn apply_transform<T: Real>(
    ds: &SpatialDataset<T>,
    variable: &str,
    transform: Transform,
) -> Result<SpatialDataset<T>> {
    let values = ds.variable(variable)?;
    let bad: Vec<usize> = values
        .iter()
        .enumerate()
        .filter(|(_, &v)| !transform.admissible(v))
        .map(|(i, _)| i + 1)
        .collect();
    if !bad.is_empty() {
        return Err(Error::Transform {
            variable: variable.to_string(),
            transform: transform.name().to_string(),
            rows: bad,
        });
    }
    let out: Vec<T> = values.iter().map(|&v| transform.apply(v)).collect();
    ds.with_variable(
        variable,
        out,
        TransformRecord::Elementwise {
            variable: variable.to_string(),
            transform,
        },
    )
}

/// Re-runs a transform log on raw data. Replaying the log of a working
/// dataset on the dataset it was derived from reproduces it exactly.
pub fn replay_log<T: Real>(
    raw: &SpatialDataset<T>,
    log: &[TransformRecord<T>],
) -> Result<SpatialDataset<T>> {
    let mut ds = raw.clone();
    for record in log {
        ds = match record {
            TransformRecord::Elementwise {
                variable,
                transform,
            } => apply_transform(&ds, variable, *transform)?,
            TransformRecord::Center { variable, mean }
            | TransformRecord::Standardize { variable, mean, .. }
            | TransformRecord::Uncenter { variable, mean }
            | TransformRecord::Unstandardize { variable, mean, .. } => {
                let sd = match record {
                    TransformRecord::Standardize { sd, .. }
                    | TransformRecord::Unstandardize { sd, .. } => Some(*sd),
                    _ => None,
                };
                let forward = matches!(
                    record,
                    TransformRecord::Center { .. } | TransformRecord::Standardize { .. }
                );
                let values = ds.variable(variable)?;
                let out = scaling::scale_values(values, *mean, sd, forward);
                ds.with_variable(variable, out, record.clone())?
            }
        };
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SpatialDataset<f64> {
        SpatialDataset::builder()
            .coords(vec![
                [0.0, 0.0],
                [1.0, 0.0],
                [2.0, 0.0],
                [3.0, 1.0],
                [4.0, 2.0],
            ])
            .response("y", vec![1.0, 2.0, 3.0, 5.0, 4.0])
            .predictor("a", vec![25.0, 4.0, 0.0, 9.0, 16.0])
            .predictor("b", vec![1.0, 2.0, 3.0, 4.0, 6.0])
            .build()
            .unwrap()
    }

    #[test]
    fn sqrt_of_perfect_square() {
        let ds = apply_transform(&small(), "a", Transform::Sqrt).unwrap();
        assert_eq!(ds.variable("a").unwrap(), &[5.0, 2.0, 0.0, 3.0, 4.0]);
        assert_eq!(ds.transform_log().len(), 1);
    }

    #[test]
    fn log_identity_and_domain_error() {
        let ds = apply_transform(&small(), "b", Transform::NaturalLog).unwrap();
        assert_eq!(ds.variable("b").unwrap()[0], 0.0);
        match apply_transform(&small(), "a", Transform::NaturalLog) {
            Err(Error::Transform { rows, .. }) => assert_eq!(rows, vec![3]),
            other => panic!("expected transform error, got {other:?}"),
        }
    }

    #[test]
    fn insufficient_rows() {
        let err = SpatialDataset::<f64>::builder()
            .coords(vec![[0.0, 0.0], [1.0, 0.0]])
            .response("y", vec![1.0, 2.0])
            .predictor("x", vec![1.0, 3.0])
            .build()
            .unwrap_err();
        assert!(matches!(err, Error::InsufficientData { n: 2, m: 1 }));
    }

    #[test]
    fn identical_columns_need_opt_in() {
        let b = || {
            SpatialDataset::<f64>::builder()
                .coords(vec![
                    [0.0, 0.0],
                    [1.0, 0.0],
                    [2.0, 0.0],
                    [3.0, 0.0],
                    [4.0, 0.0],
                ])
                .response("y", vec![1.0, 2.0, 3.0, 4.0, 6.0])
                .predictor("x", vec![1.0, 3.0, 2.0, 5.0, 4.0])
                .predictor("x2", vec![1.0, 3.0, 2.0, 5.0, 4.0])
        };
        assert!(b().build().is_err());
        assert!(b().allow_identical_columns(true).build().is_ok());
    }

    #[test]
    fn replay_reproduces_pipeline() {
        let raw = small();
        let t1 = apply_transform(&raw, "a", Transform::Sqrt).unwrap();
        let (t2, _) = center(&t1, &["b"], true).unwrap();
        let t3 = apply_transform(&t2, "y", Transform::NaturalLog).unwrap();
        let replayed = replay_log(&raw, t3.transform_log()).unwrap();
        assert_eq!(replayed, t3);
    }

    #[test]
    fn permutation_checks_input() {
        let ds = small();
        assert!(ds.permuted(&[0, 0, 1, 2, 3]).is_err());
        let p = ds.permuted(&[3, 2, 1, 0, 4]).unwrap();
        assert_eq!(p.variable("y").unwrap(), &[5.0, 3.0, 2.0, 1.0, 4.0]);
        assert_eq!(p.ids()[0], "4");
    }
}
