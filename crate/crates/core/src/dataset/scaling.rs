use serde::Serialize;

use super::{SpatialDataset, TransformRecord};
use crate::error::{Error, Result};
use crate::scalar::{mean, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingDirection {
    Applied,
    Inverted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingEntry<T> {
    pub variable: String,
    pub mean: T,
    /// Present when the column was also scaled to unit variance.
    pub sd: Option<T>,
}

/// Everything needed to undo a centering/standardization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRecord<T> {
    pub entries: Vec<ScalingEntry<T>>,
    pub direction: ScalingDirection,
}

pub(super) fn scale_values<T: Real>(values: &[T], mean: T, sd: Option<T>, forward: bool) -> Vec<T> {
    values
        .iter()
        .map(|&v| match (sd, forward) {
            (None, true) => v - mean,
            (None, false) => v + mean,
            (Some(s), true) => (v - mean) / s,
            (Some(s), false) => v * s + mean,
        })
        .collect()
}

fn sample_sd<T: Real>(values: &[T], mean: T) -> T {
    let n = values.len();
    if n < 2 {
        return T::zero();
    }
    let ss = values
        .iter()
        .fold(T::zero(), |acc, &v| acc + (v - mean) * (v - mean));
    (ss / T::from_usize_lossy(n - 1)).sqrt()
}

/// Centres the named columns (and scales them to unit sample variance when
/// `standardize` is set).
pub fn center<T: Real>(
    ds: &SpatialDataset<T>,
    vars: &[&str],
    standardize: bool,
) -> Result<(SpatialDataset<T>, ScalingRecord<T>)> {
    let mut out = ds.clone();
    let mut entries = Vec::with_capacity(vars.len());
    for &name in vars {
        let values = ds.variable(name)?;
        let mu = mean(values);
        let sd = if standardize {
            let sd = sample_sd(values, mu);
            if sd <= T::zero() {
                return Err(Error::DegenerateColumn(name.to_string()));
            }
            Some(sd)
        } else {
            None
        };
        let scaled = scale_values(values, mu, sd, true);
        let record = match sd {
            Some(sd) => TransformRecord::Standardize {
                variable: name.to_string(),
                mean: mu,
                sd,
            },
            None => TransformRecord::Center {
                variable: name.to_string(),
                mean: mu,
            },
        };
        out = out.with_variable(name, scaled, record)?;
        entries.push(ScalingEntry {
            variable: name.to_string(),
            mean: mu,
            sd,
        });
    }
    Ok((
        out,
        ScalingRecord {
            entries,
            direction: ScalingDirection::Applied,
        },
    ))
}

/// Undoes a scaling produced by [`center`].
pub fn invert_scaling<T: Real>(
    ds: &SpatialDataset<T>,
    record: &ScalingRecord<T>,
) -> Result<(SpatialDataset<T>, ScalingRecord<T>)> {
    if record.direction != ScalingDirection::Applied {
        return Err(Error::Contract(
            "scaling record was already inverted".into(),
        ));
    }
    let mut out = ds.clone();
    for e in record.entries.iter().rev() {
        let values = out.variable(&e.variable)?;
        let restored = scale_values(values, e.mean, e.sd, false);
        let log = match e.sd {
            Some(sd) => TransformRecord::Unstandardize {
                variable: e.variable.clone(),
                mean: e.mean,
                sd,
            },
            None => TransformRecord::Uncenter {
                variable: e.variable.clone(),
                mean: e.mean,
            },
        };
        out = out.with_variable(&e.variable, restored, log)?;
    }
    Ok((
        out,
        ScalingRecord {
            entries: record.entries.clone(),
            direction: ScalingDirection::Inverted,
        },
    ))
}
