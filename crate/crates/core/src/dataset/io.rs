use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SpatialDataset;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Maps CSV header names onto dataset roles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    #[serde(default)]
    pub id: Option<String>,
    pub x: String,
    pub y: String,
    pub response: String,
    pub predictors: Vec<String>,
}

pub fn load_csv<T: Real>(
    path: impl AsRef<Path>,
    schema: &ColumnSchema,
) -> Result<SpatialDataset<T>> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file, schema)
}

/// Reads a headed, comma separated table. Rows keep their file order.
pub fn read_csv<T: Real, R: Read>(reader: R, schema: &ColumnSchema) -> Result<SpatialDataset<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };

    let x_col = find(&schema.x)?;
    let y_col = find(&schema.y)?;
    let resp_col = find(&schema.response)?;
    let pred_cols = schema
        .predictors
        .iter()
        .map(|p| find(p))
        .collect::<Result<Vec<_>>>()?;
    let id_col = schema.id.as_deref().map(find).transpose()?;

    let mut ids = Vec::new();
    let mut coords = Vec::new();
    let mut response = Vec::new();
    let mut predictors = vec![Vec::new(); pred_cols.len()];

    for (idx, record) in rdr.records().enumerate() {
        let row = idx + 1;
        let record = record?;
        let cell = |col: usize, name: &str| -> Result<T> {
            let raw = record.get(col).unwrap_or("");
            let parsed: f64 = raw.parse().map_err(|_| Error::Parse {
                row,
                column: name.to_string(),
                message: if raw.is_empty() {
                    "missing value".to_string()
                } else {
                    format!("`{raw}` is not a number")
                },
            })?;
            if !parsed.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: name.to_string(),
                    message: format!("`{raw}` is not finite"),
                });
            }
            Ok(T::lit(parsed))
        };
        coords.push([cell(x_col, &schema.x)?, cell(y_col, &schema.y)?]);
        response.push(cell(resp_col, &schema.response)?);
        for (k, &col) in pred_cols.iter().enumerate() {
            predictors[k].push(cell(col, &schema.predictors[k])?);
        }
        ids.push(match id_col {
            Some(c) => record.get(c).unwrap_or("").to_string(),
            None => row.to_string(),
        });
    }

    if !coords.is_empty()
        && coords
            .iter()
            .all(|c| c[0].abs() <= T::lit(180.0) && c[1].abs() <= T::lit(90.0))
    {
        log::warn!(
            "coordinates look like longitude/latitude degrees; distances assume planar metres"
        );
    }

    let mut builder = SpatialDataset::builder()
        .ids(ids)
        .coords(coords)
        .response(schema.response.clone(), response);
    for (name, values) in schema.predictors.iter().zip(predictors) {
        builder = builder.predictor(name.clone(), values);
    }
    builder.build()
}
