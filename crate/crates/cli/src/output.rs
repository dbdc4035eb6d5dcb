//! Surface CSV, GeoJSON and JSON report writers.

use std::io::Write;
use std::path::Path;

use gwr_route::{CoefficientSurface, ModelFit};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::CliError;

/// Significance level of the `sig_` columns.
pub const SURFACE_ALPHA: f64 = 0.05;

/// Column order of a surface file: `x, y`, then five columns per term.
/// Coordinates and the coefficient surfaces read back from a surface CSV.
pub type SurfaceTable = (Vec<[f64; 2]>, Vec<CoefficientSurface<f64>>);

pub fn surface_header(surfaces: &[CoefficientSurface<f64>]) -> Vec<String> {
    let mut header = vec!["x".to_string(), "y".to_string()];
    for s in surfaces {
        for prefix in ["beta", "se", "t", "p", "sig"] {
            header.push(format!("{prefix}_{}", s.term));
        }
    }
    header
}

fn check_lengths(
    coords: &[[f64; 2]],
    surfaces: &[CoefficientSurface<f64>],
) -> Result<(), CliError> {
    if surfaces.is_empty() {
        return Err(CliError::Contract(
            "no coefficient surfaces to write".into(),
        ));
    }
    if let Some(s) = surfaces.iter().find(|s| s.len() != coords.len()) {
        return Err(CliError::Contract(format!(
            "surface `{}` has {} values for {} locations",
            s.term,
            s.len(),
            coords.len()
        )));
    }
    Ok(())
}

pub fn write_surfaces_csv(
    coords: &[[f64; 2]],
    surfaces: &[CoefficientSurface<f64>],
    path: &Path,
) -> Result<(), CliError> {
    check_lengths(coords, surfaces)?;
    let io = |e: std::io::Error| CliError::Io(path.to_path_buf(), e);
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Csv(path.to_path_buf(), e))?;
    let csv_err = |e: csv::Error| CliError::Csv(path.to_path_buf(), e);
    w.write_record(surface_header(surfaces)).map_err(csv_err)?;
    let mut row = Vec::new();
    for (i, c) in coords.iter().enumerate() {
        row.clear();
        row.push(c[0].to_string());
        row.push(c[1].to_string());
        for s in surfaces {
            row.push(s.estimate[i].to_string());
            row.push(s.std_error[i].to_string());
            row.push(s.t_value[i].to_string());
            row.push(s.p_value[i].to_string());
            row.push(u8::from(s.p_value[i] < SURFACE_ALPHA).to_string());
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(io)
}

/// Writes the per-location surfaces of a local fit. Global fits have none.
pub fn write_surface_csv(fit: &ModelFit<f64>, path: &Path) -> Result<(), CliError> {
    let (Some(coords), Some(surfaces)) = (fit.coords(), fit.surfaces()) else {
        return Err(CliError::Contract(format!(
            "{} fit has no coefficient surfaces",
            fit.label()
        )));
    };
    write_surfaces_csv(coords, &surfaces, path)
}

/// Reads a surface file back into coordinates and surfaces.
pub fn read_surface_csv(path: &Path) -> Result<SurfaceTable, CliError> {
    let csv_err = |e: csv::Error| CliError::Csv(path.to_path_buf(), e);
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header: Vec<String> = r
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();
    let bad = |m: String| CliError::Contract(format!("{}: {m}", path.display()));
    if header.len() < 2
        || header[0] != "x"
        || header[1] != "y"
        || !(header.len() - 2).is_multiple_of(5)
    {
        return Err(bad("not a surface file".into()));
    }
    let terms: Vec<String> = header[2..]
        .chunks(5)
        .map(|c| c[0].strip_prefix("beta_").map(str::to_string))
        .collect::<Option<_>>()
        .ok_or_else(|| bad("malformed surface header".into()))?;
    let mut coords = Vec::new();
    let mut surfaces: Vec<CoefficientSurface<f64>> = terms
        .iter()
        .map(|t| CoefficientSurface {
            term: t.clone(),
            estimate: Vec::new(),
            std_error: Vec::new(),
            t_value: Vec::new(),
            p_value: Vec::new(),
        })
        .collect();
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let num = |j: usize| -> Result<f64, CliError> {
            rec.get(j).unwrap_or("").parse().map_err(|_| {
                bad(format!(
                    "row {}: column {} is not a number",
                    row + 1,
                    header[j]
                ))
            })
        };
        coords.push([num(0)?, num(1)?]);
        for (k, s) in surfaces.iter_mut().enumerate() {
            let base = 2 + 5 * k;
            s.estimate.push(num(base)?);
            s.std_error.push(num(base + 1)?);
            s.t_value.push(num(base + 2)?);
            s.p_value.push(num(base + 3)?);
        }
    }
    Ok((coords, surfaces))
}

fn finite_or_null(v: f64) -> Value {
    serde_json::Number::from_f64(v)
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

/// Point features carrying the same properties as the surface CSV.
pub fn write_geojson(
    coords: &[[f64; 2]],
    surfaces: &[CoefficientSurface<f64>],
    path: &Path,
) -> Result<(), CliError> {
    check_lengths(coords, surfaces)?;
    let features: Vec<Value> = coords
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mut props = Map::new();
            for s in surfaces {
                props.insert(format!("beta_{}", s.term), finite_or_null(s.estimate[i]));
                props.insert(format!("se_{}", s.term), finite_or_null(s.std_error[i]));
                props.insert(format!("t_{}", s.term), finite_or_null(s.t_value[i]));
                props.insert(format!("p_{}", s.term), finite_or_null(s.p_value[i]));
                props.insert(
                    format!("sig_{}", s.term),
                    json!(u8::from(s.p_value[i] < SURFACE_ALPHA)),
                );
            }
            json!({
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [c[0], c[1]]},
                "properties": Value::Object(props),
            })
        })
        .collect();
    let doc = json!({"type": "FeatureCollection", "features": features});
    write_bytes(
        path,
        serde_json::to_string_pretty(&doc)
            .expect("valid json")
            .as_bytes(),
    )
}

#[derive(Serialize)]
struct Envelope<'a, C: Serialize, P: Serialize> {
    software: &'static str,
    version: &'static str,
    /// Seconds since the Unix epoch; `SOURCE_DATE_EPOCH` overrides the clock.
    timestamp: u64,
    command: &'a str,
    seed: u64,
    config: &'a C,
    result: &'a P,
}

pub fn timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or_else(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        })
}

/// Writes a report with the software version, a timestamp, the seed and
/// the effective configuration.
pub fn write_report_json<C: Serialize, P: Serialize>(
    command: &str,
    seed: u64,
    config: &C,
    result: &P,
    path: &Path,
) -> Result<(), CliError> {
    let env = Envelope {
        software: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        timestamp: timestamp(),
        command,
        seed,
        config,
        result,
    };
    let text = serde_json::to_string_pretty(&env)
        .map_err(|e| CliError::Contract(format!("serialization: {e}")))?;
    write_bytes(path, text.as_bytes())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut f = std::fs::File::create(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    f.write_all(bytes)
        .and_then(|_| f.write_all(b"\n"))
        .map_err(|e| CliError::Io(path.to_path_buf(), e))
}

/// Bandwidth curve as `bandwidth,criterion,enp` rows.
pub fn write_curve_csv(
    curve: &gwr_route::BandwidthCurve<f64>,
    path: &Path,
) -> Result<(), CliError> {
    let csv_err = |e: csv::Error| CliError::Csv(path.to_path_buf(), e);
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let name = match curve.criterion {
        gwr_route::Criterion::Aicc => "aicc",
        gwr_route::Criterion::Cv => "cv",
    };
    w.write_record(["bandwidth", name, "enp"])
        .map_err(csv_err)?;
    for p in &curve.points {
        w.write_record([
            p.bandwidth.to_string(),
            p.value.to_string(),
            p.enp.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::Io(path.to_path_buf(), e))
}
