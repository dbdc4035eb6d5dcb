//! Effective configuration of one command, as read from JSON and flags.

use std::path::{Path, PathBuf};

use gwr_route::dataset::ColumnSchema;
use gwr_route::diagnostics::WeightScheme;
use gwr_route::{
    BandwidthForm, Criterion, KernelType, MsGwrOptions, RouteMapConfig, SamOptions, Transform,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Ols,
    Sam,
    Gwr,
    Mxgwr,
    Msgwr,
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "ols" | "linear" => Ok(ModelKind::Ols),
            "sam" => Ok(ModelKind::Sam),
            "gwr" => Ok(ModelKind::Gwr),
            "mxgwr" | "mx-gwr" | "mixed" => Ok(ModelKind::Mxgwr),
            "msgwr" | "ms-gwr" | "multiscale" => Ok(ModelKind::Msgwr),
            other => Err(format!(
                "unknown model `{other}` (ols, sam, gwr, mxgwr, msgwr)"
            )),
        }
    }
}

/// An elementwise transform applied after loading, before any fit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformStep {
    pub variable: String,
    pub transform: Transform,
}

impl std::str::FromStr for TransformStep {
    type Err = String;

    /// `STN=ln`
    fn from_str(s: &str) -> Result<Self, String> {
        let (variable, t) = s
            .split_once('=')
            .ok_or_else(|| format!("invalid transform `{s}` (expected <column>=ln|sqrt|none)"))?;
        let transform = t.trim().parse::<Transform>().map_err(|e| e.to_string())?;
        Ok(TransformStep {
            variable: variable.trim().to_string(),
            transform,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub id_column: Option<String>,
    pub x_column: String,
    pub y_column: String,
    pub response: Option<String>,
    pub predictors: Vec<String>,
    pub transforms: Vec<TransformStep>,
    pub model: ModelKind,
    pub kernel: KernelType,
    /// `fixed:<metres>` or `adaptive:<count>`.
    pub bandwidth: Option<String>,
    pub bandwidth_search: Option<Criterion>,
    pub bandwidth_form: BandwidthForm,
    pub global_terms: Vec<String>,
    pub local_terms: Vec<String>,
    pub weights: WeightScheme<f64>,
    pub row_standardize: bool,
    pub permutations: usize,
    pub sam: SamOptions<f64>,
    pub msgwr: MsGwrOptions,
    pub routemap: RouteMapConfig<f64>,
    pub out: PathBuf,
    pub geojson: bool,
    pub seed: u64,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            id_column: None,
            x_column: "x".into(),
            y_column: "y".into(),
            response: None,
            predictors: Vec::new(),
            transforms: Vec::new(),
            model: ModelKind::Ols,
            kernel: KernelType::Bisquare,
            bandwidth: None,
            bandwidth_search: None,
            bandwidth_form: BandwidthForm::Fixed,
            global_terms: Vec::new(),
            local_terms: Vec::new(),
            weights: WeightScheme::Knn(8),
            row_standardize: true,
            permutations: 999,
            sam: SamOptions::default(),
            msgwr: MsGwrOptions::default(),
            routemap: RouteMapConfig::default(),
            out: PathBuf::from("."),
            geojson: false,
            seed: 42,
            threads: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
        Self::from_json(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn schema(&self) -> Result<ColumnSchema, CliError> {
        let response = self
            .response
            .clone()
            .ok_or_else(|| CliError::Usage("--response is required".into()))?;
        Ok(ColumnSchema {
            id: self.id_column.clone(),
            x: self.x_column.clone(),
            y: self.y_column.clone(),
            response,
            predictors: self.predictors.clone(),
        })
    }

    pub fn input(&self) -> Result<&Path, CliError> {
        self.input
            .as_deref()
            .ok_or_else(|| CliError::Usage("--input is required".into()))
    }
}
