//! Geographically weighted regression toolkit.
//!
//! Five models share one dataset/formula interface: OLS, the spatially
//! autocorrelated error model (SAM), standard GWR, mixed GWR and multiscale
//! GWR. The [`routemap`] module chains them into a model-selection procedure
//! driven by multiscale bandwidths and residual autocorrelation.
//!
//! All estimators are generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what the command-line tool uses.

// `!(a > b)` is used on purpose so that NaN fails the check.
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::type_complexity,
    clippy::too_many_arguments,
    clippy::needless_range_loop
)]

pub mod dataset;
pub mod diagnostics;
pub mod error;
pub mod fit;
pub mod formula;
pub mod global;
pub mod gwr;
pub mod kernel;
pub mod linalg;
pub mod mixed;
pub mod multiscale;
pub mod optim;
pub mod routemap;
pub mod scalar;
pub mod stats;
pub mod synth;

pub use dataset::{apply_transform, center, DistanceMatrix, SpatialDataset, Transform};
pub use error::{Error, Result};
pub use fit::{CoefficientSummary, CoefficientSurface, ModelFit};
pub use formula::{Formula, INTERCEPT};
pub use global::{fit_ols, fit_sam, GlobalFit, SamOptions};
pub use gwr::{aicc, cv_score, fit_gwr, optimize_bandwidth, BandwidthCurve, Criterion, GwrFit};
pub use kernel::{Bandwidth, BandwidthForm, KernelSpec, KernelType};
pub use mixed::{fit_mxgwr, MxGwrFit};
pub use multiscale::{fit_msgwr, msgwr_fixed_bandwidths, MsGwrFit, MsGwrOptions};
pub use routemap::{run_routemap, Recommendation, RouteMapConfig, RouteMapReport};
pub use scalar::Real;

pub type Dataset = SpatialDataset<f64>;
pub type Distances = DistanceMatrix<f64>;
pub type Ols = GlobalFit<f64>;
pub type Gwr = GwrFit<f64>;
pub type MxGwr = MxGwrFit<f64>;
pub type MsGwr = MsGwrFit<f64>;
pub type Fit = ModelFit<f64>;
pub type Report = RouteMapReport<f64>;
pub type Config = RouteMapConfig<f64>;
