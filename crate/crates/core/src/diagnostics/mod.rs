//! Residual autocorrelation, collinearity and outlier diagnostics.

mod collinearity;
mod moran;
mod residuals;
mod weights;

pub use collinearity::{
    global_collinearity, local_collinearity, CollinearityReport, GlobalCollinearity,
    LocalCollinearity, CN_THRESHOLD, CORRELATION_THRESHOLD, VDP_THRESHOLD, VIF_THRESHOLD,
};
pub use moran::{
    morans_i, morans_i_permutation, MoranInput, MoranMode, MoranResult, PermutationTest,
};
pub use residuals::{standardized_residuals, studentize, StandardizedResiduals, OUTLIER_THRESHOLD};
pub use weights::{build_weight_matrix, WeightMatrix, WeightScheme};
