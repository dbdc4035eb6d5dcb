//! Soil fixture loading and the published reference values checked by the
//! `acceptance` test target.

use std::path::PathBuf;

use gwr_route::dataset::{load_csv, ColumnSchema};
use gwr_route::{apply_transform, Dataset, Formula, Transform};

pub const FIXTURE_ENV: &str = "GWR_SOIL_CSV";
pub const PRETRANSFORMED_ENV: &str = "GWR_SOIL_PRETRANSFORMED";
pub const X_ENV: &str = "GWR_SOIL_X";
pub const Y_ENV: &str = "GWR_SOIL_Y";

pub const RESPONSE: &str = "STN";
pub const VARIABLES: [&str; 6] = ["SOCgkg", "ClayPC", "SiltPC", "SandPC", "NO3Ngkg", "NH4Ngkg"];

pub fn fixture_path() -> PathBuf {
    std::env::var_os(FIXTURE_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/soil.csv")
        })
}

/// Loads the soil table with every variable, applying the log and square
/// root transforms unless the file already holds transformed values.
/// `Ok(None)` when the file does not exist.
pub fn load_soil() -> gwr_route::Result<Option<Dataset>> {
    let path = fixture_path();
    if !path.exists() {
        return Ok(None);
    }
    let schema = ColumnSchema {
        id: None,
        x: std::env::var(X_ENV).unwrap_or_else(|_| "X".into()),
        y: std::env::var(Y_ENV).unwrap_or_else(|_| "Y".into()),
        response: RESPONSE.into(),
        predictors: VARIABLES.iter().map(|s| s.to_string()).collect(),
    };
    let mut ds: Dataset = load_csv(&path, &schema)?;
    if std::env::var(PRETRANSFORMED_ENV)
        .map(|v| v != "1")
        .unwrap_or(true)
    {
        for v in ["STN", "SOCgkg", "NO3Ngkg", "NH4Ngkg"] {
            ds = apply_transform(&ds, v, Transform::NaturalLog)?;
        }
        ds = apply_transform(&ds, "ClayPC", Transform::Sqrt)?;
    }
    Ok(Some(ds))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Analyst {
    A,
    B,
    C,
    D,
}

pub const ANALYSTS: [Analyst; 4] = [Analyst::A, Analyst::B, Analyst::C, Analyst::D];

/// Linear regression coefficient and p-value, intercept first.
pub type Coef = (&'static str, f64, f64);

#[derive(Debug, Clone, Copy)]
pub struct Reference {
    pub ols: &'static [Coef],
    pub ols_moran: f64,
    pub ols_aicc: f64,
    pub ols_r2: f64,
    /// Fixed MS-GWR bandwidths in metres, intercept first.
    pub msgwr_bandwidths: &'static [f64],
    pub msgwr_moran: f64,
    pub msgwr_moran_p: f64,
    pub msgwr_aicc: f64,
    pub msgwr_r2: f64,
    pub chosen: &'static str,
}

impl Analyst {
    pub fn name(self) -> &'static str {
        match self {
            Analyst::A => "A",
            Analyst::B => "B",
            Analyst::C => "C",
            Analyst::D => "D",
        }
    }

    pub fn predictors(self) -> &'static [&'static str] {
        match self {
            Analyst::A => &["SOCgkg", "ClayPC", "SiltPC", "NO3Ngkg", "NH4Ngkg"],
            Analyst::B => &["SandPC", "NO3Ngkg"],
            Analyst::C => &["SOCgkg", "NH4Ngkg"],
            Analyst::D => &["SOCgkg", "SandPC", "NO3Ngkg"],
        }
    }

    pub fn formula(self) -> Formula {
        Formula::new(RESPONSE, self.predictors().iter().copied())
    }

    pub fn reference(self) -> Reference {
        match self {
            Analyst::A => Reference {
                ols: &[
                    ("Intercept", -2.220, 0.000),
                    ("SOCgkg", 0.690, 0.000),
                    ("ClayPC", -0.011, 0.843),
                    ("SiltPC", 0.015, 0.000),
                    ("NO3Ngkg", 0.126, 0.000),
                    ("NH4Ngkg", -0.146, 0.047),
                ],
                ols_moran: 0.142,
                ols_aicc: 1124.0,
                ols_r2: 0.609,
                msgwr_bandwidths: &[555.9, 2483.9, 3741.7, 1080.8, 382.5, 3741.7],
                msgwr_moran: -0.007,
                msgwr_moran_p: 0.604,
                msgwr_aicc: 1050.4,
                msgwr_r2: 0.713,
                chosen: "MX-GWR",
            },
            Analyst::B => Reference {
                ols: &[
                    ("Intercept", -0.723, 0.000),
                    ("SandPC", -0.021, 0.000),
                    ("NO3Ngkg", 0.355, 0.000),
                ],
                ols_moran: 0.174,
                ols_aicc: 1377.4,
                ols_r2: 0.430,
                msgwr_bandwidths: &[445.8, 1232.9, 731.9],
                msgwr_moran: -0.013,
                msgwr_moran_p: 0.700,
                msgwr_aicc: 1264.4,
                msgwr_r2: 0.580,
                chosen: "MS-GWR",
            },
            Analyst::C => Reference {
                ols: &[
                    ("Intercept", -2.130, 0.000),
                    ("SOCgkg", 0.918, 0.000),
                    ("NH4Ngkg", -0.011, 0.884),
                ],
                ols_moran: 0.219,
                ols_aicc: 1223.1,
                ols_r2: 0.545,
                msgwr_bandwidths: &[424.9, 3741.4, 3741.8],
                msgwr_moran: 0.005,
                msgwr_moran_p: 0.381,
                msgwr_aicc: 1106.8,
                msgwr_r2: 0.662,
                chosen: "SAM",
            },
            Analyst::D => Reference {
                ols: &[
                    ("Intercept", -1.437, 0.000),
                    ("SOCgkg", 0.683, 0.000),
                    ("SandPC", -0.012, 0.000),
                    ("NO3Ngkg", 0.112, 0.000),
                ],
                ols_moran: 0.144,
                ols_aicc: 1131.0,
                ols_r2: 0.603,
                msgwr_bandwidths: &[573.6, 2214.6, 1066.5, 378.4],
                msgwr_moran: -0.009,
                msgwr_moran_p: 0.636,
                msgwr_aicc: 1057.4,
                msgwr_r2: 0.708,
                chosen: "MS-GWR",
            },
        }
    }
}

/// Adaptive MS-GWR bandwidths for analyst A, intercept first.
pub const ANALYST_A_ADAPTIVE: [usize; 6] = [57, 631, 685, 306, 55, 685];

/// Standard GWR for analyst B: bisquare fixed bandwidth and its AICc.
pub const ANALYST_B_GWR: (f64, f64) = (597.5, 1272.3);

/// MX-GWR for analyst A at 700 m: global coefficients.
pub const ANALYST_A_MXGWR_GLOBAL: [(&str, f64); 3] =
    [("SOCgkg", 0.677), ("ClayPC", -0.016), ("NH4Ngkg", -0.193)];
pub const ANALYST_A_MXGWR_LOCAL: [&str; 3] = ["Intercept", "SiltPC", "NO3Ngkg"];
pub const ANALYST_A_MXGWR_BANDWIDTH: f64 = 700.0;
pub const ANALYST_A_MXGWR_AICC: f64 = 1065.9;

/// SAM for analyst C: coefficients with p-values, and AICc.
pub const ANALYST_C_SAM: [Coef; 3] = [
    ("Intercept", -1.817, 0.000),
    ("SOCgkg", 0.816, 0.000),
    ("NH4Ngkg", -0.086, 0.284),
];
pub const ANALYST_C_SAM_AICC: f64 = 1148.4;

/// Whether `ours` orders every pair the way `reference` does. Reference
/// values within `tie` (relative) of each other may come in either order.
pub fn same_order(reference: &[f64], ours: &[f64], tie: f64) -> bool {
    reference.len() == ours.len()
        && (0..reference.len()).all(|i| {
            (0..reference.len()).all(|j| {
                let (a, b) = (reference[i], reference[j]);
                (a - b).abs() <= tie * a.abs().max(b.abs()) || (a < b) == (ours[i] < ours[j])
            })
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tables_are_consistent() {
        for a in ANALYSTS {
            let r = a.reference();
            assert_eq!(r.ols.len(), a.predictors().len() + 1);
            assert_eq!(r.msgwr_bandwidths.len(), a.predictors().len() + 1);
            assert_eq!(r.ols[0].0, "Intercept");
            for (c, p) in r.ols[1..].iter().zip(a.predictors()) {
                assert_eq!(c.0, *p);
            }
        }
    }

    #[test]
    fn order_ignores_reference_ties() {
        assert!(same_order(
            &[3.0, 1.0, 3.0, 2.0],
            &[5.0, 0.0, 4.0, 1.0],
            0.01
        ));
        assert!(!same_order(
            &[3.0, 1.0, 3.0, 2.0],
            &[5.0, 2.0, 4.0, 1.0],
            0.01
        ));
    }
}
