mod common;

use common::{close, toy, with_response};
use gwr_route::formula::Design;
use gwr_route::global::NuggetMode;
use gwr_route::{fit_ols, fit_sam, Dataset, Distances, Formula, SamOptions};
use nalgebra::DVector;
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

#[test]
fn ols_matches_qr_oracle() {
    let (ds, f) = toy(90, 21);
    let fit = fit_ols(&ds, &f).unwrap();
    let d = Design::new(&ds, &f).unwrap();
    let qr = d.x.clone().qr();
    let beta = qr
        .r()
        .solve_upper_triangular(&(qr.q().transpose() * &d.y))
        .unwrap();
    let e = &d.y - &d.x * &beta;
    let (n, p) = (ds.n() as f64, 3.0);
    let sigma2 = e.dot(&e) / (n - p);
    let cov = (d.x.transpose() * &d.x).try_inverse().unwrap() * sigma2;
    let t = StudentsT::new(0.0, 1.0, n - p).unwrap();
    for (k, c) in fit.coefficients.iter().enumerate() {
        assert!(close(c.estimate, beta[k], 1e-10));
        let se = cov[(k, k)].sqrt();
        assert!(close(c.std_error, se, 1e-10));
        let pv = 2.0 * t.sf((beta[k] / se).abs());
        assert!(close(c.p_value, pv, 1e-10));
    }
    let ybar = d.y.mean();
    let tss: f64 = d.y.iter().map(|v| (v - ybar).powi(2)).sum();
    assert!(close(fit.r_squared, 1.0 - e.dot(&e) / tss, 1e-12));
    let s = (e.dot(&e) / n).sqrt();
    let aicc =
        2.0 * n * s.ln() + n * (2.0 * std::f64::consts::PI).ln() + n * (n + p) / (n - 2.0 - p);
    assert!(close(fit.aicc, aicc, 1e-9));
}

#[test]
fn response_as_its_own_predictor_is_degenerate() {
    let (ds, _) = toy(40, 2);
    let y = ds.variable("y").unwrap().to_vec();
    let ds2 = Dataset::builder()
        .coords(ds.coords().to_vec())
        .response("y", y.clone())
        .predictor("ycopy", y)
        .build()
        .unwrap();
    let fit = fit_ols(&ds2, &Formula::new("y", ["ycopy"])).unwrap();
    assert!(fit.degenerate);
    assert!(fit.rss < 1e-20);
}

#[test]
fn collinear_design_names_columns() {
    let (ds, _) = toy(40, 2);
    let x1 = ds.variable("x1").unwrap().to_vec();
    let ds2 = Dataset::builder()
        .coords(ds.coords().to_vec())
        .response("y", ds.variable("y").unwrap().to_vec())
        .predictor("x1", x1.clone())
        .predictor("x1twice", x1.iter().map(|v| 2.0 * v).collect())
        .build()
        .unwrap();
    let err = fit_ols(&ds2, &Formula::new("y", ["x1", "x1twice"])).unwrap_err();
    assert!(err.to_string().contains("x1"), "{err}");
}

#[test]
fn sam_with_pure_nugget_is_ols() {
    let (ds, f) = toy(60, 5);
    let dm = Distances::new(&ds);
    let opts = SamOptions {
        nugget: NuggetMode::Fixed(1.0),
        ..Default::default()
    };
    let sam = fit_sam(&ds, &f, &dm, &opts).unwrap();
    let ols = fit_ols(&ds, &f).unwrap();
    for (a, b) in sam.coefficients.iter().zip(&ols.coefficients) {
        assert!(close(a.estimate, b.estimate, 1e-8));
    }
}

#[test]
fn sam_finds_spatially_correlated_errors() {
    let (ds, f) = toy(80, 17);
    // add a smooth spatial field to the errors
    let y: Vec<f64> = ds
        .variable("y")
        .unwrap()
        .iter()
        .zip(ds.coords())
        .map(|(v, c)| v + 1.5 * (c[0] / 250.0).sin() * (c[1] / 300.0).cos())
        .collect();
    let ds = with_response(&ds, &f, y);
    let dm = Distances::new(&ds);
    let sam = fit_sam(&ds, &f, &dm, &SamOptions::default()).unwrap();
    let ols = fit_ols(&ds, &f).unwrap();
    let cov = sam.covariance.as_ref().unwrap();
    assert!(cov.nugget_proportion < 0.95);
    assert!(sam.aicc < ols.aicc);
    for c in &sam.coefficients {
        assert!((0.0..=1.0).contains(&c.p_value));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn residuals_orthogonal_and_slopes_shift_invariant(seed in 0u64..5000, shift in -50.0f64..50.0) {
        let (ds, f) = toy(40, seed);
        let fit = fit_ols(&ds, &f).unwrap();
        let d = Design::new(&ds, &f).unwrap();
        let e = DVector::from_column_slice(&fit.residuals);
        prop_assert!((d.x.transpose() * &e).norm() < 1e-8 * d.x.norm() * e.norm());

        let shifted = Dataset::builder()
            .coords(ds.coords().to_vec())
            .response("y", ds.variable("y").unwrap().to_vec())
            .predictor("x1", ds.variable("x1").unwrap().iter().map(|v| v + shift).collect())
            .predictor("x2", ds.variable("x2").unwrap().to_vec())
            .build()
            .unwrap();
        let g = fit_ols(&shifted, &f).unwrap();
        for k in 1..3 {
            prop_assert!((g.coefficients[k].estimate - fit.coefficients[k].estimate).abs() < 1e-10 * (1.0 + shift.abs()));
        }
    }
}
