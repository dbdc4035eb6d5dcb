mod common;

use common::{bumpy, close, toy};
use gwr_route::kernel::Bandwidth;
use gwr_route::{
    fit_gwr, fit_msgwr, fit_mxgwr, fit_ols, msgwr_fixed_bandwidths, BandwidthForm, Distances,
    KernelSpec, KernelType, MsGwrOptions,
};
use proptest::prelude::*;

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

#[test]
fn mixed_nesting() {
    let (ds, f) = bumpy(60, 3);
    let dm = Distances::new(&ds);
    let spec = KernelSpec::adaptive(KernelType::Bisquare, 30);
    let all = names(&["Intercept", "x1", "x2"]);
    let g = fit_mxgwr(&ds, &f, &dm, &all, &[], &spec).unwrap();
    let ols = fit_ols(&ds, &f).unwrap();
    for (a, b) in g.global.iter().zip(&ols.coefficients) {
        assert!(close(a.estimate, b.estimate, 1e-8));
        assert!(close(a.std_error, b.std_error, 1e-8));
    }
    assert!(close(g.aicc, ols.aicc, 1e-8));

    let l = fit_mxgwr(&ds, &f, &dm, &[], &all, &spec).unwrap();
    let gwr = fit_gwr(&ds, &f, &dm, &spec).unwrap();
    for (a, b) in l.local_surfaces.iter().zip(&gwr.surfaces) {
        for i in 0..ds.n() {
            assert!(close(a.estimate[i], b.estimate[i], 1e-8));
            assert!(close(a.std_error[i], b.std_error[i], 1e-8));
        }
    }
    assert!(close(l.aicc, gwr.aicc, 1e-8));
}

#[test]
fn mixed_fitted_decomposes() {
    let (ds, f) = bumpy(80, 4);
    let dm = Distances::new(&ds);
    let spec = KernelSpec::adaptive(KernelType::Bisquare, 35);
    let fit = fit_mxgwr(
        &ds,
        &f,
        &dm,
        &names(&["x2"]),
        &names(&["Intercept", "x1"]),
        &spec,
    )
    .unwrap();
    let (x1, x2) = (ds.variable("x1").unwrap(), ds.variable("x2").unwrap());
    for (i, &y) in ds.variable("y").unwrap().iter().enumerate() {
        let mut v = fit.global[0].estimate * x2[i];
        v += fit.local_surfaces[0].estimate[i] + fit.local_surfaces[1].estimate[i] * x1[i];
        assert!(close(v, fit.fitted[i], 1e-8));
        assert!(close(y - fit.fitted[i], fit.residuals[i], 1e-10));
    }
}

#[test]
fn multiscale_boxcar_global_is_ols() {
    let (ds, f) = toy(60, 8);
    let dm = Distances::new(&ds);
    let bws = vec![Bandwidth::Adaptive(ds.n()); 3];
    let fit = msgwr_fixed_bandwidths(
        &ds,
        &f,
        &dm,
        KernelType::Boxcar,
        &bws,
        &MsGwrOptions::default(),
    )
    .unwrap();
    let ols = fit_ols(&ds, &f).unwrap();
    for (s, c) in fit.surfaces.iter().zip(&ols.coefficients) {
        assert!(s.estimate.iter().all(|&b| close(b, c.estimate, 1e-6)));
    }
}

#[test]
fn multiscale_round_trip_through_fixed_bandwidths() {
    let (ds, f) = bumpy(90, 2);
    let dm = Distances::new(&ds);
    let opts = MsGwrOptions::default();
    let fit = fit_msgwr(
        &ds,
        &f,
        &dm,
        KernelType::Bisquare,
        BandwidthForm::Adaptive,
        &opts,
    )
    .unwrap();
    let again =
        msgwr_fixed_bandwidths(&ds, &f, &dm, KernelType::Bisquare, &fit.bandwidths, &opts).unwrap();
    for (a, b) in fit.surfaces.iter().zip(&again.surfaces) {
        for i in 0..ds.n() {
            assert!(close(a.estimate[i], b.estimate[i], 1e-8));
        }
    }
    assert!(close(fit.aicc, again.aicc, 1e-8));
}

#[test]
fn wider_bandwidth_gives_smoother_surface() {
    let (ds, f) = bumpy(100, 6);
    let dm = Distances::new(&ds);
    let var = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
    };
    let narrow = fit_gwr(
        &ds,
        &f,
        &dm,
        &KernelSpec::adaptive(KernelType::Bisquare, 25),
    )
    .unwrap();
    let wide = fit_gwr(
        &ds,
        &f,
        &dm,
        &KernelSpec::adaptive(KernelType::Bisquare, 80),
    )
    .unwrap();
    for k in 0..3 {
        assert!(var(&wide.surfaces[k].estimate) <= var(&narrow.surfaces[k].estimate));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]
    #[test]
    fn multiscale_additive_and_below_starting_rss(seed in 0u64..1000, k0 in 30usize..60, k1 in 20usize..60) {
        let (ds, f) = bumpy(60, seed);
        let dm = Distances::new(&ds);
        let bws = [Bandwidth::Adaptive(k0), Bandwidth::Adaptive(k1), Bandwidth::Adaptive(60)];
        let fit = msgwr_fixed_bandwidths(&ds, &f, &dm, KernelType::Bisquare, &bws, &MsGwrOptions::default()).unwrap();
        let y = ds.variable("y").unwrap();
        for i in 0..ds.n() {
            let s: f64 = fit.components.iter().map(|c| c[i]).sum();
            prop_assert!((s + fit.residuals[i] - y[i]).abs() < 1e-8);
        }
        let start = fit_ols(&ds, &f).unwrap().rss;
        prop_assert!(fit.rss <= start);
    }
}
