#![allow(dead_code)]

use gwr_route::synth::{generate_svc, Layout, SimulationSpec, SurfaceSpec, TermSurface};
use gwr_route::{Dataset, Formula};

pub fn constant(value: f64) -> SurfaceSpec<f64> {
    SurfaceSpec::Constant { value }
}

pub fn bump(extent: f64, amplitude: f64) -> SurfaceSpec<f64> {
    SurfaceSpec::GaussianBump {
        center: [extent / 2.0, extent / 2.0],
        amplitude,
        length_scale: extent / 5.0,
    }
}

pub fn spec(
    n: usize,
    layout: Layout,
    surfaces: &[(&str, SurfaceSpec<f64>)],
    noise_sd: f64,
    seed: u64,
) -> SimulationSpec<f64> {
    SimulationSpec {
        n,
        extent: 1000.0,
        layout,
        surfaces: surfaces
            .iter()
            .map(|(name, surface)| TermSurface {
                name: name.to_string(),
                surface: *surface,
            })
            .collect(),
        predictor_sd: 1.0,
        noise_sd,
        seed,
    }
}

/// `y = 1 + 2 x1 - 0.5 x2 + e` at uniform random locations.
pub fn toy(n: usize, seed: u64) -> (Dataset, Formula) {
    let s = spec(
        n,
        Layout::UniformRandom,
        &[
            ("Intercept", constant(1.0)),
            ("x1", constant(2.0)),
            ("x2", constant(-0.5)),
        ],
        0.5,
        seed,
    );
    let (ds, _) = generate_svc(&s).unwrap();
    (ds, s.formula())
}

/// Intercept and `x2` constant, `x1` a central bump.
pub fn bumpy(n: usize, seed: u64) -> (Dataset, Formula) {
    let s = spec(
        n,
        Layout::UniformRandom,
        &[
            ("Intercept", constant(1.0)),
            ("x1", bump(1000.0, 3.0)),
            ("x2", constant(-0.5)),
        ],
        0.5,
        seed,
    );
    let (ds, _) = generate_svc(&s).unwrap();
    (ds, s.formula())
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol || (a.is_infinite() && a == b)
}

/// Same coordinates and predictors with a new response.
pub fn with_response(ds: &Dataset, f: &Formula, y: Vec<f64>) -> Dataset {
    subset_with(ds, f, &(0..ds.n()).collect::<Vec<_>>(), Some(y))
}

/// The first `k` observations.
pub fn head(ds: &Dataset, f: &Formula, k: usize) -> Dataset {
    subset_with(ds, f, &(0..k).collect::<Vec<_>>(), None)
}

fn subset_with(ds: &Dataset, f: &Formula, rows: &[usize], y: Option<Vec<f64>>) -> Dataset {
    let pick = |v: &[f64]| rows.iter().map(|&i| v[i]).collect::<Vec<_>>();
    let mut b = Dataset::builder()
        .coords(rows.iter().map(|&i| ds.coords()[i]).collect())
        .response(
            f.response.clone(),
            y.unwrap_or_else(|| pick(ds.variable(&f.response).unwrap())),
        );
    for p in &f.predictors {
        b = b.predictor(p.clone(), pick(ds.variable(p).unwrap()));
    }
    b.build().unwrap()
}
