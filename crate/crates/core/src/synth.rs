//! Synthetic spatially varying coefficient data with known truth.
//!
//! Random numbers come from ChaCha8 (`rand_chacha`) seeded with
//! `seed_from_u64`, drawn in a fixed order: coordinates (uniform layout
//! only, `u` then `v` per point), then each predictor's column in term
//! order, then the noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::SpatialDataset;
use crate::error::{Error, Result};
use crate::formula::{is_intercept, Formula};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SurfaceSpec<T> {
    Constant {
        value: T,
    },
    /// `a * u / extent + b * v / extent`.
    LinearTrend {
        a: T,
        b: T,
    },
    /// `amplitude * exp(-|(u, v) - center|^2 / (2 length_scale^2))`.
    GaussianBump {
        center: [T; 2],
        amplitude: T,
        length_scale: T,
    },
}

impl<T: Real> SurfaceSpec<T> {
    pub fn eval(&self, at: [T; 2], extent: T) -> T {
        match *self {
            SurfaceSpec::Constant { value } => value,
            SurfaceSpec::LinearTrend { a, b } => a * at[0] / extent + b * at[1] / extent,
            SurfaceSpec::GaussianBump {
                center,
                amplitude,
                length_scale,
            } => {
                let du = at[0] - center[0];
                let dv = at[1] - center[1];
                amplitude
                    * (-(du * du + dv * dv) / (T::lit(2.0) * length_scale * length_scale)).exp()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// Cell centres of a square grid, filled row by row.
    Grid,
    UniformRandom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermSurface<T> {
    pub name: String,
    pub surface: SurfaceSpec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec<T> {
    pub n: usize,
    /// Side of the square study area, metres.
    pub extent: T,
    pub layout: Layout,
    /// Intercept first, then one entry per predictor.
    pub surfaces: Vec<TermSurface<T>>,
    pub predictor_sd: T,
    pub noise_sd: T,
    pub seed: u64,
}

impl<T: Real> SimulationSpec<T> {
    /// `y ~ x1 + ... + xm` over the named predictor surfaces.
    pub fn formula(&self) -> Formula {
        Formula::new("y", self.surfaces.iter().skip(1).map(|s| s.name.clone()))
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Contract(m));
        if self.n < 25 {
            return bad(format!("simulation needs n >= 25 (got {})", self.n));
        }
        if !(self.extent > T::zero()) {
            return bad("extent must be positive".into());
        }
        match self.surfaces.first() {
            Some(s) if is_intercept(&s.name) => {}
            _ => return bad("the first surface must be the intercept".into()),
        }
        if !(self.predictor_sd > T::zero()) || !(self.noise_sd >= T::zero()) {
            return bad("predictor_sd must be positive and noise_sd nonnegative".into());
        }
        for s in &self.surfaces {
            if let SurfaceSpec::GaussianBump { length_scale, .. } = s.surface {
                if !(length_scale > T::zero()) {
                    return bad(format!(
                        "surface `{}` needs a positive length scale",
                        s.name
                    ));
                }
            }
        }
        Ok(())
    }
}

/// True coefficients at every generated location.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Truth<T> {
    pub terms: Vec<String>,
    /// `coefficients[k][i]` for term `k` at location `i`.
    pub coefficients: Vec<Vec<T>>,
}

impl<T: Real> Truth<T> {
    /// Root mean squared error of an estimated surface for term `k`.
    pub fn rmse(&self, k: usize, estimate: &[T]) -> T {
        let n = T::from_usize_lossy(estimate.len());
        let ss = self.coefficients[k]
            .iter()
            .zip(estimate)
            .fold(T::zero(), |a, (&t, &e)| a + (t - e) * (t - e));
        (ss / n).sqrt()
    }
}

fn normal<T: Real>(sd: T) -> Normal<f64> {
    Normal::new(0.0, sd.as_f64()).expect("validated standard deviation")
}

/// Draws a dataset `y = sum_k beta_k(u, v) x_k + e`.
pub fn generate_svc<T: Real>(spec: &SimulationSpec<T>) -> Result<(SpatialDataset<T>, Truth<T>)> {
    spec.validate()?;
    let n = spec.n;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let extent = spec.extent.as_f64();
    let coords: Vec<[T; 2]> = match spec.layout {
        Layout::Grid => {
            let side = (n as f64).sqrt().ceil() as usize;
            let cell = extent / side as f64;
            (0..n)
                .map(|i| {
                    [
                        T::lit(((i % side) as f64 + 0.5) * cell),
                        T::lit(((i / side) as f64 + 0.5) * cell),
                    ]
                })
                .collect()
        }
        Layout::UniformRandom => (0..n)
            .map(|_| {
                let u = rng.random::<f64>() * extent;
                let v = rng.random::<f64>() * extent;
                [T::lit(u), T::lit(v)]
            })
            .collect(),
    };
    let x_dist = normal(spec.predictor_sd);
    let mut columns: Vec<Vec<T>> = vec![vec![T::one(); n]];
    for _ in 1..spec.surfaces.len() {
        columns.push((0..n).map(|_| T::lit(x_dist.sample(&mut rng))).collect());
    }
    let coefficients: Vec<Vec<T>> = spec
        .surfaces
        .iter()
        .map(|s| {
            coords
                .iter()
                .map(|&c| s.surface.eval(c, spec.extent))
                .collect()
        })
        .collect();
    let noise = if spec.noise_sd > T::zero() {
        let e = normal(spec.noise_sd);
        (0..n).map(|_| T::lit(e.sample(&mut rng))).collect()
    } else {
        vec![T::zero(); n]
    };
    let y: Vec<T> = (0..n)
        .map(|i| {
            let mut v = noise[i];
            for k in 0..columns.len() {
                v += coefficients[k][i] * columns[k][i];
            }
            v
        })
        .collect();
    let mut builder = SpatialDataset::builder().coords(coords).response("y", y);
    for (s, col) in spec.surfaces.iter().zip(&columns).skip(1) {
        builder = builder.predictor(s.name.clone(), col.clone());
    }
    let ds = builder.build()?;
    Ok((
        ds,
        Truth {
            terms: spec.surfaces.iter().map(|s| s.name.clone()).collect(),
            coefficients,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::global::fit_ols;

    fn spec(noise: f64, seed: u64) -> SimulationSpec<f64> {
        SimulationSpec {
            n: 49,
            extent: 1000.0,
            layout: Layout::Grid,
            surfaces: vec![
                TermSurface {
                    name: "Intercept".into(),
                    surface: SurfaceSpec::Constant { value: 2.0 },
                },
                TermSurface {
                    name: "x1".into(),
                    surface: SurfaceSpec::Constant { value: -1.5 },
                },
                TermSurface {
                    name: "x2".into(),
                    surface: SurfaceSpec::Constant { value: 0.25 },
                },
            ],
            predictor_sd: 1.0,
            noise_sd: noise,
            seed,
        }
    }

    #[test]
    fn noiseless_constants_are_recovered_exactly() {
        let s = spec(0.0, 3);
        let (ds, _) = generate_svc(&s).unwrap();
        let fit = fit_ols(&ds, &s.formula()).unwrap();
        for (c, want) in fit.coefficients.iter().zip([2.0, -1.5, 0.25]) {
            assert!((c.estimate - want).abs() < 1e-8);
        }
    }

    #[test]
    fn same_seed_same_data() {
        let (a, _) = generate_svc(&spec(0.5, 11)).unwrap();
        let (b, _) = generate_svc(&spec(0.5, 11)).unwrap();
        let (c, _) = generate_svc(&spec(0.5, 12)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn bump_peaks_at_centre() {
        let b = SurfaceSpec::GaussianBump {
            center: [500.0, 500.0],
            amplitude: 3.0,
            length_scale: 200.0,
        };
        assert_eq!(b.eval([500.0, 500.0], 1000.0), 3.0);
        assert!(b.eval([900.0, 100.0], 1000.0) < 0.1);
    }

    #[test]
    fn rejects_bad_specs() {
        let mut s = spec(0.1, 1);
        s.n = 10;
        assert!(generate_svc(&s).is_err());
        let mut s = spec(0.1, 1);
        s.surfaces.remove(0);
        assert!(generate_svc(&s).is_err());
    }
}
