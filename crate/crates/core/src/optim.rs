//! One- and low-dimensional minimizers used for bandwidth and covariance
//! parameter searches.

use std::collections::BTreeMap;

use crate::scalar::Real;

fn sanitize<T: Real>(v: T) -> T {
    if v.is_nan() {
        T::infinity()
    } else {
        v
    }
}

/// Golden-section search on `[lo, hi]`. Both endpoints are evaluated as well
/// as the interior probes; returns every evaluation in call order. The
/// caller picks the minimum over all of them, so monotone curves resolve to
/// the boundary.
pub fn golden_section<T: Real, F: FnMut(T) -> T>(mut f: F, lo: T, hi: T, tol: T) -> Vec<(T, T)> {
    let ratio = T::lit(0.618_033_988_749_894_9);
    let mut evals = Vec::new();
    let mut eval = |x: T, evals: &mut Vec<(T, T)>| {
        let v = sanitize(f(x));
        evals.push((x, v));
        v
    };
    eval(lo, &mut evals);
    if hi <= lo {
        return evals;
    }
    eval(hi, &mut evals);

    let (mut a, mut b) = (lo, hi);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = eval(c, &mut evals);
    let mut fd = eval(d, &mut evals);
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = eval(c, &mut evals);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = eval(d, &mut evals);
        }
    }
    evals
}

/// Golden-section search over the integers `lo..=hi`. Probes are rounded to
/// the lattice and cached; once at most three candidates remain they are all
/// evaluated. Returns the evaluations sorted by argument.
pub fn golden_section_integer<T: Real, F: FnMut(usize) -> T>(
    mut f: F,
    lo: usize,
    hi: usize,
) -> Vec<(usize, T)> {
    let ratio = 0.618_033_988_749_894_9_f64;
    let mut memo: BTreeMap<usize, T> = BTreeMap::new();
    let mut eval =
        |x: usize, memo: &mut BTreeMap<usize, T>| *memo.entry(x).or_insert_with(|| sanitize(f(x)));
    eval(lo, &mut memo);
    eval(hi, &mut memo);
    let (mut a, mut b) = (lo, hi);
    while b > a + 2 {
        let span = (b - a) as f64;
        let mut c = (b as f64 - ratio * span).round() as usize;
        let mut d = (a as f64 + ratio * span).round() as usize;
        c = c.clamp(a + 1, b - 1);
        d = d.clamp(a + 1, b - 1);
        if c >= d {
            if d + 1 < b {
                d = c + 1;
            } else {
                c = d - 1;
            }
        }
        if eval(c, &mut memo) <= eval(d, &mut memo) {
            b = d;
        } else {
            a = c;
        }
    }
    for x in a..=b {
        eval(x, &mut memo);
    }
    memo.into_iter().collect()
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult<T> {
    pub x: Vec<T>,
    pub fx: T,
    pub iterations: usize,
    pub converged: bool,
}

/// Nelder–Mead simplex minimization. Converges when the spread of function
/// values across the simplex falls below `ftol` relative to the best value.
pub fn nelder_mead<T: Real, F: FnMut(&[T]) -> T>(
    mut f: F,
    x0: &[T],
    step: &[T],
    ftol: T,
    max_iter: usize,
) -> NelderMeadResult<T> {
    let dim = x0.len();
    let (alpha, gamma, rho, sigma) = (T::one(), T::lit(2.0), T::lit(0.5), T::lit(0.5));
    let mut simplex: Vec<Vec<T>> = vec![x0.to_vec()];
    for i in 0..dim {
        let mut v = x0.to_vec();
        v[i] += step[i];
        simplex.push(v);
    }
    let mut values: Vec<T> = simplex.iter().map(|v| sanitize(f(v))).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| {
            values[a]
                .partial_cmp(&values[b])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let best = values[0];
        let worst = values[dim];
        let scale = best.abs().max(T::lit(1e-12));
        if (worst - best).abs() <= ftol * scale {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<T> = (0..dim)
            .map(|j| {
                simplex[..dim].iter().fold(T::zero(), |acc, v| acc + v[j])
                    / T::from_usize_lossy(dim)
            })
            .collect();
        let along = |t: T| -> Vec<T> {
            (0..dim)
                .map(|j| centroid[j] + t * (simplex[dim][j] - centroid[j]))
                .collect()
        };

        let xr = along(-alpha);
        let fr = sanitize(f(&xr));
        if fr < values[0] {
            let xe = along(-alpha * gamma);
            let fe = sanitize(f(&xe));
            if fe < fr {
                simplex[dim] = xe;
                values[dim] = fe;
            } else {
                simplex[dim] = xr;
                values[dim] = fr;
            }
            continue;
        }
        if fr < values[dim - 1] {
            simplex[dim] = xr;
            values[dim] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[dim] {
            let xc = along(-alpha * rho);
            let fc = sanitize(f(&xc));
            (xc, fc)
        } else {
            let xc = along(rho);
            let fc = sanitize(f(&xc));
            (xc, fc)
        };
        if fc < values[dim].min(fr) {
            simplex[dim] = xc;
            values[dim] = fc;
            continue;
        }
        // shrink towards the best vertex
        for i in 1..=dim {
            let shrunk: Vec<T> = (0..dim)
                .map(|j| simplex[0][j] + sigma * (simplex[i][j] - simplex[0][j]))
                .collect();
            values[i] = sanitize(f(&shrunk));
            simplex[i] = shrunk;
        }
    }

    let best = (0..=dim)
        .min_by(|&a, &b| {
            values[a]
                .partial_cmp(&values[b])
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .unwrap_or(0);
    NelderMeadResult {
        x: simplex[best].clone(),
        fx: values[best],
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argmin<T: PartialOrd + Copy, X: Copy>(evals: &[(X, T)]) -> X {
        evals
            .iter()
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap()
            .0
    }

    #[test]
    fn golden_finds_quadratic_minimum() {
        let evals = golden_section(|x: f64| (x - 3.3).powi(2), 0.0, 10.0, 1e-6);
        assert!((argmin(&evals) - 3.3).abs() < 1e-5);
    }

    #[test]
    fn golden_monotone_hits_boundary() {
        let evals = golden_section(|x: f64| -x, 1.0, 5.0, 1e-3);
        assert_eq!(argmin(&evals), 5.0);
    }

    #[test]
    fn integer_golden_matches_brute_force() {
        for target in [2usize, 3, 17, 40, 98, 99] {
            let f = |x: usize| ((x as f64) - target as f64 - 0.3).abs();
            let evals = golden_section_integer(f, 2, 99);
            let brute = (2..=99)
                .min_by(|&a, &b| f(a).partial_cmp(&f(b)).unwrap())
                .unwrap();
            assert_eq!(argmin(&evals), brute, "target {target}");
            assert!(evals.len() < 30);
        }
    }

    #[test]
    fn integer_golden_tiny_ranges() {
        assert_eq!(golden_section_integer(|x: usize| x as f64, 5, 5).len(), 1);
        assert_eq!(
            golden_section_integer(|x: usize| -(x as f64), 5, 7).len(),
            3
        );
    }

    #[test]
    fn nelder_mead_rosenbrock() {
        let f = |v: &[f64]| (1.0 - v[0]).powi(2) + 100.0 * (v[1] - v[0] * v[0]).powi(2);
        let r = nelder_mead(f, &[-1.2, 1.0], &[0.5, 0.5], 1e-14, 5000);
        assert!(r.converged);
        assert!(
            (r.x[0] - 1.0).abs() < 1e-3 && (r.x[1] - 1.0).abs() < 1e-3,
            "{:?}",
            r.x
        );
    }
}
