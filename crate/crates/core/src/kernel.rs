//! Distance-decay kernels and bandwidths.
//!
//! Discontinuous kernels (bisquare, boxcar, tricube) use the strict support
//! `d < b`, so every one of them is exactly zero at `d = b`. Adaptive
//! bandwidths count the calibration point itself as the nearest neighbour;
//! an adaptive boxcar covers exactly the N nearest points.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::DistanceMatrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelType {
    Bisquare,
    Boxcar,
    Tricube,
    Gaussian,
    Exponential,
}

impl KernelType {
    pub const ALL: [KernelType; 5] = [
        KernelType::Bisquare,
        KernelType::Boxcar,
        KernelType::Tricube,
        KernelType::Gaussian,
        KernelType::Exponential,
    ];

    /// Compact support (zero weight beyond the bandwidth).
    pub fn is_discontinuous(self) -> bool {
        matches!(
            self,
            KernelType::Bisquare | KernelType::Boxcar | KernelType::Tricube
        )
    }

    fn name(self) -> &'static str {
        match self {
            KernelType::Bisquare => "bisquare",
            KernelType::Boxcar => "boxcar",
            KernelType::Tricube => "tricube",
            KernelType::Gaussian => "gaussian",
            KernelType::Exponential => "exponential",
        }
    }
}

impl fmt::Display for KernelType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        KernelType::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Contract(format!("unknown kernel `{s}`")))
    }
}

/// Bandwidth as a distance (metres) or as a nearest-neighbour count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth<T> {
    Fixed(T),
    Adaptive(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthForm {
    Fixed,
    Adaptive,
}

impl FromStr for BandwidthForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(BandwidthForm::Fixed),
            "adaptive" => Ok(BandwidthForm::Adaptive),
            other => Err(Error::Contract(format!("unknown bandwidth form `{other}`"))),
        }
    }
}

impl<T: Real> Bandwidth<T> {
    pub fn form(&self) -> BandwidthForm {
        match self {
            Bandwidth::Fixed(_) => BandwidthForm::Fixed,
            Bandwidth::Adaptive(_) => BandwidthForm::Adaptive,
        }
    }

    /// Bandwidth as a single real (metres or neighbour count).
    pub fn value(&self) -> T {
        match *self {
            Bandwidth::Fixed(b) => b,
            Bandwidth::Adaptive(k) => T::from_usize_lossy(k),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match *self {
            Bandwidth::Fixed(b) if !(b > T::zero()) || !b.is_finite() => Err(Error::Bandwidth(
                format!("fixed bandwidth must be positive and finite, got {b}"),
            )),
            Bandwidth::Adaptive(k) if k == 0 || k > n => Err(Error::Bandwidth(format!(
                "adaptive bandwidth must lie in 1..={n}, got {k}"
            ))),
            _ => Ok(()),
        }
    }
}

impl<T: Real> fmt::Display for Bandwidth<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bandwidth::Fixed(b) => write!(f, "fixed:{b}"),
            Bandwidth::Adaptive(k) => write!(f, "adaptive:{k}"),
        }
    }
}

impl<T: Real> FromStr for Bandwidth<T> {
    type Err = Error;

    /// Parses `fixed:<metres>` or `adaptive:<count>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::Contract(format!(
                "bandwidth `{s}` is not fixed:<metres> or adaptive:<count>"
            ))
        };
        let (form, value) = s.split_once(':').ok_or_else(bad)?;
        match form {
            "fixed" => {
                let v: f64 = value.parse().map_err(|_| bad())?;
                Ok(Bandwidth::Fixed(T::lit(v)))
            }
            "adaptive" => Ok(Bandwidth::Adaptive(value.parse().map_err(|_| bad())?)),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec<T> {
    pub kernel: KernelType,
    pub bandwidth: Bandwidth<T>,
}

impl<T: Real> KernelSpec<T> {
    pub fn new(kernel: KernelType, bandwidth: Bandwidth<T>) -> Self {
        Self { kernel, bandwidth }
    }

    pub fn fixed(kernel: KernelType, distance: T) -> Self {
        Self::new(kernel, Bandwidth::Fixed(distance))
    }

    pub fn adaptive(kernel: KernelType, count: usize) -> Self {
        Self::new(kernel, Bandwidth::Adaptive(count))
    }
}

/// Weight at distance `d` for effective bandwidth distance `b`.
pub fn kernel_weight<T: Real>(d: T, b: T, kernel: KernelType) -> Result<T> {
    if !(b > T::zero()) {
        return Err(Error::Bandwidth(format!(
            "bandwidth distance must be positive, got {b}"
        )));
    }
    Ok(weight_unchecked(d, b, kernel))
}

#[inline]
pub(crate) fn weight_unchecked<T: Real>(d: T, b: T, kernel: KernelType) -> T {
    let one = T::one();
    let r = d / b;
    match kernel {
        KernelType::Bisquare => {
            if r < one {
                let t = one - r * r;
                t * t
            } else {
                T::zero()
            }
        }
        KernelType::Boxcar => {
            if r < one {
                one
            } else {
                T::zero()
            }
        }
        KernelType::Tricube => {
            if r < one {
                let t = one - r * r * r;
                t * t * t
            } else {
                T::zero()
            }
        }
        KernelType::Gaussian => (-T::lit(0.5) * r * r).exp(),
        KernelType::Exponential => (-r).exp(),
    }
}

/// Effective bandwidth distance at calibration location `i`.
pub fn effective_distance<T: Real>(
    i: usize,
    dm: &DistanceMatrix<T>,
    bw: &Bandwidth<T>,
) -> Result<T> {
    bw.validate(dm.n())?;
    Ok(match *bw {
        Bandwidth::Fixed(b) => b,
        Bandwidth::Adaptive(k) => dm.kth_neighbour_distance(i, k),
    })
}

/// Kernel weights of every observation for calibration location `i`.
///
/// When an adaptive window collapses onto coincident points (effective
/// distance zero) the limiting weights are used: one at distance zero, zero
/// elsewhere.
pub fn weights_for_location<T: Real>(
    i: usize,
    dm: &DistanceMatrix<T>,
    spec: &KernelSpec<T>,
) -> Result<Vec<T>> {
    if i >= dm.n() {
        return Err(Error::Contract(format!(
            "location {i} out of range (n = {})",
            dm.n()
        )));
    }
    let b = effective_distance(i, dm, &spec.bandwidth)?;
    let row = dm.row(i);
    if b == T::zero() {
        return Ok(row
            .iter()
            .map(|&d| if d == T::zero() { T::one() } else { T::zero() })
            .collect());
    }
    if matches!(spec.bandwidth, Bandwidth::Adaptive(_)) && spec.kernel == KernelType::Boxcar {
        // the adaptive window holds the N nearest points, the N-th included
        return Ok(row
            .iter()
            .map(|&d| if d <= b { T::one() } else { T::zero() })
            .collect());
    }
    Ok(row
        .iter()
        .map(|&d| weight_unchecked(d, b, spec.kernel))
        .collect())
}

/// Fails when fewer than `required` weights are nonzero.
pub fn check_neighbourhood<T: Real>(location: usize, weights: &[T], required: usize) -> Result<()> {
    let nonzero = weights.iter().filter(|&&w| w > T::zero()).count();
    if nonzero < required {
        return Err(Error::SingularNeighbourhood {
            location,
            nonzero,
            required,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bisquare_values() {
        assert_eq!(kernel_weight(0.0, 2.0, KernelType::Bisquare).unwrap(), 1.0);
        assert_eq!(
            kernel_weight(1.0, 2.0, KernelType::Bisquare).unwrap(),
            0.5625
        );
        assert_eq!(kernel_weight(2.0, 2.0, KernelType::Bisquare).unwrap(), 0.0);
    }

    #[test]
    fn boundary_is_exclusive() {
        for k in [
            KernelType::Boxcar,
            KernelType::Tricube,
            KernelType::Bisquare,
        ] {
            assert_eq!(kernel_weight(3.0, 3.0, k).unwrap(), 0.0, "{k}");
        }
        assert_eq!(kernel_weight(2.999, 3.0, KernelType::Boxcar).unwrap(), 1.0);
    }

    #[test]
    fn unit_weight_at_zero_distance() {
        for k in KernelType::ALL {
            assert_eq!(kernel_weight(0.0f64, 10.0, k).unwrap(), 1.0, "{k}");
        }
    }

    #[test]
    fn nonpositive_bandwidth_rejected() {
        assert!(matches!(
            kernel_weight(1.0, 0.0, KernelType::Gaussian),
            Err(Error::Bandwidth(_))
        ));
        assert!(kernel_weight(1.0, -2.0, KernelType::Boxcar).is_err());
    }

    #[test]
    fn adaptive_full_window_boxcar_is_all_ones() {
        let pts: Vec<[f64; 2]> = (0..7).map(|i| [i as f64 * 10.0, (i % 3) as f64]).collect();
        let dm = DistanceMatrix::from_coords(&pts);
        for i in 0..7 {
            let w =
                weights_for_location(i, &dm, &KernelSpec::adaptive(KernelType::Boxcar, 7)).unwrap();
            assert!(w.iter().all(|&x| x == 1.0), "location {i}: {w:?}");
        }
    }

    #[test]
    fn adaptive_one_is_self_only() {
        let pts: Vec<[f64; 2]> = (0..5).map(|i| [i as f64, 0.0]).collect();
        let dm = DistanceMatrix::from_coords(&pts);
        let w =
            weights_for_location(2, &dm, &KernelSpec::adaptive(KernelType::Bisquare, 1)).unwrap();
        assert_eq!(w, vec![0.0, 0.0, 1.0, 0.0, 0.0]);
        assert!(check_neighbourhood(2, &w, 3).is_err());
    }

    #[test]
    fn adaptive_three_on_a_line() {
        // points at x = 0..4; from x = 0 the 3rd nearest (self included) is at 2
        let pts: Vec<[f64; 2]> = (0..5).map(|i| [i as f64, 0.0]).collect();
        let dm = DistanceMatrix::from_coords(&pts);
        let w =
            weights_for_location(0, &dm, &KernelSpec::adaptive(KernelType::Bisquare, 3)).unwrap();
        let expect: Vec<f64> = [0.0f64, 1.0, 2.0, 3.0, 4.0]
            .iter()
            .map(|&d| {
                if d < 2.0 {
                    (1.0 - (d / 2.0).powi(2)).powi(2)
                } else {
                    0.0
                }
            })
            .collect();
        assert_eq!(w, expect);
        assert_eq!(w[1], 0.5625);
    }

    #[test]
    fn adaptive_count_out_of_range() {
        let dm = DistanceMatrix::from_coords(&[[0.0f64, 0.0], [1.0, 0.0], [2.0, 0.0]]);
        assert!(
            weights_for_location(0, &dm, &KernelSpec::adaptive(KernelType::Bisquare, 4)).is_err()
        );
        assert!(
            weights_for_location(0, &dm, &KernelSpec::adaptive(KernelType::Bisquare, 0)).is_err()
        );
    }

    #[test]
    fn bandwidth_parsing() {
        assert_eq!(
            "fixed:597.5".parse::<Bandwidth<f64>>().unwrap(),
            Bandwidth::Fixed(597.5)
        );
        assert_eq!(
            "adaptive:60".parse::<Bandwidth<f64>>().unwrap(),
            Bandwidth::Adaptive(60)
        );
        assert!("adaptive:6.5".parse::<Bandwidth<f64>>().is_err());
        assert!("60".parse::<Bandwidth<f64>>().is_err());
        assert_eq!(
            "tricube".parse::<KernelType>().unwrap(),
            KernelType::Tricube
        );
    }

    fn any_kernel() -> impl Strategy<Value = KernelType> {
        proptest::sample::select(KernelType::ALL.to_vec())
    }

    proptest! {
        #[test]
        fn monotone_in_distance(k in any_kernel(), d1 in 0.0f64..50.0, dd in 0.0f64..50.0, b in 0.1f64..40.0) {
            let w1 = kernel_weight(d1, b, k).unwrap();
            let w2 = kernel_weight(d1 + dd, b, k).unwrap();
            prop_assert!(w1 >= w2);
            prop_assert!((0.0..=1.0).contains(&w1));
        }

        #[test]
        fn support(k in any_kernel(), d in 0.0f64..100.0, b in 0.1f64..40.0) {
            let w = kernel_weight(d, b, k).unwrap();
            if k.is_discontinuous() && d >= b {
                prop_assert_eq!(w, 0.0);
            }
            if !k.is_discontinuous() && d < 30.0 * b {
                prop_assert!(w > 0.0);
            }
        }

        #[test]
        fn scale_invariant(k in any_kernel(), d in 0.0f64..100.0, b in 0.1f64..40.0, c in 0.01f64..100.0) {
            let a = kernel_weight(d, b, k).unwrap();
            let s = kernel_weight(c * d, c * b, k).unwrap();
            prop_assert!((a - s).abs() <= 1e-12);
        }
    }
}
