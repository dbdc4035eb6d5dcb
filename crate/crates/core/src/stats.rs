//! Reference distributions for coefficient and autocorrelation tests.

use statrs::distribution::{ContinuousCDF, FisherSnedecor, Normal, StudentsT};

use crate::scalar::Real;

/// Two-sided p-value of a t statistic.
pub fn t_two_sided_p<T: Real>(t: T, df: f64) -> T {
    let t = t.as_f64();
    if t.is_nan() || !(df > 0.0) {
        return T::nan();
    }
    if t.is_infinite() {
        return T::zero();
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("valid t distribution");
    T::lit((2.0 * dist.sf(t.abs())).clamp(0.0, 1.0))
}

/// Two-sided p-value of a standard normal deviate.
pub fn normal_two_sided_p<T: Real>(z: T) -> T {
    let z = z.as_f64();
    if z.is_nan() {
        return T::nan();
    }
    let dist = Normal::standard();
    T::lit((2.0 * dist.sf(z.abs())).clamp(0.0, 1.0))
}

/// Upper tail of the F distribution.
pub fn f_upper_p<T: Real>(f: T, d1: f64, d2: f64) -> T {
    let f = f.as_f64();
    if f.is_nan() || !(d1 > 0.0 && d2 > 0.0) {
        return T::nan();
    }
    if f.is_infinite() {
        return T::zero();
    }
    let dist = FisherSnedecor::new(d1, d2).expect("valid F distribution");
    T::lit(dist.sf(f.max(0.0)).clamp(0.0, 1.0))
}

/// Degrees of freedom for pseudo t-tests: `n - enp` rounded down, at least 1.
pub fn pseudo_t_df<T: Real>(n: usize, enp: T) -> f64 {
    // absorb round-off so an integral enp (e.g. a projection) is not lowered by one
    (n as f64 - enp.as_f64() + 1e-7).floor().max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_values() {
        // qt(0.975, 10) = 2.228139
        let p: f64 = t_two_sided_p(2.228_138_851_986_52, 10.0);
        assert!((p - 0.05).abs() < 1e-9);
        let p: f64 = normal_two_sided_p(1.959_963_984_540_054);
        assert!((p - 0.05).abs() < 1e-10);
        assert_eq!(t_two_sided_p(0.0f64, 5.0), 1.0);
        assert_eq!(t_two_sided_p(f64::INFINITY, 5.0), 0.0);
    }

    #[test]
    fn pseudo_df_floor() {
        assert_eq!(pseudo_t_df(100, 12.7f64), 87.0);
        assert_eq!(pseudo_t_df(10, 9.5f64), 1.0);
    }

    proptest! {
        #[test]
        fn p_monotone_in_abs_t(a in 0.0f64..20.0, b in 0.0f64..20.0, df in 1.0f64..500.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let p_lo: f64 = t_two_sided_p(lo, df);
            let p_hi: f64 = t_two_sided_p(-hi, df);
            prop_assert!(p_hi <= p_lo + 1e-15);
            prop_assert!((0.0..=1.0).contains(&p_lo));
        }
    }
}
