//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All estimators are written against [`Real`], which is implemented for
//! `f32` and `f64`. Distribution functions (Student t, normal, F) are
//! evaluated in `f64` and converted back.

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};
use serde::Serialize;

/// Floating point type usable by the estimators.
pub trait Real:
    RealField
    + Copy
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + LowerExp
    + Serialize
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Panics only for values the type cannot hold,
    /// which never happens for `f32`/`f64`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(x: usize) -> Self {
        Self::from_usize(x).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn infinity() -> Self {
        Self::lit(f64::INFINITY)
    }

    #[inline]
    fn nan() -> Self {
        Self::lit(f64::NAN)
    }

    #[inline]
    #[allow(clippy::eq_op)]
    fn is_nan(self) -> bool {
        self != self
    }

    /// Machine epsilon of the concrete type.
    fn machine_epsilon() -> Self;
}

impl Real for f32 {
    fn machine_epsilon() -> Self {
        f32::EPSILON
    }
}

impl Real for f64 {
    fn machine_epsilon() -> Self {
        f64::EPSILON
    }
}

/// Sum in index order. Reductions go through this so results do not depend on
/// how parallel work was scheduled.
pub(crate) fn ordered_sum<T: Real>(values: impl IntoIterator<Item = T>) -> T {
    values.into_iter().fold(T::zero(), |acc, v| acc + v)
}

pub(crate) fn mean<T: Real>(values: &[T]) -> T {
    if values.is_empty() {
        return T::nan();
    }
    ordered_sum(values.iter().copied()) / T::from_usize_lossy(values.len())
}
