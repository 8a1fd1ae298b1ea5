//! Numeric scalar abstraction shared by the graph, uncertainty and solver layers.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar used for travel times and uncertainty parameters.
///
/// Implemented for `f32` and `f64`. All arithmetic in the solvers goes
/// through this trait so the same code runs at either precision.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Relative tolerance under which two objective values count as tied.
    fn tie_tolerance() -> Self;

    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    fn tie_tolerance() -> Self {
        1e-6
    }
}

impl Scalar for f64 {
    fn tie_tolerance() -> Self {
        1e-12
    }
}

/// `a` and `b` agree within `rel` relative to the larger magnitude (absolute near zero).
pub fn approx_eq<T: Scalar>(a: T, b: T, rel: T) -> bool {
    if a == b {
        return true;
    }
    let scale = a.abs().max(b.abs()).max(T::one());
    (a - b).abs() <= rel * scale
}

/// Total order for finite scalars; NaN sorts last.
pub(crate) fn cmp_scalar<T: Scalar>(a: T, b: T) -> std::cmp::Ordering {
    a.partial_cmp(&b).unwrap_or_else(|| {
        if a.is_nan() && b.is_nan() {
            std::cmp::Ordering::Equal
        } else if a.is_nan() {
            std::cmp::Ordering::Greater
        } else {
            std::cmp::Ordering::Less
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn approx_eq_is_relative_above_one() {
        assert!(approx_eq(1e6_f64, 1e6 + 1e-7, 1e-12));
        assert!(!approx_eq(1e6_f64, 1e6 + 1e-3, 1e-12));
        assert!(approx_eq(0.0_f64, 1e-13, 1e-12));
    }

    #[test]
    fn nan_sorts_last() {
        let mut v = [f64::NAN, 2.0, 1.0];
        v.sort_by(|a, b| cmp_scalar(*a, *b));
        assert_eq!(v[0], 1.0);
        assert!(v[2].is_nan());
    }
}
