//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type the learners, the covering LP and the oracles are
/// generic over. Implemented for `f32` and `f64`.
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
    /// Lossy conversion from an `f64` constant.
    fn cast(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 constant is representable")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count is representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }

    /// Tolerance used when comparing quantities that should tie exactly in
    /// exact arithmetic (split gains, subset costs).
    fn tie_tolerance() -> Self {
        Self::epsilon() * Self::cast(64.0)
    }

    /// Bit-level key used for exact threshold equality. `-0.0` and `0.0`
    /// share a key.
    fn exact_key(self) -> (u64, i16, i8) {
        if self == Self::zero() {
            return (0, 0, 0);
        }
        self.integer_decode()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = k;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax(&[3, 3]), 0);
        assert_eq!(argmax(&[1, 5, 5]), 1);
        assert_eq!(argmax(&[0.5_f64]), 0);
    }

    #[test]
    fn signed_zero_shares_key() {
        assert_eq!(0.0_f64.exact_key(), (-0.0_f64).exact_key());
        assert_ne!(2.0_f64.exact_key(), 2.000_000_1_f64.exact_key());
        assert_eq!(2.0_f32.exact_key(), 2.0_f32.exact_key());
    }
}
