//! Floating-point scalar abstraction: every numeric routine in this crate is
//! generic over [`Scalar`], with `f64` aliases exported at the crate root.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

/// Real scalar type for weights, probabilities and divergences: f32 or f64.
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + Sum
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Shorthand for pulling f64 constants into the working scalar type.
#[inline]
pub(crate) fn from_f64<S: Scalar>(x: f64) -> S {
    S::from_f64(x).expect("f64 constant must be representable")
}

/// Count-to-scalar conversion for histogram and expectation denominators.
#[inline]
pub(crate) fn from_usize<S: Scalar>(n: usize) -> S {
    S::from_usize(n).expect("count must be representable")
}
