//! Scalar abstraction for the instance mathematics.
//!
//! Every kernel, value and verification routine is written against
//! [`Scalar`] so the same code runs in `f32` and `f64`. The simulation
//! layer is `f64` only.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point type usable by the instance mathematics.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Panics only if the target cannot hold it,
    /// which never happens for `f32`/`f64`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(x: usize) -> Self {
        Self::from_usize(x).expect("usize representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `2^k` for small non-negative `k`.
    #[inline]
    fn pow2(k: usize) -> Self {
        Self::lit(2.0).powi(k as i32)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Binomial coefficient `C(n, k)` as a scalar, exact for the desk-scale
/// arguments used here.
pub fn binomial<T: Scalar>(n: usize, k: usize) -> T {
    if k > n {
        return T::zero();
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    T::from_u128(acc).expect("binomial representable in scalar type")
}
