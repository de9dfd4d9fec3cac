//! Scalar abstraction shared by the numeric kernels.
//!
//! Every statistical routine in the crate is written against [`Real`], which
//! is implemented for `f32` and `f64`. Special functions are evaluated in
//! double precision and narrowed back to the caller's type.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::ScalarOperand;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + ScalarOperand
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant into `Self`.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant is representable")
    }

    /// Widens to `f64`.
    #[inline]
    fn f64(self) -> f64 {
        self.to_f64().expect("real value converts to f64")
    }

    /// Converts a count.
    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count is representable")
    }
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + ToPrimitive
        + ScalarOperand
        + Sum
        + Default
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

/// Largest magnitude allowed for a correlation before the Fisher transform.
pub const CORRELATION_CLAMP: f64 = 1.0 - 1e-15;

/// Clamps a correlation-like quantity into `[-(1-1e-15), 1-1e-15]`.
#[inline]
pub fn clamp_correlation<T: Real>(r: T) -> T {
    let bound = T::of(CORRELATION_CLAMP);
    // In f32 the constant rounds to 1.0; fall back to the largest f32 below 1.
    let bound = if bound >= T::one() {
        T::one() - T::epsilon()
    } else {
        bound
    };
    r.max(-bound).min(bound)
}

/// atanh evaluated on |x| with the sign restored, so it is exactly odd and
/// keeps the sign of tiny arguments.
#[inline]
pub fn atanh_odd<T: Real>(x: T) -> T {
    let a = x.abs().atanh();
    if x < T::zero() {
        -a
    } else {
        a
    }
}
