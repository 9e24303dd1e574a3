//! Scalar abstraction shared by every numeric kernel.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar the library computes in: `f32` or `f64`.
///
/// All finite-difference tolerances in this crate are calibrated for `f64`;
/// `f32` works for evaluation but not for the verification ladders.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `norm^exponent` with the degenerate-point rule: a negative exponent at a
/// norm below `eps` yields zero instead of an infinity.
#[inline]
pub fn guarded_pow<T: Real>(norm: T, exponent: T, eps: T) -> T {
    if exponent < T::zero() && norm < eps {
        T::zero()
    } else if exponent == T::zero() {
        T::one()
    } else {
        norm.powf(exponent)
    }
}

/// Default threshold below which a norm counts as degenerate.
pub const DEGENERATE_EPS: f64 = 1e-9;
