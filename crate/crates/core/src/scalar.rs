//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Floating-point scalar the estimators are generic over: `f32` or `f64`.
///
/// Tolerances quoted in the documentation (1e-10 and below) only hold for
/// `f64`; the `f32` instantiation is useful for throughput experiments.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + FftNum
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Every `f64` is representable (possibly
    /// rounded) in both supported types, so this never fails.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal fits the scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Scalar size of `n` as this type.
    #[inline]
    fn from_len(n: usize) -> Self {
        Self::from_usize(n).expect("length fits the scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}
