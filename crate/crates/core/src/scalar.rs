//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FloatConst};
use rustfft::FftNum;

/// Real floating-point type the solver can run on.
///
/// Implemented for `f32` and `f64`. Everything that touches an FFT goes
/// through [`rustfft`], so the bound includes [`FftNum`].
pub trait Real:
    Float + FloatConst + FftNum + Default + Display + LowerExp + Debug + Send + Sync + 'static
{
    /// Machine epsilon as an `f64`, for building tolerances.
    fn eps_f64() -> f64;
}

impl Real for f64 {
    fn eps_f64() -> f64 {
        f64::EPSILON
    }
}

impl Real for f32 {
    fn eps_f64() -> f64 {
        f32::EPSILON as f64
    }
}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

/// Lossy conversion to `f64` for reporting.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}
