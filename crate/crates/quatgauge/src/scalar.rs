//! Scalar abstraction: the numeric kernel is generic over the real type.

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point scalar for the whole kernel: f32 or f64.
///
/// All tolerances quoted in the documentation assume f64; f32 users should
/// relax them accordingly.
pub trait Real:
    Float + FromPrimitive + NumAssign + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex scalar over a [`Real`] type.
pub type C<T> = num_complex::Complex<T>;

/// Convert an f64 constant into the generic scalar type.
pub(crate) fn rl<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("constant not representable in scalar type")
}

/// Complex constant from f64 parts.
pub(crate) fn cx<T: Real>(re: f64, im: f64) -> C<T> {
    C::new(rl(re), rl(im))
}
