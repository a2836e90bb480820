//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar the library is generic over: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Every literal used by the library is
    /// representable (possibly rounded) in both supported widths.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Default relative quadrature tolerance: 1e-8, widened to a few
    /// hundred ulps for narrow types.
    fn default_rel_tol() -> Self {
        Self::lit(1e-8).max(Self::epsilon() * Self::lit(64.0))
    }

    /// Default absolute quadrature floor.
    fn default_abs_tol() -> Self {
        Self::lit(1e-12).max(Self::min_positive_value() * Self::lit(1e6))
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `a` and `b` agree to relative tolerance `rel` (measured against the larger magnitude).
pub fn rel_close<T: Real>(a: T, b: T, rel: T) -> bool {
    let scale = a.abs().max(b.abs());
    (a - b).abs() <= rel * scale
}

/// Relative deviation `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn rel_diff<T: Real>(a: T, b: T) -> T {
    let scale = a.abs().max(b.abs());
    if scale == T::zero() {
        T::zero()
    } else {
        (a - b).abs() / scale
    }
}
