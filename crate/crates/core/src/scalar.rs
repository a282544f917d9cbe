use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use ndarray::ScalarOperand;
use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar the estimators are generic over.
///
/// Blanket-implemented for every type meeting the bounds; in practice `f32` and `f64`.
/// Algorithms are written against this trait and the crate root exposes `f64` aliases
/// for the common case.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + ScalarOperand
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant into `Self`.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Coordinate-change tolerance used by the solvers: 1e-8, or a hundred ulps
    /// when the type cannot resolve that.
    #[inline]
    fn solver_tol() -> Self {
        Self::of(1e-8).max(Self::epsilon() * Self::of(100.0))
    }
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + ScalarOperand
        + Sum
        + AddAssign
        + SubAssign
        + MulAssign
        + DivAssign
        + Debug
        + Display
        + Default
        + Send
        + Sync
        + 'static
{
}
