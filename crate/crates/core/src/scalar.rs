//! Floating point abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumCast, ToPrimitive};

/// Real scalar type the assessment math is written against: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + NumCast + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Stationarity / feasibility tolerance used by the simplex solver.
    ///
    /// `1e-9` for `f64`; `f32` cannot resolve that, so it gets a bound a
    /// few hundred ulps above its own epsilon.
    fn solver_tolerance() -> Self;

    /// Converts an `f64` literal. Panics only for values the type cannot represent.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn two() -> Self {
        Self::one() + Self::one()
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    #[inline]
    fn solver_tolerance() -> Self {
        1e-9
    }
}

impl Scalar for f32 {
    #[inline]
    fn solver_tolerance() -> Self {
        2e-5
    }
}

/// Lossless-where-possible conversion of a count (integer or fractional) into `T`.
#[inline]
pub fn lift<T: Scalar, C: ToPrimitive>(c: C) -> T {
    <T as NumCast>::from(c).unwrap_or_else(T::nan)
}
