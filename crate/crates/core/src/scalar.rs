//! Floating-point abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar used for coordinates, intensities and fitted parameters.
///
/// Implemented for `f32` and `f64`. Most callers use the `f64` aliases
/// exported at the crate root.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; constants in the algorithms are written
    /// as `f64` literals and narrowed here.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable in every Scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar widens to f64")
    }

    /// Converts a count or index.
    #[inline]
    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("usize is representable in every Scalar")
    }

    /// Density of the standard normal distribution.
    #[inline]
    fn std_normal_pdf(self) -> Self {
        let inv_sqrt_2pi = Self::of(0.398_942_280_401_432_7);
        inv_sqrt_2pi * (-(self * self) / Self::of(2.0)).exp()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
