//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point element type: `f32` or `f64`.
///
/// Elementwise work happens in `Self`; long reductions (sums over `K·H·W`
/// terms) are carried out in `f64` through [`Scalar::acc`] and folded back
/// with [`Scalar::from_acc`].
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Widen to the 64-bit accumulator type.
    fn acc(self) -> f64;
    /// Narrow an accumulator value back to `Self`.
    fn from_acc(v: f64) -> Self;
    /// Convert an on-disk 32-bit value.
    fn from_f32_lossless(v: f32) -> Self;
    /// Value written to 32-bit file formats.
    fn to_f32_storage(self) -> f32;
}

impl Scalar for f32 {
    #[inline]
    fn acc(self) -> f64 {
        self as f64
    }
    #[inline]
    fn from_acc(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn from_f32_lossless(v: f32) -> Self {
        v
    }
    #[inline]
    fn to_f32_storage(self) -> f32 {
        self
    }
}

impl Scalar for f64 {
    #[inline]
    fn acc(self) -> f64 {
        self
    }
    #[inline]
    fn from_acc(v: f64) -> Self {
        v
    }
    #[inline]
    fn from_f32_lossless(v: f32) -> Self {
        v as f64
    }
    #[inline]
    fn to_f32_storage(self) -> f32 {
        self as f32
    }
}

