//! Scalar abstraction over the working floating-point type.
//!
//! # Overview
//! All numeric code in this crate is generic over [`Scalar`], a lightweight
//! bundle of the [`num_traits`] float traits plus the thread-safety and
//! formatting bounds the solvers need. It is implemented for `f32` and `f64`
//! via a blanket impl; the crate root exports `f64` type aliases for the
//! common case.
//!
//! Randomness is always drawn in `f64` and then converted with
//! [`Scalar::from_f64_lossy`], so `f32` and `f64` runs see the same
//! underlying random sequence at different precisions.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::ScalarOperand;
use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point scalar usable throughout the library.
pub trait Scalar:
    Float
    + FromPrimitive
    + NumAssign
    + Sum<Self>
    + ScalarOperand
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts from `f64`, rounding to the nearest representable value.
    #[inline]
    fn from_f64_lossy(v: f64) -> Self {
        Self::from(v).expect("finite f64 converts to any float scalar")
    }

    /// Converts to `f64` for reporting and mixed-precision comparisons.
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("float scalar converts to f64")
    }

    /// Converts from a small count; panics only on absurd overflow.
    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::from_f64_lossy(v as f64)
    }
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + NumAssign
        + Sum<T>
        + ScalarOperand
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}
