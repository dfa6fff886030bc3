//! Numeric abstraction shared by the metric and retrieval code.
//!
//! Metrics only need a field with exact division by counts, so they run on
//! `f32`, `f64` or exact rationals. Retrieval additionally needs square roots
//! and is bounded by [`num_traits::Float`] directly.

use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::Num;

/// A number type that confusion-count arithmetic can be carried out in.
pub trait Scalar: Num + Copy + PartialOrd + Debug + Send + Sync + 'static {
    /// Lossless (for rationals) or nearest (for floats) image of a count.
    fn from_count(n: u64) -> Self;

    /// Nearest `f64`, for presentation.
    fn to_f64(self) -> f64;
}

impl Scalar for f64 {
    fn from_count(n: u64) -> Self {
        n as f64
    }

    fn to_f64(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    fn from_count(n: u64) -> Self {
        n as f32
    }

    fn to_f64(self) -> f64 {
        f64::from(self)
    }
}

impl Scalar for Ratio<i64> {
    fn from_count(n: u64) -> Self {
        Ratio::from_integer(i64::try_from(n).expect("count exceeds i64"))
    }

    fn to_f64(self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
}

impl Scalar for Ratio<i128> {
    fn from_count(n: u64) -> Self {
        Ratio::from_integer(i128::from(n))
    }

    fn to_f64(self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
}
