//! Floating-point scalar abstraction for log-probability arithmetic.
//!
//! Every score-carrying type in this crate is generic over [`Scalar`] so the
//! same decoder runs on `f32` or `f64`. The concrete aliases at the crate
//! root pin `f64`, which is what the CLI and the frozen test values use.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive};

/// Scalar type usable for log-probability scores.
pub trait Scalar: Float + FromPrimitive + Debug + Display + Send + Sync + 'static {}

impl<T> Scalar for T where T: Float + FromPrimitive + Debug + Display + Send + Sync + 'static {}

/// Converts an `f64` into the scalar type. Finite inputs always convert.
pub fn from_f64<S: Scalar>(v: f64) -> S {
    S::from_f64(v).expect("finite f64 must be representable in the scalar type")
}

/// Converts a scalar into `f64` for reporting.
pub fn to_f64<S: Scalar>(v: S) -> f64 {
    v.to_f64().expect("scalar must be representable as f64")
}
