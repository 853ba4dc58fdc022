//! Scalar abstraction: all core math is generic over `Real` (f32 or f64).

use num_traits::{Float, FloatConst, FromPrimitive};
use serde::{de::DeserializeOwned, Serialize};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating point scalar used throughout the crate.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Shorthand for converting an f64 literal.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("literal conversion")
    }
}

impl Real for f32 {}
impl Real for f64 {}
