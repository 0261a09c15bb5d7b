//! Scalar abstraction for the floating-point parts of the pipeline.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar: f32 or f64.
///
/// Everything that is plain real arithmetic (similarity scores, alignment
/// DP, rank statistics, the preference loss and its weight pipeline) is
/// written against this trait; the pipeline instantiates it at [`crate::Scalar`].
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Lossless-enough conversion from f64 for constants and thresholds.
    fn from_config(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 constant")
    }
}

impl<T> Real for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + NumAssign
        + Sum
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}
