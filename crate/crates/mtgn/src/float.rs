//! Scalar abstraction so the numeric core works with any float width.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar the library computes with.
///
/// Implemented for `f32` and `f64`. Every tolerance documented in this crate
/// assumes `f64`; the `f32` instantiation exists for callers that trade
/// accuracy for memory.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Conversion from `f64`, used for constants and generator output.
    /// Rounds to the nearest representable value.
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("every f64 converts to a float scalar")
    }

    /// Conversion to `f64` for serialization and reporting.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("every float scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
