//! Floating-point scalar abstraction shared by tiles, the network and the
//! evaluation metrics.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar type the numeric code is generic over.
///
/// Implemented for `f32` and `f64`. Gradient checks and checkpoints use
/// `f64`; `f32` halves the memory of tile batches.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Copy + Send + Sync + Debug + Display + Default + 'static
{
    /// Short tag recorded in checkpoints and manifests.
    const NAME: &'static str;

    /// Lossy conversion from `f64`. Never fails for finite inputs.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to any float scalar")
    }

    /// Widening conversion to `f64`.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("float scalar converts to f64")
    }

    /// Converts an index or count.
    fn of_usize(v: usize) -> Self {
        Self::of(v as f64)
    }
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";
}
