//! Scalar abstraction for the geometric core.
//!
//! Geodesy, camera models, pose algebra and the PnP solvers are written once
//! against [`Real`] and instantiated for `f32` and `f64`. Image processing and
//! retrieval work on concrete `f32` buffers.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar usable by the geometry modules.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Machine epsilon scaled for "effectively zero" comparisons.
    const TINY: Self;

    /// Converts an `f64` literal, rounding to the nearest representable value.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal is representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar converts to f64")
    }
}

impl Real for f32 {
    const TINY: Self = 1e-6;
}

impl Real for f64 {
    const TINY: Self = 1e-12;
}
