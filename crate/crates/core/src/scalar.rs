//! Scalar abstraction shared by the numerical kernels.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real floating-point scalar the estimators are generic over (`f32` or `f64`).
///
/// The associated tolerances are the thresholds used by the dense kernel to
/// decide definiteness. They are absolute eigenvalue thresholds.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Smallest eigenvalue accepted as strictly positive when inverting.
    const PD_TOL: f64;
    /// Negative eigenvalues above `-PSD_CLAMP` are treated as zero.
    const PSD_CLAMP: f64;

    /// Converts an `f64` literal. Panics only for values the type cannot hold.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn half() -> Self {
        Self::lit(0.5)
    }
}

impl Real for f64 {
    const PD_TOL: f64 = 1e-12;
    const PSD_CLAMP: f64 = 1e-10;
}

impl Real for f32 {
    const PD_TOL: f64 = 1e-6;
    const PSD_CLAMP: f64 = 1e-4;
}
