//! Scalar abstraction shared by every series evaluator.
//!
//! The special-function kernels are written once over [`Real`] and
//! instantiated for `f32`, `f64` and [`DoubleDouble`]. The trait keeps only
//! what the kernels need: field arithmetic from `num-traits`, a handful of
//! elementary functions, and the unit roundoff used by error certificates.

use std::fmt::Debug;
use std::ops::Neg;

use num_traits::{FromPrimitive, NumOps, One, ToPrimitive, Zero};

pub use crate::double_double::DoubleDouble;

/// Working scalar for the series kernels.
pub trait Real:
    Copy
    + Debug
    + PartialOrd
    + Zero
    + One
    + NumOps
    + Neg<Output = Self>
    + FromPrimitive
    + ToPrimitive
    + Send
    + Sync
    + 'static
{
    /// Relative error of one correctly rounded operation.
    const UNIT_ROUNDOFF: f64;
    /// Arguments of `ln_gamma` below this value are shifted up by recurrence
    /// before the Stirling series is summed.
    const STIRLING_SHIFT: f64;
    /// Number of Stirling correction terms used above the shift point.
    const STIRLING_TERMS: usize;

    /// Builds a value from an unevaluated sum `hi + lo`.
    fn from_pair(hi: f64, lo: f64) -> Self;

    fn of(x: f64) -> Self {
        Self::from_pair(x, 0.0)
    }

    /// Nearest `f64`.
    fn approx(self) -> f64;

    fn abs(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sin(self) -> Self;
    fn pi() -> Self;
    /// `ln(2π)/2`.
    fn half_ln_two_pi() -> Self;

    fn is_finite(self) -> bool {
        self.approx().is_finite()
    }
}

macro_rules! impl_real_for_float {
    ($t:ty, $u:expr, $shift:expr, $terms:expr) => {
        impl Real for $t {
            const UNIT_ROUNDOFF: f64 = $u;
            const STIRLING_SHIFT: f64 = $shift;
            const STIRLING_TERMS: usize = $terms;

            #[inline]
            fn from_pair(hi: f64, lo: f64) -> Self {
                (hi + lo) as $t
            }
            #[inline]
            fn approx(self) -> f64 {
                self as f64
            }
            #[inline]
            fn abs(self) -> Self {
                <$t>::abs(self)
            }
            #[inline]
            fn exp(self) -> Self {
                <$t>::exp(self)
            }
            #[inline]
            fn ln(self) -> Self {
                <$t>::ln(self)
            }
            #[inline]
            fn sin(self) -> Self {
                <$t>::sin(self)
            }
            #[inline]
            fn pi() -> Self {
                std::f64::consts::PI as $t
            }
            #[inline]
            fn half_ln_two_pi() -> Self {
                0.918_938_533_204_672_8_f64 as $t
            }
        }
    };
}

impl_real_for_float!(f32, f32::EPSILON as f64 / 2.0, 8.0, 6);
impl_real_for_float!(f64, f64::EPSILON / 2.0, 12.0, 10);
