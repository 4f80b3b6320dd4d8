//! Scalar abstraction for the series algebra.

use num_traits::{Float, FromPrimitive};
use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

/// Real scalar usable as a series coefficient type.
///
/// Blanket-implemented for anything float-like; in practice `f32` and `f64`.
/// The numeric layers (integration, SVD, certificates) are written directly
/// against `f64`, so only the algebraic core is generic.
pub trait Scalar:
    Float
    + FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossless embedding of small constants written as `f64` literals.
    fn from_f64_lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal not representable in scalar type")
    }
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + AddAssign
        + SubAssign
        + MulAssign
        + Sum
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

/// Default absolute threshold below which series coefficients are dropped.
///
/// Chosen near f64 rounding noise after a few nested brackets; for wider
/// scalars the type's own epsilon takes over via `prune_threshold`.
pub const DEFAULT_PRUNE: f64 = 1e-14;

/// The pruning threshold for a given scalar type: `DEFAULT_PRUNE`, but never
/// below the type's epsilon (so `f32` series prune at ~1e-7).
pub fn prune_threshold<T: Scalar>() -> T {
    let base = T::from_f64(DEFAULT_PRUNE).unwrap_or_else(T::epsilon);
    base.max(T::epsilon())
}
