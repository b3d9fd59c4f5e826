//! Floating-point abstraction for the numeric core.
//!
//! Every kernel in this crate is generic over [`Scalar`] so the same code
//! runs in `f32` or `f64`. The crate root exports `f64` aliases for the
//! common case; `f32` exists for memory-bound experiments and for checking
//! that algorithms do not silently depend on double precision.

use rand::Rng;
use rand_distr::StandardNormal;

/// Real scalar used by panels, matrices, and fits.
///
/// The bound set is the intersection of what the kernels actually need:
/// IEEE arithmetic with total ordering on finite values (`Float`), lossless
/// construction from small literals (`FromPrimitive`), compound assignment,
/// and thread-safety so panels can cross rayon task boundaries.
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::NumAssign
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Panics only if the value is not
    /// representable at all (never the case for the finite constants used
    /// in this crate).
    #[inline]
    fn cast(v: f64) -> Self {
        <Self as num_traits::NumCast>::from(v).expect("finite literal must convert")
    }

    /// Converts to `f64` for reporting. Lossless for `f32`/`f64`.
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// One standard normal draw. Lives on the trait so generic code can
    /// sample without threading `rand_distr` bounds through every signature.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl Scalar for f32 {
    #[inline]
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
}

impl Scalar for f64 {
    #[inline]
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
}
