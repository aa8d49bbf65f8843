//! Scalar abstraction shared by the geometric kernels.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar used by the geometry code: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Tolerance for exact-geometry predicates (constraint membership, rank).
    fn geom_eps() -> Self;

    /// Tolerance used when comparing sampled or iteratively solved quantities.
    fn loose_eps() -> Self;

    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    fn geom_eps() -> Self {
        1e-9
    }
    fn loose_eps() -> Self {
        1e-6
    }
}

impl Real for f32 {
    fn geom_eps() -> Self {
        1e-5
    }
    fn loose_eps() -> Self {
        1e-4
    }
}

#[inline]
pub fn deg<T: Real>(degrees: f64) -> T {
    T::lit(degrees.to_radians())
}

#[inline]
pub fn clamp<T: Real>(v: T, lo: T, hi: T) -> T {
    v.max(lo).min(hi)
}
