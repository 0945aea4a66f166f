//! Scalar abstraction shared by every numerical module.
//!
//! All of the mechanics in this crate is written once against [`Real`] and
//! instantiated for `f64` (the default everywhere) or `f32`.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar usable by the dynamics, flatness and control code.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive {}

impl<T: RealField + Copy + FromPrimitive + ToPrimitive> Real for T {}

/// Converts an `f64` constant into `T`.
#[inline]
pub fn cast<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 constant representable in scalar type")
}

/// Converts a `usize` into `T`.
#[inline]
pub fn from_usize<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("usize representable in scalar type")
}

/// Lossy conversion used for diagnostics (error payloads, reports).
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// A tolerance of `x`, widened to what the scalar type can actually resolve.
///
/// For `f64` this is `x` itself for every tolerance used in the crate; for
/// `f32` tight tolerances are clamped to a few hundred ulps.
#[inline]
pub fn tol<T: Real>(x: f64) -> T {
    let floor = T::default_epsilon() * cast::<T>(256.0);
    let x = cast::<T>(x);
    if x > floor {
        x
    } else {
        floor
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_is_exact_for_f64() {
        assert_eq!(tol::<f64>(1e-9), 1e-9);
    }

    #[test]
    fn tolerance_is_widened_for_f32() {
        let t = tol::<f32>(1e-9);
        assert!(t > 1e-6 && t < 1e-4);
    }
}
