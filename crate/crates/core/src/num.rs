//! Scalar abstraction. Everything numeric in this crate is generic over
//! [`Real`], which both `f32` and `f64` satisfy.

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating point scalar usable throughout the crate.
pub trait Real:
    Float + NumAssign + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
}

impl<T> Real for T where
    T: Float
        + NumAssign
        + FromPrimitive
        + ToPrimitive
        + Sum
        + Debug
        + Display
        + Default
        + Send
        + Sync
        + 'static
{
}

/// Convert an `f64` literal into the working scalar.
///
/// Panics only if the scalar type cannot represent any `f64` at all, which
/// does not happen for the float types this crate is used with.
pub(crate) fn real<F: Real>(x: f64) -> F {
    F::from_f64(x).expect("scalar type must convert from f64")
}

/// Convert the working scalar back to `f64` for reporting.
pub(crate) fn to_f64<F: Real>(x: F) -> f64 {
    x.to_f64().expect("scalar type must convert to f64")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_in_both_widths() {
        let a: f64 = real(0.25);
        let b: f32 = real(0.25);
        assert_eq!(a, 0.25f64);
        assert_eq!(b, 0.25f32);
        assert_eq!(to_f64(a), 0.25);
        assert_eq!(to_f64(b), 0.25);
    }
}
