//! Scalar abstraction for the simulator core.
//!
//! All state vectors, optical elements and estimators are generic over the
//! real floating-point type backing complex amplitudes. `f64` is the default
//! used by the concrete aliases at the crate root; `f32` works for quick
//! exploratory sweeps where the tighter tolerances are not needed.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar type backing complex amplitudes (f32 or f64).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum<Self>
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Default threshold below which amplitudes are pruned from sparse states.
    fn prune_tolerance() -> Self;

    /// Tolerance for structural checks: unitarity, orthonormality, norms.
    fn strict_tolerance() -> Self;

    /// Lossy conversion from `f64`, for constants and (de)serialization.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts to any Real")
    }
}

impl Real for f64 {
    fn prune_tolerance() -> Self {
        1e-12
    }
    fn strict_tolerance() -> Self {
        1e-12
    }
}

impl Real for f32 {
    fn prune_tolerance() -> Self {
        1e-6
    }
    fn strict_tolerance() -> Self {
        1e-5
    }
}

/// Canonical float rendering with a fixed number of significant digits,
/// used for reproducible CSV output. Plain decimal for moderate exponents,
/// scientific otherwise (like `%g`, but without trimming zeros).
pub fn format_significant(x: f64, digits: usize) -> String {
    assert!(digits >= 1);
    if x == 0.0 {
        return format!("{:.*}", digits - 1, 0.0);
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -4 || exp >= digits as i32 {
        format!("{mantissa}e{exp}")
    } else {
        // Reprint with the decimal count that keeps `digits` significant.
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        format!("{:.*}", decimals, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_formatting_is_canonical() {
        assert_eq!(format_significant(0.125, 12), "0.125000000000");
        assert_eq!(format_significant(0.00875, 12), "0.00875000000000");
        assert_eq!(format_significant(0.0, 12), "0.00000000000");
        assert_eq!(format_significant(-1.5e-7, 12), "-1.50000000000e-7");
        assert_eq!(format_significant(76e6, 12), "76000000.0000");
        assert_eq!(format_significant(1e13, 12), "1.00000000000e13");
    }
}
