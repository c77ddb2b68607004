use rug::float::Constant;
use rug::ops::Pow;
use rug::{Complex, Float};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Working precision for every big-float computation.
///
/// `bits` is the target accuracy; intermediate values carry `bits + guard_bits`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecisionContext {
    pub bits: u32,
    pub guard_bits: u32,
}

impl Default for PrecisionContext {
    fn default() -> Self {
        PrecisionContext {
            bits: 256,
            guard_bits: 64,
        }
    }
}

impl PrecisionContext {
    pub fn new(bits: u32, guard_bits: u32) -> Result<Self> {
        if bits < 64 || guard_bits < 32 {
            return Err(Error::InvalidPrecision { bits, guard_bits });
        }
        Ok(PrecisionContext { bits, guard_bits })
    }

    pub fn with_bits(bits: u32) -> Result<Self> {
        Self::new(bits, 64)
    }

    pub fn working(&self) -> u32 {
        self.bits + self.guard_bits
    }

    /// Same guard, at least `min_bits` of target precision.
    pub fn raised_to(&self, min_bits: u32) -> Self {
        PrecisionContext {
            bits: self.bits.max(min_bits),
            guard_bits: self.guard_bits,
        }
    }

    pub fn real(&self, v: f64) -> Float {
        Float::with_val(self.working(), v)
    }

    pub fn complex(&self, re: f64, im: f64) -> Complex {
        Complex::with_val(self.working(), (re, im))
    }

    pub fn pi(&self) -> Float {
        Float::with_val(self.working(), Constant::Pi)
    }

    /// Default absolute tolerance 2^{-bits+64}.
    pub fn tolerance(&self) -> Float {
        Float::with_val(self.working(), 2).pow(-(self.bits as i32) + 64)
    }

    /// Decimal digits carried by `bits`, used for text output.
    pub fn digits(&self) -> usize {
        (self.bits as f64 * 0.302).ceil() as usize
    }
}

pub fn c64(z: &Complex) -> num_complex::Complex64 {
    num_complex::Complex64::new(z.real().to_f64(), z.imag().to_f64())
}

pub fn from_c64(z: num_complex::Complex64, prec: u32) -> Complex {
    Complex::with_val(prec, (z.re, z.im))
}

pub fn abs(z: &Complex) -> Float {
    Float::with_val(z.prec().0, z.abs_ref())
}

/// log2|z|, finite for z != 0; -inf for zero.
pub fn log2_abs(z: &Complex) -> f64 {
    let a = abs(z);
    if a.is_zero() {
        return f64::NEG_INFINITY;
    }
    let (m, e) = a.to_f64_exp();
    m.abs().log2() + e as f64
}

pub fn i_pi(prec: u32) -> Complex {
    let pi = Float::with_val(prec, Constant::Pi);
    Complex::with_val(prec, (0, pi))
}

pub fn two_pi_i(prec: u32) -> Complex {
    let mut z = i_pi(prec);
    z *= 2;
    z
}

/// Render a float with `digits` significant decimal digits.
pub fn fmt_float(v: &Float, digits: usize) -> String {
    v.to_string_radix(10, Some(digits.max(2)))
}

pub fn fmt_complex(z: &Complex, digits: usize) -> String {
    format!(
        "({}, {})",
        fmt_float(z.real(), digits),
        fmt_float(z.imag(), digits)
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_low_precision() {
        assert!(PrecisionContext::new(32, 64).is_err());
        assert!(PrecisionContext::new(128, 8).is_err());
        assert!(PrecisionContext::new(64, 32).is_ok());
    }

    #[test]
    fn tolerance_scales_with_bits() {
        let ctx = PrecisionContext::new(128, 32).unwrap();
        assert_eq!(ctx.tolerance().to_f64(), 2f64.powi(-64));
        assert_eq!(ctx.digits(), 39);
    }

    #[test]
    fn log2_abs_of_power_of_two() {
        let z = Complex::with_val(64, (0, 8));
        assert!((log2_abs(&z) - 3.0).abs() < 1e-12);
    }
}
