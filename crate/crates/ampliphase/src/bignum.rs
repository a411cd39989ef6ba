//! Arithmetic backends for the alternating photon-number sums.
//!
//! The sums lose roughly 1.3–1.8 bits of absolute accuracy per photon index,
//! so no fixed precision reaches arbitrary n. Two backends are provided
//! behind one trait: double-double for the fast path (~106 bits, enough for
//! n ≲ 55), and a big-integer fixed-point type whose precision is chosen per
//! call for the escalation path. Both track the scale of the largest term so
//! every entry can be certified against its own noise floor.

use crate::dd::Dd;
use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};

/// Arithmetic with enough structure for the scaled-Laguerre recurrences,
/// convolutions, and alternating binomial transforms.
pub(crate) trait SumNum: Clone {
    /// Backend configuration (precision for fixed point, nothing for dd).
    type Ctx: Copy;

    fn from_f64(x: f64, ctx: Self::Ctx) -> Self;
    fn zero(ctx: Self::Ctx) -> Self;
    fn one(ctx: Self::Ctx) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    /// Multiply by an exactly representable f64 (integers, halves).
    fn mul_f64(&self, x: f64) -> Self;
    fn div_u64(&self, k: u64) -> Self;
    /// 1/x at working precision.
    fn recip_f64(x: f64, ctx: Self::Ctx) -> Self;
    fn to_f64(&self) -> f64;
    /// log2 |self|, approximate; −∞ for zero.
    fn log2_abs(&self) -> f64;
    /// log2 of the absolute error a sum can carry when its largest term has
    /// magnitude log2 `max_term_log2`.
    fn floor_log2(max_term_log2: f64, ctx: Self::Ctx) -> f64;
}

impl SumNum for Dd {
    type Ctx = ();

    fn from_f64(x: f64, _: ()) -> Self {
        Dd::from_f64(x)
    }
    fn zero(_: ()) -> Self {
        Dd::ZERO
    }
    fn one(_: ()) -> Self {
        Dd::ONE
    }
    fn add(&self, o: &Self) -> Self {
        *self + *o
    }
    fn sub(&self, o: &Self) -> Self {
        *self - *o
    }
    fn mul(&self, o: &Self) -> Self {
        *self * *o
    }
    fn mul_f64(&self, x: f64) -> Self {
        *self * x
    }
    fn div_u64(&self, k: u64) -> Self {
        *self / (k as f64)
    }
    fn recip_f64(x: f64, _: ()) -> Self {
        Dd::ONE / Dd::from_f64(x)
    }
    fn to_f64(&self) -> f64 {
        Dd::to_f64(*self)
    }
    fn log2_abs(&self) -> f64 {
        self.hi.abs().log2()
    }
    fn floor_log2(max_term_log2: f64, _: ()) -> f64 {
        // Observed end-to-end accumulation is ~2^-92 of the largest term;
        // keep a two-decade margin.
        max_term_log2 - 86.0
    }
}

/// Signed fixed-point number m·2^(−bits) with a big-integer mantissa.
#[derive(Debug, Clone)]
pub(crate) struct BigFixed {
    m: BigInt,
    bits: u32,
}

impl BigFixed {
    fn raw(m: BigInt, bits: u32) -> Self {
        BigFixed { m, bits }
    }
}

impl SumNum for BigFixed {
    type Ctx = u32;

    fn from_f64(x: f64, bits: u32) -> Self {
        if x == 0.0 || !x.is_finite() {
            return BigFixed::raw(BigInt::zero(), bits);
        }
        let fb = x.to_bits();
        let negative = fb >> 63 == 1;
        let raw_exp = ((fb >> 52) & 0x7ff) as i64;
        let frac = fb & ((1u64 << 52) - 1);
        let (mant, e) = if raw_exp == 0 {
            (frac, -1074i64)
        } else {
            (frac | (1u64 << 52), raw_exp - 1075)
        };
        let mut m = BigInt::from(mant);
        let shift = bits as i64 + e;
        if shift >= 0 {
            m <<= shift as usize;
        } else {
            m >>= (-shift) as usize;
        }
        if negative {
            m = -m;
        }
        BigFixed::raw(m, bits)
    }

    fn zero(bits: u32) -> Self {
        BigFixed::raw(BigInt::zero(), bits)
    }

    fn one(bits: u32) -> Self {
        BigFixed::raw(BigInt::from(1u8) << bits as usize, bits)
    }

    fn add(&self, o: &Self) -> Self {
        debug_assert_eq!(self.bits, o.bits);
        BigFixed::raw(&self.m + &o.m, self.bits)
    }

    fn sub(&self, o: &Self) -> Self {
        debug_assert_eq!(self.bits, o.bits);
        BigFixed::raw(&self.m - &o.m, self.bits)
    }

    fn mul(&self, o: &Self) -> Self {
        debug_assert_eq!(self.bits, o.bits);
        BigFixed::raw((&self.m * &o.m) >> self.bits as usize, self.bits)
    }

    fn mul_f64(&self, x: f64) -> Self {
        self.mul(&Self::from_f64(x, self.bits))
    }

    fn div_u64(&self, k: u64) -> Self {
        BigFixed::raw(&self.m / BigInt::from(k), self.bits)
    }

    fn recip_f64(x: f64, bits: u32) -> Self {
        let d = Self::from_f64(x, bits);
        BigFixed::raw((BigInt::from(1u8) << (2 * bits as usize)) / d.m, bits)
    }

    fn to_f64(&self) -> f64 {
        if self.m.is_zero() {
            return 0.0;
        }
        let mag = self.m.magnitude();
        let nb = mag.bits();
        let (top, e) = if nb <= 54 {
            (mag.to_f64().unwrap_or(f64::MAX), -(self.bits as i64))
        } else {
            let shift = nb - 54;
            (
                (mag >> shift as usize).to_f64().unwrap_or(f64::MAX),
                shift as i64 - self.bits as i64,
            )
        };
        let val = ldexp(top, e);
        if self.m.is_negative() {
            -val
        } else {
            val
        }
    }

    fn log2_abs(&self) -> f64 {
        if self.m.is_zero() {
            return f64::NEG_INFINITY;
        }
        self.m.magnitude().bits() as f64 - 0.5 - self.bits as f64
    }

    fn floor_log2(max_term_log2: f64, bits: u32) -> f64 {
        max_term_log2 - bits as f64 + 48.0
    }
}

/// x·2^e with saturation, avoiding intermediate over/underflow.
fn ldexp(x: f64, e: i64) -> f64 {
    if e > 2000 {
        return if x >= 0.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        };
    }
    if e < -2200 {
        return 0.0;
    }
    let mut v = x;
    let mut rem = e;
    while rem != 0 {
        let step = rem.clamp(-900, 900);
        v *= (step as f64).exp2();
        rem -= step;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_point_round_trips() {
        for &x in &[0.0, 1.0, -3.5, 0.1234567890123, 1e-20, -7.25e11] {
            let v = BigFixed::from_f64(x, 256);
            assert!(
                (v.to_f64() - x).abs() <= x.abs() * 1e-15,
                "{x} -> {}",
                v.to_f64()
            );
        }
    }

    #[test]
    fn fixed_point_arithmetic() {
        let bits = 320u32;
        let a = BigFixed::from_f64(1.5, bits);
        let b = BigFixed::from_f64(-0.25, bits);
        assert_eq!(a.add(&b).to_f64(), 1.25);
        assert_eq!(a.mul(&b).to_f64(), -0.375);
        assert_eq!(a.div_u64(3).to_f64(), 0.5);
        let r = BigFixed::recip_f64(3.0, bits);
        assert!((r.to_f64() - 1.0 / 3.0).abs() < 1e-16);
        assert!((r.log2_abs() - (1.0f64 / 3.0).log2()).abs() < 1.5);
    }

    #[test]
    fn fixed_point_keeps_many_digits() {
        // (1e30 + 1) − 1e30 = 1 needs ~100 bits.
        let bits = 512u32;
        let big = BigFixed::from_f64(1e30, bits);
        let one = BigFixed::one(bits);
        let diff = big.add(&one).sub(&big);
        assert_eq!(diff.to_f64(), 1.0);
    }
}
