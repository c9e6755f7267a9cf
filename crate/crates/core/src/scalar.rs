//! Scalar abstraction for the exact geometry of the branch maps.
//!
//! Every branch map `g_k` and its derivative is a rational function with
//! integer coefficients, so cylinder geometry can be carried out over any
//! ordered field: `f32`/`f64` for speed, [`Rational`] when endpoints must be
//! compared exactly.

use std::fmt::Debug;
use std::ops::Neg;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Num, Signed, ToPrimitive};

/// Arbitrary-precision rational number.
pub type Rational = BigRational;

pub trait Scalar:
    Clone + Debug + PartialOrd + Num + Neg<Output = Self> + Send + Sync + 'static
{
    /// `num / den`, `den != 0`.
    fn from_ratio(num: i64, den: i64) -> Self;

    fn from_u64(v: u64) -> Self;

    fn as_f64(&self) -> f64;

    /// `floor(self)` for a non-negative value, `None` when it does not fit.
    fn floor_u64(&self) -> Option<u64>;

    /// Whether arithmetic in this type is exact.
    fn is_exact() -> bool;

    fn recip(&self) -> Self {
        Self::one() / self.clone()
    }

    fn abs_val(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }
}

macro_rules! float_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            fn from_ratio(num: i64, den: i64) -> Self {
                (num as f64 / den as f64) as $t
            }

            fn from_u64(v: u64) -> Self {
                v as $t
            }

            fn as_f64(&self) -> f64 {
                *self as f64
            }

            fn floor_u64(&self) -> Option<u64> {
                let f = self.floor();
                if f.is_finite() && f >= 0.0 && (f as f64) < 1.8e19 {
                    Some(f as u64)
                } else {
                    None
                }
            }

            fn is_exact() -> bool {
                false
            }
        }
    };
}

float_scalar!(f32);
float_scalar!(f64);

impl Scalar for BigRational {
    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn from_u64(v: u64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }

    fn as_f64(&self) -> f64 {
        // numer/denom can individually overflow f64 for deep cylinders
        match (self.numer().to_f64(), self.denom().to_f64()) {
            (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
            _ => {
                let shift = self.denom().bits().max(self.numer().bits()) as i64 - 60;
                let shift = shift.max(0) as usize;
                let n = (self.numer() >> shift).to_f64().unwrap_or(0.0);
                let d = (self.denom() >> shift).to_f64().unwrap_or(f64::INFINITY);
                n / d
            }
        }
    }

    fn floor_u64(&self) -> Option<u64> {
        if self.is_negative() {
            return None;
        }
        let (q, _) = self.numer().div_rem(self.denom());
        q.to_u64()
    }

    fn is_exact() -> bool {
        true
    }
}

/// Exact rational value of a finite `f64`.
pub fn rational_from_f64(x: f64) -> Option<Rational> {
    BigRational::from_float(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_floor_and_conversion() {
        let x = Rational::from_ratio(7, 3);
        assert_eq!(x.floor_u64(), Some(2));
        assert!((x.as_f64() - 7.0 / 3.0).abs() < 1e-15);
        assert_eq!(Rational::from_ratio(-1, 2).floor_u64(), None);
    }

    #[test]
    fn huge_rational_to_f64() {
        let big = BigInt::from(3u8).pow(2000);
        let x = BigRational::new(big.clone(), big * BigInt::from(4u8));
        assert!((x.as_f64() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn float_floor() {
        assert_eq!(2.9f64.floor_u64(), Some(2));
        assert_eq!(2.9f32.floor_u64(), Some(2));
        assert_eq!(f64::NAN.floor_u64(), None);
    }
}
