//! Integer helpers shared across the scheduling pipeline: gcd/lcm and a
//! nonnegative modulus for offset gap arithmetic.

use crate::error::{Error, Result};

/// Greatest common divisor by Euclid's algorithm. `gcd(0, b) = b`.
pub const fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 { a } else { gcd(b, a % b) }
}

/// Least common multiple. Overflow is reported, never wrapped.
pub fn lcm(a: u64, b: u64) -> Result<u64> {
    if a == 0 || b == 0 {
        return Ok(0);
    }
    (a / gcd(a, b))
        .checked_mul(b)
        .ok_or_else(|| Error::Overflow(format!("lcm({a}, {b})")))
}

/// lcm over an iterator of values; empty input yields 1.
pub fn lcm_all<I: IntoIterator<Item = u64>>(values: I) -> Result<u64> {
    let mut acc = 1u64;
    for v in values {
        acc = lcm(acc, v)?;
    }
    Ok(acc)
}

/// Remainder of `a / modulus` mapped into `[0, modulus)` even for negative `a`.
pub fn pos_mod(a: i64, modulus: u64) -> u64 {
    debug_assert!(modulus > 0);
    a.rem_euclid(modulus as i64) as u64
}

/// Ceiling of `a / b` in integers.
pub fn ceil_div(a: u64, b: u64) -> u64 {
    debug_assert!(b > 0);
    a.div_ceil(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gcd_basic() {
        assert_eq!(gcd(3, 4), 1);
        assert_eq!(gcd(4, 8), 4);
        assert_eq!(gcd(8, 4), 4);
        assert_eq!(gcd(12, 18), 6);
        assert_eq!(gcd(7, 7), 7);
    }

    #[test]
    fn lcm_basic() {
        assert_eq!(lcm(8, 5).unwrap(), 40);
        assert_eq!(lcm(4, 6).unwrap(), 12);
        assert_eq!(lcm(1, 9).unwrap(), 9);
    }

    #[test]
    fn lcm_overflow_is_reported() {
        let huge = u64::MAX - 1;
        assert!(matches!(lcm(huge, huge - 2), Err(Error::Overflow(_))));
    }

    #[test]
    fn lcm_all_of_intervals() {
        assert_eq!(lcm_all([4, 2, 2, 4, 4, 2, 4]).unwrap(), 4);
        assert_eq!(lcm_all([4, 8, 5]).unwrap(), 40);
        assert_eq!(lcm_all(std::iter::empty()).unwrap(), 1);
    }

    #[test]
    fn pos_mod_negative_operands() {
        assert_eq!(pos_mod(-1, 4), 3);
        assert_eq!(pos_mod(-8, 4), 0);
        assert_eq!(pos_mod(10, 3), 1);
    }

    #[test]
    fn gcd_lcm_product_identity() {
        for a in 1..40u64 {
            for b in 1..40u64 {
                assert_eq!(gcd(a, b) * lcm(a, b).unwrap(), a * b);
            }
        }
    }
}
