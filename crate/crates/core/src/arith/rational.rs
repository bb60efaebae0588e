//! Helpers on exact rationals.
//!
//! The arbitrary-precision rational type is `num_rational::BigRational`
//! (re-exported here as [`Rat`]); it keeps numerator and denominator coprime
//! with the sign on the numerator, which is exactly the canonical form the
//! rest of the crate relies on when serializing values as `num/den`.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

pub type Rat = num_rational::BigRational;

/// p-adic valuation of a nonzero rational: v_p(num) - v_p(den).
///
/// Errors on zero input (whose valuation is +infinity and is handled by the
/// caller, usually via [`crate::arith::PadicNumber::exact_zero`]).
pub fn rational_valuation(x: &Rat, p: u64) -> Result<i64> {
    if x.is_zero() {
        return Err(Error::Usage("valuation of zero requested".into()));
    }
    Ok(int_valuation(x.numer(), p) - int_valuation(x.denom(), p))
}

/// p-adic valuation of a nonzero integer.
pub fn int_valuation(n: &BigInt, p: u64) -> i64 {
    assert!(!n.is_zero(), "valuation of zero integer");
    let p = BigInt::from(p);
    let mut n = n.abs();
    let mut v = 0i64;
    // Doubling trick: divide out p, p^2, p^4, ... while possible, then
    // finish linearly; keeps the number of big divisions logarithmic.
    let mut chunk = p.clone();
    let mut chunk_v = 1i64;
    loop {
        let (q, r) = num_integer::Integer::div_rem(&n, &chunk);
        if r.is_zero() {
            n = q;
            v += chunk_v;
            let next = &chunk * &chunk;
            if next <= n {
                chunk = next;
                chunk_v *= 2;
            }
        } else if chunk_v == 1 {
            return v;
        } else {
            chunk = p.clone();
            chunk_v = 1;
        }
    }
}

/// x^e for integer e of either sign; errors on 0^negative.
pub fn pow_rational(x: &Rat, e: i64) -> Result<Rat> {
    if x.is_zero() && e < 0 {
        return Err(Error::Usage("negative power of zero".into()));
    }
    if e == 0 {
        return Ok(Rat::one());
    }
    let mag = x.pow(e.unsigned_abs().try_into().map_err(|_| {
        Error::Resource(format!("exponent {e} out of range"))
    })?);
    Ok(if e < 0 { mag.recip() } else { mag })
}

/// Parses "a/b" or "a" into a rational; used by the Bernoulli disk cache and
/// by CLI arguments.
pub fn parse_rational(s: &str) -> Result<Rat> {
    let s = s.trim();
    let mk_err = || Error::Parse(format!("bad rational {s:?}, expected \"num\" or \"num/den\""));
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n, d),
        None => (s, "1"),
    };
    let num: BigInt = num.parse().map_err(|_| mk_err())?;
    let den: BigInt = den.parse().map_err(|_| mk_err())?;
    if den.is_zero() {
        return Err(mk_err());
    }
    Ok(Rat::new(num, den))
}

/// p^e as an unsigned big integer.
pub fn pow_u(p: u64, e: u32) -> BigUint {
    BigUint::from(p).pow(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> Rat {
        Rat::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn valuation_of_rationals() {
        // v_3(-1/3) = -1, v_3(6) = 1, v_2(80) = 4, v_5(7/10) = -1.
        assert_eq!(rational_valuation(&rat(-1, 3), 3).unwrap(), -1);
        assert_eq!(rational_valuation(&rat(6, 1), 3).unwrap(), 1);
        assert_eq!(rational_valuation(&rat(80, 1), 2).unwrap(), 4);
        assert_eq!(rational_valuation(&rat(7, 10), 5).unwrap(), -1);
        assert!(rational_valuation(&rat(0, 1), 3).is_err());
    }

    #[test]
    fn valuation_of_large_powers() {
        let n = BigInt::from(3).pow(41) * BigInt::from(7);
        assert_eq!(int_valuation(&n, 3), 41);
    }

    #[test]
    fn integer_powers() {
        assert_eq!(pow_rational(&rat(2, 3), -2).unwrap(), rat(9, 4));
        assert_eq!(pow_rational(&rat(5, 1), 0).unwrap(), Rat::one());
        assert!(pow_rational(&Rat::zero(), -1).is_err());
    }

    #[test]
    fn rational_parsing_round_trips() {
        assert_eq!(parse_rational("-7/12").unwrap(), rat(-7, 12));
        assert_eq!(parse_rational("5").unwrap(), rat(5, 1));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }
}
