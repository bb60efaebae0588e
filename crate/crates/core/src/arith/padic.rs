//! p-adic numbers with explicit precision, and Teichmüller lifts.
//!
//! A [`PadicNumber`] is either an exact zero or p^v * (u + O(p^N)) with u a
//! unit residue: the pair (v, N) says the value is known modulo p^(v+N) and
//! that its valuation is exactly v.  Additive cancellation can exhaust every
//! known digit; the result then degrades to the honest statement "O(p^b)"
//! (valuation at least b, no digits known), encoded as `prec = 0`.  All
//! comparisons are congruences up to stated precision and return an error
//! rather than an answer when the operands do not carry enough digits.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::arith::rational::{int_valuation, pow_u, Rat};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
enum Kind {
    /// Exact zero (valuation +infinity).
    Zero,
    /// p^val * (unit + O(p^prec)).  When prec = 0 nothing is known beyond
    /// "valuation >= val" and `unit` is meaningless (kept at zero).
    Approx { val: i64, unit: BigUint, prec: u32 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PadicNumber {
    p: u64,
    kind: Kind,
}

impl PadicNumber {
    pub fn exact_zero(p: u64) -> Self {
        PadicNumber { p, kind: Kind::Zero }
    }

    /// "O(p^bound)": valuation known to be at least `bound`, no digits known.
    pub fn zero_to_precision(p: u64, bound: i64) -> Self {
        PadicNumber {
            p,
            kind: Kind::Approx { val: bound, unit: BigUint::zero(), prec: 0 },
        }
    }

    pub fn one(p: u64, prec: u32) -> Self {
        Self::from_int(&BigInt::one(), p, prec)
    }

    pub fn from_int(n: &BigInt, p: u64, prec: u32) -> Self {
        Self::from_rational(&Rat::from(n.clone()), p, prec)
    }

    /// The image of an exact rational with `prec` certified unit digits; the
    /// valuation is computed exactly.
    pub fn from_rational(r: &Rat, p: u64, prec: u32) -> Self {
        assert!(prec >= 1, "requested zero digits of a rational");
        if r.is_zero() {
            return Self::exact_zero(p);
        }
        let vn = int_valuation(r.numer(), p);
        let vd = int_valuation(r.denom(), p);
        let modulus = pow_u(p, prec);
        let pb = BigInt::from(p);
        let num_unit = (r.numer() / pb.pow(vn as u32)).mod_floor(&BigInt::from(modulus.clone()));
        let den_unit = (r.denom() / pb.pow(vd as u32)).mod_floor(&BigInt::from(modulus.clone()));
        let num_unit = num_unit.to_biguint().expect("mod_floor non-negative");
        let den_unit = den_unit.to_biguint().expect("mod_floor non-negative");
        let inv = mod_inverse(&den_unit, &modulus)
            .expect("denominator unit part is invertible");
        PadicNumber {
            p,
            kind: Kind::Approx {
                val: vn - vd,
                unit: num_unit * inv % &modulus,
                prec,
            },
        }
    }

    /// Builds p^val * (unit + O(p^prec)) from raw parts, normalizing a
    /// non-unit residue by shifting its p-part into the valuation.
    pub fn from_unit_parts(p: u64, val: i64, unit: &BigUint, prec: u32) -> Self {
        if prec == 0 {
            return Self::zero_to_precision(p, val);
        }
        let modulus = pow_u(p, prec);
        let u = unit % &modulus;
        if u.is_zero() {
            // Nothing survives: only the bound val + prec is known.
            return Self::zero_to_precision(p, val + prec as i64);
        }
        let pb = BigUint::from(p);
        let mut shift = 0u32;
        let mut u = u;
        while (&u % &pb).is_zero() {
            u /= &pb;
            shift += 1;
        }
        PadicNumber {
            p,
            kind: Kind::Approx {
                val: val + shift as i64,
                unit: u % pow_u(p, prec - shift),
                prec: prec - shift,
            },
        }
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    pub fn is_exact_zero(&self) -> bool {
        matches!(self.kind, Kind::Zero)
    }

    /// Exact valuation, when one is known (None for exact zero or a value
    /// that cancelled below its certified digits).
    pub fn valuation(&self) -> Option<i64> {
        match &self.kind {
            Kind::Zero => None,
            Kind::Approx { prec: 0, .. } => None,
            Kind::Approx { val, .. } => Some(*val),
        }
    }

    /// Lower bound for the valuation (+infinity encoded as None).
    pub fn valuation_bound(&self) -> Option<i64> {
        match &self.kind {
            Kind::Zero => None,
            Kind::Approx { val, .. } => Some(*val),
        }
    }

    /// Certified unit digits (relative precision).
    pub fn precision(&self) -> u32 {
        match &self.kind {
            Kind::Zero => u32::MAX,
            Kind::Approx { prec, .. } => *prec,
        }
    }

    /// The exponent a such that the value is known modulo p^a (None: known
    /// exactly).
    pub fn absolute_precision(&self) -> Option<i64> {
        match &self.kind {
            Kind::Zero => None,
            Kind::Approx { val, prec, .. } => Some(val + *prec as i64),
        }
    }

    /// Forgets digits beyond `prec` certified unit digits (no-op when fewer
    /// are held).  Exact zeroes stay exact.
    pub fn truncate(&self, prec: u32) -> Self {
        match &self.kind {
            Kind::Zero => self.clone(),
            Kind::Approx { prec: p0, .. } if *p0 <= prec => self.clone(),
            Kind::Approx { val, unit, .. } => PadicNumber {
                p: self.p,
                kind: Kind::Approx { val: *val, unit: unit % pow_u(self.p, prec), prec },
            },
        }
    }

    pub fn unit_residue(&self) -> Option<&BigUint> {
        match &self.kind {
            Kind::Approx { unit, prec, .. } if *prec >= 1 => Some(unit),
            _ => None,
        }
    }

    pub fn is_unit(&self) -> bool {
        self.valuation() == Some(0)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_prime(other)?;
        match (&self.kind, &other.kind) {
            (Kind::Zero, _) | (_, Kind::Zero) => Ok(Self::exact_zero(self.p)),
            (
                Kind::Approx { val: v1, unit: u1, prec: n1 },
                Kind::Approx { val: v2, unit: u2, prec: n2 },
            ) => {
                let prec = *n1.min(n2);
                if prec == 0 {
                    return Ok(Self::zero_to_precision(self.p, v1 + v2));
                }
                let modulus = pow_u(self.p, prec);
                Ok(PadicNumber {
                    p: self.p,
                    kind: Kind::Approx { val: v1 + v2, unit: u1 * u2 % modulus, prec },
                })
            }
        }
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        self.check_prime(other)?;
        match &other.kind {
            Kind::Zero => Err(Error::Usage("division by exact p-adic zero".into())),
            Kind::Approx { prec: 0, .. } => Err(Error::Precision(
                "division by a value with no certified digits".into(),
            )),
            Kind::Approx { val: v2, unit: u2, prec: n2 } => match &self.kind {
                Kind::Zero => Ok(Self::exact_zero(self.p)),
                Kind::Approx { val: v1, unit: u1, prec: n1 } => {
                    let prec = *n1.min(n2);
                    if prec == 0 {
                        return Ok(Self::zero_to_precision(self.p, v1 - v2));
                    }
                    let modulus = pow_u(self.p, prec);
                    let inv = mod_inverse(&(u2 % &modulus), &modulus)
                        .expect("unit residue is invertible");
                    Ok(PadicNumber {
                        p: self.p,
                        kind: Kind::Approx { val: v1 - v2, unit: u1 * inv % modulus, prec },
                    })
                }
            },
        }
    }

    pub fn pow_i64(&self, e: i64) -> Result<Self> {
        if e == 0 {
            return Ok(Self::one(self.p, self.precision().min(1 << 20)));
        }
        let base = if e < 0 {
            Self::one(self.p, self.precision().min(1 << 20)).div(self)?
        } else {
            self.clone()
        };
        let mut acc: Option<Self> = None;
        let mut b = base;
        let mut e = e.unsigned_abs();
        while e > 0 {
            if e & 1 == 1 {
                acc = Some(match acc {
                    None => b.clone(),
                    Some(a) => a.mul(&b)?,
                });
            }
            e >>= 1;
            if e > 0 {
                b = b.mul(&b)?;
            }
        }
        Ok(acc.expect("nonzero exponent"))
    }

    pub fn neg(&self) -> Self {
        match &self.kind {
            Kind::Zero => self.clone(),
            Kind::Approx { prec: 0, .. } => self.clone(),
            Kind::Approx { val, unit, prec } => {
                let modulus = pow_u(self.p, *prec);
                PadicNumber {
                    p: self.p,
                    kind: Kind::Approx {
                        val: *val,
                        unit: (&modulus - unit % &modulus) % &modulus,
                        prec: *prec,
                    },
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_prime(other)?;
        match (&self.kind, &other.kind) {
            (Kind::Zero, _) => Ok(other.clone()),
            (_, Kind::Zero) => Ok(self.clone()),
            (
                Kind::Approx { val: v1, unit: u1, prec: n1 },
                Kind::Approx { val: v2, unit: u2, prec: n2 },
            ) => {
                // Work at the common absolute precision.
                let a1 = v1 + *n1 as i64;
                let a2 = v2 + *n2 as i64;
                let abs = a1.min(a2);
                let vmin = (*v1).min(*v2);
                if abs <= vmin {
                    return Ok(Self::zero_to_precision(self.p, vmin));
                }
                let digits = (abs - vmin) as u32;
                let modulus = pow_u(self.p, digits);
                let lift = |v: i64, u: &BigUint| -> BigUint {
                    u * pow_u(self.p, (v - vmin) as u32) % &modulus
                };
                let s = (lift(*v1, u1) + lift(*v2, u2)) % &modulus;
                Ok(Self::from_unit_parts(self.p, vmin, &s, digits))
            }
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    /// Whether the two values agree modulo p^e; errors when either side is
    /// not known modulo p^e.
    pub fn congruent_mod(&self, other: &Self, e: i64) -> Result<bool> {
        self.check_prime(other)?;
        for x in [self, other] {
            if let Some(a) = x.absolute_precision() {
                if a < e {
                    return Err(Error::Precision(format!(
                        "operand known only mod {}^{}, congruence mod {}^{} requested",
                        self.p, a, self.p, e
                    )));
                }
            }
        }
        let d = self.sub(other)?;
        Ok(match d.valuation_bound() {
            None => true,
            Some(v) => v >= e,
        })
    }

    /// The value as an integer residue modulo p^e (requires valuation >= 0
    /// and enough certified digits).
    pub fn residue_mod(&self, e: u32) -> Result<BigUint> {
        match &self.kind {
            Kind::Zero => Ok(BigUint::zero()),
            Kind::Approx { val, unit, prec } => {
                if *val < 0 {
                    return Err(Error::Usage(format!(
                        "value has negative valuation {val}; no integer residue"
                    )));
                }
                if *val >= e as i64 {
                    return Ok(BigUint::zero());
                }
                if val + *prec as i64 - e as i64 >= 0 && *prec > 0 {
                    Ok(unit * pow_u(self.p, *val as u32) % pow_u(self.p, e))
                } else {
                    Err(Error::Precision(format!(
                        "residue mod {}^{} requested with absolute precision {}",
                        self.p,
                        e,
                        val + *prec as i64
                    )))
                }
            }
        }
    }

    fn check_prime(&self, other: &Self) -> Result<()> {
        if self.p != other.p {
            return Err(Error::Usage(format!(
                "prime mismatch: {} vs {}",
                self.p, other.p
            )));
        }
        Ok(())
    }
}

impl std::fmt::Display for PadicNumber {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.kind {
            Kind::Zero => write!(f, "0"),
            Kind::Approx { val, prec: 0, .. } => write!(f, "O({}^{})", self.p, val),
            Kind::Approx { val, unit, prec } => {
                write!(f, "{}^{} * ({} + O({}^{}))", self.p, val, unit, self.p, prec)
            }
        }
    }
}

/// Serialized form used in JSON reports.
#[derive(Serialize)]
pub struct PadicRepr {
    pub p: u64,
    /// "zero" | "approx" | "bound"
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub valuation: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision: Option<u32>,
}

impl PadicNumber {
    pub fn repr(&self) -> PadicRepr {
        match &self.kind {
            Kind::Zero => PadicRepr {
                p: self.p,
                kind: "zero",
                valuation: None,
                unit: None,
                precision: None,
            },
            Kind::Approx { val, prec: 0, .. } => PadicRepr {
                p: self.p,
                kind: "bound",
                valuation: Some(*val),
                unit: None,
                precision: Some(0),
            },
            Kind::Approx { val, unit, prec } => PadicRepr {
                p: self.p,
                kind: "approx",
                valuation: Some(*val),
                unit: Some(unit.to_string()),
                precision: Some(*prec),
            },
        }
    }
}

/// Inverse modulo an arbitrary modulus; None when not coprime.
pub(crate) fn mod_inverse(a: &BigUint, modulus: &BigUint) -> Option<BigUint> {
    let e = BigInt::from(a.clone()).extended_gcd(&BigInt::from(modulus.clone()));
    if !e.gcd.is_one() {
        return None;
    }
    Some(
        e.x.mod_floor(&BigInt::from(modulus.clone()))
            .to_biguint()
            .expect("mod_floor non-negative"),
    )
}

/// Teichmüller lift of a modulo p^n: the unique (p-1)st root of unity (for
/// odd p; a fourth root +-1 determined by a mod 4 for p = 2) congruent to a
/// mod p.  Computed as the stable value of iterated p-th powers; returns the
/// exact zero when p divides a.
pub fn teichmuller(a: &BigInt, p: u64, n: u32) -> PadicNumber {
    assert!(n >= 1);
    let modulus = pow_u(p, n);
    let a_res = a
        .mod_floor(&BigInt::from(modulus.clone()))
        .to_biguint()
        .expect("mod_floor non-negative");
    if (&a_res % p).is_zero() {
        return PadicNumber::exact_zero(p);
    }
    let unit = teichmuller_residue(&a_res, p, n);
    PadicNumber { p, kind: Kind::Approx { val: 0, unit, prec: n } }
}

/// Residue form of the Teichmüller lift: omega(a) mod p^n for a a unit.
pub fn teichmuller_residue(a: &BigUint, p: u64, n: u32) -> BigUint {
    let modulus = pow_u(p, n);
    let a = a % &modulus;
    assert!(!(&a % p).is_zero(), "teichmuller of a non-unit residue");
    if p == 2 {
        // omega(a) = +-1 according to a mod 4 (the image of a in the
        // torsion of Z_2^x.)
        return if n == 1 || (&a % 4u32) == BigUint::one() {
            BigUint::one()
        } else {
            &modulus - BigUint::one()
        };
    }
    // Iterate x -> x^p until stable; convergence is geometric, so n+1
    // iterations always suffice but we stop early on a fixed point.
    let mut x = a;
    for _ in 0..=n {
        let next = x.modpow(&BigUint::from(p), &modulus);
        if next == x {
            break;
        }
        x = next;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> Rat {
        Rat::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn reduction_of_rationals() {
        // -1/3 at p = 3: valuation -1, unit -1 = 80 mod 81.
        let x = PadicNumber::from_rational(&rat(-1, 3), 3, 4);
        assert_eq!(x.valuation(), Some(-1));
        assert_eq!(x.unit_residue(), Some(&BigUint::from(80u32)));
        assert_eq!(x.precision(), 4);

        // 6 at p = 3: valuation 1, unit 2.
        let y = PadicNumber::from_rational(&rat(6, 1), 3, 2);
        assert_eq!(y.valuation(), Some(1));
        assert_eq!(y.unit_residue(), Some(&BigUint::from(2u32)));

        assert!(PadicNumber::from_rational(&Rat::zero(), 3, 4).is_exact_zero());
    }

    #[test]
    fn three_thirds_make_one() {
        let third = PadicNumber::from_rational(&rat(1, 3), 3, 5);
        let sum = third.add(&third).unwrap().add(&third).unwrap();
        assert!(sum.congruent_mod(&PadicNumber::one(3, 5), 4).unwrap());
        assert_eq!(sum.valuation(), Some(0));
    }

    #[test]
    fn cancellation_degrades_honestly() {
        let x = PadicNumber::from_rational(&rat(7, 1), 5, 3);
        let d = x.sub(&x).unwrap();
        assert_eq!(d.valuation(), None);
        assert_eq!(d.valuation_bound(), Some(3));
        // Still provably congruent to zero mod 5^3, but not mod 5^4.
        assert!(d.congruent_mod(&PadicNumber::exact_zero(5), 3).unwrap());
        assert!(d.congruent_mod(&PadicNumber::exact_zero(5), 4).is_err());
    }

    #[test]
    fn partial_cancellation_keeps_exact_valuation() {
        // 7 - 2 = 5: valuation jumps to 1, one digit is spent locating it.
        let a = PadicNumber::from_int(&BigInt::from(7), 5, 4);
        let b = PadicNumber::from_int(&BigInt::from(2), 5, 4);
        let d = a.sub(&b).unwrap();
        assert_eq!(d.valuation(), Some(1));
        assert_eq!(d.precision(), 3);
        assert_eq!(d.unit_residue(), Some(&BigUint::one()));
    }

    #[test]
    fn division_tracks_valuation() {
        let x = PadicNumber::from_rational(&rat(18, 1), 3, 4);
        let y = PadicNumber::from_rational(&rat(6, 1), 3, 4);
        let q = x.div(&y).unwrap();
        assert_eq!(q.valuation(), Some(1));
        assert!(q
            .congruent_mod(&PadicNumber::from_int(&BigInt::from(3), 3, 4), 4)
            .unwrap());
        let inv = PadicNumber::one(3, 4).div(&x).unwrap();
        assert_eq!(inv.valuation(), Some(-2));
    }

    #[test]
    fn negative_powers() {
        let x = PadicNumber::from_rational(&rat(2, 3), 3, 6);
        let y = x.pow_i64(-2).unwrap();
        assert!(y
            .congruent_mod(&PadicNumber::from_rational(&rat(9, 4), 3, 6), 4)
            .unwrap());
    }

    #[test]
    fn teichmuller_fixed_points() {
        // omega(2) at p = 3 mod 27: 2 -> 8 -> 26 -> 26.
        let w2 = teichmuller(&BigInt::from(2), 3, 3);
        assert_eq!(w2.unit_residue(), Some(&BigUint::from(26u32)));
        // omega(5) at p = 7 mod 49 = 19, and 19^3 = -1 mod 49.
        let w5 = teichmuller(&BigInt::from(5), 7, 2);
        assert_eq!(w5.unit_residue(), Some(&BigUint::from(19u32)));
        assert_eq!(
            BigUint::from(19u32).modpow(&BigUint::from(3u32), &BigUint::from(49u32)),
            BigUint::from(48u32)
        );
        // p | a gives the exact zero.
        assert!(teichmuller(&BigInt::from(21), 7, 3).is_exact_zero());
    }

    #[test]
    fn teichmuller_is_a_root_of_unity() {
        for (p, n) in [(3u64, 5u32), (5, 4), (7, 3)] {
            let modulus = pow_u(p, n);
            for a in 1..p {
                let w = teichmuller_residue(&BigUint::from(a), p, n);
                assert_eq!(
                    w.modpow(&BigUint::from(p - 1), &modulus),
                    BigUint::one(),
                    "omega({a})^{} at p={p}",
                    p - 1
                );
                assert_eq!(&w % p, BigUint::from(a));
            }
        }
    }

    #[test]
    fn teichmuller_at_two_is_sign_by_mod_four() {
        assert_eq!(
            teichmuller(&BigInt::from(5), 2, 4).unit_residue(),
            Some(&BigUint::one())
        );
        assert_eq!(
            teichmuller(&BigInt::from(3), 2, 4).unit_residue(),
            Some(&BigUint::from(15u32))
        );
    }

    #[test]
    fn residue_mod_of_integral_values() {
        let x = PadicNumber::from_rational(&rat(26, 1), 3, 4);
        assert_eq!(x.residue_mod(3).unwrap(), BigUint::from(26u32));
        let y = PadicNumber::from_rational(&rat(1, 3), 3, 4);
        assert!(y.residue_mod(2).is_err());
    }
}
