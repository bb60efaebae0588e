//! Exact cyclotomic numbers: Q[X] modulo the m-th cyclotomic polynomial.
//!
//! An element of Q(mu_m) is stored as its coefficient vector of length
//! phi(m) in the power basis 1, zeta, ..., zeta^(phi(m)-1) with zeta a fixed
//! abstract primitive m-th root of unity.  No complex or p-adic embedding is
//! chosen; "which" primitive root zeta denotes is never decided, so every
//! per-character value in later modules is well defined exactly up to Galois
//! conjugacy, and only Galois-stable combinations are ever reduced to Q.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::arith::rational::Rat;
use crate::error::{Error, Result};

/// Euler's totient, by factoring m.
pub fn euler_phi(m: u32) -> u32 {
    assert!(m >= 1);
    let mut m = m;
    let mut phi = 1u32;
    let mut q = 2u32;
    while q.saturating_mul(q) <= m {
        if m.is_multiple_of(q) {
            let mut qe = 1;
            while m.is_multiple_of(q) {
                m /= q;
                qe *= q;
            }
            phi *= qe - qe / q;
        }
        q += 1;
    }
    if m > 1 {
        phi *= m - 1;
    }
    phi
}

fn phi_cache() -> &'static Mutex<HashMap<u32, Arc<Vec<BigInt>>>> {
    static CACHE: OnceLock<Mutex<HashMap<u32, Arc<Vec<BigInt>>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Product of exact cyclotomic numbers, promoted step by step to the lcm of
/// the orders seen so far; refuses orders past a practical bound rather
/// than churning (the modular route has no such limit).
pub fn product_promoting(factors: &[CycloElem]) -> Result<CycloElem> {
    const MAX_ORDER: u32 = 100_000;
    let mut acc = CycloElem::one(1);
    for f in factors {
        let target = num_integer::Integer::lcm(&acc.order(), &f.order());
        if target > MAX_ORDER {
            return Err(Error::Resource(format!(
                "cyclotomic product order grew to {target}; use the modular route"
            )));
        }
        acc = acc.promote(target)?.mul(&f.promote(target)?)?;
    }
    Ok(acc)
}

/// Coefficients of the m-th cyclotomic polynomial, constant term first,
/// monic of degree phi(m).  Computed by exact division of X^m - 1 by the
/// product of the lower cyclotomic polynomials, and cached globally.
pub fn cyclotomic_polynomial(m: u32) -> Arc<Vec<BigInt>> {
    assert!(m >= 1);
    if let Some(hit) = phi_cache().lock().unwrap().get(&m) {
        return hit.clone();
    }
    let poly = Arc::new(compute_cyclotomic(m));
    phi_cache().lock().unwrap().insert(m, poly.clone());
    poly
}

fn compute_cyclotomic(m: u32) -> Vec<BigInt> {
    if m == 1 {
        return vec![BigInt::from(-1), BigInt::one()];
    }
    // X^m - 1.
    let mut num = vec![BigInt::zero(); m as usize + 1];
    num[0] = BigInt::from(-1);
    num[m as usize] = BigInt::one();
    // Divide out Phi_d for every proper divisor d of m.
    for d in 1..m {
        if m.is_multiple_of(d) {
            let phi_d = cyclotomic_polynomial(d);
            num = exact_poly_div(&num, &phi_d);
        }
    }
    num
}

/// Exact division of integer polynomials, panicking on a nonzero remainder
/// (which cannot happen for cyclotomic factors).
fn exact_poly_div(num: &[BigInt], den: &[BigInt]) -> Vec<BigInt> {
    let dn = num.len() - 1;
    let dd = den.len() - 1;
    assert!(den[dd].is_one(), "divisor must be monic");
    assert!(dn >= dd);
    let mut rem = num.to_vec();
    let mut quot = vec![BigInt::zero(); dn - dd + 1];
    for i in (dd..=dn).rev() {
        let c = std::mem::replace(&mut rem[i], BigInt::zero());
        if c.is_zero() {
            continue;
        }
        for (j, dc) in den.iter().enumerate().take(dd) {
            rem[i - dd + j] -= &c * dc;
        }
        quot[i - dd] = c;
    }
    assert!(rem.iter().all(Zero::is_zero), "non-exact cyclotomic division");
    quot
}

/// An exact element of Q(mu_m) in the power basis modulo Phi_m.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CycloElem {
    order: u32,
    coeffs: Vec<Rat>,
}

impl CycloElem {
    pub fn zero(order: u32) -> Self {
        let d = euler_phi(order) as usize;
        CycloElem { order, coeffs: vec![Rat::zero(); d] }
    }

    pub fn one(order: u32) -> Self {
        Self::from_rational(order, Rat::one())
    }

    pub fn from_rational(order: u32, r: Rat) -> Self {
        let mut e = Self::zero(order);
        e.coeffs[0] = r;
        e
    }

    /// Element from coefficients on the powers 1, zeta, zeta^2, ... (any
    /// length; reduced modulo Phi_order).
    pub(crate) fn from_power_coeffs(order: u32, poly: Vec<Rat>) -> Self {
        CycloElem { order, coeffs: reduce_mod_phi(poly, order) }
    }

    /// zeta_m^k as an element of the order-m ring (k taken mod m).
    pub fn root_of_unity(order: u32, k: i64) -> Self {
        let m = order as i64;
        let k = k.rem_euclid(m) as usize;
        let d = euler_phi(order) as usize;
        if k < d {
            let mut e = Self::zero(order);
            e.coeffs[k] = Rat::one();
            return e;
        }
        let mut poly = vec![Rat::zero(); k + 1];
        poly[k] = Rat::one();
        CycloElem { order, coeffs: reduce_mod_phi(poly, order) }
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// Coefficients in the power basis, length phi(order).
    pub fn coeffs(&self) -> &[Rat] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    fn check_same_order(&self, other: &Self) -> Result<()> {
        if self.order != other.order {
            return Err(Error::Usage(format!(
                "cyclotomic order mismatch: {} vs {} (promote to the lcm first)",
                self.order, other.order
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_order(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        Ok(CycloElem { order: self.order, coeffs })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_order(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a - b)
            .collect();
        Ok(CycloElem { order: self.order, coeffs })
    }

    pub fn neg(&self) -> Self {
        CycloElem {
            order: self.order,
            coeffs: self.coeffs.iter().map(|a| -a).collect(),
        }
    }

    pub fn scalar_mul(&self, r: &Rat) -> Self {
        CycloElem {
            order: self.order,
            coeffs: self.coeffs.iter().map(|a| a * r).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_same_order(other)?;
        let d = self.coeffs.len();
        let mut prod = vec![Rat::zero(); 2 * d.max(1) - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                if !b.is_zero() {
                    prod[i + j] += a * b;
                }
            }
        }
        Ok(CycloElem { order: self.order, coeffs: reduce_mod_phi(prod, self.order) })
    }

    /// Small non-negative power by repeated squaring.
    pub fn pow(&self, e: u32) -> Result<Self> {
        let mut acc = Self::one(self.order);
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base)?;
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base)?;
            }
        }
        Ok(acc)
    }

    /// Re-expresses the element in the ring of order `new_order` (a multiple
    /// of the current order) via zeta_m = zeta_M^(M/m).
    pub fn promote(&self, new_order: u32) -> Result<Self> {
        if new_order == self.order {
            return Ok(self.clone());
        }
        if !new_order.is_multiple_of(self.order) {
            return Err(Error::Usage(format!(
                "cannot promote order {} into order {}",
                self.order, new_order
            )));
        }
        let step = (new_order / self.order) as usize;
        let deg = (self.coeffs.len() - 1) * step;
        let mut poly = vec![Rat::zero(); deg + 1];
        for (j, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() {
                poly[j * step] = c.clone();
            }
        }
        Ok(CycloElem { order: new_order, coeffs: reduce_mod_phi(poly, new_order) })
    }

    /// The Galois action zeta |-> zeta^t for t coprime to the order.
    pub fn galois(&self, t: i64) -> Result<Self> {
        let m = self.order as i64;
        let t = t.rem_euclid(m);
        if num_integer::gcd(t, m) != 1 {
            return Err(Error::Usage(format!(
                "galois exponent {t} not coprime to order {m}"
            )));
        }
        let deg = (self.coeffs.len() as i64 - 1) * t;
        let mut poly = vec![Rat::zero(); deg as usize + 1];
        for (j, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() {
                let k = ((j as i64) * t).rem_euclid(m) as usize;
                poly[k] += c;
            }
        }
        poly.truncate(poly.iter().rposition(|c| !c.is_zero()).map_or(1, |i| i + 1));
        Ok(CycloElem { order: self.order, coeffs: reduce_mod_phi(poly, self.order) })
    }

    /// Complex conjugation, zeta |-> zeta^(-1).
    pub fn conj(&self) -> Self {
        self.galois(self.order as i64 - 1)
            .expect("order - 1 is always coprime to the order")
    }

    /// Extracts the rational value of an element all of whose non-constant
    /// coordinates vanish; errors otherwise, naming the first bad coordinate.
    pub fn reduce_to_rational(&self) -> Result<Rat> {
        for (j, c) in self.coeffs.iter().enumerate().skip(1) {
            if !c.is_zero() {
                return Err(Error::Rationality(format!(
                    "coordinate {} of order-{} element is {} != 0",
                    j, self.order, c
                )));
            }
        }
        Ok(self.coeffs[0].clone())
    }

    /// Largest absolute value among numerators and denominators; used only
    /// for resource reporting.
    pub fn coeff_bits(&self) -> u64 {
        self.coeffs
            .iter()
            .map(|c| c.numer().bits().max(c.denom().bits()))
            .max()
            .unwrap_or(0)
    }
}

/// Reduces a rational polynomial (any degree) modulo Phi_order, returning the
/// canonical coefficient vector of length phi(order).
fn reduce_mod_phi(mut poly: Vec<Rat>, order: u32) -> Vec<Rat> {
    let phi = cyclotomic_polynomial(order);
    let d = phi.len() - 1;
    let phi_rat: Vec<Rat> = phi.iter().map(|c| Rat::from(c.clone())).collect();
    for i in (d..poly.len()).rev() {
        let c = std::mem::replace(&mut poly[i], Rat::zero());
        if c.is_zero() {
            continue;
        }
        for (j, pc) in phi_rat.iter().enumerate().take(d) {
            if !pc.numer().is_zero() {
                let t = &c * pc;
                poly[i - d + j] -= t;
            }
        }
    }
    poly.resize(d, Rat::zero());
    poly
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ri(n: i64) -> Rat {
        Rat::from(BigInt::from(n))
    }

    fn ints(p: &[i64]) -> Vec<BigInt> {
        p.iter().map(|&c| BigInt::from(c)).collect()
    }

    #[test]
    fn small_cyclotomic_polynomials() {
        assert_eq!(*cyclotomic_polynomial(1), ints(&[-1, 1]));
        assert_eq!(*cyclotomic_polynomial(2), ints(&[1, 1]));
        assert_eq!(*cyclotomic_polynomial(3), ints(&[1, 1, 1]));
        assert_eq!(*cyclotomic_polynomial(4), ints(&[1, 0, 1]));
        assert_eq!(*cyclotomic_polynomial(6), ints(&[1, -1, 1]));
        assert_eq!(*cyclotomic_polynomial(12), ints(&[1, 0, -1, 0, 1]));
        // First index with a coefficient outside {-1, 0, 1}.
        let c105 = cyclotomic_polynomial(105);
        assert_eq!(c105[7], BigInt::from(-2));
    }

    #[test]
    fn phi_agrees_with_degree() {
        for m in 1..=200u32 {
            assert_eq!(
                cyclotomic_polynomial(m).len() as u32 - 1,
                euler_phi(m),
                "degree of Phi_{m}"
            );
        }
    }

    #[test]
    fn product_over_divisors_is_x_pow_m_minus_1() {
        // Multiply Phi_d over all d | m and compare with X^m - 1.
        for m in [1u32, 2, 6, 12, 30] {
            let mut prod = vec![BigInt::one()];
            for d in 1..=m {
                if m % d == 0 {
                    let f = cyclotomic_polynomial(d);
                    let mut next = vec![BigInt::zero(); prod.len() + f.len() - 1];
                    for (i, a) in prod.iter().enumerate() {
                        for (j, b) in f.iter().enumerate() {
                            next[i + j] += a * b;
                        }
                    }
                    prod = next;
                }
            }
            let mut expect = vec![BigInt::zero(); m as usize + 1];
            expect[0] = BigInt::from(-1);
            expect[m as usize] = BigInt::one();
            assert_eq!(prod, expect, "m = {m}");
        }
    }

    #[test]
    fn zeta3_squared() {
        // zeta_3^2 = -1 - zeta_3 since 1 + zeta + zeta^2 = 0.
        let z = CycloElem::root_of_unity(3, 1);
        let sq = z.mul(&z).unwrap();
        assert_eq!(sq.coeffs(), &[ri(-1), ri(-1)]);
        assert_eq!(sq, CycloElem::root_of_unity(3, 2));
    }

    #[test]
    fn gaussian_norm_of_one_plus_i() {
        // (1 + zeta_4)(1 - zeta_4) = 2.
        let one = CycloElem::one(4);
        let i = CycloElem::root_of_unity(4, 1);
        let prod = one.add(&i).unwrap().mul(&one.sub(&i).unwrap()).unwrap();
        assert_eq!(prod.reduce_to_rational().unwrap(), ri(2));
    }

    #[test]
    fn root_of_unity_order_and_wraparound() {
        let z = CycloElem::root_of_unity(12, 5);
        assert_eq!(z.pow(12).unwrap(), CycloElem::one(12));
        assert_ne!(z.pow(6).unwrap(), CycloElem::one(12));
        assert_eq!(CycloElem::root_of_unity(12, -7), z);
        assert_eq!(CycloElem::root_of_unity(12, 17), z);
    }

    #[test]
    fn full_sum_of_fifth_roots_is_rational() {
        let mut s = CycloElem::zero(5);
        for k in 1..5 {
            s = s.add(&CycloElem::root_of_unity(5, k)).unwrap();
        }
        assert_eq!(s.reduce_to_rational().unwrap(), ri(-1));
        // A lone primitive root is not rational.
        assert!(CycloElem::root_of_unity(5, 1).reduce_to_rational().is_err());
    }

    #[test]
    fn promotion_preserves_multiplicative_order() {
        let z3 = CycloElem::root_of_unity(3, 1).promote(12).unwrap();
        assert_eq!(z3, CycloElem::root_of_unity(12, 4));
        assert_eq!(z3.pow(3).unwrap(), CycloElem::one(12));
        assert_ne!(z3, CycloElem::one(12));
        assert!(CycloElem::root_of_unity(3, 1).promote(8).is_err());
    }

    #[test]
    fn galois_and_conjugation() {
        let z = CycloElem::root_of_unity(8, 1);
        assert_eq!(z.galois(3).unwrap(), CycloElem::root_of_unity(8, 3));
        assert!(z.galois(2).is_err());
        // zeta + conj(zeta) for zeta = zeta_8: sqrt(2) is not rational...
        let tr = z.add(&z.conj()).unwrap();
        assert!(tr.reduce_to_rational().is_err());
        // ...but its square is 2.
        assert_eq!(tr.mul(&tr).unwrap().reduce_to_rational().unwrap(), ri(2));
    }

    #[test]
    fn order_mismatch_is_a_usage_error() {
        let a = CycloElem::one(3);
        let b = CycloElem::one(4);
        assert!(matches!(a.add(&b), Err(crate::Error::Usage(_))));
        assert!(matches!(a.mul(&b), Err(crate::Error::Usage(_))));
    }
}
