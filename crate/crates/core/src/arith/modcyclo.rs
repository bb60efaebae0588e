//! Cyclotomic integers truncated p-adically: (Z/p^W)[X] modulo Phi_m(X).
//!
//! This is the fast counterpart of [`CycloElem`](crate::arith::CycloElem) for
//! deep tower levels.  A ring fixes the order m, the prime p and a working
//! precision W; every element carries, besides its coefficient vector mod
//! p^W, a certified-digit count `prec <= W`.  Operations combine certified
//! digits pessimistically (minimum over operands, minus the exact loss of any
//! division by a power of p), so a stored precision never overstates what is
//! actually known.  Negative p-valuations are handled by the wrapper
//! [`ShiftedModElem`], which keeps an explicit power of p in front of an
//! integral element instead of ever inverting p in the ring.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::arith::cyclotomic::{cyclotomic_polynomial, CycloElem};
use crate::arith::padic::PadicNumber;
use crate::arith::rational::{pow_rational, pow_u, rational_valuation, Rat};
use crate::error::{Error, Result};

/// Ambient ring (Z/p^W)[X]/Phi_m(X).
#[derive(Clone, Debug)]
pub struct ModCycloRing {
    order: u32,
    p: u64,
    w: u32,
    modulus: BigUint,
    /// Phi_m with coefficients normalized into [0, p^W), constant term first.
    phi: Vec<BigUint>,
}

/// Element of a [`ModCycloRing`]: coefficients mod p^W, of which the low
/// `prec` p-adic digits are certified.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CycloModElem {
    order: u32,
    coeffs: Vec<BigUint>,
    prec: u32,
}

/// p^shift times an integral ring element; the product form in which p-adic
/// L-values with negative valuation circulate.
#[derive(Clone, Debug)]
pub struct ShiftedModElem {
    pub shift: i64,
    pub elem: CycloModElem,
}

impl ModCycloRing {
    pub fn new(order: u32, p: u64, w: u32) -> Self {
        assert!(order >= 1 && p >= 2 && w >= 1);
        let modulus = pow_u(p, w);
        let phi = cyclotomic_polynomial(order)
            .iter()
            .map(|c| normalize_int(c, &modulus))
            .collect();
        ModCycloRing { order, p, w, modulus, phi }
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    /// Working precision W (an upper bound for any element's certified digits).
    pub fn working_prec(&self) -> u32 {
        self.w
    }

    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    fn degree(&self) -> usize {
        self.phi.len() - 1
    }

    fn check(&self, e: &CycloModElem) -> Result<()> {
        if e.order != self.order {
            return Err(Error::Usage(format!(
                "ring order mismatch: element of order {} in ring of order {}",
                e.order, self.order
            )));
        }
        Ok(())
    }

    pub fn zero(&self) -> CycloModElem {
        CycloModElem {
            order: self.order,
            coeffs: vec![BigUint::zero(); self.degree()],
            prec: self.w,
        }
    }

    pub fn one(&self) -> CycloModElem {
        self.from_int(&BigInt::one())
    }

    pub fn from_int(&self, n: &BigInt) -> CycloModElem {
        let mut e = self.zero();
        e.coeffs[0] = normalize_int(n, &self.modulus);
        e
    }

    /// Reduction of an exact rational scalar whose denominator is prime to p.
    pub fn from_rational(&self, r: &Rat) -> Result<CycloModElem> {
        let num = normalize_int(r.numer(), &self.modulus);
        let den = normalize_int(r.denom(), &self.modulus);
        let den_inv = self.scalar_inverse(&den)?;
        let mut e = self.zero();
        e.coeffs[0] = num * den_inv % &self.modulus;
        Ok(e)
    }

    /// zeta_m^k in this ring.
    pub fn root_of_unity(&self, k: i64) -> CycloModElem {
        let m = self.order as i64;
        let k = k.rem_euclid(m) as usize;
        let d = self.degree();
        if k < d {
            let mut e = self.zero();
            e.coeffs[k] = BigUint::one();
            return e;
        }
        let mut poly = vec![BigUint::zero(); k + 1];
        poly[k] = BigUint::one();
        self.reduce_poly(poly, self.w)
    }

    fn reduce_poly(&self, mut poly: Vec<BigUint>, prec: u32) -> CycloModElem {
        let d = self.degree();
        for i in (d..poly.len()).rev() {
            let c = std::mem::replace(&mut poly[i], BigUint::zero());
            if c.is_zero() {
                continue;
            }
            for (j, pc) in self.phi.iter().enumerate().take(d) {
                if !pc.is_zero() {
                    // poly[i-d+j] -= c * pc  (mod p^W)
                    let t = &c * pc % &self.modulus;
                    let cur = &poly[i - d + j];
                    poly[i - d + j] = (cur + &self.modulus - t) % &self.modulus;
                }
            }
        }
        poly.resize(d, BigUint::zero());
        CycloModElem { order: self.order, coeffs: poly, prec }
    }

    pub fn add(&self, a: &CycloModElem, b: &CycloModElem) -> Result<CycloModElem> {
        self.check(a)?;
        self.check(b)?;
        let coeffs = a
            .coeffs
            .iter()
            .zip(&b.coeffs)
            .map(|(x, y)| (x + y) % &self.modulus)
            .collect();
        Ok(CycloModElem { order: self.order, coeffs, prec: a.prec.min(b.prec) })
    }

    pub fn sub(&self, a: &CycloModElem, b: &CycloModElem) -> Result<CycloModElem> {
        self.check(a)?;
        self.check(b)?;
        let coeffs = a
            .coeffs
            .iter()
            .zip(&b.coeffs)
            .map(|(x, y)| (x + &self.modulus - y) % &self.modulus)
            .collect();
        Ok(CycloModElem { order: self.order, coeffs, prec: a.prec.min(b.prec) })
    }

    pub fn neg(&self, a: &CycloModElem) -> Result<CycloModElem> {
        self.sub(&self.zero(), a)
    }

    pub fn mul(&self, a: &CycloModElem, b: &CycloModElem) -> Result<CycloModElem> {
        self.check(a)?;
        self.check(b)?;
        let d = self.degree();
        let mut prod = vec![BigUint::zero(); 2 * d.max(1) - 1];
        for (i, x) in a.coeffs.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, y) in b.coeffs.iter().enumerate() {
                if !y.is_zero() {
                    prod[i + j] = (&prod[i + j] + x * y) % &self.modulus;
                }
            }
        }
        Ok(self.reduce_poly(prod, a.prec.min(b.prec)))
    }

    pub fn scalar_mul(&self, a: &CycloModElem, s: &BigInt) -> Result<CycloModElem> {
        self.check(a)?;
        let s = normalize_int(s, &self.modulus);
        let coeffs = a.coeffs.iter().map(|x| x * &s % &self.modulus).collect();
        Ok(CycloModElem { order: self.order, coeffs, prec: a.prec })
    }

    pub fn pow(&self, a: &CycloModElem, e: u64) -> Result<CycloModElem> {
        let mut acc = self.one();
        acc.prec = a.prec;
        let mut base = a.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &base)?;
            }
            e >>= 1;
            if e > 0 {
                base = self.mul(&base, &base)?;
            }
        }
        Ok(acc)
    }

    /// Inverse of a scalar unit mod p^W, by the extended Euclid algorithm.
    pub fn scalar_inverse(&self, s: &BigUint) -> Result<BigUint> {
        let s_int = BigInt::from(s.clone());
        let m_int = BigInt::from(self.modulus.clone());
        let e = s_int.extended_gcd(&m_int);
        if !e.gcd.is_one() {
            return Err(Error::Usage(format!(
                "scalar {s} is not a unit mod {}^{}",
                self.p, self.w
            )));
        }
        Ok(normalize_int(&e.x, &self.modulus))
    }

    /// Exact division by p^j.  Requires every certified digit of the input to
    /// be consistent with divisibility; costs exactly j certified digits.
    pub fn div_exact_p_pow(&self, a: &CycloModElem, j: u32) -> Result<CycloModElem> {
        self.check(a)?;
        if j == 0 {
            return Ok(a.clone());
        }
        if a.prec < j {
            return Err(Error::Precision(format!(
                "cannot divide by {}^{}: only {} certified digits",
                self.p, j, a.prec
            )));
        }
        let pj = pow_u(self.p, j);
        let mut coeffs = Vec::with_capacity(a.coeffs.len());
        for c in &a.coeffs {
            let (q, r) = c.div_rem(&pj);
            if !r.is_zero() {
                return Err(Error::Precision(format!(
                    "division by {}^{} is not exact (residue {} mod {})",
                    self.p, j, r, pj
                )));
            }
            coeffs.push(q);
        }
        Ok(CycloModElem { order: self.order, coeffs, prec: a.prec - j })
    }

    /// Minimal p-valuation among coefficients, judged from certified digits.
    /// Returns None when every coefficient vanishes to certified precision.
    pub fn min_valuation(&self, a: &CycloModElem) -> Result<Option<u32>> {
        self.check(a)?;
        let cap = pow_u(self.p, a.prec);
        let mut best: Option<u32> = None;
        for c in &a.coeffs {
            let c = c % &cap;
            if c.is_zero() {
                continue;
            }
            let mut v = 0u32;
            let mut c = c;
            let p = BigUint::from(self.p);
            while (&c % &p).is_zero() {
                c /= &p;
                v += 1;
            }
            best = Some(best.map_or(v, |b| b.min(v)));
        }
        Ok(best)
    }

    /// Whether a and b agree modulo p^e on every coordinate.  Errors if either
    /// operand has fewer than e certified digits.
    pub fn congruent_mod(&self, a: &CycloModElem, b: &CycloModElem, e: u32) -> Result<bool> {
        self.check(a)?;
        self.check(b)?;
        if a.prec < e || b.prec < e {
            return Err(Error::Precision(format!(
                "congruence mod {}^{} requested with only {} certified digits",
                self.p,
                e,
                a.prec.min(b.prec)
            )));
        }
        let pe = pow_u(self.p, e);
        Ok(a.coeffs.iter().zip(&b.coeffs).all(|(x, y)| x % &pe == y % &pe))
    }

    /// Image of an exact cyclotomic element with p-integral coefficients.
    /// The element order must equal the ring order (promote first otherwise).
    pub fn reduce_exact(&self, e: &CycloElem) -> Result<CycloModElem> {
        let shifted = self.reduce_exact_shifted(e)?;
        if shifted.shift < 0 {
            return Err(Error::Usage(format!(
                "element has p-denominator {}^{}; use reduce_exact_shifted",
                self.p, -shifted.shift
            )));
        }
        let scale = self.from_int(&BigInt::from(self.p).pow(shifted.shift as u32));
        self.mul(&scale, &shifted.elem)
    }

    /// Image of an exact cyclotomic element as p^shift times an integral
    /// element, factoring the whole p-part out of the common denominator.
    pub fn reduce_exact_shifted(&self, e: &CycloElem) -> Result<ShiftedModElem> {
        if e.order() != self.order {
            return Err(Error::Usage(format!(
                "order mismatch: exact element of order {} into ring of order {}",
                e.order(),
                self.order
            )));
        }
        // Common denominator of all coefficients.
        let mut den = BigInt::one();
        for c in e.coeffs() {
            den = den.lcm(c.denom());
        }
        let p = BigInt::from(self.p);
        let mut v = 0i64;
        let mut den_prime = den.clone();
        while (&den_prime % &p).is_zero() {
            den_prime /= &p;
            v += 1;
        }
        let den_inv = self.scalar_inverse(&normalize_int(&den_prime, &self.modulus))?;
        let coeffs = e
            .coeffs()
            .iter()
            .map(|c| {
                let int = c.numer() * (&den / c.denom());
                normalize_int(&int, &self.modulus) * &den_inv % &self.modulus
            })
            .collect();
        Ok(ShiftedModElem {
            shift: -v,
            elem: CycloModElem { order: self.order, coeffs, prec: self.w },
        })
    }

    /// Re-expresses an element in a larger ring of order a multiple of this
    /// one (same prime; target precision is the smaller of the two workings).
    pub fn promote(
        &self,
        a: &CycloModElem,
        target: &ModCycloRing,
    ) -> Result<CycloModElem> {
        self.check(a)?;
        if target.p != self.p {
            return Err(Error::Usage("promotion across different primes".into()));
        }
        if !target.order.is_multiple_of(self.order) {
            return Err(Error::Usage(format!(
                "cannot promote order {} into order {}",
                self.order, target.order
            )));
        }
        let step = (target.order / self.order) as usize;
        let deg = (a.coeffs.len().max(1) - 1) * step;
        let mut poly = vec![BigUint::zero(); deg + 1];
        for (j, c) in a.coeffs.iter().enumerate() {
            if !c.is_zero() {
                poly[j * step] = c % target.modulus();
            }
        }
        Ok(target.reduce_poly(poly, a.prec.min(target.w)))
    }

    /// Extracts the constant (rational) value of an element whose other
    /// coordinates vanish to certified precision.  The result is the constant
    /// coefficient together with the number of digits at which the vanishing
    /// and the value are certified.
    pub fn reduce_to_constant(&self, a: &CycloModElem) -> Result<(BigUint, u32)> {
        self.check(a)?;
        if a.prec == 0 {
            return Err(Error::Precision(
                "no certified digits left when reducing to a constant".into(),
            ));
        }
        let pe = pow_u(self.p, a.prec);
        for (j, c) in a.coeffs.iter().enumerate().skip(1) {
            if !(c % &pe).is_zero() {
                return Err(Error::Rationality(format!(
                    "coordinate {} is {} != 0 mod {}^{}",
                    j,
                    c % &pe,
                    self.p,
                    a.prec
                )));
            }
        }
        Ok((&a.coeffs[0] % &pe, a.prec))
    }
}

impl CycloModElem {
    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn coeffs(&self) -> &[BigUint] {
        &self.coeffs
    }

    /// Certified p-adic digits.
    pub fn precision(&self) -> u32 {
        self.prec
    }

    /// Caps the certified digits (never raises them).
    pub fn with_precision(mut self, prec: u32) -> Self {
        self.prec = self.prec.min(prec);
        self
    }

    pub fn is_zero_to_precision(&self, ring: &ModCycloRing) -> bool {
        let pe = pow_u(ring.prime(), self.prec);
        self.coeffs.iter().all(|c| (c % &pe).is_zero())
    }
}

impl ShiftedModElem {
    pub fn one(ring: &ModCycloRing) -> Self {
        ShiftedModElem { shift: 0, elem: ring.one() }
    }

    pub fn mul(&self, ring: &ModCycloRing, other: &Self) -> Result<Self> {
        Ok(ShiftedModElem {
            shift: self.shift + other.shift,
            elem: ring.mul(&self.elem, &other.elem)?,
        })
    }

    pub fn scale_shift(mut self, delta: i64) -> Self {
        self.shift += delta;
        self
    }

    /// Collapses a constant-valued element into a p-adic number, p^shift
    /// times the constant, carrying over the certified digits.
    pub fn to_constant_padic(&self, ring: &ModCycloRing) -> Result<PadicNumber> {
        let (residue, prec) = ring.reduce_to_constant(&self.elem)?;
        Ok(PadicNumber::from_unit_parts(ring.p, self.shift, &residue, prec))
    }

    /// Multiplies by a nonzero exact rational: its p-part moves into the
    /// shift, the unit part multiplies the element without digit loss.
    pub fn scale_rational(&self, ring: &ModCycloRing, r: &Rat) -> Result<Self> {
        if r.is_zero() {
            return Err(Error::Usage(
                "scaling a shifted element by zero; handle exact zeros separately".into(),
            ));
        }
        let v = rational_valuation(r, ring.p)?;
        let unit = r * pow_rational(&Rat::from(BigInt::from(ring.p)), -v)?;
        let num = normalize_int(unit.numer(), &ring.modulus);
        let den = normalize_int(unit.denom(), &ring.modulus);
        let inv = ring.scalar_inverse(&den)?;
        let scalar = BigInt::from(num * inv % &ring.modulus);
        Ok(ShiftedModElem {
            shift: self.shift + v,
            elem: ring.scalar_mul(&self.elem, &scalar)?,
        })
    }
}

/// Maps a signed integer into [0, modulus).
fn normalize_int(n: &BigInt, modulus: &BigUint) -> BigUint {
    let m = BigInt::from(modulus.clone());
    let r = n.mod_floor(&m);
    r.to_biguint().expect("mod_floor result is non-negative")
}
