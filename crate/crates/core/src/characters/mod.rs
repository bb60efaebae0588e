//! Dirichlet characters presented by generator exponents.
//!
//! The unit group (Z/f)^x is decomposed into cyclic factors with a fixed
//! generator convention: one factor per odd prime power q^e with the smallest
//! primitive root as generator, and for the 2-part either nothing (f odd or
//! 2 || f), the factor <-1> (4 || f), or <-1> x <5> (8 | f).  A character is
//! the list of its exponents on these generators: chi(g_i) = zeta_(n_i)^(a_i)
//! where n_i is the order of the i-th factor.  Characters constructed here
//! are always primitive — products and powers re-derive the conductor — and
//! the exponent list doubles as a canonical label for caching and reports.
//!
//! Values are exact roots of unity ([`CycloElem`] of the character's order);
//! no embedding into C or into an algebraic closure of Q_p is chosen.  For
//! p-adic evaluation the value group is split into its prime-to-p part,
//! realized inside Z_p^x through the Teichmüller lift of a fixed primitive
//! root mod p, and its p-part, which stays symbolic as a power of the
//! variable in a ring modulo a p-power cyclotomic polynomial.  By
//! construction the Teichmüller character's p-adic value at a is exactly
//! teichmuller(a).

mod field;

pub use field::{
    euler_factor_at, galois_orbit_p, orbit_representatives, parse_field_spec, parse_tower,
    AbelianFieldSpec, EulerData, TowerSpec,
};

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{teichmuller_residue, CycloElem, CycloModElem, ModCycloRing, ShiftedModElem};
use crate::error::{Error, Result};

/// Budget for unit-group table construction (the discrete-log table is
/// dense); moduli beyond this are refused as a resource error rather than
/// silently churning.
const MAX_MODULUS: u64 = 1_000_000;

/// One cyclic factor of (Z/f)^x.
#[derive(Clone, Debug)]
pub struct UnitFactor {
    /// The prime power q^e this factor belongs to.
    pub prime_power: u64,
    /// Generator as a residue mod f (congruent to 1 in the other factors).
    pub generator: u64,
    /// Order of the factor.
    pub order: u64,
}

/// Decomposition of (Z/f)^x into cyclic factors with a joint discrete-log
/// table.  Built once per modulus and shared.
#[derive(Debug)]
pub struct UnitGroup {
    modulus: u64,
    factors: Vec<UnitFactor>,
    /// unit residue mod f -> exponent vector on the factors.
    dlog: HashMap<u64, Vec<u64>>,
}

fn group_cache() -> &'static Mutex<HashMap<u64, Arc<UnitGroup>>> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<UnitGroup>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl UnitGroup {
    pub fn new(modulus: u64) -> Result<Arc<UnitGroup>> {
        if modulus == 0 || modulus > MAX_MODULUS {
            return Err(Error::Resource(format!(
                "modulus {modulus} outside supported range 1..={MAX_MODULUS}"
            )));
        }
        if let Some(hit) = group_cache().lock().unwrap().get(&modulus) {
            return Ok(hit.clone());
        }
        let g = Arc::new(Self::build(modulus));
        group_cache().lock().unwrap().insert(modulus, g.clone());
        Ok(g)
    }

    fn build(modulus: u64) -> UnitGroup {
        // Local generators and dlog tables per prime power, then CRT-combine.
        struct Local {
            prime_power: u64,
            gens: Vec<(u64, u64)>, // (generator mod q^e, order)
            dlog: HashMap<u64, Vec<u64>>,
        }
        let mut locals = Vec::new();
        for (q, e) in factorize(modulus) {
            let qe = q.pow(e);
            let mut gens = Vec::new();
            let mut dlog = HashMap::new();
            if q == 2 {
                match e {
                    1 => {
                        dlog.insert(1, vec![]);
                    }
                    2 => {
                        gens.push((3, 2));
                        dlog.insert(1, vec![0]);
                        dlog.insert(3, vec![1]);
                    }
                    _ => {
                        // <-1> x <5>, orders 2 and 2^(e-2).
                        let half = qe / 4;
                        gens.push((qe - 1, 2));
                        gens.push((5, half));
                        let mut pw = 1u64;
                        for t in 0..half {
                            dlog.insert(pw, vec![0, t]);
                            dlog.insert(qe - pw, vec![1, t]);
                            pw = pw * 5 % qe;
                        }
                    }
                }
            } else {
                let g = smallest_primitive_root(q, e);
                let order = qe - qe / q;
                gens.push((g, order));
                let mut pw = 1u64;
                for t in 0..order {
                    dlog.insert(pw, vec![t]);
                    pw = mulmod(pw, g, qe);
                }
            }
            locals.push(Local { prime_power: qe, gens, dlog });
        }

        // CRT-lift generators to residues mod f congruent to 1 elsewhere.
        let mut factors = Vec::new();
        for l in &locals {
            for &(g_local, order) in &l.gens {
                let mut residues = Vec::new();
                for l2 in &locals {
                    residues.push((
                        if l2.prime_power == l.prime_power { g_local } else { 1 },
                        l2.prime_power,
                    ));
                }
                factors.push(UnitFactor {
                    prime_power: l.prime_power,
                    generator: crt(&residues),
                    order,
                });
            }
        }

        // Joint dlog over all units mod f.
        let mut dlog = HashMap::new();
        for a in 1..=modulus {
            if gcd(a, modulus) != 1 {
                continue;
            }
            let mut exps = Vec::with_capacity(factors.len());
            for l in &locals {
                let local = l.dlog.get(&(a % l.prime_power)).expect("unit has a dlog");
                exps.extend_from_slice(local);
            }
            dlog.insert(a, exps);
        }
        if modulus == 1 {
            dlog.insert(0, vec![]); // the unique residue class mod 1
        }
        UnitGroup { modulus, factors, dlog }
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn factors(&self) -> &[UnitFactor] {
        &self.factors
    }

    pub fn phi(&self) -> u64 {
        self.factors.iter().map(|f| f.order).product()
    }

    /// Exponent vector of a unit residue; None when gcd(a, f) > 1.
    pub fn dlog(&self, a: u64) -> Option<&[u64]> {
        self.dlog.get(&(a % self.modulus.max(1))).map(Vec::as_slice)
    }
}

/// A primitive Dirichlet character.
#[derive(Clone, Debug)]
pub struct DirichletChar {
    conductor: u64,
    group: Arc<UnitGroup>,
    /// chi(g_i) = zeta_(n_i)^(exps[i]).
    exps: Vec<u64>,
    order: u64,
}

impl PartialEq for DirichletChar {
    fn eq(&self, other: &Self) -> bool {
        self.conductor == other.conductor && self.exps == other.exps
    }
}
impl Eq for DirichletChar {}

impl std::hash::Hash for DirichletChar {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.conductor.hash(state);
        self.exps.hash(state);
    }
}

impl PartialOrd for DirichletChar {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for DirichletChar {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.conductor, &self.exps).cmp(&(other.conductor, &other.exps))
    }
}

/// Serialized character: the canonical (modulus, exponent list) pair.
#[derive(Serialize, Deserialize)]
pub struct CharSpec {
    pub modulus: u64,
    pub exps: Vec<u64>,
}

impl DirichletChar {
    /// The trivial character of conductor 1.
    pub fn principal() -> Self {
        DirichletChar {
            conductor: 1,
            group: UnitGroup::new(1).expect("modulus 1 in range"),
            exps: vec![],
            order: 1,
        }
    }

    /// Builds the character with the given generator exponents mod `modulus`
    /// and reduces it to its primitive core.
    pub fn from_exponents(modulus: u64, exps: &[u64]) -> Result<Self> {
        let group = UnitGroup::new(modulus)?;
        if exps.len() != group.factors().len() {
            return Err(Error::Usage(format!(
                "modulus {} has {} cyclic factors, got {} exponents",
                modulus,
                group.factors().len(),
                exps.len()
            )));
        }
        let exps: Vec<u64> = exps
            .iter()
            .zip(group.factors())
            .map(|(&a, f)| a % f.order)
            .collect();
        let raw = DirichletChar {
            conductor: modulus,
            order: char_order(&group, &exps),
            group,
            exps,
        };
        raw.primitivize()
    }

    /// The quadratic character attached to a fundamental discriminant d,
    /// i.e. the Kronecker symbol (d/.) as a primitive character mod |d|.
    pub fn kronecker(d: i64) -> Result<Self> {
        if !is_fundamental_discriminant(d) {
            return Err(Error::Usage(format!(
                "{d} is not a fundamental discriminant"
            )));
        }
        if d == 1 {
            return Ok(Self::principal());
        }
        let modulus = d.unsigned_abs();
        let group = UnitGroup::new(modulus)?;
        // Read the exponents off the values at the generators.
        let mut exps = Vec::new();
        for f in group.factors() {
            let v = kronecker_symbol(d, f.generator as i64);
            debug_assert!(v == 1 || v == -1);
            exps.push(if v == 1 { 0 } else { f.order / 2 });
        }
        let chi = DirichletChar {
            conductor: modulus,
            order: char_order(&group, &exps),
            group,
            exps,
        };
        let chi = chi.primitivize()?;
        debug_assert_eq!(chi.conductor, modulus, "fundamental discriminant is primitive");
        Ok(chi)
    }

    /// The Teichmüller character omega at p: conductor p (odd p) with
    /// omega(a) = the root of unity congruent to a mod p, or the quadratic
    /// character of conductor 4 at p = 2.
    pub fn teichmuller_char(p: u64) -> Result<Self> {
        check_prime(p)?;
        if p == 2 {
            Self::from_exponents(4, &[1])
        } else {
            // Exponent 1 on the smallest primitive root: omega(g) = zeta_(p-1).
            Self::from_exponents(p, &[1])
        }
    }

    pub fn conductor(&self) -> u64 {
        self.conductor
    }

    /// Multiplicative order (= root-of-unity order of the values).
    pub fn order(&self) -> u64 {
        self.order
    }

    pub fn is_principal(&self) -> bool {
        self.conductor == 1
    }

    /// Parity: chi(-1) = -1?
    pub fn is_odd(&self) -> bool {
        if self.conductor <= 2 {
            return false;
        }
        let k = self
            .value_exponent(self.conductor - 1)
            .expect("-1 is a unit");
        // chi(-1) is +-1; odd means exponent = order/2.
        k != 0
    }

    /// The exponent k with chi(a) = zeta_order^k, or None when gcd(a, f) > 1.
    pub fn value_exponent(&self, a: u64) -> Option<u64> {
        let exps = self.group.dlog(a)?;
        let mut k = 0u64;
        for ((&t, &a_i), f) in exps.iter().zip(&self.exps).zip(self.group.factors()) {
            if a_i == 0 {
                continue;
            }
            let g = gcd(a_i, f.order);
            let o_i = f.order / g; // order of chi(g_i)
            let step = self.order / o_i;
            let part = (t as u128 * (a_i / g) as u128 % o_i as u128) as u64;
            k = (k + part * step) % self.order;
        }
        Some(k)
    }

    /// chi(a) as an exact cyclotomic number of order `self.order()`
    /// (the zero element when a shares a factor with the conductor).
    pub fn eval(&self, a: u64) -> CycloElem {
        let m = self.order as u32;
        match self.value_exponent(a) {
            None => CycloElem::zero(m),
            Some(k) => CycloElem::root_of_unity(m, k as i64),
        }
    }

    /// chi(a) evaluated p-adically in `ring`: the prime-to-p part of the
    /// value goes through the Teichmüller lift of a fixed primitive root
    /// mod p, the p-part becomes a power of the ring variable.  Requires the
    /// prime-to-p part of the order to divide p - 1 (or 2 when p = 2) and
    /// the ring order to be divisible by the p-part of the order.
    pub fn eval_padic(&self, a: u64, ring: &ModCycloRing) -> Result<CycloModElem> {
        match self.value_exponent(a) {
            None => Ok(ring.zero()),
            Some(k) => iota_root_power(ring, self.order, k),
        }
    }

    /// chi * other, as a primitive character.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.is_principal() {
            return Ok(other.clone());
        }
        if other.is_principal() {
            return Ok(self.clone());
        }
        let m = lcm(self.conductor, other.conductor);
        let group = UnitGroup::new(m)?;
        let val_order = lcm(self.order, other.order);
        // Value exponents (to zeta_val_order) at each generator of (Z/m)^x.
        let mut ks = Vec::new();
        for f in group.factors() {
            let k1 = self
                .value_exponent(f.generator % self.conductor.max(1))
                .expect("generator is a unit mod both conductors");
            let k2 = other
                .value_exponent(f.generator % other.conductor.max(1))
                .expect("generator is a unit mod both conductors");
            let k = (k1 as u128 * (val_order / self.order) as u128
                + k2 as u128 * (val_order / other.order) as u128)
                % val_order as u128;
            ks.push(k as u64);
        }
        Self::from_value_exponents(&group, val_order, &ks)
    }

    /// chi^k, as a primitive character (k may be any integer).
    pub fn pow(&self, k: i64) -> Result<Self> {
        let k = k.rem_euclid(self.order as i64) as u64;
        let exps: Vec<u64> = self
            .exps
            .iter()
            .zip(self.group.factors())
            .map(|(&a, f)| ((a as u128 * k as u128) % f.order as u128) as u64)
            .collect();
        let raw = DirichletChar {
            conductor: self.conductor,
            order: char_order(&self.group, &exps),
            group: self.group.clone(),
            exps,
        };
        raw.primitivize()
    }

    /// The inverse = complex conjugate character.
    pub fn inverse(&self) -> Self {
        self.pow(self.order as i64 - 1)
            .expect("inverse of a primitive character is primitive")
    }

    /// Canonical label, e.g. "chi(12;1,1)"; parseable by [`parse_label`].
    pub fn label(&self) -> String {
        let exps: Vec<String> = self.exps.iter().map(u64::to_string).collect();
        format!("chi({};{})", self.conductor, exps.join(","))
    }

    pub fn spec(&self) -> CharSpec {
        CharSpec { modulus: self.conductor, exps: self.exps.clone() }
    }

    /// Splits chi into its prime-to-p and p-power-order parts.
    pub fn split_at_p(&self, p: u64) -> Result<(Self, Self)> {
        let (u, pj) = split_order(self.order, p);
        if pj == 1 {
            return Ok((self.clone(), Self::principal()));
        }
        if u == 1 {
            return Ok((Self::principal(), self.clone()));
        }
        // chi_u = chi^(e_u) with e_u = 1 mod u, 0 mod p^j; dually for chi_p.
        let e_u = crt(&[(1, u), (0, pj)]);
        let e_p = crt(&[(0, u), (1, pj)]);
        Ok((self.pow(e_u as i64)?, self.pow(e_p as i64)?))
    }

    fn primitivize(self) -> Result<Self> {
        let m = self.conductor;
        // Smallest divisor d of m such that chi is trivial on units = 1 mod d.
        for d in divisors(m) {
            let trivial_on_kernel = (1..=m)
                .step_by(d.max(1) as usize)
                .filter(|a| gcd(*a, m) == 1)
                .all(|a| self.value_exponent(a) == Some(0));
            if !trivial_on_kernel {
                continue;
            }
            if d == m {
                return Ok(self);
            }
            if d == 1 {
                return Ok(Self::principal());
            }
            // Restrict to a character mod d: lift each generator of
            // (Z/d)^x to a unit mod m and read the value there.
            let group = UnitGroup::new(d)?;
            let mut ks = Vec::new();
            for f in group.factors() {
                let mut a = f.generator;
                while gcd(a, m) != 1 {
                    a += d;
                }
                ks.push(self.value_exponent(a).expect("lift is a unit"));
            }
            return Self::from_value_exponents(&group, self.order, &ks);
        }
        unreachable!("d = m always satisfies the kernel condition")
    }

    /// Builds a character from its value exponents at the generators:
    /// chi(g_i) = zeta_M^(ks[i]).  M must be a multiple of the value order.
    fn from_value_exponents(group: &Arc<UnitGroup>, m_val: u64, ks: &[u64]) -> Result<Self> {
        let mut exps = Vec::new();
        for (f, &k) in group.factors().iter().zip(ks) {
            // Need a with zeta_(n_i)^a = zeta_M^k: a = k * n_i / M, which must
            // be integral since chi(g_i)^(n_i) = 1.
            let prod = k as u128 * f.order as u128;
            if !prod.is_multiple_of(m_val as u128) {
                return Err(Error::Internal(format!(
                    "value exponent {k}/{m_val} incompatible with factor order {}",
                    f.order
                )));
            }
            exps.push((prod / m_val as u128) as u64 % f.order);
        }
        let raw = DirichletChar {
            conductor: group.modulus(),
            order: char_order(group, &exps),
            group: group.clone(),
            exps,
        };
        raw.primitivize()
    }
}

/// Image of zeta_order^k in the modular ring: the prime-to-p part of the
/// root maps to the Teichmueller lift of the fixed primitive root mod p
/// (to -1 when p = 2), the p-part to a power of the ring variable.
/// Requires the prime-to-p part of the order to divide p - 1 (to be 1 when
/// p = 2) and the ring order to be divisible by the p-part of the order.
pub(crate) fn iota_root_power(
    ring: &ModCycloRing,
    order: u64,
    k: u64,
) -> Result<CycloModElem> {
    let p = ring.prime();
    let k = k % order.max(1);
    let (u, pj) = split_order(order, p);
    // Split zeta_order^k into a scalar part (torsion already inside the
    // p-adic integers: order dividing p - 1, or 2 when p = 2) and a wild
    // part realized as a power of the ring variable.
    let (scalar_order, wild_order, k_scalar, k_wild) = if p == 2 {
        if u != 1 {
            return Err(Error::Usage(format!(
                "root order {order} has odd part {u}; 2-adic evaluation only \
                 covers 2-power orders — use the exact route instead"
            )));
        }
        if pj <= 2 {
            (pj, 1, k, 0)
        } else {
            (1, pj, 0, k)
        }
    } else {
        if !(p - 1).is_multiple_of(u) {
            return Err(Error::Usage(format!(
                "prime-to-{p} root order {u} does not divide {}; p-adic \
                 evaluation needs the exact route",
                p - 1
            )));
        }
        let (ku, kp) = split_exponent(k, u, pj);
        (u, pj, ku, kp)
    };
    if wild_order > 1 && !(ring.order() as u64).is_multiple_of(wild_order) {
        return Err(Error::Usage(format!(
            "ring order {} does not contain the p-power root order {}",
            ring.order(),
            wild_order
        )));
    }
    let scalar = if k_scalar == 0 {
        BigUint::one()
    } else if p == 2 {
        // scalar_order = 2 and k_scalar = 1: the value is -1.
        ring.modulus() - BigUint::one()
    } else {
        // zeta_(scalar_order) -> omega(g)^((p-1)/scalar_order) for the
        // fixed primitive root g mod p.
        let g = smallest_primitive_root(p, 1);
        let w = teichmuller_residue(&BigUint::from(g), p, ring.working_prec());
        let e = BigUint::from((p - 1) / scalar_order) * BigUint::from(k_scalar);
        w.modpow(&e, ring.modulus())
    };
    let elem = if wild_order == 1 {
        ring.one()
    } else {
        ring.root_of_unity((k_wild * (ring.order() as u64 / wild_order)) as i64)
    };
    ring.scalar_mul(&elem, &BigInt::from(scalar))
}

/// Image of an exact cyclotomic number under the root-of-unity convention
/// above, returned as p^shift times an integral ring element.  The whole
/// p-part of the common denominator goes into the shift, so the embedding
/// costs no certified digits.
pub fn embed_exact(ring: &ModCycloRing, x: &CycloElem) -> Result<ShiftedModElem> {
    let m = x.order() as u64;
    let mut den = BigInt::one();
    for c in x.coeffs() {
        den = den.lcm(c.denom());
    }
    let p = BigInt::from(ring.prime());
    let mut v: i64 = 0;
    let mut den_prime = den.clone();
    while (&den_prime % &p).is_zero() {
        den_prime /= &p;
        v += 1;
    }
    let mut acc = ring.zero();
    for (i, c) in x.coeffs().iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        let int = c.numer() * (&den / c.denom());
        let root = iota_root_power(ring, m, i as u64)?;
        acc = ring.add(&acc, &ring.scalar_mul(&root, &int)?)?;
    }
    let den_res = den_prime.to_biguint().expect("positive denominator") % ring.modulus();
    let inv = ring.scalar_inverse(&den_res)?;
    let elem = ring.scalar_mul(&acc, &BigInt::from(inv))?;
    Ok(ShiftedModElem { shift: -v, elem })
}

/// Parses a canonical label "chi(f;a1,a2,...)".
pub fn parse_label(s: &str) -> Result<DirichletChar> {
    let body = s
        .trim()
        .strip_prefix("chi(")
        .and_then(|t| t.strip_suffix(')'))
        .ok_or_else(|| Error::Parse(format!("bad character label {s:?}")))?;
    let (f, exps) = body
        .split_once(';')
        .ok_or_else(|| Error::Parse(format!("bad character label {s:?}")))?;
    let f: u64 = f
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad conductor in {s:?}")))?;
    let exps: Vec<u64> = if exps.trim().is_empty() {
        vec![]
    } else {
        exps.split(',')
            .map(|t| {
                t.trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad exponent in {s:?}")))
            })
            .collect::<Result<_>>()?
    };
    DirichletChar::from_exponents(f, &exps)
}

fn char_order(group: &UnitGroup, exps: &[u64]) -> u64 {
    let mut order = 1;
    for (f, &a) in group.factors().iter().zip(exps) {
        if a != 0 {
            order = lcm(order, f.order / gcd(f.order, a));
        }
    }
    order
}

/// order = u * p^j with gcd(u, p) = 1.
pub(crate) fn split_order(order: u64, p: u64) -> (u64, u64) {
    let mut pj = 1;
    let mut u = order;
    while u.is_multiple_of(p) {
        u /= p;
        pj *= p;
    }
    (u, pj)
}

/// Splits k mod (u * pj) into (k mod u-part, k mod pj-part) exponents:
/// zeta_(u*pj)^k = zeta_u^(k_u) * zeta_(pj)^(k_p) under zeta_u =
/// zeta^(pj * inv), zeta_(pj) = zeta^(u * inv').
fn split_exponent(k: u64, u: u64, pj: u64) -> (u64, u64) {
    if u == 1 {
        return (0, k % pj.max(1));
    }
    if pj == 1 {
        return (k % u, 0);
    }
    // zeta^k = zeta_u^(k * inv(pj) mod u ... ) — concretely: zeta_u := zeta^pj·c
    // with pj·c = 1 mod u.  Then zeta^k restricted to the u-part is
    // zeta_u^(k mod u) iff ... simplest correct route: CRT the exponent.
    let ku = (k % u) as u128 * (mod_inverse_u64(pj % u, u)) as u128 % u as u128;
    let kp = (k % pj) as u128 * (mod_inverse_u64(u % pj, pj)) as u128 % pj as u128;
    (ku as u64, kp as u64)
}

fn mod_inverse_u64(a: u64, m: u64) -> u64 {
    // Extended Euclid on small numbers.
    let (mut r0, mut r1) = (m as i128, (a % m) as i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    assert!(r0 == 1, "not invertible: {a} mod {m}");
    t0.rem_euclid(m as i128) as u64
}

/// Kronecker symbol (a/b), the fully multiplicative extension of the
/// Legendre symbol.
pub fn kronecker_symbol(a: i64, b: i64) -> i64 {
    if b == 0 {
        return if a.abs() == 1 { 1 } else { 0 };
    }
    if a % 2 == 0 && b % 2 == 0 {
        return 0;
    }
    let mut a = a;
    let mut b = b;
    let mut k = 1i64;
    // Pull the 2-part out of the denominator: (a/2) = 0, 1, -1 for a even,
    // a = +-1 mod 8, a = +-3 mod 8.
    let mut v = 0;
    while b % 2 == 0 {
        b /= 2;
        v += 1;
    }
    if v % 2 == 1 && matches!(a.rem_euclid(8), 3 | 5) {
        k = -k;
    }
    if b < 0 {
        b = -b;
        if a < 0 {
            k = -k;
        }
    }
    // b odd and positive from here on; the symbol is periodic in a mod b.
    a = a.rem_euclid(b);
    while a != 0 {
        let mut v = 0;
        while a % 2 == 0 {
            a /= 2;
            v += 1;
        }
        if v % 2 == 1 && matches!(b.rem_euclid(8), 3 | 5) {
            k = -k;
        }
        // a, b odd and positive: quadratic reciprocity.
        if a.rem_euclid(4) == 3 && b.rem_euclid(4) == 3 {
            k = -k;
        }
        let t = b % a;
        b = a;
        a = t;
    }
    if b > 1 {
        0
    } else {
        k
    }
}

pub fn is_fundamental_discriminant(d: i64) -> bool {
    if d == 1 {
        return true;
    }
    if d == 0 {
        return false;
    }
    let square_free = |n: i64| {
        let n = n.unsigned_abs();
        let mut q = 2u64;
        while q * q <= n {
            if n.is_multiple_of(q * q) {
                return false;
            }
            q += 1;
        }
        true
    };
    if d.rem_euclid(4) == 1 {
        square_free(d)
    } else if d % 4 == 0 {
        let m = d / 4;
        matches!(m.rem_euclid(4), 2 | 3) && square_free(m)
    } else {
        false
    }
}

/// Smallest primitive root modulo q^e for an odd prime q.
pub(crate) fn smallest_primitive_root(q: u64, e: u32) -> u64 {
    assert!(q % 2 == 1 && q > 2);
    let qe = q.pow(e);
    let order = qe - qe / q;
    let prime_factors: Vec<u64> = factorize(order).into_iter().map(|(p, _)| p).collect();
    'g: for g in 2..qe {
        if gcd(g, qe) != 1 {
            continue;
        }
        for &f in &prime_factors {
            if powmod(g, order / f, qe) == 1 {
                continue 'g;
            }
        }
        return g;
    }
    unreachable!("units mod an odd prime power are cyclic")
}

pub(crate) fn check_prime(p: u64) -> Result<()> {
    if p < 2 {
        return Err(Error::Usage(format!("{p} is not prime")));
    }
    let mut q = 2;
    while q * q <= p {
        if p.is_multiple_of(q) {
            return Err(Error::Usage(format!("{p} is not prime")));
        }
        q += 1;
    }
    Ok(())
}

pub(crate) fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut q = 2;
    while q * q <= n {
        if n.is_multiple_of(q) {
            let mut e = 0;
            while n.is_multiple_of(q) {
                n /= q;
                e += 1;
            }
            out.push((q, e));
        }
        q += 1;
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

pub(crate) fn divisors(n: u64) -> Vec<u64> {
    let mut ds = vec![1u64];
    for (q, e) in factorize(n) {
        let mut next = Vec::new();
        for d in &ds {
            let mut m = *d;
            for _ in 0..=e {
                next.push(m);
                m = m.saturating_mul(q);
            }
        }
        ds = next;
    }
    ds.sort_unstable();
    ds
}

pub(crate) fn gcd(a: u64, b: u64) -> u64 {
    num_integer::gcd(a, b)
}

pub(crate) fn lcm(a: u64, b: u64) -> u64 {
    num_integer::lcm(a, b)
}

fn mulmod(a: u64, b: u64, m: u64) -> u64 {
    (a as u128 * b as u128 % m as u128) as u64
}

pub(crate) fn powmod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1u64 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = mulmod(acc, b, m);
        }
        b = mulmod(b, b, m);
        e >>= 1;
    }
    acc
}

/// CRT for pairwise coprime moduli: residues (r_i, m_i) -> x mod prod(m_i).
pub(crate) fn crt(residues: &[(u64, u64)]) -> u64 {
    let mut x: u128 = 0;
    let mut m: u128 = 1;
    for &(r, mi) in residues {
        let mi = mi as u128;
        let r = r as u128 % mi;
        // x' = x mod m, x' = r mod mi.
        let inv = mod_inverse_u64((m % mi) as u64, mi as u64) as u128;
        let t = (r + mi - x % mi) % mi * inv % mi;
        x += t * m;
        m *= mi;
    }
    x as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::Rat;
    use num_traits::Zero;

    #[test]
    fn unit_group_shapes() {
        let g12 = UnitGroup::new(12).unwrap();
        // (Z/12)^x = (Z/4)^x x (Z/3)^x, orders [2, 2].
        let orders: Vec<u64> = g12.factors().iter().map(|f| f.order).collect();
        assert_eq!(orders, vec![2, 2]);
        assert_eq!(g12.phi(), 4);

        let g16 = UnitGroup::new(16).unwrap();
        let orders: Vec<u64> = g16.factors().iter().map(|f| f.order).collect();
        assert_eq!(orders, vec![2, 4]); // <-1> x <5>

        let g7 = UnitGroup::new(7).unwrap();
        assert_eq!(g7.factors()[0].generator, 3); // smallest primitive root mod 7
        assert_eq!(g7.factors()[0].order, 6);
    }

    #[test]
    fn dlog_reconstructs_units() {
        let g = UnitGroup::new(40).unwrap();
        for a in 1..40 {
            if gcd(a, 40) != 1 {
                assert!(g.dlog(a).is_none());
                continue;
            }
            let exps = g.dlog(a).unwrap();
            let mut prod = 1u64;
            for (f, &e) in g.factors().iter().zip(exps) {
                prod = mulmod(prod, powmod(f.generator, e, 40), 40);
            }
            assert_eq!(prod, a, "dlog round-trip at {a}");
        }
    }

    #[test]
    fn kronecker_symbol_tables() {
        // chi_{-4}: period 4 pattern 1, 0, -1, 0.
        let values: Vec<i64> = (1..=8).map(|n| kronecker_symbol(-4, n)).collect();
        assert_eq!(values, vec![1, 0, -1, 0, 1, 0, -1, 0]);
        // chi_8 = (8/.) = (2/.): 1, 0, -1, 0, -1, 0, 1, 0 for n = 1..8.
        let values: Vec<i64> = (1..=8).map(|n| kronecker_symbol(8, n)).collect();
        assert_eq!(values, vec![1, 0, -1, 0, -1, 0, 1, 0]);
        // chi_{-3}(2) = -1, chi_{-3}(4) = 1.
        assert_eq!(kronecker_symbol(-3, 2), -1);
        assert_eq!(kronecker_symbol(-3, 4), 1);
        // (12/.) at 5, 7, 11: -1, -1, 1.
        assert_eq!(kronecker_symbol(12, 5), -1);
        assert_eq!(kronecker_symbol(12, 7), -1);
        assert_eq!(kronecker_symbol(12, 11), 1);
    }

    #[test]
    fn quadratic_characters_match_kronecker_everywhere() {
        for d in [-3i64, -4, -8, -11, -23, 8, 12, 5] {
            let chi = DirichletChar::kronecker(d).unwrap();
            assert_eq!(chi.conductor(), d.unsigned_abs());
            assert_eq!(chi.order(), 2);
            assert_eq!(chi.is_odd(), d < 0, "parity of ({d}/.)");
            for a in 1..(2 * d.unsigned_abs()) {
                let expect = kronecker_symbol(d, a as i64);
                let got = match chi.value_exponent(a) {
                    None => 0,
                    Some(0) => 1,
                    Some(1) => -1,
                    Some(k) => panic!("quadratic character exponent {k}"),
                };
                assert_eq!(got, expect, "({d}/{a})");
            }
        }
    }

    #[test]
    fn non_fundamental_discriminants_are_rejected() {
        for d in [0i64, 2, 3, -2, 9, -9, 18, -12] {
            assert!(DirichletChar::kronecker(d).is_err(), "d = {d}");
        }
    }

    #[test]
    fn primitivization_detects_induced_characters() {
        // The character mod 6 restricting chi_{-3}: exponents [1] on (Z/6)^x
        // (cyclic of order 2 generated by 5) has conductor 3.
        let chi = DirichletChar::from_exponents(6, &[1]).unwrap();
        assert_eq!(chi.conductor(), 3);
        assert_eq!(chi, DirichletChar::kronecker(-3).unwrap());
        // The principal character mod 45 collapses to conductor 1.
        let one = DirichletChar::from_exponents(45, &[0, 0]).unwrap();
        assert!(one.is_principal());
    }

    #[test]
    fn products_recompute_conductors() {
        let a = DirichletChar::kronecker(-4).unwrap();
        let b = DirichletChar::kronecker(-3).unwrap();
        let c = a.mul(&b).unwrap();
        // chi_{-4} chi_{-3} = chi_12, even of conductor 12.
        assert_eq!(c.conductor(), 12);
        assert!(!c.is_odd());
        assert_eq!(c, DirichletChar::kronecker(12).unwrap());
        // chi * chi^{-1} = principal.
        assert!(a.mul(&a.inverse()).unwrap().is_principal());
        // Conductor can drop below both factors: chi_{-3} * chi_{-3} = 1.
        assert!(b.mul(&b).unwrap().is_principal());
    }

    #[test]
    fn teichmuller_character_values_are_teichmuller_lifts() {
        // omega at p = 5 in an order-1 mod ring: omega(a) = teichmuller(a).
        let p = 5;
        let omega = DirichletChar::teichmuller_char(p).unwrap();
        assert_eq!(omega.conductor(), 5);
        assert_eq!(omega.order(), 4);
        assert!(omega.is_odd());
        let ring = ModCycloRing::new(1, p, 6);
        for a in 1..5u64 {
            let v = omega.eval_padic(a, &ring).unwrap();
            let w = teichmuller_residue(&BigUint::from(a), p, 6);
            let (c, _) = ring.reduce_to_constant(&v).unwrap();
            assert_eq!(c, w, "omega({a}) at p = {p}");
        }
        // p = 2: omega = chi_{-4}.
        let omega2 = DirichletChar::teichmuller_char(2).unwrap();
        assert_eq!(omega2, DirichletChar::kronecker(-4).unwrap());
    }

    #[test]
    fn padic_evaluation_splits_scalar_and_wild_parts() {
        // Quadratic values at p = 2 are scalars.
        let chi = DirichletChar::kronecker(-4).unwrap();
        let ring = ModCycloRing::new(1, 2, 5);
        let (c, _) = ring.reduce_to_constant(&chi.eval_padic(3, &ring).unwrap()).unwrap();
        assert_eq!(c, BigUint::from(31u32)); // -1 mod 2^5
        let (c, _) = ring.reduce_to_constant(&chi.eval_padic(5, &ring).unwrap()).unwrap();
        assert_eq!(c, BigUint::from(1u32));
        let (c, _) = ring.reduce_to_constant(&chi.eval_padic(2, &ring).unwrap()).unwrap();
        assert_eq!(c, BigUint::from(0u32));
        // Cubic values at p = 3 are powers of the ring variable: 3 is a
        // primitive root mod 7, so the order-3 character with exponent 2
        // sends 3 to zeta_3.
        let chi = DirichletChar::from_exponents(7, &[2]).unwrap();
        assert_eq!(chi.order(), 3);
        let ring3 = ModCycloRing::new(3, 3, 4);
        let v = chi.eval_padic(3, &ring3).unwrap();
        assert!(ring3.congruent_mod(&v, &ring3.root_of_unity(1), 4).unwrap());
        // A value order with prime-to-p part not dividing p - 1 is refused.
        let chi5 = DirichletChar::from_exponents(11, &[2]).unwrap();
        assert_eq!(chi5.order(), 5);
        assert!(chi5.eval_padic(2, &ring3).is_err());
    }

    #[test]
    fn value_exponents_are_multiplicative() {
        let chi = DirichletChar::from_exponents(16, &[1, 1]).unwrap();
        let f = chi.conductor();
        for a in 1..f {
            for b in 1..f {
                if gcd(a, f) != 1 || gcd(b, f) != 1 {
                    continue;
                }
                let ka = chi.value_exponent(a).unwrap();
                let kb = chi.value_exponent(b).unwrap();
                let kab = chi.value_exponent(a * b % f).unwrap();
                assert_eq!((ka + kb) % chi.order(), kab);
            }
        }
    }

    #[test]
    fn exact_values_sum_to_zero_over_the_period() {
        // Sum of chi(a) over a mod f vanishes for nontrivial chi.
        for (m, exps) in [(5u64, vec![1u64]), (16, vec![1, 1]), (9, vec![2])] {
            let chi = DirichletChar::from_exponents(m, &exps).unwrap();
            let f = chi.conductor();
            let mut s = CycloElem::zero(chi.order() as u32);
            for a in 1..=f {
                s = s.add(&chi.eval(a)).unwrap();
            }
            assert!(s.is_zero(), "sum over period of {}", chi.label());
        }
    }

    #[test]
    fn split_at_p_recomposes() {
        // Order 12 character at p = 3: u-part order 4, p-part order 3.
        let chi = DirichletChar::from_exponents(13, &[1]).unwrap();
        assert_eq!(chi.order(), 12);
        let (u_part, p_part) = chi.split_at_p(3).unwrap();
        assert_eq!(u_part.order(), 4);
        assert_eq!(p_part.order(), 3);
        assert_eq!(u_part.mul(&p_part).unwrap(), chi);
    }

    #[test]
    fn labels_round_trip() {
        for (m, exps) in [(12u64, vec![1u64, 1]), (7, vec![2]), (1, vec![])] {
            let chi = DirichletChar::from_exponents(m, &exps).unwrap();
            let back = parse_label(&chi.label()).unwrap();
            assert_eq!(chi, back);
        }
        assert!(parse_label("chi(12)").is_err());
        assert!(parse_label("12;1,1").is_err());
    }

    #[test]
    fn odd_quadratic_b1_sanity() {
        // With chi = (-11/.): sum_{a mod 11} chi(a) a = -11, so the
        // normalized sum is -1; a first L-value anchor fully inside this
        // module.
        let chi = DirichletChar::kronecker(-11).unwrap();
        let mut s = Rat::zero();
        for a in 1..11u64 {
            let v = chi.eval(a).reduce_to_rational().unwrap();
            s += v * Rat::from(BigInt::from(a));
        }
        assert_eq!(s, Rat::from(BigInt::from(-11)));
    }
}
