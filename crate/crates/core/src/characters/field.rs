//! Abelian fields as character groups, and cyclotomic towers above them.
//!
//! A field is presented by the finite group X of primitive Dirichlet
//! characters cutting it out; every invariant here — degree, conductor,
//! parity split, roots of unity, splitting data at a rational prime, the
//! exponent bound w2 on 2-torsion in cyclotomic Galois groups — is computed
//! from X alone.  The n-th layer of the tower at p multiplies X by the p^n
//! characters of p-power order and p-power conductor ("wild" characters);
//! the base must meet that wild family only trivially, which keeps the layer
//! decomposition X_n = X x Psi_n exact and is enforced at construction.

use std::collections::HashSet;

use num_bigint::BigInt;
use num_traits::One;
use serde::Serialize;

use super::{check_prime, gcd, lcm, CharSpec, DirichletChar, UnitGroup};
use crate::arith::{pow_rational, Rat};
use crate::error::{Error, Result};

/// Cap on character-group sizes (= field degrees) we will materialize.
const MAX_DEGREE: usize = 8192;

/// An abelian number field, stored as its full character group, sorted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AbelianFieldSpec {
    chars: Vec<DirichletChar>,
}

impl AbelianFieldSpec {
    /// The rational field: the trivial character group.
    pub fn rationals() -> Self {
        AbelianFieldSpec { chars: vec![DirichletChar::principal()] }
    }

    /// The quadratic field of fundamental discriminant d.
    pub fn quadratic(d: i64) -> Result<Self> {
        let chi = DirichletChar::kronecker(d)?;
        Self::from_generators(std::slice::from_ref(&chi))
    }

    /// The m-th cyclotomic field: all characters of conductor dividing m.
    pub fn cyclotomic(m: u64) -> Result<Self> {
        if m == 0 {
            return Err(Error::Usage("cyclotomic field index must be positive".into()));
        }
        let group = UnitGroup::new(m)?;
        let total = group.phi();
        if total as usize > MAX_DEGREE {
            return Err(Error::Resource(format!(
                "cyclotomic field of degree {total} exceeds the cap {MAX_DEGREE}"
            )));
        }
        let orders: Vec<u64> = group.factors().iter().map(|f| f.order).collect();
        let mut chars = Vec::with_capacity(total as usize);
        let mut counter = vec![0u64; orders.len()];
        for _ in 0..total {
            chars.push(DirichletChar::from_exponents(m, &counter)?);
            for i in 0..counter.len() {
                counter[i] += 1;
                if counter[i] < orders[i] {
                    break;
                }
                counter[i] = 0;
            }
        }
        chars.sort();
        chars.dedup();
        debug_assert_eq!(chars.len() as u64, total, "characters mod {m} are distinct");
        Ok(AbelianFieldSpec { chars })
    }

    /// The maximal real subfield of the m-th cyclotomic field.
    pub fn cyclotomic_real(m: u64) -> Result<Self> {
        Ok(Self::cyclotomic(m)?.maximal_real_subfield())
    }

    /// The smallest field containing all the given characters' fields.
    pub fn from_generators(gens: &[DirichletChar]) -> Result<Self> {
        let mut set: HashSet<DirichletChar> = HashSet::new();
        set.insert(DirichletChar::principal());
        let mut frontier = vec![DirichletChar::principal()];
        while let Some(x) = frontier.pop() {
            for g in gens {
                let y = x.mul(g)?;
                if !set.contains(&y) {
                    if set.len() >= MAX_DEGREE {
                        return Err(Error::Resource(format!(
                            "character group exceeds the cap {MAX_DEGREE}"
                        )));
                    }
                    set.insert(y.clone());
                    frontier.push(y);
                }
            }
        }
        let mut chars: Vec<DirichletChar> = set.into_iter().collect();
        chars.sort();
        Ok(AbelianFieldSpec { chars })
    }

    /// Builds a field from an explicit character list, verifying closure
    /// under products.
    pub fn from_chars(mut chars: Vec<DirichletChar>) -> Result<Self> {
        if chars.is_empty() {
            return Err(Error::Usage("character list is empty".into()));
        }
        chars.sort();
        chars.dedup();
        // Grow a generating set until it spans the list, then compare.
        let set: HashSet<DirichletChar> = chars.iter().cloned().collect();
        let mut gens: Vec<DirichletChar> = Vec::new();
        let mut span = AbelianFieldSpec::rationals();
        for c in &chars {
            if !span.contains(c) {
                gens.push(c.clone());
                span = AbelianFieldSpec::from_generators(&gens)?;
            }
        }
        if span.chars.len() != chars.len() || !span.chars.iter().all(|c| set.contains(c)) {
            return Err(Error::Usage(
                "character list is not closed under products".into(),
            ));
        }
        Ok(span)
    }

    /// Internal constructor for lists already known to be a sorted group.
    fn from_sorted_unchecked(chars: Vec<DirichletChar>) -> Self {
        debug_assert!(chars.windows(2).all(|w| w[0] < w[1]));
        AbelianFieldSpec { chars }
    }

    pub fn chars(&self) -> &[DirichletChar] {
        &self.chars
    }

    pub fn degree(&self) -> u64 {
        self.chars.len() as u64
    }

    pub fn conductor(&self) -> u64 {
        self.chars.iter().fold(1, |m, c| lcm(m, c.conductor()))
    }

    pub fn contains(&self, chi: &DirichletChar) -> bool {
        self.chars.binary_search(chi).is_ok()
    }

    pub fn is_totally_real(&self) -> bool {
        self.chars.iter().all(|c| !c.is_odd())
    }

    /// Totally imaginary (for an abelian field this is the CM condition).
    pub fn is_cm(&self) -> bool {
        !self.is_totally_real()
    }

    pub fn odd_chars(&self) -> Vec<DirichletChar> {
        self.chars.iter().filter(|c| c.is_odd()).cloned().collect()
    }

    pub fn even_chars(&self) -> Vec<DirichletChar> {
        self.chars.iter().filter(|c| !c.is_odd()).cloned().collect()
    }

    pub fn maximal_real_subfield(&self) -> AbelianFieldSpec {
        // Parity is a homomorphism, so the even characters form a subgroup.
        Self::from_sorted_unchecked(self.even_chars())
    }

    pub fn labels(&self) -> Vec<String> {
        self.chars.iter().map(|c| c.label()).collect()
    }

    pub fn specs(&self) -> Vec<CharSpec> {
        self.chars.iter().map(|c| c.spec()).collect()
    }

    /// The number of roots of unity in the field: the largest N with the
    /// full N-th cyclotomic character group contained in this one.
    pub fn roots_of_unity(&self) -> Result<u64> {
        let deg = self.degree();
        let contained = |qe: u64| -> Result<bool> {
            let sub = AbelianFieldSpec::cyclotomic(qe)?;
            Ok(sub.chars().iter().all(|c| self.contains(c)))
        };
        let mut w = 1u64;
        let mut qs = vec![2u64];
        let mut q = 3u64;
        while q <= deg + 1 {
            if check_prime(q).is_ok() {
                qs.push(q);
            }
            q += 2;
        }
        for q in qs {
            let mut best: u32 = if q == 2 { 1 } else { 0 };
            loop {
                let e = best + 1;
                let Some(qe) = q.checked_pow(e) else { break };
                if qe - qe / q > deg {
                    break; // the subgroup would be too big to fit
                }
                if !contained(qe)? {
                    break;
                }
                best = e;
            }
            w *= q.pow(best);
        }
        Ok(w)
    }

    /// The largest N such that the Galois group of adjoining the N-th roots
    /// of unity to this field has exponent dividing 2.
    pub fn w2(&self) -> Result<u64> {
        let deg = self.degree();
        let mut qs = vec![2u64];
        let mut q = 3u64;
        // An odd prime q can only contribute when the residual Galois group
        // mod q is already cyclic of order at most 2, forcing q - 1 <= 2 deg.
        while q <= 2 * deg + 1 {
            if check_prime(q).is_ok() {
                qs.push(q);
            }
            q += 2;
        }
        let mut out = 1u64;
        for q in qs {
            let mut best: u32 = 0;
            loop {
                let e = best + 1;
                let Some(qe) = q.checked_pow(e) else { break };
                // The fixed subgroup below has index at most deg, and an
                // exponent-2 subgroup of the units mod q^e has order at most
                // 4, so large levels cannot succeed.
                if qe - qe / q > 4 * deg {
                    break;
                }
                let rel: Vec<&DirichletChar> = self
                    .chars
                    .iter()
                    .filter(|c| qe % c.conductor() == 0)
                    .collect();
                let mut ok = true;
                for a in 1..qe {
                    if gcd(a, qe) != 1 {
                        continue;
                    }
                    let fixed = rel.iter().all(|c| c.value_exponent(a) == Some(0));
                    if fixed && a * a % qe != 1 {
                        ok = false;
                        break;
                    }
                }
                if !ok {
                    break;
                }
                best = e;
            }
            out *= q.pow(best);
        }
        Ok(out)
    }
}

/// Splitting data of a rational prime in an abelian field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct EulerData {
    pub ramification_index: u64,
    pub residue_degree: u64,
    pub split_count: u64,
}

impl EulerData {
    /// prod over primes above q of (1 - 1/N(P)) = (1 - q^(-f))^g.
    pub fn inverse_norm_factor(&self, q: u64) -> Rat {
        let qf = BigInt::from(q).pow(self.residue_degree as u32);
        let factor = Rat::new(&qf - BigInt::one(), qf);
        pow_rational(&factor, self.split_count as i64).expect("base is nonzero")
    }
}

/// Ramification index, residue degree, and number of primes above q,
/// read off the character group.
pub fn euler_factor_at(field: &AbelianFieldSpec, q: u64) -> Result<EulerData> {
    check_prime(q)?;
    let unram: Vec<&DirichletChar> = field
        .chars()
        .iter()
        .filter(|c| c.conductor() % q != 0)
        .collect();
    let e = field.degree() / unram.len() as u64;
    let fixed = unram
        .iter()
        .filter(|c| c.value_exponent(q) == Some(0))
        .count() as u64;
    let f = unram.len() as u64 / fixed;
    Ok(EulerData { ramification_index: e, residue_degree: f, split_count: fixed })
}

/// The orbit of a character under the local Galois action at p: Frobenius
/// powers the prime-to-p part of the values by p, and the inertia directions
/// power the p-part by any unit exponent.  The product of L-values over such
/// an orbit (jointly with a full set of wild twists) is what lands back in
/// the p-adic rationals.
pub fn galois_orbit_p(chi: &DirichletChar, p: u64) -> Result<Vec<DirichletChar>> {
    check_prime(p)?;
    let (chi_u, chi_p) = chi.split_at_p(p)?;
    let u = chi_u.order();
    let pj = chi_p.order();
    let mut d = 1u64;
    if u > 1 {
        let mut pw = p % u;
        while pw != 1 {
            pw = pw * p % u;
            d += 1;
        }
    }
    let mut out: HashSet<DirichletChar> = HashSet::new();
    let mut u_pow = chi_u.clone();
    for _ in 0..d {
        for a in 1..=pj {
            if gcd(a, pj) == 1 {
                out.insert(u_pow.mul(&chi_p.pow(a as i64)?)?);
            }
        }
        u_pow = u_pow.pow(p as i64)?;
    }
    let mut v: Vec<DirichletChar> = out.into_iter().collect();
    v.sort();
    Ok(v)
}

/// Partitions a product-closed character list into local Galois orbits at p,
/// each orbit sorted with its minimum as representative.
pub fn orbit_representatives(chars: &[DirichletChar], p: u64) -> Result<Vec<Vec<DirichletChar>>> {
    let pool: HashSet<DirichletChar> = chars.iter().cloned().collect();
    let mut sorted: Vec<DirichletChar> = pool.iter().cloned().collect();
    sorted.sort();
    let mut seen: HashSet<DirichletChar> = HashSet::new();
    let mut out = Vec::new();
    for chi in sorted {
        if seen.contains(&chi) {
            continue;
        }
        let orbit = galois_orbit_p(&chi, p)?;
        for x in &orbit {
            if !pool.contains(x) {
                return Err(Error::Usage(format!(
                    "character set is not closed under the local Galois action \
                     at {p}: {} leads out of it",
                    chi.label()
                )));
            }
            seen.insert(x.clone());
        }
        out.push(orbit);
    }
    Ok(out)
}

/// A cyclotomic Z_p-tower over an abelian base field.
#[derive(Clone, Debug)]
pub struct TowerSpec {
    base: AbelianFieldSpec,
    p: u64,
}

impl TowerSpec {
    pub fn new(base: AbelianFieldSpec, p: u64) -> Result<Self> {
        check_prime(p)?;
        let bound = if p == 2 { 4 } else { p };
        for chi in base.chars() {
            let mut f = chi.conductor();
            let mut ppart = 1u64;
            while f % p == 0 {
                f /= p;
                ppart *= p;
            }
            if ppart > bound {
                return Err(Error::Usage(format!(
                    "character {} carries the wild {p}-part {ppart} in its \
                     conductor; the base must meet the {p}-power cyclotomic \
                     tower only in the rationals",
                    chi.label()
                )));
            }
        }
        Ok(TowerSpec { base, p })
    }

    pub fn base(&self) -> &AbelianFieldSpec {
        &self.base
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    /// 1 at p = 2, else 0; the ubiquitous parity offset.
    pub fn delta(&self) -> u32 {
        if self.p == 2 {
            1
        } else {
            0
        }
    }

    /// Topological generator of the principal units: 1 + p, or 5 at p = 2.
    pub fn kappa(&self) -> u64 {
        if self.p == 2 {
            5
        } else {
            1 + self.p
        }
    }

    /// Conductor of the level-n wild characters: p^(n+1), or 2^(n+2).
    fn wild_modulus(&self, n: u32) -> Result<u64> {
        self.p
            .checked_pow(n + 1 + self.delta())
            .filter(|m| *m <= super::MAX_MODULUS)
            .ok_or_else(|| {
                Error::Resource(format!("tower level {n} at p = {} is out of range", self.p))
            })
    }

    /// The canonical order-p^n character of the n-th tower layer over Q.
    pub fn wild_generator(&self, n: u32) -> Result<DirichletChar> {
        if n == 0 {
            return Ok(DirichletChar::principal());
        }
        let m = self.wild_modulus(n)?;
        if self.p == 2 {
            DirichletChar::from_exponents(m, &[0, 1])
        } else {
            DirichletChar::from_exponents(m, &[self.p - 1])
        }
    }

    /// All p^n characters of the n-th layer of the tower over Q (levels
    /// 0 through n together).
    pub fn wild_characters(&self, n: u32) -> Result<Vec<DirichletChar>> {
        let count = self
            .p
            .checked_pow(n)
            .filter(|c| *c as usize <= MAX_DEGREE)
            .ok_or_else(|| {
                Error::Resource(format!("p^{n} wild characters exceed the cap {MAX_DEGREE}"))
            })?;
        let psi = self.wild_generator(n)?;
        let mut out = Vec::with_capacity(count as usize);
        for j in 0..count {
            out.push(psi.pow(j as i64)?);
        }
        out.sort();
        debug_assert_eq!(out.len() as u64, count);
        Ok(out)
    }

    /// The wild characters of level exactly t (conductor p^(t+1), or
    /// 2^(t+2)); level 0 is the trivial character alone.
    pub fn wild_characters_at_level(&self, t: u32) -> Result<Vec<DirichletChar>> {
        if t == 0 {
            return Ok(vec![DirichletChar::principal()]);
        }
        let m = self.wild_modulus(t)?;
        Ok(self
            .wild_characters(t)?
            .into_iter()
            .filter(|psi| psi.conductor() == m)
            .collect())
    }

    pub fn layer_degree(&self, n: u32) -> Result<u64> {
        self.p
            .checked_pow(n)
            .and_then(|t| t.checked_mul(self.base.degree()))
            .filter(|d| *d as usize <= MAX_DEGREE)
            .ok_or_else(|| {
                Error::Resource(format!("layer {n} degree exceeds the cap {MAX_DEGREE}"))
            })
    }

    /// The n-th layer field: base characters times wild characters.
    pub fn layer(&self, n: u32) -> Result<AbelianFieldSpec> {
        let target = self.layer_degree(n)? as usize;
        let wild = self.wild_characters(n)?;
        let mut chars = Vec::with_capacity(target);
        for chi in self.base.chars() {
            for psi in &wild {
                chars.push(chi.mul(psi)?);
            }
        }
        chars.sort();
        chars.dedup();
        if chars.len() != target {
            return Err(Error::Internal(format!(
                "layer {n} characters collide: expected {target}, got {}",
                chars.len()
            )));
        }
        Ok(AbelianFieldSpec::from_sorted_unchecked(chars))
    }

    /// The number of roots of unity in the n-th layer.
    pub fn roots_of_unity_at(&self, n: u32) -> Result<u64> {
        self.layer(n)?.roots_of_unity()
    }
}

/// Parses a field description: "Q", "Qzeta:<m>", "quad:<D>", or a JSON list
/// of generator characters [{"modulus": m, "exps": [..]}, ..].
pub fn parse_field_spec(s: &str) -> Result<AbelianFieldSpec> {
    let t = s.trim();
    if t == "Q" {
        return Ok(AbelianFieldSpec::rationals());
    }
    if let Some(m) = t.strip_prefix("Qzeta:") {
        let m: u64 = m
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad cyclotomic index in {t:?}")))?;
        return AbelianFieldSpec::cyclotomic(m);
    }
    if let Some(d) = t.strip_prefix("quad:") {
        let d: i64 = d
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad discriminant in {t:?}")))?;
        return AbelianFieldSpec::quadratic(d);
    }
    if t.starts_with('[') {
        let specs: Vec<CharSpec> = serde_json::from_str(t)
            .map_err(|e| Error::Parse(format!("bad character list: {e}")))?;
        let gens: Vec<DirichletChar> = specs
            .iter()
            .map(|cs| DirichletChar::from_exponents(cs.modulus, &cs.exps))
            .collect::<Result<_>>()?;
        return AbelianFieldSpec::from_generators(&gens);
    }
    Err(Error::Parse(format!(
        "unrecognized field {t:?}; expected \"Q\", \"Qzeta:<m>\", \"quad:<D>\", \
         or a JSON generator list"
    )))
}

/// Parses a field description and attaches the p-tower to it.
pub fn parse_tower(s: &str, p: u64) -> Result<TowerSpec> {
    TowerSpec::new(parse_field_spec(s)?, p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kron(d: i64) -> DirichletChar {
        DirichletChar::kronecker(d).unwrap()
    }

    #[test]
    fn cyclotomic_twelve_structure() {
        let k = AbelianFieldSpec::cyclotomic(12).unwrap();
        assert_eq!(k.degree(), 4);
        assert_eq!(k.conductor(), 12);
        assert!(k.is_cm());
        assert_eq!(k.odd_chars(), vec![kron(-3), kron(-4)]);
        assert_eq!(k.even_chars(), vec![DirichletChar::principal(), kron(12)]);
        let real = k.maximal_real_subfield();
        assert_eq!(real.degree(), 2);
        assert!(real.is_totally_real());
        assert!(real.contains(&kron(12)));
    }

    #[test]
    fn real_cyclotomic_subfields() {
        let k = AbelianFieldSpec::cyclotomic_real(16).unwrap();
        assert_eq!(k.degree(), 4);
        assert_eq!(k.conductor(), 16);
        assert!(k.is_totally_real());
        assert_eq!(k.roots_of_unity().unwrap(), 2);
    }

    #[test]
    fn tower_validation_rejects_wild_bases() {
        let p3 = |m: u64| TowerSpec::new(AbelianFieldSpec::cyclotomic(m).unwrap(), 3);
        assert!(p3(9).is_err()); // conductor 9 = wild at 3
        assert!(p3(12).is_ok()); // 3 || 12 is tame
        let p2 = |m: u64| TowerSpec::new(AbelianFieldSpec::cyclotomic(m).unwrap(), 2);
        assert!(p2(8).is_err()); // conductor 8 = wild at 2
        assert!(p2(4).is_ok());
        // Tame ramification of p in the base is allowed even at p = conductor.
        assert!(TowerSpec::new(AbelianFieldSpec::cyclotomic(7).unwrap(), 7).is_ok());
        // Composite p is refused.
        assert!(TowerSpec::new(AbelianFieldSpec::rationals(), 6).is_err());
    }

    #[test]
    fn wild_generators_match_hand_values() {
        let t3 = TowerSpec::new(AbelianFieldSpec::rationals(), 3).unwrap();
        let psi1 = t3.wild_generator(1).unwrap();
        assert_eq!((psi1.conductor(), psi1.order()), (9, 3));
        assert!(!psi1.is_odd());
        let psi2 = t3.wild_generator(2).unwrap();
        assert_eq!((psi2.conductor(), psi2.order()), (27, 9));

        let t2 = TowerSpec::new(AbelianFieldSpec::rationals(), 2).unwrap();
        // The level-1 wild character at p = 2 is the quadratic character of
        // conductor 8 fixing -1, i.e. (8/.).
        assert_eq!(t2.wild_generator(1).unwrap(), kron(8));
        let psi2 = t2.wild_generator(2).unwrap();
        assert_eq!((psi2.conductor(), psi2.order()), (16, 4));
        assert!(!psi2.is_odd());

        // Level census at p = 3, n = 2: one trivial, two of conductor 9,
        // six of conductor 27.
        let wild = t3.wild_characters(2).unwrap();
        assert_eq!(wild.len(), 9);
        let mut conductors: Vec<u64> = wild.iter().map(|c| c.conductor()).collect();
        conductors.sort_unstable();
        assert_eq!(conductors, vec![1, 9, 9, 27, 27, 27, 27, 27, 27]);
        assert_eq!(t3.wild_characters_at_level(2).unwrap().len(), 6);
        assert_eq!(t3.wild_characters_at_level(0).unwrap().len(), 1);
    }

    #[test]
    fn layer_conductors_match_hand_counts() {
        let t = TowerSpec::new(AbelianFieldSpec::quadratic(-3).unwrap(), 3).unwrap();
        let mut conductors: Vec<u64> = t
            .layer(1)
            .unwrap()
            .chars()
            .iter()
            .map(|c| c.conductor())
            .collect();
        conductors.sort_unstable();
        assert_eq!(conductors, vec![1, 3, 9, 9, 9, 9]);

        let t = TowerSpec::new(AbelianFieldSpec::quadratic(-4).unwrap(), 2).unwrap();
        let mut conductors: Vec<u64> = t
            .layer(1)
            .unwrap()
            .chars()
            .iter()
            .map(|c| c.conductor())
            .collect();
        conductors.sort_unstable();
        assert_eq!(conductors, vec![1, 4, 8, 8]);
    }

    #[test]
    fn layers_are_product_closed() {
        let t = TowerSpec::new(AbelianFieldSpec::quadratic(-4).unwrap(), 3).unwrap();
        assert_eq!(t.layer(0).unwrap(), AbelianFieldSpec::quadratic(-4).unwrap());
        let layer = t.layer(2).unwrap();
        assert_eq!(layer.degree(), 18);
        for a in layer.chars() {
            for b in layer.chars() {
                assert!(layer.contains(&a.mul(b).unwrap()));
            }
        }
    }

    #[test]
    fn roots_of_unity_along_towers() {
        assert_eq!(AbelianFieldSpec::rationals().roots_of_unity().unwrap(), 2);
        let t = TowerSpec::new(AbelianFieldSpec::quadratic(-3).unwrap(), 3).unwrap();
        assert_eq!(t.roots_of_unity_at(0).unwrap(), 6);
        assert_eq!(t.roots_of_unity_at(1).unwrap(), 18);
        let t = TowerSpec::new(AbelianFieldSpec::quadratic(-4).unwrap(), 3).unwrap();
        assert_eq!(t.roots_of_unity_at(0).unwrap(), 4);
        assert_eq!(t.roots_of_unity_at(1).unwrap(), 4);
        let t = TowerSpec::new(AbelianFieldSpec::quadratic(-4).unwrap(), 2).unwrap();
        assert_eq!(t.roots_of_unity_at(0).unwrap(), 4);
        assert_eq!(t.roots_of_unity_at(1).unwrap(), 8);
        assert_eq!(t.roots_of_unity_at(2).unwrap(), 16);
    }

    #[test]
    fn galois_orbits_at_p() {
        // Quadratic characters are alone in their orbit.
        assert_eq!(galois_orbit_p(&kron(-3), 3).unwrap(), vec![kron(-3)]);
        // Order 4 at p = 3: Frobenius pairs the character with its cube.
        let chi5 = DirichletChar::from_exponents(5, &[1]).unwrap();
        let orbit = galois_orbit_p(&chi5, 3).unwrap();
        assert_eq!(orbit.len(), 2);
        assert!(orbit.contains(&chi5) && orbit.contains(&chi5.pow(3).unwrap()));
        // Order 6 at p = 3: the inertia direction pairs chi with chi^5,
        // while the quadratic part chi^3 stays alone.
        let chi7 = DirichletChar::from_exponents(7, &[1]).unwrap();
        let orbit = galois_orbit_p(&chi7, 3).unwrap();
        assert_eq!(orbit.len(), 2);
        assert!(orbit.contains(&chi7) && orbit.contains(&chi7.pow(5).unwrap()));
        assert_eq!(
            galois_orbit_p(&chi7.pow(3).unwrap(), 3).unwrap(),
            vec![chi7.pow(3).unwrap()]
        );
        // Order 5 at p = 7: 7 generates the units mod 5, one orbit of size 4.
        let chi11 = DirichletChar::from_exponents(11, &[2]).unwrap();
        assert_eq!(chi11.order(), 5);
        let orbit = galois_orbit_p(&chi11, 7).unwrap();
        assert_eq!(orbit.len(), 4);
        for j in 1..=4 {
            assert!(orbit.contains(&chi11.pow(j).unwrap()));
        }
    }

    #[test]
    fn orbits_partition_odd_characters() {
        let odd = AbelianFieldSpec::cyclotomic(7).unwrap().odd_chars();
        assert_eq!(odd.len(), 3);
        let orbits = orbit_representatives(&odd, 3).unwrap();
        let mut sizes: Vec<usize> = orbits.iter().map(Vec::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![1, 2]);
        // A non-closed set is refused.
        let chi7 = DirichletChar::from_exponents(7, &[1]).unwrap();
        assert!(orbit_representatives(std::slice::from_ref(&chi7), 3).is_err());
    }

    #[test]
    fn w2_of_known_fields() {
        assert_eq!(AbelianFieldSpec::rationals().w2().unwrap(), 24);
        assert_eq!(AbelianFieldSpec::quadratic(8).unwrap().w2().unwrap(), 48);
        assert_eq!(AbelianFieldSpec::quadratic(12).unwrap().w2().unwrap(), 24);
        assert_eq!(AbelianFieldSpec::quadratic(5).unwrap().w2().unwrap(), 120);
        assert_eq!(AbelianFieldSpec::cyclotomic_real(16).unwrap().w2().unwrap(), 96);
        assert_eq!(AbelianFieldSpec::cyclotomic_real(9).unwrap().w2().unwrap(), 72);
        assert_eq!(AbelianFieldSpec::cyclotomic_real(7).unwrap().w2().unwrap(), 168);
    }

    #[test]
    fn euler_data_examples() {
        let sqrt2 = AbelianFieldSpec::quadratic(8).unwrap();
        // 7 splits: (8/7) = 1.
        let d = euler_factor_at(&sqrt2, 7).unwrap();
        assert_eq!(d, EulerData { ramification_index: 1, residue_degree: 1, split_count: 2 });
        assert_eq!(
            d.inverse_norm_factor(7),
            Rat::new(BigInt::from(36), BigInt::from(49))
        );
        // 3 is inert: (8/3) = -1.
        let d = euler_factor_at(&sqrt2, 3).unwrap();
        assert_eq!(d, EulerData { ramification_index: 1, residue_degree: 2, split_count: 1 });
        assert_eq!(
            d.inverse_norm_factor(3),
            Rat::new(BigInt::from(8), BigInt::from(9))
        );
        // 2 ramifies.
        let d = euler_factor_at(&sqrt2, 2).unwrap();
        assert_eq!(d, EulerData { ramification_index: 2, residue_degree: 1, split_count: 1 });
        assert_eq!(
            d.inverse_norm_factor(2),
            Rat::new(BigInt::from(1), BigInt::from(2))
        );
        // The rational field.
        let d = euler_factor_at(&AbelianFieldSpec::rationals(), 5).unwrap();
        assert_eq!(d, EulerData { ramification_index: 1, residue_degree: 1, split_count: 1 });
    }

    #[test]
    fn parse_forms() {
        assert_eq!(parse_field_spec("Q").unwrap().degree(), 1);
        assert_eq!(
            parse_field_spec("Qzeta:12").unwrap(),
            AbelianFieldSpec::cyclotomic(12).unwrap()
        );
        assert_eq!(
            parse_field_spec("quad:-4").unwrap(),
            AbelianFieldSpec::cyclotomic(4).unwrap()
        );
        assert_eq!(
            parse_field_spec(r#"[{"modulus":5,"exps":[1]}]"#).unwrap(),
            AbelianFieldSpec::cyclotomic(5).unwrap()
        );
        assert!(parse_field_spec("Qzeta:x").is_err());
        assert!(parse_field_spec("cubic:7").is_err());
        assert!(parse_field_spec("[oops").is_err());
        assert!(parse_tower("Qzeta:9", 3).is_err());
        assert!(parse_tower("Qzeta:12", 3).is_ok());
    }

    #[test]
    fn explicit_character_lists_must_be_closed() {
        let open = vec![DirichletChar::principal(), kron(-4), kron(-3)];
        assert!(AbelianFieldSpec::from_chars(open).is_err());
        let closed = AbelianFieldSpec::cyclotomic(12).unwrap();
        assert_eq!(
            AbelianFieldSpec::from_chars(closed.chars().to_vec()).unwrap(),
            closed
        );
    }
}
