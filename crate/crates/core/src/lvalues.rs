//! Dirichlet L-values at s = 0 and s = -1, exact and p-adic.
//!
//! The exact values are generalized Bernoulli numbers,
//!
//! ```text
//!   L(0, chi)  = -B_{1,chi},     B_{1,chi} = (1/2f) sum_{a=1}^{f} chi(a) (2a - f),
//!   L(-1, chi) = -B_{2,chi}/2,   B_{2,chi} = (1/6f) sum_{a=1}^{f} chi(a) (6a^2 - 6af + f^2),
//! ```
//!
//! with f the conductor; both sums remain valid for the trivial character
//! (giving 1/2 and 1/6).  The Kubota–Leopoldt p-adic value at s = 1 - n is
//!
//! ```text
//!   L_p(1 - n, chi) = -(1 - chi omega^{-n}(p) p^{n-1}) B_{n, chi omega^{-n}} / n,
//! ```
//!
//! where omega is the Teichmüller character; only n = 1, 2 are needed here.
//! Everything is computed exactly in cyclotomic fields; the modular route
//! re-expresses the same value in a truncated p-adic ring through the fixed
//! root-of-unity convention of the character module, carrying denominators
//! as an explicit power of p so no certified digits are spent.
//!
//! Bernoulli numbers dominate the running time of tower computations and
//! depend only on the character, so they go through a [`BernoulliCache`]
//! with an optional plain-text disk form.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use num_bigint::{BigInt, BigUint};
use num_traits::One;
use rayon::prelude::*;
use serde::Serialize;

use crate::arith::{
    euler_phi, parse_rational, product_promoting, CycloElem, ModCycloRing, Rat, ShiftedModElem,
};
use crate::characters::{embed_exact, parse_label, DirichletChar};
use crate::error::{Error, Result};

/// Interpolation point of the p-adic L-function.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SPoint {
    Zero,
    MinusOne,
}

impl SPoint {
    /// The Bernoulli index n with s = 1 - n.
    pub fn index(self) -> u32 {
        match self {
            SPoint::Zero => 1,
            SPoint::MinusOne => 2,
        }
    }
}

/// How many leading entries of a cache file are recomputed on load.
const SPOT_CHECKS: usize = 3;

/// B_{1,chi}, exact in the value field (1/2 for the trivial character,
/// 0 for even nontrivial chi).
pub fn compute_b1(chi: &DirichletChar) -> CycloElem {
    let f = chi.conductor();
    // Accumulate the integer weight of every value exponent first: one
    // polynomial reduction and one rational scaling at the end instead of
    // f exact cyclotomic operations.
    let mut acc = vec![0i128; chi.order() as usize];
    for a in 1..=f {
        if let Some(k) = chi.value_exponent(a) {
            acc[k as usize] += 2 * a as i128 - f as i128;
        }
    }
    scaled_from_weights(chi.order() as u32, acc, 2 * f)
}

/// B_{2,chi}, exact in the value field (1/6 for the trivial character,
/// 0 for odd chi).
pub fn compute_b2(chi: &DirichletChar) -> CycloElem {
    let f = chi.conductor();
    let fi = f as i128;
    let mut acc = vec![0i128; chi.order() as usize];
    for a in 1..=f {
        if let Some(k) = chi.value_exponent(a) {
            let ai = a as i128;
            acc[k as usize] += 6 * ai * ai - 6 * ai * fi + fi * fi;
        }
    }
    scaled_from_weights(chi.order() as u32, acc, 6 * f)
}

fn scaled_from_weights(order: u32, weights: Vec<i128>, denom: u64) -> CycloElem {
    let poly: Vec<Rat> = weights
        .into_iter()
        .map(|w| Rat::from(BigInt::from(w)))
        .collect();
    CycloElem::from_power_coeffs(order, poly)
        .scalar_mul(&Rat::new(BigInt::one(), BigInt::from(denom)))
}

/// Memoized generalized Bernoulli numbers, keyed by index and character
/// label, safe to share across rayon workers.
pub struct BernoulliCache {
    map: Mutex<HashMap<(u32, String), CycloElem>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

/// Counters reported alongside results.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub entries: u64,
}

impl Default for BernoulliCache {
    fn default() -> Self {
        Self::new()
    }
}

impl BernoulliCache {
    pub fn new() -> Self {
        BernoulliCache {
            map: Mutex::new(HashMap::new()),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    /// Reads a cache file; the leading entries are recomputed and compared,
    /// so a corrupted file fails loudly instead of poisoning results.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut map = HashMap::new();
        let mut checked = 0usize;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad =
                |what: String| Error::Parse(format!("bernoulli cache line {}: {what}", idx + 1));
            let mut parts = line.split_whitespace();
            let n = match parts.next() {
                Some("B1") => 1u32,
                Some("B2") => 2,
                other => return Err(bad(format!("unknown kind {other:?}"))),
            };
            let label = parts.next().ok_or_else(|| bad("missing label".into()))?;
            let chi = parse_label(label)?;
            let coeffs: Vec<Rat> = parts.map(parse_rational).collect::<Result<_>>()?;
            let want = euler_phi(chi.order() as u32) as usize;
            if coeffs.len() != want {
                return Err(bad(format!(
                    "expected {want} coefficients, found {}",
                    coeffs.len()
                )));
            }
            let value = CycloElem::from_power_coeffs(chi.order() as u32, coeffs);
            if checked < SPOT_CHECKS {
                let fresh = if n == 1 { compute_b1(&chi) } else { compute_b2(&chi) };
                if fresh != value {
                    return Err(Error::CheckFailed(format!(
                        "cache entry B{n} {label} disagrees with a fresh computation"
                    )));
                }
                checked += 1;
            }
            map.insert((n, label.to_string()), value);
        }
        Ok(BernoulliCache {
            map: Mutex::new(map),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        })
    }

    /// Writes one line per entry — "B1 chi(f;a1,...) c0 c1 ..." with the
    /// phi(order) power-basis coefficients as exact rationals — sorted so
    /// equal caches serialize byte-identically.
    pub fn save(&self, path: &Path) -> Result<()> {
        let map = self.map.lock().unwrap();
        let mut lines: Vec<String> = map
            .iter()
            .map(|((n, label), value)| {
                let mut line = format!("B{n} {label}");
                for c in value.coeffs() {
                    write!(line, " {c}").expect("write to string");
                }
                line
            })
            .collect();
        drop(map);
        lines.sort();
        let mut text = lines.join("\n");
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn b1(&self, chi: &DirichletChar) -> CycloElem {
        self.get_or_compute(1, chi)
    }

    pub fn b2(&self, chi: &DirichletChar) -> CycloElem {
        self.get_or_compute(2, chi)
    }

    fn get_or_compute(&self, n: u32, chi: &DirichletChar) -> CycloElem {
        let key = (n, chi.label());
        if let Some(hit) = self.map.lock().unwrap().get(&key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return hit.clone();
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        // Computed outside the lock: a duplicated computation is cheap and
        // deterministic, a held lock would serialize the rayon workers.
        let value = if n == 1 { compute_b1(chi) } else { compute_b2(chi) };
        self.map
            .lock()
            .unwrap()
            .entry(key)
            .or_insert_with(|| value.clone());
        value
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            entries: self.map.lock().unwrap().len() as u64,
        }
    }
}

/// Exact L(s, chi) at the two interpolation points.
pub fn l_value(chi: &DirichletChar, s: SPoint, cache: &BernoulliCache) -> CycloElem {
    match s {
        SPoint::Zero => cache.b1(chi).neg(),
        SPoint::MinusOne => cache
            .b2(chi)
            .scalar_mul(&Rat::new(BigInt::from(-1), BigInt::from(2))),
    }
}

/// chi omega^{-n} with n = 1 - s: the twist whose Bernoulli number the
/// interpolation formula consumes.  Odd characters are refused — their
/// p-adic L-function is identically zero.
fn twisted_character(p: u64, chi: &DirichletChar, s: SPoint) -> Result<DirichletChar> {
    if chi.is_odd() {
        return Err(Error::Usage(format!(
            "p-adic L-functions vanish identically for odd characters ({})",
            chi.label()
        )));
    }
    let omega = DirichletChar::teichmuller_char(p)?;
    chi.mul(&omega.pow(-(s.index() as i64))?)
}

/// L_p(s, chi) as an exact cyclotomic number (the value lies in the field
/// generated by the values of chi omega^{-n}).
pub fn lp_value_exact(
    p: u64,
    chi: &DirichletChar,
    s: SPoint,
    cache: &BernoulliCache,
) -> Result<CycloElem> {
    let twist = twisted_character(p, chi, s)?;
    let b = match s {
        SPoint::Zero => cache.b1(&twist),
        SPoint::MinusOne => cache.b2(&twist),
    };
    let scale = if s == SPoint::MinusOne {
        Rat::from(BigInt::from(p))
    } else {
        Rat::one()
    };
    let euler = CycloElem::one(b.order()).sub(&twist.eval(p).scalar_mul(&scale))?;
    let v = euler.mul(&b)?.neg();
    Ok(match s {
        SPoint::Zero => v,
        SPoint::MinusOne => v.scalar_mul(&Rat::new(BigInt::one(), BigInt::from(2))),
    })
}

/// L_p(s, chi) in a truncated p-adic ring, as p^shift times an integral
/// element.  The ring order must contain the p-part of the twisted value
/// order, and the prime-to-p part must divide p - 1 (be trivial at p = 2);
/// anything else is refused towards the exact route.
pub fn lp_value_modular(
    ring: &ModCycloRing,
    chi: &DirichletChar,
    s: SPoint,
    cache: &BernoulliCache,
) -> Result<ShiftedModElem> {
    let p = ring.prime();
    let twist = twisted_character(p, chi, s)?;
    let b = match s {
        SPoint::Zero => cache.b1(&twist),
        SPoint::MinusOne => cache.b2(&twist),
    };
    let b_mod = embed_exact(ring, &b)?;
    let chi_p = twist.eval_padic(p, ring)?;
    let scale = if s == SPoint::MinusOne {
        BigInt::from(p)
    } else {
        BigInt::one()
    };
    let euler = ring.sub(&ring.one(), &ring.scalar_mul(&chi_p, &scale)?)?;
    let out = ShiftedModElem {
        shift: b_mod.shift,
        elem: ring.scalar_mul(&ring.mul(&b_mod.elem, &euler)?, &BigInt::from(-1))?,
    };
    match s {
        SPoint::Zero => Ok(out),
        SPoint::MinusOne => shifted_div_int(ring, out, 2),
    }
}

/// Division by a small positive integer: the p-part of the divisor moves
/// into the shift, the prime-to-p part is a unit and costs no digits.
fn shifted_div_int(ring: &ModCycloRing, x: ShiftedModElem, n: u64) -> Result<ShiftedModElem> {
    let p = ring.prime();
    let mut n = n;
    let mut shift = x.shift;
    while n.is_multiple_of(p) {
        n /= p;
        shift -= 1;
    }
    if n == 1 {
        return Ok(ShiftedModElem { shift, elem: x.elem });
    }
    let inv = ring.scalar_inverse(&BigUint::from(n))?;
    Ok(ShiftedModElem {
        shift,
        elem: ring.scalar_mul(&x.elem, &BigInt::from(inv))?,
    })
}

/// prod over chars of 2^{-delta} L_p(s, chi), delta = 1 for p = 2 and 0
/// otherwise (the halving keeps 2-adic tower limits integral).  Factors
/// are computed in parallel; exact arithmetic keeps the result independent
/// of the schedule.
pub fn lp_product(
    ring: &ModCycloRing,
    chars: &[DirichletChar],
    s: SPoint,
    cache: &BernoulliCache,
) -> Result<ShiftedModElem> {
    let delta: i64 = if ring.prime() == 2 { 1 } else { 0 };
    let factors: Vec<ShiftedModElem> = chars
        .par_iter()
        .map(|chi| Ok(lp_value_modular(ring, chi, s, cache)?.scale_shift(-delta)))
        .collect::<Result<_>>()?;
    let mut acc = ShiftedModElem::one(ring);
    for f in &factors {
        acc = acc.mul(ring, f)?;
    }
    Ok(acc)
}

/// Exact counterpart of [`lp_product`], with every factor promoted to the
/// lcm of the value orders.  Practical only at shallow levels, where it
/// cross-checks the modular route.
pub fn lp_product_exact(
    p: u64,
    chars: &[DirichletChar],
    s: SPoint,
    cache: &BernoulliCache,
) -> Result<CycloElem> {
    let half = Rat::new(BigInt::one(), BigInt::from(2));
    let factors: Vec<CycloElem> = chars
        .par_iter()
        .map(|chi| {
            let v = lp_value_exact(p, chi, s, cache)?;
            Ok(if p == 2 { v.scalar_mul(&half) } else { v })
        })
        .collect::<Result<_>>()?;
    product_promoting(&factors)
}
