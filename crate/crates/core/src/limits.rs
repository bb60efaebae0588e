//! The tower-limit identity web.
//!
//! Along the cyclotomic Z_p-tower k = k_0 ⊂ k_1 ⊂ ... the relative class
//! numbers h_n^- converge p-adically, and the limit factors through a small
//! set of p-adic constants:
//!
//! * per character orbit, the stable L-product
//!   lim_n ∏_{ψ of level ≤ n} ∏_σ 2^{−δ} L_p(s, σ(χ)ψ), a value independent
//!   of the evaluation point s ∈ {0, −1} (σ runs over the Frobenius orbit,
//!   ψ over the wild characters, δ = 1 only for p = 2);
//! * the residue constant c_p: the scaled trivial-character products
//!   p^{n+1+δ} ∏_ψ 2^{−δ} L_p(s, ψ) tend to −c_p at s = 0 and to −c_p/2 at
//!   s = −1, so their ratio pins the pole at s = 1 and must converge to 2;
//! * rational constants built from the root-of-unity count w_0, the unit
//!   index Q, a Teichmüller twist ω(2)^{−[k:Q]/2}, and the Euler product
//!   E = ∏_{χ odd} (1 − χ(p)).
//!
//! Writing b for the twisted unit-index constant, the certified identities
//! are:
//!
//! ```text
//!   h^-_inf =  b E^{-1} ∏_{χ odd}       (stable product of χω)   (μ_2p ⊄ k)
//!   h^-_inf = −b c_p E^{-1} ∏_{χ even ≠ 1} (stable product of χ)  (μ_2p ⊆ k)
//! ```
//!
//! and, in the second case, the K_2 orders of the real layers converge with
//!
//! ```text
//!   lim (scaled #K_2(O_n^+)) = (−1)^{(1−δ)[k^+:Q]} v_0 h^-_inf E
//!                              / (2^{1−δ} b (1 − p)),
//! ```
//!
//! where v_0 = w_2(k_0^+)/p^{1+δ}.  A split odd character (χ(p) = 1) forces
//! every limit on the left to vanish exactly; the web degenerates and the
//! certificates say so.
//!
//! Every limit is wrapped in a [`LimitCertificate`] recording how many
//! digits are certified and whether the congruence chain behind them is a
//! proved contraction rate ([`CertKind::TheoreticalLadder`]) or observed
//! stabilization over the deepest computed levels ([`CertKind::Empirical`]).
//! Certificate values are truncated to their certified digits, so any
//! arithmetic done with them downstream propagates honest precision.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, Zero};
use serde::{Serialize, Serializer};

use crate::arith::{
    int_valuation, pow_rational, product_promoting, teichmuller, CycloElem, ModCycloRing,
    PadicNumber, Rat,
};
use crate::characters::{
    euler_factor_at, galois_orbit_p, orbit_representatives, split_order, AbelianFieldSpec,
    DirichletChar, TowerSpec,
};
use crate::classno::{
    hminus_layer, mu_2p_in_base, non_p_part, rational_to_count, unit_index, UnitIndexPolicy,
};
use crate::error::{Error, Result};
use crate::lvalues::{l_value, lp_product, lp_product_exact, BernoulliCache, SPoint};

fn ser_padic<S: Serializer>(v: &PadicNumber, s: S) -> std::result::Result<S::Ok, S::Error> {
    v.repr().serialize(s)
}

/// How a limit's digits were certified.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertKind {
    /// Every congruence in the chain is backed by a proved contraction rate.
    TheoreticalLadder,
    /// Backed by observed stabilization across the deepest computed levels.
    Empirical,
}

/// A p-adic limit together with the evidence for its certified digits.
#[derive(Clone, Debug, Serialize)]
pub struct LimitCertificate {
    pub claim: String,
    pub kind: CertKind,
    #[serde(serialize_with = "ser_padic")]
    pub value: PadicNumber,
    /// Certified unit digits of `value`; `None` means the value is exact.
    pub certified_digits: Option<u32>,
    /// Exact valuation of the limit, when the data determines one.
    pub p_part: Option<i64>,
    pub exact_zero: bool,
    pub evidence: Vec<String>,
}

impl LimitCertificate {
    fn new(claim: impl Into<String>, kind: CertKind, value: PadicNumber, evidence: Vec<String>) -> Self {
        let exact_zero = value.is_exact_zero();
        let certified_digits = if exact_zero { None } else { Some(value.precision()) };
        let p_part = value.valuation();
        LimitCertificate {
            claim: claim.into(),
            kind,
            value,
            certified_digits,
            p_part,
            exact_zero,
            evidence,
        }
    }
}

/// A stable L-product certificate labelled by the orbit it multiplies over.
#[derive(Clone, Debug, Serialize)]
pub struct NamedCertificate {
    pub orbit: Vec<String>,
    pub certificate: LimitCertificate,
}

/// One verified relation between members of a [`TowerLimits`].
#[derive(Clone, Debug, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub holds: bool,
    /// Digits of agreement observed (absolute precision).
    pub digits: i64,
    /// Digits the shared precision of the two sides demanded.
    pub required: i64,
}

/// The rational and Teichmüller-twisted constants entering the assembly.
#[derive(Clone, Debug, Serialize)]
pub struct TowerConstants {
    pub delta: u32,
    pub kappa: u64,
    pub w0: u64,
    pub q_limit: u64,
    pub mu_2p_in_base: bool,
    /// w_0 Q, divided by p^{1+delta} when mu_2p ⊆ k.
    pub a: u64,
    /// omega(2)^{-[k:Q]/2} a for odd p, a itself for p = 2.
    #[serde(serialize_with = "ser_padic")]
    pub b: PadicNumber,
    /// prod over odd characters of (1 - chi(p)), exactly.
    pub euler_product: String,
    /// w_2(k_0^+)/p^{1+delta} when mu_2p ⊆ k.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v0: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w2_base_real: Option<u64>,
}

/// The scaled K_2-order sequence of the real layers and its limit.
#[derive(Clone, Debug, Serialize)]
pub struct K2Limit {
    pub orders: Vec<String>,
    pub certificate: LimitCertificate,
}

/// Everything the tower's limits pin down, with all cross-identities checked.
#[derive(Clone, Debug, Serialize)]
pub struct TowerLimits {
    pub tower: String,
    pub p: u64,
    pub levels: u32,
    pub constants: TowerConstants,
    pub u_values: Vec<String>,
    pub h_minus_limit: LimitCertificate,
    pub stable_products: Vec<NamedCertificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residue_constant: Option<LimitCertificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub even_product_limit: Option<LimitCertificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regulator_ratio: Option<LimitCertificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k2: Option<K2Limit>,
    pub identities: Vec<IdentityCheck>,
}

/// Largest e with a ≡ b mod p^e, capped by what both operands certify.
fn agreement_depth(a: &PadicNumber, b: &PadicNumber) -> Result<i64> {
    let diff = a.sub(b)?;
    let caps = [a.absolute_precision(), b.absolute_precision()];
    let cap = caps.iter().flatten().min().copied();
    Ok(match (diff.valuation_bound(), cap) {
        (None, None) => i64::MAX,
        (None, Some(c)) => c,
        (Some(v), None) => v,
        (Some(v), Some(c)) => v.min(c),
    })
}

/// digits = observed agreement, required = full shared precision (at least
/// `floor`); the identity holds when the two sides agree on every digit
/// both of them carry.
fn check_identity(name: &str, lhs: &PadicNumber, rhs: &PadicNumber, floor: i64) -> Result<IdentityCheck> {
    let digits = agreement_depth(lhs, rhs)?;
    let caps = [lhs.absolute_precision(), rhs.absolute_precision()];
    let required = match caps.iter().flatten().min().copied() {
        Some(c) => c.max(floor),
        // Both sides exact: demand exact equality.
        None => {
            return Ok(IdentityCheck {
                name: name.into(),
                holds: digits == i64::MAX,
                digits: 0,
                required: 0,
            });
        }
    };
    Ok(IdentityCheck { name: name.into(), holds: digits >= required, digits, required })
}

/// p-part of the lcm of the value orders: the cyclotomic ring that holds
/// every wild twist in `chars` (prime-to-p parts embed via Teichmüller).
fn ring_order_for(chars: &[DirichletChar], p: u64) -> u64 {
    let mut order = 1;
    for chi in chars {
        let (_, pj) = split_order(chi.order(), p);
        order = order.max(pj);
    }
    order
}

/// Product of 2^{-delta} L_p(s, chi) over `chars`, times p^extra_shift,
/// collapsed to Z_p with at least `abs_target` certified absolute digits.
/// Retries with more working digits when denominator shifts eat some.
fn collapsed_product(
    p: u64,
    ring_order: u64,
    chars: &[DirichletChar],
    s: SPoint,
    extra_shift: i64,
    abs_target: i64,
    cache: &BernoulliCache,
) -> Result<PadicNumber> {
    let mut w = abs_target.max(2) as u32 + 6;
    for _ in 0..5 {
        let ring = ModCycloRing::new(ring_order as u32, p, w);
        let value = lp_product(&ring, chars, s, cache)?
            .scale_shift(extra_shift)
            .to_constant_padic(&ring)?;
        match value.absolute_precision() {
            None => return Ok(value),
            Some(a) if a >= abs_target => return Ok(value),
            Some(a) => w += (abs_target - a) as u32 + 4,
        }
    }
    Err(Error::Precision(format!(
        "a product of {} p-adic L-values did not reach {} certified digits",
        chars.len(),
        abs_target
    )))
}

/// u_n = (kappa^{p^n} - 1)/p^{n+1+delta}: exact positive integers whose
/// ladder u_{n+1} ≡ u_n mod p^{n+1} is verified along the way.  Their limit
/// is the p-adic unit scaling the trivial-character denominators.
pub fn u_sequence(p: u64, n_max: u32) -> Result<Vec<BigUint>> {
    let tower = TowerSpec::new(AbelianFieldSpec::rationals(), p)?;
    let delta = tower.delta();
    let kappa = BigUint::from(tower.kappa());
    let mut out: Vec<BigUint> = Vec::with_capacity(n_max as usize + 1);
    for n in 0..=n_max {
        let exp = (p as u128).checked_pow(n).filter(|&e| e <= 1 << 22).ok_or_else(|| {
            Error::Resource(format!("kappa^(p^{n}) is too large to expand exactly"))
        })?;
        let num = kappa.pow(exp as u32) - BigUint::one();
        let den = BigUint::from(p).pow(n + 1 + delta);
        let (q, r) = num_integer::Integer::div_rem(&num, &den);
        if !r.is_zero() {
            return Err(Error::Internal(format!(
                "kappa^(p^{n}) - 1 is not divisible by p^{}",
                n + 1 + delta
            )));
        }
        if let Some(prev) = out.last() {
            let md = BigUint::from(p).pow(n);
            if prev % &md != &q % &md {
                return Err(Error::CheckFailed(format!(
                    "u_{} and u_{n} disagree mod {p}^{n}",
                    n - 1
                )));
            }
        }
        out.push(q);
    }
    Ok(out)
}

/// The stable p-adic L-product over the Frobenius orbit of an even
/// character: per level m, the product of 2^{-delta} L_p(s, σ(χ)ψ) over the
/// orbit and all p^m wild twists ψ.  Consecutive levels contract at the
/// norm-operator rate (level m determines the limit mod p^{m+1}) and the
/// two evaluation points s = 0, −1 agree at the same rate, which is checked
/// level by level.  A non-unit value at level 0 forces the exact value 0.
pub fn stable_lp_product(
    p: u64,
    chi: &DirichletChar,
    n_max: u32,
    prec: u32,
    cache: &BernoulliCache,
) -> Result<LimitCertificate> {
    let tower = TowerSpec::new(AbelianFieldSpec::rationals(), p)?;
    let delta = tower.delta() as i64;
    if chi.is_principal() {
        return Err(Error::Usage(
            "the trivial character's products diverge; they are covered by \
             the scaled residue constant"
                .into(),
        ));
    }
    if chi.is_odd() {
        return Err(Error::Usage(format!(
            "{} is odd; stable L-products are formed for even characters",
            chi.label()
        )));
    }
    let f = chi.conductor();
    if (p != 2 && f.is_multiple_of(p * p)) || (p == 2 && f.is_multiple_of(8)) {
        return Err(Error::Usage(format!(
            "conductor {f} carries too much {p}-part: the wild twists would \
             not move independently of the character"
        )));
    }
    let orbit = galois_orbit_p(chi, p)?;
    let claim = format!(
        "stable p-adic L-product over the Frobenius orbit of {}",
        chi.label()
    );
    let mut evidence = vec![format!(
        "orbit: {}",
        orbit.iter().map(|c| c.label()).collect::<Vec<_>>().join(" ")
    )];

    let abs_target = (prec as i64).max(n_max as i64 + 2 + delta);
    let base_order = ring_order_for(&orbit, p);
    let level0 = collapsed_product(p, base_order, &orbit, SPoint::Zero, 0, abs_target, cache)?;
    if level0.valuation() != Some(0) {
        // Valuation >= 1 is certified by the modular arithmetic itself.
        if orbit.len() <= 30 {
            if let Ok(exact) = lp_product_exact(p, &orbit, SPoint::Zero, cache) {
                if exact.is_zero() {
                    evidence.push("the level-0 product vanishes identically".into());
                }
            }
        }
        evidence.push(format!(
            "level-0 orbit product {level0} lies in {p}·Z_{p}; every deeper \
             level multiplies factors congruent to it modulo the maximal \
             ideal, so level m has valuation at least m + 1 and the limit \
             is exactly zero"
        ));
        return Ok(LimitCertificate::new(
            claim,
            CertKind::TheoreticalLadder,
            PadicNumber::exact_zero(p),
            evidence,
        ));
    }

    let mut prev: Option<PadicNumber> = None;
    for m in 0..=n_max {
        let wild = tower.wild_characters(m)?;
        let mut chars = Vec::with_capacity(orbit.len() * wild.len());
        for sigma_chi in &orbit {
            for psi in &wild {
                chars.push(sigma_chi.mul(psi)?);
            }
        }
        let order = ring_order_for(&chars, p);
        let at_zero = collapsed_product(p, order, &chars, SPoint::Zero, 0, abs_target, cache)?;
        let at_minus = collapsed_product(p, order, &chars, SPoint::MinusOne, 0, abs_target, cache)?;
        let cross = agreement_depth(&at_zero, &at_minus)?;
        if cross < m as i64 + 1 {
            return Err(Error::CheckFailed(format!(
                "the two evaluation points disagree at level {m}: {cross} \
                 digits of agreement, the contraction rate requires {}",
                m + 1
            )));
        }
        if let Some(prev) = &prev {
            let step = agreement_depth(prev, &at_zero)?;
            if step < m as i64 {
                return Err(Error::CheckFailed(format!(
                    "the ladder stopped contracting between levels {} and \
                     {m}: {step} digits of agreement, the rate requires {m}",
                    m - 1
                )));
            }
            evidence.push(format!(
                "level {m}: {} twists; consecutive agreement {step} digits, \
                 point agreement {cross} digits",
                chars.len()
            ));
        } else {
            evidence.push(format!(
                "level {m}: {} twists; point agreement {cross} digits",
                chars.len()
            ));
        }
        // At shallow levels the product is cheap to form exactly; when it is
        // moreover Galois-stable (quadratic characters), pin the modular
        // route against the exact rational.
        if m <= 1 && chars.len() <= 30 {
            if let Ok(exact) = lp_product_exact(p, &chars, SPoint::Zero, cache)?.reduce_to_rational() {
                let embedded = PadicNumber::from_rational(&exact, p, at_zero.precision().max(1));
                let depth = agreement_depth(&embedded, &at_zero)?;
                let need = at_zero.absolute_precision().unwrap_or(0);
                if depth < need {
                    return Err(Error::CheckFailed(format!(
                        "the modular collapse at level {m} disagrees with \
                         the exact rational product {exact}"
                    )));
                }
                evidence.push(format!(
                    "level {m} exact product = {exact}, matching the modular route"
                ));
            }
        }
        prev = Some(at_zero);
    }

    let last = prev.expect("at least level 0");
    if !last.is_unit() {
        return Err(Error::Internal(format!(
            "unit value at level 0 but non-unit value {last} at level {n_max}"
        )));
    }
    let certified = (n_max as i64 + 1).min(last.absolute_precision().unwrap_or(i64::MAX)) as u32;
    evidence.push(format!(
        "limit certified to {certified} digits by the contraction rate"
    ));
    Ok(LimitCertificate::new(
        claim,
        CertKind::TheoreticalLadder,
        last.truncate(certified),
        evidence,
    ))
}

/// The residue constant: p^{m+1+delta} times the full trivial-character
/// product tends to −c_p at s = 0 and −c_p/2 at s = −1.  Certified by
/// stabilization over the last three levels (capped at the contraction
/// rate), with the pole pinned by the point ratio converging to 2.
pub fn residue_constant_limit(
    p: u64,
    n_max: u32,
    prec: u32,
    cache: &BernoulliCache,
) -> Result<LimitCertificate> {
    let tower = TowerSpec::new(AbelianFieldSpec::rationals(), p)?;
    if n_max < 2 {
        return Err(Error::Usage(
            "stabilization needs at least levels 0, 1 and 2".into(),
        ));
    }
    let delta = tower.delta() as i64;
    let abs_target = (prec as i64).max(n_max as i64 + 3);
    let mut levels: Vec<(PadicNumber, PadicNumber)> = Vec::new();
    let mut evidence = Vec::new();
    for m in 0..=n_max {
        let wild = tower.wild_characters(m)?;
        let order = ring_order_for(&wild, p);
        let shift = m as i64 + 1 + delta;
        let at_zero = collapsed_product(p, order, &wild, SPoint::Zero, shift, abs_target, cache)?;
        let at_minus = collapsed_product(p, order, &wild, SPoint::MinusOne, shift, abs_target, cache)?;
        if let Some((prev_zero, _)) = levels.last() {
            let step = agreement_depth(prev_zero, &at_zero)?;
            if m >= 2 && step < m as i64 {
                return Err(Error::CheckFailed(format!(
                    "the scaled trivial-character products stopped \
                     contracting between levels {} and {m} ({step} digits)",
                    m - 1
                )));
            }
            evidence.push(format!(
                "level {m}: scaled products {at_zero} and {at_minus}; \
                 consecutive agreement {step} digits"
            ));
        } else {
            evidence.push(format!(
                "level {m}: scaled products {at_zero} and {at_minus}"
            ));
        }
        levels.push((at_zero, at_minus));
    }

    let n = levels.len() - 1;
    let (last_zero, last_minus) = &levels[n];
    let d1 = agreement_depth(&levels[n - 1].0, last_zero)?;
    let d2 = agreement_depth(&levels[n - 2].0, last_zero)?;
    if d1.min(d2) < 1 {
        return Err(Error::CheckFailed(
            "the scaled trivial-character products show no stabilization".into(),
        ));
    }
    // The verified per-level contraction makes the last consecutive
    // agreement the honest digit count; the theoretical rate caps it.
    let stable = d1
        .min(n_max as i64 + 1)
        .min(last_zero.absolute_precision().unwrap_or(i64::MAX));
    let ratio = last_zero.div(last_minus)?;
    let two = PadicNumber::from_int(&BigInt::from(2), p, ratio.precision().max(1));
    let ratio_depth = agreement_depth(&ratio, &two)?;
    if ratio_depth < stable {
        return Err(Error::CheckFailed(format!(
            "the two evaluation points do not pin a simple pole: their ratio \
             {ratio} matches 2 only to {ratio_depth} digits ({stable} needed)"
        )));
    }
    let c = last_zero.neg();
    if !c.is_unit() {
        return Err(Error::Internal(format!(
            "the residue constant must be a unit, got {c}"
        )));
    }
    evidence.push(format!(
        "stabilization over the last three levels: {d2} and {d1} digits"
    ));
    evidence.push(format!(
        "point ratio = {ratio}, agreeing with 2 to {ratio_depth} digits"
    ));
    Ok(LimitCertificate::new(
        format!("scaled residue constant of the {p}-adic L-products"),
        CertKind::Empirical,
        c.truncate(stable as u32),
        evidence,
    ))
}

/// The p-adic limit of the exact relative class numbers h_n^-.  The
/// prime-to-p parts obey the proved congruence nonp(h_m) ≡ nonp(h_{m'})
/// mod p^{min(m, m')}, checked for every pair of computed levels; the
/// p-part is read off the deepest levels.  A split odd character short-
/// circuits the whole ladder to an exact zero.
pub fn hminus_limit(
    tower: &TowerSpec,
    policy: &UnitIndexPolicy,
    n_max: u32,
    cache: &BernoulliCache,
) -> Result<LimitCertificate> {
    let p = tower.p();
    let base = tower.base();
    if !base.is_cm() {
        return Err(Error::Usage(
            "relative class numbers are defined for CM fields only".into(),
        ));
    }
    let claim = "p-adic limit of the relative class numbers along the tower".to_string();
    let split: Vec<String> = base
        .odd_chars()
        .iter()
        .filter(|chi| chi.value_exponent(p) == Some(0))
        .map(|chi| chi.label())
        .collect();
    if !split.is_empty() {
        let evidence = vec![format!(
            "odd character(s) {} take the value 1 at {p}: the Euler factor \
             keeps a fixed zero at every level and the class numbers \
             contract to the exact value 0",
            split.join(" ")
        )];
        return Ok(LimitCertificate::new(
            claim,
            CertKind::TheoreticalLadder,
            PadicNumber::exact_zero(p),
            evidence,
        ));
    }
    if n_max < 1 {
        return Err(Error::Usage("a ladder needs at least levels 0 and 1".into()));
    }

    let mut hs: Vec<BigUint> = Vec::with_capacity(n_max as usize + 1);
    for m in 0..=n_max {
        hs.push(hminus_layer(tower, m, policy, cache)?);
    }
    let mut evidence = Vec::new();
    let mut parts: Vec<(i64, BigUint)> = Vec::new();
    for (m, h) in hs.iter().enumerate() {
        let v = int_valuation(&BigInt::from(h.clone()), p);
        let n = non_p_part(h, p);
        evidence.push(format!("h_{m} = {h} = {p}^{v} * {n}"));
        parts.push((v, n));
    }
    for i in 0..parts.len() {
        for j in i + 1..parts.len() {
            let md = BigUint::from(p).pow(i as u32);
            if &parts[i].1 % &md != &parts[j].1 % &md {
                return Err(Error::CheckFailed(format!(
                    "the prime-to-{p} parts of h_{i} and h_{j} differ mod {p}^{i}"
                )));
            }
        }
    }
    let top = parts.len() - 1;
    let diff = BigInt::from(parts[top - 1].1.clone()) - BigInt::from(parts[top].1.clone());
    if diff.is_zero() {
        evidence.push(format!(
            "prime-to-{p} parts of the last two levels are equal"
        ));
    } else {
        evidence.push(format!(
            "prime-to-{p} parts of the last two levels agree to {} digits",
            int_valuation(&diff, p)
        ));
    }
    let stable_p_part = parts[top].0 == parts[top - 1].0;
    let kind = if stable_p_part {
        CertKind::TheoreticalLadder
    } else {
        evidence.push(format!(
            "warning: the exact {p}-part still moved at the last level; only \
             the prime-to-{p} ladder is proved"
        ));
        CertKind::Empirical
    };
    let value = PadicNumber::from_int(&BigInt::from(hs[top].clone()), p, n_max);
    Ok(LimitCertificate::new(claim, kind, value, evidence))
}

/// #K_2 of the ring of integers of a totally real abelian field:
/// w_2(F) · |ζ_F(−1)|, with ζ_F(−1) = ∏_χ L(−1, χ) over all characters of
/// F and |ζ_F(−1)| = (−1)^{[F:Q]} ζ_F(−1).  The result must be a positive
/// integer; anything else is an internal inconsistency.
pub fn k2_order(field: &AbelianFieldSpec, cache: &BernoulliCache) -> Result<BigUint> {
    if !field.is_totally_real() {
        return Err(Error::Usage(
            "K_2 orders are computed here for totally real fields".into(),
        ));
    }
    let values: Vec<CycloElem> = field
        .chars()
        .iter()
        .map(|chi| l_value(chi, SPoint::MinusOne, cache))
        .collect();
    let zeta = product_promoting(&values)?.reduce_to_rational()?;
    let signed = if field.degree() % 2 == 1 { -zeta } else { zeta };
    let w2 = field.w2()?;
    rational_to_count(signed * Rat::from(BigInt::from(w2)), "K_2 order")
}

/// The full identity web of one tower: every limit, every constant, and
/// every relation between them.  Any failed identity is a hard error.
pub fn tower_limits(
    tower: &TowerSpec,
    policy: &UnitIndexPolicy,
    n_max: u32,
    prec: u32,
    h_plus: Option<&Rat>,
    cache: &BernoulliCache,
) -> Result<TowerLimits> {
    let p = tower.p();
    let base = tower.base();
    if !base.is_cm() {
        return Err(Error::Usage(
            "tower limits are computed over CM base fields".into(),
        ));
    }
    if n_max < 1 {
        return Err(Error::Usage(
            "the identity web needs at least levels 0 and 1".into(),
        ));
    }
    let delta = tower.delta();
    let degree = base.degree();
    let odd = base.odd_chars();
    let even_nontrivial: Vec<DirichletChar> = base
        .even_chars()
        .into_iter()
        .filter(|c| !c.is_principal())
        .collect();
    let mu2 = mu_2p_in_base(tower)?;
    let w0 = base.roots_of_unity()?;
    let q_limit = unit_index(tower, n_max, policy)?;
    let working = prec.max(n_max + 4) + 2;
    let tower_name = format!(
        "degree-{degree} CM field of conductor {}, p = {p}",
        base.conductor()
    );

    let euler_factors: Vec<CycloElem> = odd
        .iter()
        .map(|chi| CycloElem::one(chi.order() as u32).sub(&chi.eval(p)))
        .collect::<Result<_>>()?;
    let euler = product_promoting(&euler_factors)?.reduce_to_rational()?;

    let aw = w0 * q_limit;
    let a = if mu2 {
        let dv = p.pow(1 + delta);
        if aw % dv != 0 {
            return Err(Error::Internal(format!(
                "w_0 Q = {aw} is not divisible by {p}^{} although the base \
                 holds the {}-th roots of unity",
                1 + delta,
                2 * p
            )));
        }
        aw / dv
    } else {
        aw
    };
    let b = if p == 2 {
        PadicNumber::from_int(&BigInt::from(a), 2, working)
    } else {
        teichmuller(&BigInt::from(2), p, working)
            .pow_i64(-((degree / 2) as i64))?
            .mul(&PadicNumber::from_int(&BigInt::from(a), p, working))?
    };
    let (v0, w2_base_real) = if mu2 {
        let w2 = base.maximal_real_subfield().w2()?;
        let dv = p.pow(1 + delta);
        if w2 % dv != 0 {
            return Err(Error::Internal(format!(
                "w_2 of the real subfield is {w2}, not divisible by {p}^{}",
                1 + delta
            )));
        }
        (Some(w2 / dv), Some(w2))
    } else {
        (None, None)
    };
    let constants = TowerConstants {
        delta,
        kappa: tower.kappa(),
        w0,
        q_limit,
        mu_2p_in_base: mu2,
        a,
        b: b.clone(),
        euler_product: euler.to_string(),
        v0,
        w2_base_real,
    };

    let u_values: Vec<String> = u_sequence(p, n_max.min(8))?
        .iter()
        .map(|u| u.to_string())
        .collect();

    let mut identities: Vec<IdentityCheck> = Vec::new();

    // 2^{p^m} converges to the Teichmüller lift of 2 at the rate p^{m+1}.
    if p != 2 {
        let t = teichmuller(&BigInt::from(2), p, working);
        let modulus = BigInt::from(p).pow(working);
        let deepest = n_max.min(6);
        let mut all_ok = true;
        let mut top_depth = 0i64;
        for m in 0..=deepest {
            let pw = BigInt::from(2).modpow(&BigInt::from(p).pow(m), &modulus);
            let d = agreement_depth(&PadicNumber::from_int(&pw, p, working), &t)?;
            if d < m as i64 + 1 {
                all_ok = false;
            }
            top_depth = d;
        }
        identities.push(IdentityCheck {
            name: "teichmuller_stabilization".into(),
            holds: all_ok,
            digits: top_depth,
            required: deepest as i64 + 1,
        });
    }

    let h_cert = hminus_limit(tower, policy, n_max, cache)?;
    let omega = DirichletChar::teichmuller_char(p)?;
    let split_exists = odd.iter().any(|chi| chi.value_exponent(p) == Some(0));

    if split_exists {
        // The hypothesis fails: every limit vanishes and the assembly's
        // Euler factor is not invertible.  Certify the vanishing instead.
        let mut stable_products = Vec::new();
        let mut zeros_ok = true;
        for orbit in orbit_representatives(&odd, p)? {
            let rep = orbit[0].mul(&omega)?;
            let cert = stable_lp_product(p, &rep, n_max.min(1), prec, cache)?;
            let is_split_orbit = orbit[0].value_exponent(p) == Some(0);
            if is_split_orbit && !cert.exact_zero {
                zeros_ok = false;
            }
            let labels: Vec<String> = galois_orbit_p(&rep, p)?
                .iter()
                .map(|c| c.label())
                .collect();
            stable_products.push(NamedCertificate { orbit: labels, certificate: cert });
        }
        let holds = zeros_ok && h_cert.exact_zero;
        identities.push(IdentityCheck {
            name: "split_prime_vanishing".into(),
            holds,
            digits: 0,
            required: 0,
        });
        if !holds {
            return Err(Error::CheckFailed(
                "a split odd character must force exact zeros".into(),
            ));
        }
        return Ok(TowerLimits {
            tower: tower_name,
            p,
            levels: n_max,
            constants,
            u_values,
            h_minus_limit: h_cert,
            stable_products,
            residue_constant: None,
            even_product_limit: None,
            regulator_ratio: None,
            k2: None,
            identities,
        });
    }

    // Stable L-products: one per even orbit when the base holds mu_2p (the
    // odd side then folds into the residue constant via the omega-twist);
    // one per omega-twisted odd orbit otherwise.
    let mut stable_products = Vec::new();
    let mut product_values: Vec<PadicNumber> = Vec::new();
    let orbits = if mu2 {
        orbit_representatives(&even_nontrivial, p)?
    } else {
        orbit_representatives(&odd, p)?
    };
    for orbit in &orbits {
        let rep = if mu2 { orbit[0].clone() } else { orbit[0].mul(&omega)? };
        let labels: Vec<String> = galois_orbit_p(&rep, p)?.iter().map(|c| c.label()).collect();
        if labels.len() != orbit.len() {
            return Err(Error::Internal(
                "an omega-twist changed the size of a Frobenius orbit".into(),
            ));
        }
        let cert = stable_lp_product(p, &rep, n_max, prec, cache)?;
        product_values.push(cert.value.clone());
        stable_products.push(NamedCertificate { orbit: labels, certificate: cert });
    }

    let residue_constant = if mu2 {
        Some(residue_constant_limit(p, n_max.max(2), prec, cache)?)
    } else {
        None
    };

    // Assemble h from the constants and compare against the exact ladder.
    let e_inv = PadicNumber::from_rational(&(Rat::one() / euler.clone()), p, working);
    let mut acc = b.mul(&e_inv)?;
    for v in &product_values {
        acc = acc.mul(v)?;
    }
    let assembly = match &residue_constant {
        Some(c) => acc.mul(&c.value)?.neg(),
        None => acc,
    };
    identities.push(check_identity(
        "assembly_matches_ladder",
        &assembly,
        &h_cert.value,
        1,
    )?);

    // The full even-character product: residue constant times the stable
    // products; regrouping the assembly through it must reproduce h.
    let even_product_limit = if let Some(c) = &residue_constant {
        let mut r = c.value.clone();
        for v in &product_values {
            r = r.mul(v)?;
        }
        let cert = LimitCertificate::new(
            "scaled limit of the full even-character L-products",
            CertKind::Empirical,
            r,
            vec![format!(
                "product of the residue constant and {} stable L-products",
                product_values.len()
            )],
        );
        let rhs = b.mul(&cert.value)?.mul(&e_inv)?.neg();
        identities.push(check_identity(
            "even_product_regrouping",
            &h_cert.value,
            &rhs,
            1,
        )?);
        Some(cert)
    } else {
        None
    };

    // Over the p-th (resp. 4th) cyclotomic base field the assembly
    // specializes to a bare sign: h = -(2|p)·2·(even product), resp. the
    // negative of the even product.
    if let Some(ev) = &even_product_limit {
        let applies_odd = p != 2 && base.conductor() == p && degree == p - 1;
        let applies_two = p == 2 && base.conductor() == 4 && degree == 2;
        if applies_odd || applies_two {
            let rhs = if applies_two {
                ev.value.neg()
            } else {
                let sign: i64 = if p % 8 == 1 || p % 8 == 7 { 1 } else { -1 };
                ev.value
                    .mul(&PadicNumber::from_int(&BigInt::from(-2 * sign), p, working))?
            };
            identities.push(check_identity(
                "prime_cyclotomic_specialization",
                &h_cert.value,
                &rhs,
                1,
            )?);
        }
    }

    // K_2 orders of the real layers, scaled by 2^{(1-[k^+:Q]2^m)delta}.
    let k2 = if mu2 && n_max >= 2 {
        let real_degree = degree / 2;
        let mut orders = Vec::new();
        let mut seq: Vec<PadicNumber> = Vec::new();
        for m in 0..=n_max {
            let layer_real = tower.layer(m)?.maximal_real_subfield();
            let o = k2_order(&layer_real, cache)?;
            orders.push(o.to_string());
            seq.push(if p == 2 {
                let exp = 1 - (real_degree as i64) * (1i64 << m);
                let scaled = pow_rational(&Rat::from(BigInt::from(2)), exp)?
                    * Rat::from(BigInt::from(o));
                PadicNumber::from_rational(&scaled, 2, working)
            } else {
                PadicNumber::from_int(&BigInt::from(o), p, working)
            });
        }
        let n = seq.len() - 1;
        let d1 = agreement_depth(&seq[n - 1], &seq[n])?;
        let d2 = agreement_depth(&seq[n - 2], &seq[n])?;
        if d1.min(d2) < 1 {
            return Err(Error::CheckFailed(
                "the scaled K_2 orders do not stabilize".into(),
            ));
        }
        let stable = d1.min(n_max as i64 + 1);
        let cert = LimitCertificate::new(
            "p-adic limit of the scaled K_2 orders of the real layers",
            CertKind::Empirical,
            seq[n].truncate(stable as u32),
            vec![
                format!("orders: {}", orders.join(" ")),
                format!(
                    "stabilization over the last three levels: {d2} and {d1} digits"
                ),
            ],
        );
        let sign: i64 = if delta == 0 && real_degree % 2 == 1 { -1 } else { 1 };
        let coeff = Rat::from(BigInt::from(sign * v0.expect("mu_2p case") as i64)) * euler.clone()
            / (pow_rational(&Rat::from(BigInt::from(2)), 1 - delta as i64)?
                * Rat::from(BigInt::from(1 - p as i64)));
        let rhs = h_cert
            .value
            .mul(&PadicNumber::from_rational(&coeff, p, working))?
            .div(&b)?;
        identities.push(check_identity("k2_scaling_identity", &cert.value, &rhs, 1)?);
        Some(K2Limit { orders, certificate: cert })
    } else {
        None
    };

    // The scaled real regulator ratio, from a user-supplied limit of the
    // plus-part class numbers: 2·(even product)/(omega(2)^{[k:Q]/2} h+ Pi)
    // with Pi the product of (1 - 1/N(P)) over the primes P | p of the
    // real subfield.
    let regulator_ratio = if let Some(hp) = h_plus {
        let ev = even_product_limit.as_ref().ok_or_else(|| {
            Error::Usage(
                "the regulator-ratio limit is assembled from the full \
                 root-of-unity case (mu_2p in the base field)"
                    .into(),
            )
        })?;
        if !hp.is_positive() {
            return Err(Error::Usage(
                "the supplied plus-part class number limit must be positive".into(),
            ));
        }
        let pi = euler_factor_at(&base.maximal_real_subfield(), p)?.inverse_norm_factor(p);
        let scale = Rat::from(BigInt::from(2)) / (hp.clone() * pi.clone());
        let mut val = ev
            .value
            .mul(&PadicNumber::from_rational(&scale, p, working))?;
        if p != 2 {
            let t = teichmuller(&BigInt::from(2), p, working).pow_i64((degree / 2) as i64)?;
            val = val.div(&t)?;
        }
        Some(LimitCertificate::new(
            "limit of the scaled real regulator ratios",
            CertKind::Empirical,
            val,
            vec![
                format!("supplied limit of the plus-part class numbers: {hp}"),
                format!("local norm factor at {p} over the real subfield: {pi}"),
            ],
        ))
    } else {
        None
    };

    let failed: Vec<String> = identities
        .iter()
        .filter(|c| !c.holds)
        .map(|c| format!("{} ({} of {} digits)", c.name, c.digits, c.required))
        .collect();
    if !failed.is_empty() {
        return Err(Error::CheckFailed(format!(
            "identity checks failed: {}",
            failed.join(", ")
        )));
    }

    Ok(TowerLimits {
        tower: tower_name,
        p,
        levels: n_max,
        constants,
        u_values,
        h_minus_limit: h_cert,
        stable_products,
        residue_constant,
        even_product_limit,
        regulator_ratio,
        k2,
        identities,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characters::parse_tower;

    fn cache() -> BernoulliCache {
        BernoulliCache::new()
    }

    fn tw(s: &str, p: u64) -> TowerSpec {
        parse_tower(s, p).unwrap()
    }

    fn big(n: u64) -> BigUint {
        BigUint::from(n)
    }

    #[test]
    fn power_unit_ladders_are_exact() {
        // kappa = 4 at p = 3: (4 - 1)/3 = 1, (4^3 - 1)/9 = 7,
        // (4^9 - 1)/27 = 262143/27 = 9709, and 7 = 1 + 2*3, 9709 = 7 + 9*1078.
        assert_eq!(u_sequence(3, 2).unwrap(), vec![big(1), big(7), big(9709)]);
        // kappa = 5 at p = 2, denominators 4, 8, 16, 32:
        // 4/4, 24/8, 624/16, 390624/32.
        assert_eq!(
            u_sequence(2, 3).unwrap(),
            vec![big(1), big(3), big(39), big(12207)]
        );
        // kappa = 6 at p = 5: (6 - 1)/5 = 1, (6^5 - 1)/25 = 7775/25 = 311.
        assert_eq!(u_sequence(5, 1).unwrap(), vec![big(1), big(311)]);
    }

    #[test]
    fn stable_products_certify_quadratic_orbits() {
        // The even quadratic character of conductor 8 at p = 3.  Its orbit is
        // itself (values are rational), and the level-0 value is
        // -B_{1, chi_8 chi_{-3}} = -(1+5+7+11-13-17-19-23)/24 = 2.
        let chi8 = DirichletChar::kronecker(8).unwrap();
        let cert = stable_lp_product(3, &chi8, 2, 4, &cache()).unwrap();
        assert_eq!(cert.kind, CertKind::TheoreticalLadder);
        assert!(!cert.exact_zero);
        assert_eq!(cert.p_part, Some(0));
        assert_eq!(cert.certified_digits, Some(3));
        assert_eq!(cert.value.residue_mod(1).unwrap(), big(2));
        assert!(cert.evidence.iter().any(|e| e.contains("exact product = 2,")));

        // The even quadratic character of conductor 12 at p = 5: again a
        // one-element orbit; the ladder certifies n_max + 1 digits.
        let chi12 = DirichletChar::kronecker(12).unwrap();
        let cert = stable_lp_product(5, &chi12, 2, 4, &cache()).unwrap();
        assert_eq!(cert.kind, CertKind::TheoreticalLadder);
        assert!(cert.value.is_unit());
        assert_eq!(cert.certified_digits, Some(3));

        // Guards: odd characters and overly wild conductors are refused.
        let odd = DirichletChar::kronecker(-4).unwrap();
        assert!(matches!(
            stable_lp_product(3, &odd, 1, 4, &cache()),
            Err(Error::Usage(_))
        ));
        let wild = DirichletChar::kronecker(8).unwrap();
        assert!(matches!(
            stable_lp_product(2, &wild, 1, 4, &cache()),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn split_characters_collapse_to_an_exact_zero() {
        // chi_{-11}(3) = 1, so the twist chi_{-11} omega has a vanishing
        // L-value at level 0 and the whole ladder is exactly zero.
        let chi = DirichletChar::kronecker(-11)
            .unwrap()
            .mul(&DirichletChar::teichmuller_char(3).unwrap())
            .unwrap();
        let cert = stable_lp_product(3, &chi, 2, 4, &cache()).unwrap();
        assert!(cert.exact_zero);
        assert_eq!(cert.kind, CertKind::TheoreticalLadder);
        assert_eq!(cert.certified_digits, None);
        assert!(cert
            .evidence
            .iter()
            .any(|e| e.contains("vanishes identically")));
    }

    #[test]
    fn residue_constants_are_units_with_ratio_two() {
        // p = 3: the scaled products at s = 0 run 1, 4, 13 mod 27, ...
        // (level 0: 3 * L_3(0, 1) = 3 * 1/3 = 1; level 1: 9 * 4/9 = 4),
        // converging to -c_3 = -1/2, i.e. c_3 = 1/2 = 14 mod 27.
        let c3 = residue_constant_limit(3, 3, 4, &cache()).unwrap();
        assert_eq!(c3.kind, CertKind::Empirical);
        assert!(c3.value.is_unit());
        assert!(c3.certified_digits.unwrap() >= 3);
        assert_eq!(c3.value.residue_mod(3).unwrap(), big(14));

        // p = 2: levels 0 and 1 both give exactly 1, and the limit is
        // -c_2 = 1 mod 16, i.e. c_2 = 15 mod 16.
        let c2 = residue_constant_limit(2, 4, 4, &cache()).unwrap();
        assert!(c2.value.is_unit());
        assert!(c2.certified_digits.unwrap() >= 4);
        assert_eq!(c2.value.residue_mod(4).unwrap(), big(15));

        // p = 5: the unit and ratio checks run on the same pipeline.
        let c5 = residue_constant_limit(5, 2, 3, &cache()).unwrap();
        assert!(c5.value.is_unit());
        assert!(c5.certified_digits.unwrap() >= 2);

        assert!(matches!(
            residue_constant_limit(3, 1, 4, &cache()),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn class_number_ladders_certify_known_towers() {
        // Over Q(mu_4) at p = 2 the layers are the 2-power cyclotomic
        // fields: h = 1 up to conductor 32 and h(conductor 64) = 17.
        let cert = hminus_limit(&tw("Qzeta:4", 2), &UnitIndexPolicy::Auto, 4, &cache()).unwrap();
        assert_eq!(cert.kind, CertKind::TheoreticalLadder);
        assert_eq!(cert.p_part, Some(0));
        assert_eq!(cert.certified_digits, Some(4));
        assert_eq!(cert.value.residue_mod(4).unwrap(), big(1)); // 17 mod 16
        assert!(cert.evidence.iter().any(|e| e == "h_4 = 17 = 2^0 * 17"));

        // Over Q(mu_3) at p = 3 every computed layer has h = 1.
        let cert = hminus_limit(&tw("Qzeta:3", 3), &UnitIndexPolicy::Auto, 3, &cache()).unwrap();
        assert_eq!(cert.value.residue_mod(3).unwrap(), big(1));

        // A split prime: chi_{-11}(3) = 1 collapses the limit exactly.
        let cert = hminus_limit(&tw("quad:-11", 3), &UnitIndexPolicy::Auto, 2, &cache()).unwrap();
        assert!(cert.exact_zero);
        assert_eq!(cert.certified_digits, None);
    }

    #[test]
    fn k2_orders_match_classical_anchors() {
        // Q: 24 * 1/12 = 2.
        assert_eq!(k2_order(&AbelianFieldSpec::rationals(), &cache()).unwrap(), big(2));
        // Q(sqrt 2): w_2 = 48, zeta(-1) = 1/12, order 4.
        assert_eq!(
            k2_order(&AbelianFieldSpec::quadratic(8).unwrap(), &cache()).unwrap(),
            big(4)
        );
        // Q(sqrt 3): w_2 = 24, zeta(-1) = (-1/12)(-2) = 1/6, order 4.
        assert_eq!(
            k2_order(&AbelianFieldSpec::quadratic(12).unwrap(), &cache()).unwrap(),
            big(4)
        );
        // Q(sqrt 5): w_2 = 120, zeta(-1) = (-1/12)(-2/5) = 1/30, order 4.
        assert_eq!(
            k2_order(&AbelianFieldSpec::quadratic(5).unwrap(), &cache()).unwrap(),
            big(4)
        );
        // The real cubic field of conductor 9: w_2 = 72, |zeta(-1)| = 1/9.
        assert_eq!(
            k2_order(&AbelianFieldSpec::cyclotomic_real(9).unwrap(), &cache()).unwrap(),
            big(8)
        );
        assert!(matches!(
            k2_order(&AbelianFieldSpec::cyclotomic(4).unwrap(), &cache()),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn the_three_tower_identity_web_closes() {
        let out = tower_limits(
            &tw("Qzeta:3", 3),
            &UnitIndexPolicy::Auto,
            3,
            5,
            Some(&Rat::one()),
            &cache(),
        )
        .unwrap();
        // w_0 = 6, Q = 1, a = 6/3 = 2, b = omega(2)^{-1} * 2 = -2,
        // v_0 = w_2(Q)/3 = 24/3 = 8.
        assert_eq!(out.constants.a, 2);
        assert_eq!(out.constants.v0, Some(8));
        assert_eq!(out.constants.euler_product, "1");
        let minus_two = PadicNumber::from_int(&BigInt::from(-2), 3, 4);
        assert!(out.constants.b.congruent_mod(&minus_two, 4).unwrap());
        // (4^27 - 1)/81 for the last entry.
        assert_eq!(out.u_values, ["1", "7", "9709", "222399981598543"]);
        // h = 1 on every computed level; c_3 = 1/2; the even product is the
        // bare residue constant, and h = 2 * (even product).
        assert_eq!(out.h_minus_limit.value.residue_mod(3).unwrap(), big(1));
        let c = out.residue_constant.as_ref().unwrap();
        assert_eq!(c.value.residue_mod(3).unwrap(), big(14));
        assert!(out.stable_products.is_empty());
        // K_2 orders of Q, Q(mu_9)^+, ... converge to -h = -1: 2 and 8 are
        // the classical first two, and 8 = -1 mod 9.
        let k2 = out.k2.as_ref().unwrap();
        assert_eq!(&k2.orders[..2], ["2", "8"]);
        let digits = k2.certificate.certified_digits.unwrap();
        assert!(digits >= 2);
        let minus_one = PadicNumber::from_int(&BigInt::from(-1), 3, digits);
        assert!(k2
            .certificate
            .value
            .congruent_mod(&minus_one, digits as i64)
            .unwrap());
        // Regulator ratio with h+ = 1: 2 rho / (omega(2) * (1 - 1/3))
        // = 2 * (-1/2) / (-2/3) = 3/2... with the sign of omega(2) = -1:
        // 2 * (-c_3) ... the assembled value is -3 * c_3 = -3/2.
        let reg = out.regulator_ratio.as_ref().unwrap();
        let expect = PadicNumber::from_rational(
            &Rat::new(BigInt::from(-3), BigInt::from(2)),
            3,
            reg.value.precision(),
        );
        assert!(reg
            .value
            .congruent_mod(&expect, reg.value.absolute_precision().unwrap())
            .unwrap());
        let names: Vec<&str> = out.identities.iter().map(|c| c.name.as_str()).collect();
        for expected in [
            "teichmuller_stabilization",
            "assembly_matches_ladder",
            "even_product_regrouping",
            "prime_cyclotomic_specialization",
            "k2_scaling_identity",
        ] {
            assert!(names.contains(&expected), "missing {expected}");
        }
        assert!(out.identities.iter().all(|c| c.holds));
    }

    #[test]
    fn the_two_tower_identity_web_closes() {
        let out = tower_limits(
            &tw("Qzeta:4", 2),
            &UnitIndexPolicy::Auto,
            4,
            5,
            None,
            &cache(),
        )
        .unwrap();
        // w_0 = 4, Q = 1, a = 4/4 = 1, b = 1, v_0 = w_2(Q)/4 = 6.
        assert_eq!(out.constants.a, 1);
        assert_eq!(out.constants.v0, Some(6));
        assert_eq!(out.h_minus_limit.value.residue_mod(4).unwrap(), big(1));
        let c = out.residue_constant.as_ref().unwrap();
        assert_eq!(c.value.residue_mod(4).unwrap(), big(15));
        // K_2 orders of Q, Q(sqrt 2), ...: 2 and 4; the scaled sequence
        // 2^{1-2^m} #K_2 starts 2, 2.
        let k2 = out.k2.as_ref().unwrap();
        assert_eq!(&k2.orders[..2], ["2", "4"]);
        // The scaled orders converge to -6h: v_0 = 6 and a sign of +1 make
        // the identity constant 6/(1*1*(1-2)) = -6.
        let digits = k2.certificate.certified_digits.unwrap();
        let minus_six_h = out
            .h_minus_limit
            .value
            .mul(&PadicNumber::from_int(&BigInt::from(-6), 2, 8))
            .unwrap();
        assert!(k2
            .certificate
            .value
            .congruent_mod(&minus_six_h.truncate(digits), digits as i64)
            .unwrap());
        assert!(out.identities.iter().all(|c| c.holds));
    }

    #[test]
    fn the_four_tower_at_three_uses_the_twisted_odd_orbit() {
        // mu_6 is not inside Q(mu_4), so the assembly runs through the
        // omega-twisted odd orbit: here chi_{-4} omega = chi_12, and
        // h = omega(2)^{-1} * 4 * (1 - chi_{-4}(3))^{-1} * L-product
        //   = -2 * L-product.  The layers are the degree 2, 6, 18, 54
        // subfields of conductor 4, 36, 108, 324 with h^- = 1, 1, 19,
        // 2225510983 (the exact route), so the two routes must meet at
        // h = 19 mod 27 and the L-product at -19/2 = 4 mod 27.
        let out = tower_limits(
            &tw("Qzeta:4", 3),
            &UnitIndexPolicy::Auto,
            3,
            4,
            None,
            &cache(),
        )
        .unwrap();
        assert!(!out.constants.mu_2p_in_base);
        assert_eq!(out.constants.a, 4);
        assert_eq!(out.constants.euler_product, "2");
        assert!(out.residue_constant.is_none());
        assert!(out.k2.is_none());
        assert!(out
            .h_minus_limit
            .evidence
            .iter()
            .any(|e| e == "h_2 = 19 = 3^0 * 19"));
        assert!(out
            .h_minus_limit
            .evidence
            .iter()
            .any(|e| e == "h_3 = 2225510983 = 3^0 * 2225510983"));
        assert_eq!(out.stable_products.len(), 1);
        let cert = &out.stable_products[0].certificate;
        assert_eq!(cert.value.residue_mod(3).unwrap(), big(4));
        assert!(out.identities.iter().all(|c| c.holds));
    }

    #[test]
    fn inert_quadratic_towers_assemble_case_one() {
        // chi_{-11}(7) = -1: an inert prime, mu_14 not in the base; the web
        // closes through a single omega-twisted orbit over p = 7.
        let out = tower_limits(
            &tw("quad:-11", 7),
            &UnitIndexPolicy::Auto,
            2,
            4,
            None,
            &cache(),
        )
        .unwrap();
        assert!(!out.constants.mu_2p_in_base);
        assert_eq!(out.constants.a, 2); // w_0 = 2, Q = 1
        assert!(out.residue_constant.is_none());
        assert_eq!(out.stable_products.len(), 1);
        assert_eq!(out.h_minus_limit.certified_digits, Some(2));
        assert!(out.identities.iter().all(|c| c.holds));
    }

    #[test]
    fn five_tower_covers_a_nontrivial_even_orbit() {
        let out = tower_limits(
            &tw("Qzeta:5", 5),
            &UnitIndexPolicy::Auto,
            2,
            4,
            None,
            &cache(),
        )
        .unwrap();
        // w_0 = 10, Q = 1, a = 10/5 = 2; the real subfield is Q(sqrt 5)
        // with w_2 = 120, so v_0 = 24, and #K_2 of its integers is 4.
        assert_eq!(out.constants.a, 2);
        assert_eq!(out.constants.v0, Some(24));
        assert_eq!(out.stable_products.len(), 1);
        let k2 = out.k2.as_ref().unwrap();
        assert_eq!(k2.orders[0], "4");
        assert!(out.identities.iter().all(|c| c.holds));
    }

    #[test]
    fn split_primes_collapse_the_whole_web_to_zero() {
        let out = tower_limits(
            &tw("quad:-11", 3),
            &UnitIndexPolicy::Auto,
            2,
            4,
            None,
            &cache(),
        )
        .unwrap();
        assert!(out.h_minus_limit.exact_zero);
        assert_eq!(out.h_minus_limit.certified_digits, None);
        assert!(out
            .stable_products
            .iter()
            .any(|c| c.certificate.exact_zero));
        assert!(out.residue_constant.is_none());
        assert!(out.k2.is_none());
        let sp = out
            .identities
            .iter()
            .find(|c| c.name == "split_prime_vanishing")
            .unwrap();
        assert!(sp.holds);
    }

    #[test]
    fn certificates_serialize_with_stable_shape() {
        let cert = LimitCertificate::new(
            "test",
            CertKind::TheoreticalLadder,
            PadicNumber::from_int(&BigInt::from(17), 2, 4),
            vec!["e".into()],
        );
        let json = serde_json::to_string(&cert).unwrap();
        assert!(json.contains("\"kind\":\"theoretical_ladder\""));
        assert!(json.contains("\"certified_digits\":4"));
        assert!(json.contains("\"unit\":\"1\"")); // 17 mod 16
        let out = tower_limits(
            &tw("quad:-11", 3),
            &UnitIndexPolicy::Auto,
            1,
            3,
            None,
            &cache(),
        )
        .unwrap();
        let a = serde_json::to_string(&out).unwrap();
        let b = serde_json::to_string(&out).unwrap();
        assert_eq!(a, b);
        assert!(a.find("\"tower\"").unwrap() < a.find("\"constants\"").unwrap());
    }
}
