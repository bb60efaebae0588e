//! Fixed-point counting congruences for modules over finite p-groups.
//!
//! For a finite p-group G let N_n be the intersection of all subgroups of
//! index at most p^n (an open normal subgroup; N_0 = G).  For a finite
//! F_l[G]-module A with l != p and any normal subgroup H of G contained
//! in N_n,
//!
//! ```text
//!   #A = #A^H  (mod p^n),
//! ```
//!
//! and consequently any two normal subgroups H, H' inside N_n satisfy
//! #A^H = #A^{H'} mod p^n — the ladder that makes #A^{H_i} a p-adic
//! Cauchy sequence along any descending chain with trivial intersection.
//! This module verifies those congruences empirically: groups are given
//! by multiplication tables (checked against the axioms at load), modules
//! by invertible matrices over F_l per generator (checked against the
//! table by walking the Cayley graph), and #A^H is computed as l to the
//! dimension of the common kernel of rho(h) - 1.  Permutation modules
//! carry an independent combinatorial oracle: the fixed-point dimension
//! must equal the number of H-orbits on the coset space.
//!
//! Verification is counting, not decomposition: irreducible constituents
//! are never computed, and the representation-theoretic input enters only
//! through the counting consequence l^dim = 1 mod p^n.

use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest group order the enumeration accepts.
const MAX_ORDER: usize = 256;

/// A subset of group elements as a 256-bit set.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct ElemSet {
    words: [u64; 4],
}

impl ElemSet {
    pub fn empty() -> Self {
        ElemSet { words: [0; 4] }
    }

    pub fn insert(&mut self, i: u32) {
        self.words[(i / 64) as usize] |= 1 << (i % 64);
    }

    pub fn contains(&self, i: u32) -> bool {
        self.words[(i / 64) as usize] >> (i % 64) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn intersect(&self, other: &Self) -> Self {
        let mut words = [0u64; 4];
        for (i, w) in words.iter_mut().enumerate() {
            *w = self.words[i] & other.words[i];
        }
        ElemSet { words }
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        (0..256u32).filter(|&i| self.contains(i))
    }

    pub fn elements(&self) -> Vec<u32> {
        self.iter().collect()
    }

    pub fn from_elements(elems: &[u32]) -> Self {
        let mut s = ElemSet::empty();
        for &e in elems {
            s.insert(e);
        }
        s
    }
}

/// A finite p-group presented by its full multiplication table.
#[derive(Clone, Debug)]
pub struct FiniteGroup {
    name: String,
    p: u64,
    order: usize,
    table: Vec<u32>,
    identity: u32,
    generators: Vec<u32>,
}

impl FiniteGroup {
    /// Wraps and fully checks a multiplication table: closure, identity,
    /// inverses, associativity, p-power order, and that the designated
    /// generators generate.
    pub fn from_table(
        name: &str,
        p: u64,
        table: Vec<Vec<u32>>,
        generators: Vec<u32>,
    ) -> Result<Self> {
        crate::characters::check_prime(p)?;
        let n = table.len();
        if n == 0 || n > MAX_ORDER {
            return Err(Error::Resource(format!(
                "group order {n} is outside the supported range 1..={MAX_ORDER}"
            )));
        }
        let mut m = n;
        while m.is_multiple_of(p as usize) {
            m /= p as usize;
        }
        if m != 1 {
            return Err(Error::Usage(format!(
                "group order {n} is not a power of the session prime {p}"
            )));
        }
        let mut flat = Vec::with_capacity(n * n);
        for row in &table {
            if row.len() != n {
                return Err(Error::Usage("multiplication table is not square".into()));
            }
            for &x in row {
                if x as usize >= n {
                    return Err(Error::Usage(format!(
                        "table entry {x} is outside 0..{n}"
                    )));
                }
                flat.push(x);
            }
        }
        // identity: the unique e with e*x = x*e = x for all x
        let identity = (0..n as u32)
            .find(|&e| {
                (0..n as u32).all(|x| {
                    flat[(e as usize) * n + x as usize] == x
                        && flat[(x as usize) * n + e as usize] == x
                })
            })
            .ok_or_else(|| Error::Usage("the table has no identity element".into()))?;
        for a in 0..n as u32 {
            if !(0..n as u32).any(|b| flat[(a as usize) * n + b as usize] == identity) {
                return Err(Error::Usage(format!("element {a} has no inverse")));
            }
        }
        for a in 0..n {
            for b in 0..n {
                let ab = flat[a * n + b] as usize;
                for c in 0..n {
                    let bc = flat[b * n + c] as usize;
                    if flat[ab * n + c] != flat[a * n + bc] {
                        return Err(Error::Usage(format!(
                            "associativity fails at ({a}, {b}, {c})"
                        )));
                    }
                }
            }
        }
        let g = FiniteGroup {
            name: name.to_string(),
            p,
            order: n,
            table: flat,
            identity,
            generators: generators.clone(),
        };
        for &s in &generators {
            if s as usize >= n {
                return Err(Error::Usage(format!("generator {s} is out of range")));
            }
        }
        if g.subgroup_generated(&generators).len() != n {
            return Err(Error::Usage(
                "the designated generators do not generate the group".into(),
            ));
        }
        Ok(g)
    }

    /// Builds the group generated by permutations of 0..degree, elements
    /// ordered by first discovery from the identity.
    pub fn from_permutations(
        name: &str,
        p: u64,
        degree: usize,
        gens: &[Vec<u32>],
    ) -> Result<Self> {
        if gens.is_empty() {
            return Err(Error::Usage("at least one permutation generator is needed".into()));
        }
        for g in gens {
            let mut seen = vec![false; degree];
            if g.len() != degree {
                return Err(Error::Usage("permutation length differs from the degree".into()));
            }
            for &x in g {
                if x as usize >= degree || seen[x as usize] {
                    return Err(Error::Usage("not a permutation".into()));
                }
                seen[x as usize] = true;
            }
        }
        let id: Vec<u32> = (0..degree as u32).collect();
        let mut elems: Vec<Vec<u32>> = vec![id.clone()];
        let mut index: std::collections::HashMap<Vec<u32>, u32> = Default::default();
        index.insert(id, 0);
        let mut queue = VecDeque::from([0usize]);
        while let Some(i) = queue.pop_front() {
            for gperm in gens {
                let composed: Vec<u32> =
                    (0..degree).map(|x| gperm[elems[i][x] as usize]).collect();
                if !index.contains_key(&composed) {
                    if elems.len() >= MAX_ORDER {
                        return Err(Error::Resource(format!(
                            "permutation group exceeds {MAX_ORDER} elements"
                        )));
                    }
                    index.insert(composed.clone(), elems.len() as u32);
                    queue.push_back(elems.len());
                    elems.push(composed);
                }
            }
        }
        let n = elems.len();
        let mut table = vec![vec![0u32; n]; n];
        for a in 0..n {
            for b in 0..n {
                let prod: Vec<u32> = (0..degree).map(|x| elems[a][elems[b][x] as usize]).collect();
                table[a][b] = *index
                    .get(&prod)
                    .ok_or_else(|| Error::Internal("permutation closure missed a product".into()))?;
            }
        }
        let generators: Vec<u32> = gens.iter().map(|g| index[g]).collect();
        Self::from_table(name, p, table, generators)
    }

    /// Z/p^a.
    pub fn cyclic(p: u64, a: u32) -> Result<Self> {
        let n = (p as usize).pow(a);
        if n > MAX_ORDER {
            return Err(Error::Resource(format!("cyclic order {n} exceeds {MAX_ORDER}")));
        }
        let table = (0..n)
            .map(|i| (0..n).map(|j| ((i + j) % n) as u32).collect())
            .collect();
        Self::from_table(&format!("Z{n}"), p, table, vec![1 % n as u32])
    }

    /// (Z/p)^rank.
    pub fn elementary_abelian(p: u64, rank: u32) -> Result<Self> {
        let mut g = Self::cyclic(p, 1)?;
        for _ in 1..rank {
            g = Self::direct_product(&g, &Self::cyclic(p, 1)?)?;
        }
        g.name = format!("E{}", (p as usize).pow(rank));
        Ok(g)
    }

    /// A x B, elements indexed a * |B| + b.
    pub fn direct_product(a: &Self, b: &Self) -> Result<Self> {
        if a.p != b.p {
            return Err(Error::Usage("direct factors have different primes".into()));
        }
        let n = a.order * b.order;
        if n > MAX_ORDER {
            return Err(Error::Resource(format!("product order {n} exceeds {MAX_ORDER}")));
        }
        let idx = |x: u32, y: u32| x * b.order as u32 + y;
        let table = (0..n)
            .map(|i| {
                let (x1, y1) = ((i / b.order) as u32, (i % b.order) as u32);
                (0..n)
                    .map(|j| {
                        let (x2, y2) = ((j / b.order) as u32, (j % b.order) as u32);
                        idx(a.mul(x1, x2), b.mul(y1, y2))
                    })
                    .collect()
            })
            .collect();
        let mut generators: Vec<u32> = a.generators.iter().map(|&x| idx(x, b.identity)).collect();
        generators.extend(b.generators.iter().map(|&y| idx(a.identity, y)));
        Self::from_table(&format!("{}x{}", a.name, b.name), a.p, table, generators)
    }

    /// The dihedral group of order 8: r^i s^j with r^4 = s^2 = 1,
    /// s r s = r^-1; index i + 4j.
    pub fn dihedral8() -> Result<Self> {
        let idx = |i: u32, j: u32| i + 4 * j;
        let table = (0..8)
            .map(|x| {
                let (i1, j1) = (x % 4, x / 4);
                (0..8u32)
                    .map(|y| {
                        let (i2, j2) = (y % 4, y / 4);
                        // r^i1 s^j1 r^i2 s^j2 = r^(i1 + (-1)^j1 i2) s^(j1+j2)
                        let i = if j1 == 0 { (i1 + i2) % 4 } else { (i1 + 4 - i2) % 4 };
                        idx(i, (j1 + j2) % 2)
                    })
                    .collect()
            })
            .collect();
        Self::from_table("D4", 2, table, vec![idx(1, 0), idx(0, 1)])
    }

    /// The quaternion group of order 8: a^m b^t with a^4 = 1, b^2 = a^2,
    /// b a b^-1 = a^-1; index m + 4t.
    pub fn quaternion8() -> Result<Self> {
        let idx = |m: u32, t: u32| m + 4 * t;
        let table = (0..8)
            .map(|x| {
                let (m1, t1) = (x % 4, x / 4);
                (0..8u32)
                    .map(|y| {
                        let (m2, t2) = (y % 4, y / 4);
                        // a^m1 b^t1 a^m2 b^t2: move b^t1 past a^m2, then
                        // fold b^2 = a^2 when both twists are present.
                        let m = if t1 == 0 { m1 + m2 } else { m1 + 4 - m2 };
                        let extra = if t1 == 1 && t2 == 1 { 2 } else { 0 };
                        idx((m + extra) % 4, (t1 + t2) % 2)
                    })
                    .collect()
            })
            .collect();
        Self::from_table("Q8", 2, table, vec![idx(1, 0), idx(0, 1)])
    }

    /// The Heisenberg group mod 3: triples (a, b, c) over F_3 with
    /// (a,b,c)(a',b',c') = (a+a', b+b', c+c'+ab'); index 9a + 3b + c.
    pub fn heisenberg27() -> Result<Self> {
        let idx = |a: u32, b: u32, c: u32| 9 * a + 3 * b + c;
        let table = (0..27)
            .map(|x| {
                let (a1, b1, c1) = (x / 9, x / 3 % 3, x % 3);
                (0..27u32)
                    .map(|y| {
                        let (a2, b2, c2) = (y / 9, y / 3 % 3, y % 3);
                        idx((a1 + a2) % 3, (b1 + b2) % 3, (c1 + c2 + a1 * b2) % 3)
                    })
                    .collect()
            })
            .collect();
        Self::from_table("H27", 3, table, vec![idx(1, 0, 0), idx(0, 1, 0)])
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn identity(&self) -> u32 {
        self.identity
    }

    pub fn generators(&self) -> &[u32] {
        &self.generators
    }

    pub fn mul(&self, a: u32, b: u32) -> u32 {
        self.table[a as usize * self.order + b as usize]
    }

    pub fn inv(&self, a: u32) -> u32 {
        (0..self.order as u32)
            .find(|&b| self.mul(a, b) == self.identity)
            .expect("checked at construction")
    }

    /// The subgroup generated by the given elements.
    pub fn subgroup_generated(&self, gens: &[u32]) -> ElemSet {
        let mut set = ElemSet::empty();
        set.insert(self.identity);
        let mut frontier = vec![self.identity];
        while let Some(a) = frontier.pop() {
            for &s in gens {
                for prod in [self.mul(a, s), self.mul(s, a)] {
                    if !set.contains(prod) {
                        set.insert(prod);
                        frontier.push(prod);
                    }
                }
            }
        }
        set
    }

    /// A small generating set for a subgroup given by its elements.
    fn subgroup_generators(&self, h: &ElemSet) -> Vec<u32> {
        let mut gens = Vec::new();
        let mut span = ElemSet::empty();
        span.insert(self.identity);
        for e in h.iter() {
            if !span.contains(e) {
                gens.push(e);
                span = self.subgroup_generated(&gens);
            }
        }
        gens
    }

    /// Whether conjugation by every generator preserves the set.
    fn is_normal(&self, h: &ElemSet) -> bool {
        self.generators.iter().all(|&g| {
            let gi = self.inv(g);
            h.iter().all(|x| h.contains(self.mul(self.mul(g, x), gi)))
        })
    }

    /// Whether the set is closed under the group operation (with identity
    /// and inverses, which closure of a finite subset implies).
    fn is_subgroup(&self, h: &ElemSet) -> bool {
        h.contains(self.identity)
            && h.iter().all(|a| h.iter().all(|b| h.contains(self.mul(a, b))))
    }
}

/// One subgroup in a lattice: its elements, index, and normality.
#[derive(Clone, Debug, Serialize)]
pub struct SubgroupInfo {
    pub elements: Vec<u32>,
    pub index: usize,
    pub normal: bool,
    #[serde(skip)]
    pub set: ElemSet,
}

/// All subgroups of index at most a bound.
#[derive(Clone, Debug, Serialize)]
pub struct SubgroupLattice {
    pub bound: usize,
    pub subgroups: Vec<SubgroupInfo>,
}

/// Enumerates every subgroup by breadth-first closure over generated
/// subsets, then keeps those of index <= bound.  The search itself must
/// visit small subgroups regardless of the bound, since large ones are
/// reached by adjoining generators one at a time.
pub fn subgroups_up_to_index(group: &FiniteGroup, bound: usize) -> Result<SubgroupLattice> {
    let trivial = group.subgroup_generated(&[]);
    let mut seen: HashSet<ElemSet> = HashSet::from([trivial]);
    let mut queue = VecDeque::from([trivial]);
    while let Some(s) = queue.pop_front() {
        for g in 0..group.order() as u32 {
            if s.contains(g) {
                continue;
            }
            let mut gens = group.subgroup_generators(&s);
            gens.push(g);
            let t = group.subgroup_generated(&gens);
            if seen.insert(t) {
                if seen.len() > 20_000 {
                    return Err(Error::Resource(
                        "subgroup enumeration exceeded 20000 subgroups".into(),
                    ));
                }
                queue.push_back(t);
            }
        }
    }
    let mut subgroups: Vec<SubgroupInfo> = seen
        .into_iter()
        .filter(|s| group.order() / s.len() <= bound)
        .map(|set| SubgroupInfo {
            elements: set.elements(),
            index: group.order() / set.len(),
            normal: group.is_normal(&set),
            set,
        })
        .collect();
    subgroups.sort_by_key(|s| (s.index, s.set));
    Ok(SubgroupLattice { bound, subgroups })
}

/// N_n: the intersection of all subgroups of index <= p^n, asserted
/// normal.  The lattice must cover that index range.
pub fn compute_nn(group: &FiniteGroup, lattice: &SubgroupLattice, n: u32) -> Result<ElemSet> {
    let bound = (0..n).try_fold(1usize, |acc, _| {
        let next = acc.saturating_mul(group.prime() as usize);
        (next <= MAX_ORDER).then_some(next)
    });
    // Past p^n >= |G| every subgroup qualifies, so the intersection has
    // stabilized and any full lattice suffices.
    let bound = bound.unwrap_or(group.order()).min(group.order());
    if lattice.bound < bound {
        return Err(Error::Usage(format!(
            "the lattice covers index {} but N_{n} needs index {bound}",
            lattice.bound
        )));
    }
    let mut acc = ElemSet::from_elements(&(0..group.order() as u32).collect::<Vec<_>>());
    for s in &lattice.subgroups {
        if s.index <= bound {
            acc = acc.intersect(&s.set);
        }
    }
    if !group.is_subgroup(&acc) || !group.is_normal(&acc) {
        return Err(Error::Internal(
            "the intersection of low-index subgroups failed its normality check".into(),
        ));
    }
    Ok(acc)
}

// ---- matrices over F_l ----

type Mat = Vec<Vec<u64>>;

fn mat_identity(dim: usize) -> Mat {
    (0..dim).map(|i| (0..dim).map(|j| u64::from(i == j)).collect()).collect()
}

fn mat_mul(a: &Mat, b: &Mat, l: u64) -> Mat {
    let dim = a.len();
    let mut out = vec![vec![0u64; dim]; dim];
    for i in 0..dim {
        for k in 0..dim {
            let aik = a[i][k];
            if aik == 0 {
                continue;
            }
            for j in 0..dim {
                out[i][j] = (out[i][j] + aik * b[k][j]) % l;
            }
        }
    }
    out
}

/// Row rank over F_l by Gaussian elimination.
fn mat_rank(mut rows: Vec<Vec<u64>>, l: u64) -> usize {
    let cols = rows.first().map_or(0, Vec::len);
    let mut rank = 0;
    for col in 0..cols {
        let Some(pivot) = (rank..rows.len()).find(|&r| !rows[r][col].is_multiple_of(l)) else {
            continue;
        };
        rows.swap(rank, pivot);
        let inv = fl_inv(rows[rank][col] % l, l);
        for x in rows[rank].iter_mut().skip(col) {
            *x = *x % l * inv % l;
        }
        let pivot_row = rows[rank].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && !row[col].is_multiple_of(l) {
                let f = row[col] % l;
                for (x, pv) in row.iter_mut().zip(&pivot_row).skip(col) {
                    *x = (*x + (l - f) * pv) % l;
                }
            }
        }
        rank += 1;
    }
    rank
}

fn fl_inv(x: u64, l: u64) -> u64 {
    // x^(l-2) mod l
    let mut acc = 1u64;
    let mut base = x % l;
    let mut e = l - 2;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base % l;
        }
        base = base * base % l;
        e >>= 1;
    }
    acc
}

/// A finite F_l[G]-module: an invertible matrix per group element,
/// reconstructed from generator matrices and verified against the
/// multiplication table.
#[derive(Clone, Debug)]
pub struct ModRep {
    label: String,
    l: u64,
    dim: usize,
    elem_mats: Vec<Mat>,
}

impl ModRep {
    /// Builds the per-element matrices by walking the Cayley graph from
    /// the identity; every edge watched twice verifies the relations.
    pub fn new(
        label: &str,
        group: &FiniteGroup,
        l: u64,
        generator_mats: Vec<Mat>,
    ) -> Result<Self> {
        crate::characters::check_prime(l)?;
        if l == group.prime() {
            return Err(Error::Usage(
                "the module characteristic must differ from the group prime".into(),
            ));
        }
        if generator_mats.len() != group.generators().len() {
            return Err(Error::Usage(
                "one matrix per designated generator is required".into(),
            ));
        }
        let dim = generator_mats.first().map_or(0, Vec::len);
        if dim == 0 || dim > 128 {
            return Err(Error::Resource(format!(
                "module dimension {dim} is outside 1..=128"
            )));
        }
        for m in &generator_mats {
            if m.len() != dim || m.iter().any(|row| row.len() != dim) {
                return Err(Error::Usage("generator matrices have mixed shapes".into()));
            }
            if mat_rank(m.clone(), l) != dim {
                return Err(Error::Usage("a generator matrix is singular".into()));
            }
        }
        let n = group.order();
        let mut elem_mats: Vec<Option<Mat>> = vec![None; n];
        elem_mats[group.identity() as usize] = Some(mat_identity(dim));
        let mut queue = VecDeque::from([group.identity()]);
        while let Some(g) = queue.pop_front() {
            let mg = elem_mats[g as usize].clone().expect("queued after assignment");
            for (s, ms) in group.generators().iter().zip(&generator_mats) {
                let t = group.mul(g, *s);
                let mt = mat_mul(&mg, ms, l);
                match &elem_mats[t as usize] {
                    None => {
                        elem_mats[t as usize] = Some(mt);
                        queue.push_back(t);
                    }
                    Some(existing) => {
                        if *existing != mt {
                            return Err(Error::Usage(
                                "the matrices do not satisfy the group's relations".into(),
                            ));
                        }
                    }
                }
            }
        }
        let elem_mats: Vec<Mat> = elem_mats
            .into_iter()
            .collect::<Option<_>>()
            .ok_or_else(|| Error::Internal("the Cayley walk missed an element".into()))?;
        Ok(ModRep { label: label.to_string(), l, dim, elem_mats })
    }

    /// The permutation module F_l[G/U].
    pub fn permutation(group: &FiniteGroup, l: u64, u: &ElemSet) -> Result<Self> {
        if !group.is_subgroup(u) {
            return Err(Error::Usage("the coset base is not a subgroup".into()));
        }
        let cosets = coset_table(group, u);
        let dim = cosets.count;
        let mats = group
            .generators()
            .iter()
            .map(|&s| {
                let mut m = vec![vec![0u64; dim]; dim];
                for (i, &rep) in cosets.reps.iter().enumerate() {
                    let target = cosets.coset_of[group.mul(s, rep) as usize];
                    m[target][i] = 1;
                }
                m
            })
            .collect();
        Self::new(
            &format!("perm[{}/{}]", group.name(), u.len()),
            group,
            l,
            mats,
        )
    }

    /// The regular module F_l[G].
    pub fn regular(group: &FiniteGroup, l: u64) -> Result<Self> {
        let mut triv = ElemSet::empty();
        triv.insert(group.identity());
        let mut rep = Self::permutation(group, l, &triv)?;
        rep.label = format!("reg[{}]", group.name());
        Ok(rep)
    }

    /// The tensor product of two modules over the same group.
    pub fn tensor(group: &FiniteGroup, a: &Self, b: &Self) -> Result<Self> {
        if a.l != b.l {
            return Err(Error::Usage("tensor factors have different characteristics".into()));
        }
        let dim = a.dim * b.dim;
        if dim > 128 {
            return Err(Error::Resource(format!("tensor dimension {dim} exceeds 128")));
        }
        let gen_mats: Vec<Mat> = group
            .generators()
            .iter()
            .map(|&s| {
                let ma = &a.elem_mats[s as usize];
                let mb = &b.elem_mats[s as usize];
                let mut m = vec![vec![0u64; dim]; dim];
                for i in 0..a.dim {
                    for j in 0..a.dim {
                        if ma[i][j] == 0 {
                            continue;
                        }
                        for k in 0..b.dim {
                            for t in 0..b.dim {
                                m[i * b.dim + k][j * b.dim + t] =
                                    ma[i][j] * mb[k][t] % a.l;
                            }
                        }
                    }
                }
                m
            })
            .collect();
        Self::new(&format!("{}(x){}", a.label, b.label), group, a.l, gen_mats)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn characteristic(&self) -> u64 {
        self.l
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// dim A^H: the common kernel of rho(h) - 1 over generators of H, so
    /// #A^H = l^dim.
    pub fn fixed_points_dim(&self, group: &FiniteGroup, h: &ElemSet) -> Result<usize> {
        if !group.is_subgroup(h) {
            return Err(Error::Usage("fixed points need a subgroup".into()));
        }
        let gens = group.subgroup_generators(h);
        if gens.is_empty() {
            return Ok(self.dim);
        }
        let mut stack: Vec<Vec<u64>> = Vec::with_capacity(gens.len() * self.dim);
        for &g in &gens {
            let m = &self.elem_mats[g as usize];
            for i in 0..self.dim {
                let mut row = m[i].clone();
                row[i] = (row[i] + self.l - 1) % self.l;
                stack.push(row);
            }
        }
        Ok(self.dim - mat_rank(stack, self.l))
    }
}

struct CosetTable {
    count: usize,
    reps: Vec<u32>,
    coset_of: Vec<usize>,
}

/// Left cosets gU: canonical representative = least element.
fn coset_table(group: &FiniteGroup, u: &ElemSet) -> CosetTable {
    let n = group.order();
    let mut coset_of = vec![usize::MAX; n];
    let mut reps = Vec::new();
    for g in 0..n as u32 {
        if coset_of[g as usize] != usize::MAX {
            continue;
        }
        let id = reps.len();
        reps.push(g);
        for x in u.iter() {
            coset_of[group.mul(g, x) as usize] = id;
        }
    }
    CosetTable { count: reps.len(), reps, coset_of }
}

/// Number of H-orbits on G/U, combinatorially — the independent oracle
/// for permutation-module fixed points.
pub fn orbit_count(group: &FiniteGroup, u: &ElemSet, h: &ElemSet) -> Result<usize> {
    if !group.is_subgroup(u) || !group.is_subgroup(h) {
        return Err(Error::Usage("orbit counting needs subgroups".into()));
    }
    let cosets = coset_table(group, u);
    let mut root: Vec<usize> = (0..cosets.count).collect();
    fn find(root: &mut [usize], mut x: usize) -> usize {
        while root[x] != x {
            root[x] = root[root[x]];
            x = root[x];
        }
        x
    }
    for a in h.iter() {
        for i in 0..cosets.count {
            let j = cosets.coset_of[group.mul(a, cosets.reps[i]) as usize];
            let (ri, rj) = (find(&mut root, i), find(&mut root, j));
            if ri != rj {
                root[ri] = rj;
            }
        }
    }
    Ok((0..cosets.count).filter(|&i| find(&mut root, i) == i).count())
}

fn pow_mod(base: u64, exp: u64, modulus: u64) -> u64 {
    let mut acc: u128 = 1;
    let mut b: u128 = (base % modulus) as u128;
    let m = modulus as u128;
    let mut e = exp;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b % m;
        }
        b = b * b % m;
        e >>= 1;
    }
    acc as u64
}

/// The outcome of one congruence check #A = #A^H mod p^n.
#[derive(Clone, Debug, Serialize)]
pub struct CongruenceVerdict {
    pub group: String,
    pub module: String,
    pub l: u64,
    pub subgroup: Vec<u32>,
    pub n: u32,
    pub modulus: u64,
    pub dim_total: usize,
    pub dim_fixed: usize,
    /// Whether H is normal and contained in N_n; without it the
    /// congruence is not asserted and `holds` stays empty.
    pub hypothesis_met: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holds: Option<bool>,
}

/// Verifies #A = #A^H mod p^n for a normal subgroup H inside N_n,
/// reporting (not asserting) when the hypotheses fail.
pub fn check_congruence(
    group: &FiniteGroup,
    lattice: &SubgroupLattice,
    rep: &ModRep,
    h: &ElemSet,
    n: u32,
) -> Result<CongruenceVerdict> {
    if !group.is_subgroup(h) {
        return Err(Error::Usage("the congruence needs a subgroup of the group".into()));
    }
    let modulus = group
        .prime()
        .checked_pow(n)
        .ok_or_else(|| Error::Resource(format!("p^{n} overflows the modulus range")))?;
    let nn = compute_nn(group, lattice, n)?;
    let hypothesis_met = group.is_normal(h) && h.is_subset(&nn);
    let dim_total = rep.dim();
    let dim_fixed = rep.fixed_points_dim(group, h)?;
    let holds = hypothesis_met.then(|| {
        // multiplicative form: #A / #A^H = l^(dim - dim_fixed) = 1 mod p^n
        pow_mod(rep.characteristic(), (dim_total - dim_fixed) as u64, modulus) == 1 % modulus
    });
    Ok(CongruenceVerdict {
        group: group.name().to_string(),
        module: rep.label().to_string(),
        l: rep.characteristic(),
        subgroup: h.elements(),
        n,
        modulus,
        dim_total,
        dim_fixed,
        hypothesis_met,
        holds,
    })
}

/// One descending chain's ladder of fixed-point exponents.
#[derive(Clone, Debug, Serialize)]
pub struct ChainLadder {
    pub dims: Vec<usize>,
    pub orders: Vec<String>,
}

/// Verdict for the chain form: along chains of normal subgroups
/// decreasing to 1, the fixed-point counts form a Cauchy ladder with the
/// modulus schedule, and all chains share the limit #A.
#[derive(Clone, Debug, Serialize)]
pub struct ChainVerdict {
    pub group: String,
    pub module: String,
    pub l: u64,
    pub chains: Vec<ChainLadder>,
    pub limit_exponent: usize,
    pub congruences_checked: usize,
    pub holds: bool,
    pub failures: Vec<String>,
}

/// Verifies the ladder: for every n and every pair of chain entries
/// contained in N_n (same chain or across chains), the counts agree mod
/// p^n; every chain ends at the trivial subgroup with limit #A.
pub fn chain_convergence(
    group: &FiniteGroup,
    lattice: &SubgroupLattice,
    rep: &ModRep,
    chains: &[Vec<ElemSet>],
) -> Result<ChainVerdict> {
    let mut trivial = ElemSet::empty();
    trivial.insert(group.identity());
    for chain in chains {
        if chain.is_empty() || *chain.last().unwrap() != trivial {
            return Err(Error::Usage(
                "each chain must be nonempty and end at the trivial subgroup".into(),
            ));
        }
        for h in chain {
            if !group.is_subgroup(h) || !group.is_normal(h) {
                return Err(Error::Usage("chain entries must be normal subgroups".into()));
            }
        }
        for w in chain.windows(2) {
            if !w[1].is_subset(&w[0]) {
                return Err(Error::Usage("chains must be descending".into()));
            }
        }
    }
    let mut dims: Vec<Vec<usize>> = Vec::new();
    for chain in chains {
        dims.push(
            chain
                .iter()
                .map(|h| rep.fixed_points_dim(group, h))
                .collect::<Result<_>>()?,
        );
    }
    let mut max_n = 0u32;
    let mut size = group.order();
    while size > 1 {
        size /= group.prime() as usize;
        max_n += 1;
    }
    let mut checked = 0usize;
    let mut failures = Vec::new();
    for n in 1..=max_n {
        let nn = compute_nn(group, lattice, n)?;
        let modulus = (group.prime()).pow(n);
        let mut qualified: Vec<(usize, usize)> = Vec::new();
        for (ci, chain) in chains.iter().enumerate() {
            for (hi, h) in chain.iter().enumerate() {
                if h.is_subset(&nn) {
                    qualified.push((ci, hi));
                }
            }
        }
        for x in 0..qualified.len() {
            for y in x + 1..qualified.len() {
                let (c1, h1) = qualified[x];
                let (c2, h2) = qualified[y];
                let v1 = pow_mod(rep.characteristic(), dims[c1][h1] as u64, modulus);
                let v2 = pow_mod(rep.characteristic(), dims[c2][h2] as u64, modulus);
                checked += 1;
                if v1 != v2 {
                    failures.push(format!(
                        "chain {c1} entry {h1} vs chain {c2} entry {h2}: \
                         l^{} != l^{} mod {modulus}",
                        dims[c1][h1], dims[c2][h2]
                    ));
                }
            }
        }
    }
    let limit_exponent = rep.dim();
    for d in &dims {
        if *d.last().unwrap() != limit_exponent {
            failures.push("a chain's final fixed space is not the whole module".into());
        }
    }
    let ladders = dims
        .iter()
        .map(|d| ChainLadder {
            dims: d.clone(),
            orders: d.iter().map(|&e| format!("{}^{}", rep.characteristic(), e)).collect(),
        })
        .collect();
    Ok(ChainVerdict {
        group: group.name().to_string(),
        module: rep.label().to_string(),
        l: rep.characteristic(),
        chains: ladders,
        limit_exponent,
        congruences_checked: checked,
        holds: failures.is_empty(),
        failures,
    })
}

// ---- JSON input ----

/// JSON shape of a group: the session prime plus either a full
/// multiplication table or permutation generators.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroupRepr {
    pub p: u64,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub table: Option<Vec<Vec<u32>>>,
    #[serde(default)]
    pub generators: Option<Vec<u32>>,
    #[serde(default)]
    pub permutations: Option<PermRepr>,
}

/// Permutation-generator form: images of 0..degree-1 per generator.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PermRepr {
    pub degree: usize,
    pub gens: Vec<Vec<u32>>,
}

impl GroupRepr {
    pub fn build(&self) -> Result<FiniteGroup> {
        let name = self.name.clone().unwrap_or_else(|| "input".into());
        match (&self.table, &self.permutations) {
            (Some(table), None) => {
                let gens = match &self.generators {
                    Some(g) => g.clone(),
                    // every element generates; fine for table input
                    None => (0..table.len() as u32).collect(),
                };
                FiniteGroup::from_table(&name, self.p, table.clone(), gens)
            }
            (None, Some(perm)) => {
                FiniteGroup::from_permutations(&name, self.p, perm.degree, &perm.gens)
            }
            _ => Err(Error::Usage(
                "provide exactly one of `table` or `permutations`".into(),
            )),
        }
    }

    /// A named built-in group.
    pub fn builtin(name: &str) -> Result<FiniteGroup> {
        match name {
            "z4" => FiniteGroup::cyclic(2, 2),
            "z8" => FiniteGroup::cyclic(2, 3),
            "z16" => FiniteGroup::cyclic(2, 4),
            "z9" => FiniteGroup::cyclic(3, 2),
            "z27" => FiniteGroup::cyclic(3, 3),
            "z25" => FiniteGroup::cyclic(5, 2),
            "z49" => FiniteGroup::cyclic(7, 2),
            "e4" => FiniteGroup::elementary_abelian(2, 2),
            "e8" => FiniteGroup::elementary_abelian(2, 3),
            "e16" => FiniteGroup::elementary_abelian(2, 4),
            "e9" => FiniteGroup::elementary_abelian(3, 2),
            "e27" => FiniteGroup::elementary_abelian(3, 3),
            "e25" => FiniteGroup::elementary_abelian(5, 2),
            "z4xz2" => {
                FiniteGroup::direct_product(&FiniteGroup::cyclic(2, 2)?, &FiniteGroup::cyclic(2, 1)?)
            }
            "z9xz3" => {
                FiniteGroup::direct_product(&FiniteGroup::cyclic(3, 2)?, &FiniteGroup::cyclic(3, 1)?)
            }
            "d4" => FiniteGroup::dihedral8(),
            "q8" => FiniteGroup::quaternion8(),
            "heisenberg3" => FiniteGroup::heisenberg27(),
            other => Err(Error::Usage(format!(
                "unknown builtin group '{other}'; known: z4 z8 z16 z9 z27 z25 \
                 z49 e4 e8 e16 e9 e27 e25 z4xz2 z9xz3 d4 q8 heisenberg3"
            ))),
        }
    }
}

/// Summary of a corpus run.
#[derive(Clone, Debug, Serialize)]
pub struct CorpusReport {
    pub instances: usize,
    pub passes: usize,
    pub hypothesis_unmet: usize,
    pub permutation_checks: usize,
    pub groups: Vec<String>,
    pub failures: Vec<String>,
}

/// Runs the built-in corpus: for every group, every allowed module
/// characteristic, a deterministic family of modules (regular, coset
/// permutation modules, one tensor square), and every (normal H, n) pair
/// meeting the hypotheses — each instance checked for the congruence,
/// and every permutation module cross-checked against the orbit oracle.
pub fn run_corpus() -> Result<CorpusReport> {
    let group_names = [
        "z4", "z8", "z16", "e4", "e8", "e16", "z4xz2", "d4", "q8", "z9", "z27",
        "e9", "e27", "z9xz3", "heisenberg3", "z25", "e25", "z49",
    ];
    let all_l = [2u64, 3, 5, 7];
    let mut instances = 0usize;
    let mut passes = 0usize;
    let mut hypothesis_unmet = 0usize;
    let mut permutation_checks = 0usize;
    let mut failures: Vec<String> = Vec::new();

    for name in group_names {
        let group = GroupRepr::builtin(name)?;
        let lattice = subgroups_up_to_index(&group, group.order())?;
        // (H, n) pairs: normal subgroups contained in N_n, n >= 1.
        let mut max_n = 0u32;
        let mut size = group.order();
        while size > 1 {
            size /= group.prime() as usize;
            max_n += 1;
        }
        let mut pairs: Vec<(ElemSet, u32)> = Vec::new();
        for n in 1..=max_n {
            let nn = compute_nn(&group, &lattice, n)?;
            for s in &lattice.subgroups {
                if s.normal && s.set.is_subset(&nn) {
                    pairs.push((s.set, n));
                }
            }
        }
        pairs.sort();
        pairs.dedup();
        pairs.truncate(12);

        // deterministic module family bases: subgroups by (index, set)
        let mut bases: Vec<ElemSet> = lattice.subgroups.iter().map(|s| s.set).collect();
        bases.sort_by_key(|s| (group.order() / s.len(), *s));
        bases.truncate(4);

        for l in all_l {
            if l == group.prime() {
                continue;
            }
            let mut triv = ElemSet::empty();
            triv.insert(group.identity());
            // modules paired with the coset base the orbit oracle needs
            let mut modules: Vec<(ModRep, Option<ElemSet>)> =
                vec![(ModRep::regular(&group, l)?, Some(triv))];
            for u in &bases {
                modules.push((ModRep::permutation(&group, l, u)?, Some(*u)));
            }
            // one tensor product: the largest dim product still <= 30
            let mut best: Option<(usize, usize)> = None;
            for i in 1..modules.len() {
                for j in i + 1..modules.len() {
                    let d = modules[i].0.dim() * modules[j].0.dim();
                    if d <= 30
                        && best.is_none_or(|(bi, bj)| {
                            d > modules[bi].0.dim() * modules[bj].0.dim()
                        })
                    {
                        best = Some((i, j));
                    }
                }
            }
            if let Some((i, j)) = best {
                let t = ModRep::tensor(&group, &modules[i].0, &modules[j].0)?;
                modules.push((t, None));
            }
            for (rep, base) in &modules {
                for (h, n) in &pairs {
                    let verdict = check_congruence(&group, &lattice, rep, h, *n)?;
                    instances += 1;
                    match verdict.holds {
                        Some(true) => passes += 1,
                        Some(false) => failures.push(format!(
                            "{name} l={l} module {} H={:?} n={n}: congruence fails",
                            rep.label(),
                            h.elements()
                        )),
                        None => hypothesis_unmet += 1,
                    }
                    // permutation modules: the fixed-point dimension must
                    // equal the H-orbit count on the coset space
                    if let Some(u) = base {
                        let orbits = orbit_count(&group, u, h)?;
                        permutation_checks += 1;
                        if verdict.dim_fixed != orbits {
                            failures.push(format!(
                                "{name} l={l} {}: fixed dim {} != orbit \
                                 count {orbits} under H={:?}",
                                rep.label(),
                                verdict.dim_fixed,
                                h.elements()
                            ));
                        }
                    }
                }
            }
        }
    }
    Ok(CorpusReport {
        instances,
        passes,
        hypothesis_unmet,
        permutation_checks,
        groups: group_names.iter().map(|s| s.to_string()).collect(),
        failures,
    })
}
