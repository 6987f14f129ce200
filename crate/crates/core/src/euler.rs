//! Synthetic Euler systems in the mock cohomology `M(n) = F ⊗ R[H_n]`,
//! with `F = R^ρ` free. Corestriction pushes forward along `H_{nℓ} ↠ H_n`;
//! restriction inflates with trivial `H_ℓ`-component and multiplies by
//! `N_{H_ℓ}`.

use crate::arith::*;
use crate::coeff::CoeffRing;
use crate::error::{invalid, Error, Result};
use crate::galois::{chi_exponent, DeformationData, GroupRing, LamExpr, Level};
use crate::lambda::Realization;
use crate::poly::Poly;
use crate::ring::{Elem, Ring};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// An element of `M(n)`: one group-ring coordinate per basis vector of `F`.
pub type MockElem = Vec<Elem>;

pub fn mock_zero(gr: &GroupRing, rank: usize) -> MockElem {
    vec![gr.zero(); rank]
}

pub fn mock_add(gr: &GroupRing, a: &MockElem, b: &MockElem) -> MockElem {
    a.iter().zip(b).map(|(x, y)| gr.add(x, y)).collect()
}

pub fn mock_sub(gr: &GroupRing, a: &MockElem, b: &MockElem) -> MockElem {
    a.iter().zip(b).map(|(x, y)| gr.sub(x, y)).collect()
}

/// `g·x` for a group-ring element `g`.
pub fn mock_mul(gr: &GroupRing, g: &[u64], x: &MockElem) -> MockElem {
    x.iter().map(|c| gr.mul(g, c)).collect()
}

pub fn mock_is_zero(gr: &GroupRing, x: &MockElem) -> bool {
    x.iter().all(|c| gr.is_zero(c))
}

fn check_sublevel(big: &GroupRing, small: &GroupRing) -> Result<()> {
    if big.level().n() % small.level().n() != 0 || big.base() != small.base() {
        return invalid("levels are not nested over a common base ring");
    }
    for &l in small.level().primes() {
        let (i, j) = (big.level().position(l).expect("prime"), small.level().position(l).expect("prime"));
        if big.level().generators()[i] != small.level().generators()[j] {
            return invalid("nested levels must share generators");
        }
    }
    Ok(())
}

/// Pushforward `R[H_n] → R[H_d]` for `d | n`.
pub fn project(from: &GroupRing, to: &GroupRing, x: &[u64]) -> Elem {
    let bdim = from.base().dim();
    let mut out = to.zero();
    for g in 0..from.level().size() {
        let blk = from.block(x, g);
        if blk.iter().all(|&c| c == 0) {
            continue;
        }
        let t = from.level().project_to(to.level(), g);
        let sum = to.base().add(to.block(&out, t), blk);
        out[t * bdim..(t + 1) * bdim].copy_from_slice(&sum);
    }
    out
}

/// `R[H_d] ↪ R[H_n]` with trivial components away from `d`.
pub fn inflate(from: &GroupRing, to: &GroupRing, x: &[u64]) -> Elem {
    let bdim = from.base().dim();
    let mut out = to.zero();
    for g in 0..from.level().size() {
        let t = to.level().embed_from(from.level(), g);
        out[t * bdim..(t + 1) * bdim].copy_from_slice(from.block(x, g));
    }
    out
}

/// `cor_{n→d}`.
pub fn cor(from: &GroupRing, to: &GroupRing, x: &MockElem) -> Result<MockElem> {
    check_sublevel(from, to)?;
    Ok(x.iter().map(|c| project(from, to, c)).collect())
}

/// `res_{d→n}: x ↦ N_{H_{n/d}}·x̃` with the trivial lift `x̃`.
pub fn res(from: &GroupRing, to: &GroupRing, x: &MockElem) -> Result<MockElem> {
    check_sublevel(to, from)?;
    let extra: Vec<usize> = to.level().primes().iter().enumerate().filter(|(_, l)| from.level().position(**l).is_none()).map(|(i, _)| i).collect();
    Ok(x.iter()
        .map(|c| extra.iter().fold(inflate(from, to, c), |acc, &i| to.apply_partial_norm(&acc, i)))
        .collect())
}

/// For an `H_n`-fixed element, the unique `y ∈ F/IF` with `x = y ⊗ N_{H_n}`.
pub fn norm_preimage(gr: &GroupRing, x: &MockElem) -> Option<Vec<Elem>> {
    let mut out = Vec::with_capacity(x.len());
    for c in x {
        if !gr.is_fixed(c) {
            return None;
        }
        out.push(gr.block(c, 0).to_vec());
    }
    Some(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    /// `cor c(nℓ) = P_ℓ(Frob_ℓ^{-1}) c(n)`.
    C,
    /// `cor z(nℓ) = P*_ℓ(Frob_ℓ^{-1}) z(n)` with the dual polynomial.
    Z,
}

/// One term `coeff·[unit]` of a coordinate, `unit` a residue prime to `n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableTerm {
    pub unit: u64,
    pub coeff: Poly,
}

/// A class in `M(n)`, coordinate by coordinate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableClass {
    pub coords: Vec<Vec<TableTerm>>,
}

/// Extra generators `y(d) = Π_{ℓ|d} ([b_ℓ] - 1)·w_d` added at level `d`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimitivePart {
    pub level: u64,
    pub w: TableClass,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Classes {
    /// `c(n) = Σ_{d|n} (Π_{q|n/d} P_q(Frob_q^{-1})) · y(d)`, `y(1) = c(1)`.
    Generated {
        seed: Vec<Poly>,
        #[serde(default)]
        primitive: Vec<PrimitivePart>,
        /// Residues `b_ℓ`; the smallest primitive root when absent.
        #[serde(default)]
        b: BTreeMap<u64, u64>,
    },
    Table { table: BTreeMap<u64, TableClass> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EulerSystem {
    pub rank: usize,
    pub flavor: Flavor,
    pub classes: Classes,
}

/// Residue mod `n` of the element with the given residues mod each prime.
pub fn crt(primes: &[u64], res: &[u64]) -> u64 {
    let n: u64 = primes.iter().product();
    let mut x = 0u64;
    for (&l, &a) in primes.iter().zip(res) {
        let m = n / l;
        let inv = inv_mod(m % l, l).expect("coprime");
        x = (x + mulmod(mulmod(a % l, inv, n), m, n)) % n;
    }
    if n == 1 {
        0
    } else {
        x
    }
}

fn realize_table(tc: &TableClass, gr: &GroupRing, real: &Realization, d: u64) -> Result<MockElem> {
    let lv = gr.level();
    let mut out = Vec::with_capacity(tc.coords.len());
    for coord in &tc.coords {
        let mut acc = gr.zero();
        for t in coord {
            if d > 1 && gcd(t.unit, d) != 1 {
                return invalid(format!("{} is not a unit mod {d}", t.unit));
            }
            let res: Vec<u64> = lv.primes().iter().map(|&l| if d % l == 0 { t.unit % l } else { 1 }).collect();
            let g = lv.from_residues(&res)?;
            acc = gr.add(&acc, &gr.embed(&real.poly(&t.coeff)?, g));
        }
        out.push(acc);
    }
    Ok(out)
}

/// Outcome of a norm-relation check at `(n, ℓ)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NormCheck {
    pub n: u64,
    pub l: u64,
    pub pass: bool,
    #[serde(skip)]
    pub residual: MockElem,
}

impl EulerSystem {
    pub fn validate(&self, t: &DeformationData) -> Result<()> {
        match &self.classes {
            Classes::Generated { seed, primitive, b } => {
                if seed.len() != self.rank {
                    return invalid("seed length must equal the rank of F");
                }
                for pp in primitive {
                    Level::new(pp.level, &t.sigma_set)?;
                    if pp.w.coords.len() != self.rank || pp.level == 1 {
                        return invalid("primitive parts need a level > 1 and one entry per coordinate");
                    }
                }
                for (&l, &bl) in b {
                    if bl % l == 0 || bl % l == 1 {
                        return invalid(format!("b_{l} must be a unit different from 1"));
                    }
                }
            }
            Classes::Table { table } => {
                for (&n, tc) in table {
                    Level::new(n, &t.sigma_set)?;
                    if tc.coords.len() != self.rank {
                        return invalid(format!("class at level {n} has the wrong rank"));
                    }
                }
            }
        }
        Ok(())
    }

    /// An Euler system with `c(nℓ)` generated from `c(1) = seed`.
    pub fn multiplicative(seed: Vec<Poly>, flavor: Flavor) -> Self {
        EulerSystem { rank: seed.len(), flavor, classes: Classes::Generated { seed, primitive: vec![], b: BTreeMap::new() } }
    }

    /// `c(1)` in `F/IF`.
    pub fn seed_class(&self, t: &DeformationData, real: &Realization) -> Result<Vec<Elem>> {
        let gr = GroupRing::new(real.ring.clone(), Level::new(1, &t.sigma_set)?);
        Ok(self.class(t, &gr, real)?.into_iter().map(|c| c[..real.ring.dim()].to_vec()).collect())
    }

    /// The Euler factor of `ℓ` at `Frob_ℓ^{-1}` in `R[H_n]`, for the flavor.
    pub fn euler_factor(&self, t: &DeformationData, gr: &GroupRing, real: &Realization, l: u64) -> Result<Elem> {
        let coeffs = match self.flavor {
            Flavor::C => t.euler_poly(l, real)?,
            Flavor::Z => t.dual_euler_poly(l, real)?,
        };
        let lv = gr.level();
        let fr = if lv.n() % l == 0 { lv.frobenius_away(l)? } else { lv.frobenius(l)? };
        Ok(gr.eval_poly(&coeffs, lv.pow_idx(fr, -1)))
    }

    /// `c(n)` in `M(n)`, where `gr` is `R[H_n]` over `real.ring`.
    pub fn class(&self, t: &DeformationData, gr: &GroupRing, real: &Realization) -> Result<MockElem> {
        let lv = gr.level();
        let n = lv.n();
        match &self.classes {
            Classes::Table { table } => {
                let tc = table.get(&n).ok_or_else(|| Error::InvalidInput(format!("no class at level {n}")))?;
                realize_table(tc, gr, real, n)
            }
            Classes::Generated { seed, primitive, b } => {
                let mut acc = mock_zero(gr, self.rank);
                for d in lv.divisors() {
                    let y = if d == 1 {
                        seed.iter().map(|s| Ok(gr.embed(&real.poly(s)?, 0))).collect::<Result<Vec<_>>>()?
                    } else {
                        let Some(pp) = primitive.iter().find(|pp| pp.level == d) else { continue };
                        let mut w = realize_table(&pp.w, gr, real, d)?;
                        for l in prime_factors(d) {
                            let bl = b.get(&l).copied().unwrap_or_else(|| primitive_root(l));
                            let res: Vec<u64> = lv.primes().iter().map(|&q| if q == l { bl % l } else { 1 }).collect();
                            let g = gr.sub(&gr.group_elem(lv.from_residues(&res)?), &gr.one());
                            w = mock_mul(gr, &g, &w);
                        }
                        w
                    };
                    let mut e = gr.one();
                    for q in prime_factors(n / d) {
                        e = gr.mul(&e, &self.euler_factor(t, gr, real, q)?);
                    }
                    acc = mock_add(gr, &acc, &mock_mul(gr, &e, &y));
                }
                Ok(acc)
            }
        }
    }

    /// Checks `cor_{nℓ→n} c(nℓ) = P_ℓ(Frob_ℓ^{-1}) c(n)` exactly.
    pub fn verify_norm_relation(&self, t: &DeformationData, real: &Realization, n: u64, l: u64) -> Result<NormCheck> {
        let big_lv = Level::new(n * l, &t.sigma_set)?;
        let small_lv = big_lv.sublevel(n)?;
        let big = GroupRing::new(real.ring.clone(), big_lv);
        let small = GroupRing::new(real.ring.clone(), small_lv);
        let lhs = cor(&big, &small, &self.class(t, &big, real)?)?;
        let rhs = mock_mul(&small, &self.euler_factor(t, &small, real, l)?, &self.class(t, &small, real)?);
        let residual = mock_sub(&small, &lhs, &rhs);
        Ok(NormCheck { n, l, pass: mock_is_zero(&small, &residual), residual })
    }

    /// Every adjacent pair `(n, nℓ)` inside the given level set.
    pub fn verify_all(&self, t: &DeformationData, real: &Realization, levels: &[u64]) -> Result<Vec<NormCheck>> {
        let mut out = Vec::new();
        for &m in levels {
            for l in prime_factors(m) {
                if levels.contains(&(m / l)) {
                    out.push(self.verify_norm_relation(t, real, m / l, l)?);
                }
            }
        }
        Ok(out)
    }

    /// Stores `c(n)` for the given levels as a table over `real.ring`.
    pub fn tabulate(&self, t: &DeformationData, real: &Realization, levels: &[u64]) -> Result<EulerSystem> {
        let mut table = BTreeMap::new();
        for &n in levels {
            let gr = GroupRing::new(real.ring.clone(), Level::new(n, &t.sigma_set)?);
            table.insert(n, to_table(&gr, real, &self.class(t, &gr, real)?));
        }
        Ok(EulerSystem { rank: self.rank, flavor: self.flavor, classes: Classes::Table { table } })
    }
}

/// The symbolic table form of a class over a quotient of `Λ`.
pub fn to_table(gr: &GroupRing, real: &Realization, x: &MockElem) -> TableClass {
    let lv = gr.level();
    TableClass {
        coords: x
            .iter()
            .map(|c| {
                (0..lv.size())
                    .filter(|&g| gr.block(c, g).iter().any(|&v| v != 0))
                    .map(|g| TableTerm { unit: crt(lv.primes(), &lv.residues(g)), coeff: real.ring.to_poly(gr.block(c, g)) })
                    .collect()
            })
            .collect(),
    }
}

/// `a_ℓ = (P_ℓ - P*_ℓ)/(ℓ - 1)`, coefficientwise `a_k (1 + ℓ + ... + ℓ^{k-1}) ℓ^{-k}`.
pub fn rubin_factor(t: &DeformationData, real: &Realization, l: u64) -> Result<Vec<Elem>> {
    let r = &real.ring;
    let q = r.modulus();
    let li = inv_mod(l % q, q).ok_or_else(|| Error::InvalidInput("ℓ must be prime to p".into()))?;
    let mut out = Vec::new();
    let (mut geo, mut lk, mut lik) = (0u64, 1u64, 1u64);
    for a in t.euler_poly(l, real)? {
        out.push(r.scale(&a, mulmod(geo, lik, q)));
        geo = addmod(geo, lk, q);
        lk = mulmod(lk, l % q, q);
        lik = mulmod(lik, li, q);
    }
    Ok(out)
}

/// Converts a `z`-normalized system into a `c`-normalized one:
/// `c(n) = Σ_{d|n} (Π_{ℓ|n/d} a_ℓ(Frob_ℓ^{-1})) res_{d→n} z(d)`. The result
/// is tabulated over `real.ring` and checked on every adjacent pair.
pub fn convert_rubin(z: &EulerSystem, t: &DeformationData, real: &Realization, levels: &[u64]) -> Result<EulerSystem> {
    if z.flavor != Flavor::Z {
        return invalid("conversion expects a z-normalized system");
    }
    let mut table = BTreeMap::new();
    for &n in levels {
        let lv = Level::new(n, &t.sigma_set)?;
        let gr = GroupRing::new(real.ring.clone(), lv.clone());
        let mut acc = mock_zero(&gr, z.rank);
        for d in lv.divisors() {
            let sub = GroupRing::new(real.ring.clone(), lv.sublevel(d)?);
            let zd = res(&sub, &gr, &z.class(t, &sub, real)?)?;
            let mut coef = gr.one();
            for l in prime_factors(n / d) {
                let fr = lv.pow_idx(lv.frobenius_away(l)?, -1);
                coef = gr.mul(&coef, &gr.eval_poly(&rubin_factor(t, real, l)?, fr));
            }
            acc = mock_add(&gr, &acc, &mock_mul(&gr, &coef, &zd));
        }
        table.insert(n, to_table(&gr, real, &acc));
    }
    let c = EulerSystem { rank: z.rank, flavor: Flavor::C, classes: Classes::Table { table } };
    for chk in c.verify_all(t, real, levels)? {
        if !chk.pass {
            return Err(Error::Verification(format!("converted system fails the norm relation at ({}, {})", chk.n, chk.l)));
        }
    }
    Ok(c)
}

fn map_classes(es: &EulerSystem, f: &dyn Fn(&Poly) -> Poly) -> EulerSystem {
    let map_tc = |tc: &TableClass| TableClass {
        coords: tc.coords.iter().map(|c| c.iter().map(|t| TableTerm { unit: t.unit, coeff: f(&t.coeff) }).collect()).collect(),
    };
    let classes = match &es.classes {
        Classes::Generated { seed, primitive, b } => Classes::Generated {
            seed: seed.iter().map(f).collect(),
            primitive: primitive.iter().map(|pp| PrimitivePart { level: pp.level, w: map_tc(&pp.w) }).collect(),
            b: b.clone(),
        },
        Classes::Table { table } => Classes::Table { table: table.iter().map(|(&n, tc)| (n, map_tc(tc))).collect() },
    };
    EulerSystem { rank: es.rank, flavor: es.flavor, classes }
}

fn map_frobenius(t: &DeformationData, r: usize, f: &dyn Fn(u64, &LamExpr) -> LamExpr) -> DeformationData {
    let mm = |l: u64, m: &Vec<Vec<LamExpr>>| m.iter().map(|row| row.iter().map(|e| f(l, e)).collect()).collect();
    DeformationData {
        d: t.d,
        r,
        sigma_set: t.sigma_set.clone(),
        frobenius: t.frobenius.iter().map(|(&l, m)| (l, mm(l, m))).collect(),
        tau: t.tau.as_ref().map(|m| mm(0, m)),
        conj: t.conj.as_ref().map(|m| mm(0, m)),
    }
}

/// `T^cyc = T ⊗ Λ[[Γ]]`: a new last variable `x_{r+1} = γ - 1`, and every
/// `ρ(Frob_ℓ)` scaled by `(1 + x_{r+1})^{s(ℓ)}`.
pub fn cyclotomic_deformation(t: &DeformationData) -> Result<DeformationData> {
    let p = *t.sigma_set.iter().min().ok_or_else(|| Error::InvalidInput("Σ is empty".into()))?;
    if t.frobenius.keys().any(|&l| l % p == 0) {
        return invalid("pool primes must differ from p");
    }
    let r = t.r;
    Ok(map_frobenius(t, r + 1, &|l, e| {
        let mut twist = e.twist.clone();
        if l != 0 {
            twist.push((r, 1));
        }
        LamExpr { poly: e.poly.with_nvars(r + 1).expect("padding"), twist }
    }))
}

/// The Euler system of `T^cyc` extending a generated or tabulated system:
/// classes are padded with the new variable.
pub fn extend_cyclotomic(es: &EulerSystem, t: &DeformationData) -> Result<(DeformationData, EulerSystem)> {
    let tc = cyclotomic_deformation(t)?;
    let r = t.r;
    Ok((tc, map_classes(es, &|f| f.with_nvars(r + 1).expect("padding"))))
}

/// The automorphism `1 + x_v ↦ (1+p)^s (1 + x_v)` of the last variable.
pub fn twist_cyclotomic(es: &EulerSystem, t: &DeformationData, s: i64, c: &CoeffRing) -> Result<(DeformationData, EulerSystem)> {
    let r = t.r;
    if r == 0 {
        return invalid("no cyclotomic variable to twist");
    }
    let v = r - 1;
    let (p, q, m) = (c.p(), c.modulus(), c.precision());
    let qm1 = checked_pow(p, m - 1).expect("fits");
    let b = powmod(1 + p, reduce_i64(s, qm1), q);
    let images: Vec<Poly> = (0..r).map(|i| if i == v { Poly::linear(b as i64 - 1, &unit_vec(r, v, b as i64)) } else { Poly::var(r, i) }).collect();
    let sub = |f: &Poly| f.with_nvars(r).expect("nvars").substitute(&images, c);
    let err = std::cell::RefCell::new(None);
    let td = map_frobenius(t, r, &|l, e| {
        let mut poly = sub(&e.poly);
        for &(var, k) in &e.twist {
            if var == v && l != 0 {
                match chi_exponent(p, m, l) {
                    Ok(sl) => {
                        let ex = mulmod(mulmod(reduce_i64(s, qm1), reduce_i64(k, qm1), qm1), sl, qm1);
                        poly = poly.mul(&Poly::int(r, powmod(1 + p, ex, q) as i64), c);
                    }
                    Err(e) => *err.borrow_mut() = Some(e),
                }
            }
        }
        LamExpr { poly, twist: e.twist.clone() }
    });
    if let Some(e) = err.into_inner() {
        return Err(e);
    }
    Ok((td, map_classes(es, &sub)))
}

fn unit_vec(r: usize, v: usize, b: i64) -> Vec<i64> {
    (0..r).map(|i| if i == v { b } else { 0 }).collect()
}

/// The augmentation `x_v ↦ 0` of the last variable.
pub fn augment_last(es: &EulerSystem, t: &DeformationData, c: &CoeffRing) -> Result<(DeformationData, EulerSystem)> {
    let r = t.r;
    if r == 0 {
        return invalid("no variable to augment");
    }
    let v = r - 1;
    let images: Vec<Poly> = (0..r).map(|i| if i == v { Poly::zero(v) } else { Poly::var(v, i) }).collect();
    let sub = |f: &Poly| {
        let f = f.with_nvars(r).expect("nvars");
        if v == 0 {
            Poly::constant(0, f.coeff_of_power(0, 0).constant_term())
        } else {
            f.substitute(&images, c)
        }
    };
    let td = map_frobenius(t, v, &|_, e| LamExpr { poly: sub(&e.poly), twist: e.twist.iter().copied().filter(|&(var, _)| var != v).collect() });
    Ok((td, map_classes(es, &sub)))
}

/// `T ⊗ χ` for `χ(γ) = (1+p)^s`: twist, then augment.
pub fn twist_by_character(es: &EulerSystem, t: &DeformationData, s: i64, c: &CoeffRing) -> Result<(DeformationData, EulerSystem)> {
    let (t1, e1) = twist_cyclotomic(es, t, s, c)?;
    augment_last(&e1, &t1, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lambda::QuotientRing;
    use std::sync::Arc;

    fn setup(d: usize, m: &[u32]) -> (DeformationData, Realization, CoeffRing) {
        let c = CoeffRing::zp(5, 3).unwrap();
        let t = DeformationData::synthetic(5, 1, d, &[11, 31, 41], 11).unwrap();
        let real = Realization::standard(Arc::new(QuotientRing::standard(&c, 1, m).unwrap()));
        (t, real, c)
    }

    fn with_primitive(flavor: Flavor) -> EulerSystem {
        let seed = vec![Poly::linear(5, &[1]), Poly::int(1, 1)];
        let w = |a: u64, pl: Poly| TableClass { coords: vec![vec![TableTerm { unit: a, coeff: pl }], vec![]] };
        EulerSystem {
            rank: 2,
            flavor,
            classes: Classes::Generated {
                seed,
                primitive: vec![PrimitivePart { level: 11, w: w(3, Poly::int(1, 1)) }, PrimitivePart { level: 341, w: w(5, Poly::var(1, 0)) }],
                b: BTreeMap::new(),
            },
        }
    }

    #[test]
    fn corestriction_and_restriction_identities() {
        let (_, real, _) = setup(2, &[1, 2]);
        let big = GroupRing::new(real.ring.clone(), Level::new(11 * 31, &[5]).unwrap());
        let small = GroupRing::new(real.ring.clone(), big.level().sublevel(11).unwrap());
        let b = &real.ring;
        let x = vec![small.add(&small.embed(&b.var(0), 3), &small.embed(&b.from_int(2), 7))];
        let back = cor(&big, &small, &res(&small, &big, &x).unwrap()).unwrap();
        assert_eq!(back, vec![small.scale(&x[0], 30)]);
        let y = vec![big.add(&big.embed(&b.var(0), 17), &big.embed(&b.one(), 200))];
        let rc = res(&small, &big, &cor(&big, &small, &y).unwrap()).unwrap();
        let i31 = big.level().position(31).unwrap();
        assert_eq!(rc, vec![big.apply_partial_norm(&y[0], i31)]);
        let fixed = vec![big.apply_norm(&y[0])];
        assert_eq!(norm_preimage(&big, &fixed).unwrap(), vec![big.aug(&y[0])]);
        assert!(norm_preimage(&big, &y).is_none());
    }

    #[test]
    fn multiplicative_examples() {
        let (t, real, _) = setup(1, &[1, 2]);
        let b = real.ring.clone();
        let es = EulerSystem::multiplicative(vec![Poly::linear(5, &[1])], Flavor::C);
        assert_eq!(es.seed_class(&t, &real).unwrap(), vec![b.elem_from_poly(&Poly::linear(5, &[1])).unwrap()]);
        let gr = GroupRing::new(b.clone(), Level::new(11, &[5]).unwrap());
        let u = t.frobenius_matrix(11, &real).unwrap()[0][0].clone();
        let g = gr.level().frobenius_away(11).unwrap();
        assert_eq!(g, 0);
        let c11 = es.class(&t, &gr, &real).unwrap();
        let expect = gr.embed(&b.mul(&b.sub(&b.one(), &u), &b.elem_from_poly(&Poly::linear(5, &[1])).unwrap()), 0);
        assert_eq!(c11, vec![expect]);
        let chk = es.verify_norm_relation(&t, &real, 1, 11).unwrap();
        assert!(chk.pass);
    }

    #[test]
    fn norm_relations_hold_for_generated_systems() {
        let (t, real, _) = setup(2, &[1, 2]);
        let levels = [1u64, 11, 31, 341];
        for flavor in [Flavor::C, Flavor::Z] {
            let es = with_primitive(flavor);
            es.validate(&t).unwrap();
            let checks = es.verify_all(&t, &real, &levels).unwrap();
            assert_eq!(checks.len(), 4);
            assert!(checks.iter().all(|c| c.pass));
        }
    }

    #[test]
    fn perturbed_table_fails() {
        let (t, real, _) = setup(2, &[1, 2]);
        let es = with_primitive(Flavor::C).tabulate(&t, &real, &[1, 11]).unwrap();
        assert!(es.verify_norm_relation(&t, &real, 1, 11).unwrap().pass);
        let mut bad = es.clone();
        if let Classes::Table { table } = &mut bad.classes {
            table.get_mut(&11).unwrap().coords[0].push(TableTerm { unit: 2, coeff: Poly::int(1, 1) });
        }
        let chk = bad.verify_norm_relation(&t, &real, 1, 11).unwrap();
        assert!(!chk.pass && !chk.residual.iter().all(|c| c.iter().all(|&x| x == 0)));
    }

    #[test]
    fn rubin_conversion() {
        let (t, real, _) = setup(2, &[1, 2]);
        let z = with_primitive(Flavor::Z);
        let levels = [1u64, 11, 31, 341];
        let c = convert_rubin(&z, &t, &real, &levels).unwrap();
        assert!(c.verify_all(&t, &real, &levels).unwrap().iter().all(|k| k.pass));
        // The conversion keeps the identity-free level-one class.
        let gr1 = GroupRing::new(real.ring.clone(), Level::one());
        assert_eq!(c.class(&t, &gr1, &real).unwrap(), z.class(&t, &gr1, &real).unwrap());
    }

    #[test]
    fn rubin_factor_is_exact_when_dual_agrees_at_precision() {
        // ℓ ≡ 1 mod p^M makes P = P* at precision, while the exact quotient
        // (P - P*)/(ℓ - 1) = -u ℓ^{-1} x for P = 1 - ux stays nonzero.
        let c = CoeffRing::zp(5, 3).unwrap();
        let t = DeformationData::synthetic(5, 1, 1, &[251], 2).unwrap();
        let real = Realization::standard(Arc::new(QuotientRing::standard(&c, 1, &[2, 2]).unwrap()));
        assert_eq!(t.euler_poly(251, &real).unwrap(), t.dual_euler_poly(251, &real).unwrap());
        let u = t.frobenius_matrix(251, &real).unwrap()[0][0].clone();
        let li = inv_mod(251 % 125, 125).unwrap();
        let a = rubin_factor(&t, &real, 251).unwrap();
        assert_eq!(a, vec![real.ring.zero(), real.ring.scale(&real.ring.neg(&u), li)]);
    }

    #[test]
    fn cyclotomic_extension_and_twists() {
        let (t, _, c) = setup(2, &[1, 2]);
        let es = with_primitive(Flavor::C);
        let (tc, ec) = extend_cyclotomic(&es, &t).unwrap();
        assert_eq!(tc.r, 2);
        let (ta, ea) = augment_last(&ec, &tc, &c).unwrap();
        assert_eq!(ta.clone().normalize().unwrap().reduce_coefficients(&c), t.clone().normalize().unwrap().reduce_coefficients(&c));
        assert_eq!(ea, es);
        let (t0, e0) = twist_by_character(&ec, &tc, 0, &c).unwrap();
        assert_eq!((t0.reduce_coefficients(&c), e0), (ta.clone().reduce_coefficients(&c), ea.clone()));
        let (t1, e1) = twist_cyclotomic(&ec, &tc, 3, &c).unwrap();
        let (t2, e2) = twist_cyclotomic(&e1, &t1, -3, &c).unwrap();
        assert_eq!((t2.reduce_coefficients(&c), e2), (tc.clone().reduce_coefficients(&c), ec.clone()));
        let ring2 = Arc::new(QuotientRing::standard(&c, 2, &[1, 2, 2]).unwrap());
        let real2 = Realization::standard(ring2);
        let levels = [1u64, 11, 31, 341];
        assert!(ec.verify_all(&tc, &real2, &levels).unwrap().iter().all(|k| k.pass));
        // After the twist the Euler factor scales by (1+p)^{s·s(ℓ)}.
        let (tt, _) = twist_by_character(&ec, &tc, 2, &c).unwrap();
        let real1 = Realization::standard(Arc::new(QuotientRing::standard(&c, 1, &[2, 2]).unwrap()));
        let a = t.frobenius_matrix(11, &real1).unwrap();
        let at = tt.frobenius_matrix(11, &real1).unwrap();
        let k = powmod(6, 2 * chi_exponent(5, 3, 11).unwrap(), 125);
        assert_eq!(at[0][0], real1.ring.scale(&a[0][0], k));
    }

    #[test]
    fn diagonal_embedding_composes_to_identity() {
        let c = CoeffRing::zp(5, 3).unwrap();
        let x = Poly::var(1, 0);
        let f = Poly::from_terms(1, vec![(vec![3], vec![2]), (vec![1], vec![5]), (vec![0], vec![1])]);
        // γ ↦ (γ, γ) sends 1 + x to (1 + x)(1 + y); the first projection sets y = 0.
        let delta = vec![Poly::from_terms(2, vec![(vec![1, 0], vec![1]), (vec![0, 1], vec![1]), (vec![1, 1], vec![1])])];
        let back = f.substitute(&delta, &c).substitute(&[Poly::var(1, 0), Poly::zero(1)], &c);
        assert_eq!(back, f);
        assert_eq!(x.substitute(&delta, &c).substitute(&[Poly::var(1, 0), Poly::zero(1)], &c), x);
    }

    #[test]
    fn crt_roundtrip() {
        let lv = Level::new(11 * 31, &[5]).unwrap();
        for g in 0..lv.size() {
            assert_eq!(lv.from_unit(crt(lv.primes(), &lv.residues(g))).unwrap(), g);
        }
    }
}
