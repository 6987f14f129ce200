//! Synthetic Galois data: squarefree levels and their groups
//! `H_n = Π_{ℓ|n} (Z/ℓ)^×`, group rings `R[H_n]`, Frobenius matrices with
//! their Euler polynomials, admissible primes, Kolyvagin operators `D_ℓ`
//! and the augmentation-quotient maps `e_{I,H_ℓ}`.

use crate::arith::*;
use crate::coeff::{gamma_exponent, principal_unit};
use crate::error::{invalid, Error, Result};
use crate::fitting::{charpoly, PresentedModule};
use crate::lambda::{QuotientRing, Realization};
use crate::linalg::Span;
use crate::poly::Poly;
use crate::ring::{Elem, Ring};
use rand::Rng as _;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

/// Largest group order `|H_n|` handled.
pub const GROUP_BUDGET: usize = 20_000;

/// A squarefree level `n` with fixed generators `σ_ℓ` of each `(Z/ℓ)^×`.
/// Group elements are indexed in mixed radix by their exponents, the
/// smallest prime fastest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Level {
    n: u64,
    primes: Vec<u64>,
    gens: Vec<u64>,
    dlog: Vec<Vec<u32>>,
    strides: Vec<usize>,
    size: usize,
}

impl Level {
    pub fn one() -> Level {
        Level { n: 1, primes: vec![], gens: vec![], dlog: vec![], strides: vec![], size: 1 }
    }

    /// Level `n` with the smallest primitive root mod each `ℓ` as `σ_ℓ`.
    pub fn new(n: u64, sigma: &[u64]) -> Result<Level> {
        let gens: Vec<u64> = prime_factors(n).iter().map(|&l| primitive_root(l)).collect();
        Level::with_generators(n, sigma, &gens)
    }

    /// Level `n` with the given generators, listed by increasing prime.
    pub fn with_generators(n: u64, sigma: &[u64], gens: &[u64]) -> Result<Level> {
        if n == 0 {
            return invalid("level must be positive");
        }
        let primes = prime_factors(n);
        if primes.iter().product::<u64>() != n {
            return invalid(format!("level {n} is not squarefree"));
        }
        if let Some(l) = primes.iter().find(|l| sigma.contains(l)) {
            return invalid(format!("level {n} is divisible by {l} in Σ"));
        }
        if gens.len() != primes.len() {
            return invalid("one generator per prime is required");
        }
        let mut dlog = Vec::new();
        let mut strides = Vec::new();
        let mut size: usize = 1;
        for (&l, &g) in primes.iter().zip(gens) {
            let mut table = vec![u32::MAX; l as usize];
            let mut x = 1u64;
            for k in 0..(l - 1) as u32 {
                if table[x as usize] != u32::MAX {
                    return invalid(format!("{g} does not generate (Z/{l})^×"));
                }
                table[x as usize] = k;
                x = x * (g % l) % l;
            }
            if x != 1 {
                return invalid(format!("{g} does not generate (Z/{l})^×"));
            }
            dlog.push(table);
            strides.push(size);
            size = size.checked_mul((l - 1) as usize).filter(|&s| s <= GROUP_BUDGET).ok_or_else(|| Error::Budget(format!("|H_{n}| exceeds {GROUP_BUDGET}")))?;
        }
        let gens = gens.iter().zip(&primes).map(|(g, l)| g % l).collect();
        Ok(Level { n, primes, gens, dlog, strides, size })
    }

    pub fn n(&self) -> u64 {
        self.n
    }
    pub fn primes(&self) -> &[u64] {
        &self.primes
    }
    pub fn generators(&self) -> &[u64] {
        &self.gens
    }
    pub fn size(&self) -> usize {
        self.size
    }
    pub fn position(&self, l: u64) -> Option<usize> {
        self.primes.iter().position(|&q| q == l)
    }
    fn order(&self, i: usize) -> u32 {
        (self.primes[i] - 1) as u32
    }

    pub fn exps(&self, idx: usize) -> Vec<u32> {
        (0..self.primes.len()).map(|i| ((idx / self.strides[i]) % self.order(i) as usize) as u32).collect()
    }

    pub fn index(&self, exps: &[u32]) -> usize {
        exps.iter().enumerate().map(|(i, &e)| (e % self.order(i)) as usize * self.strides[i]).sum()
    }

    /// The element with residues `res[i] mod ℓ_i`.
    pub fn from_residues(&self, res: &[u64]) -> Result<usize> {
        if res.len() != self.primes.len() {
            return invalid("one residue per prime is required");
        }
        let mut exps = Vec::with_capacity(res.len());
        for (i, (&a, &l)) in res.iter().zip(&self.primes).enumerate() {
            let k = self.dlog[i][(a % l) as usize];
            if k == u32::MAX {
                return invalid(format!("{a} is not a unit mod {l}"));
            }
            exps.push(k);
        }
        Ok(self.index(&exps))
    }

    /// The element of `H_n = (Z/n)^×` represented by `a`.
    pub fn from_unit(&self, a: u64) -> Result<usize> {
        let res: Vec<u64> = self.primes.iter().map(|&l| a % l).collect();
        self.from_residues(&res)
    }

    pub fn residues(&self, idx: usize) -> Vec<u64> {
        self.exps(idx).iter().zip(self.gens.iter().zip(&self.primes)).map(|(&e, (&g, &l))| powmod(g, e as u64, l)).collect()
    }

    pub fn mul_idx(&self, a: usize, b: usize) -> usize {
        let (ea, eb) = (self.exps(a), self.exps(b));
        self.index(&ea.iter().zip(&eb).map(|(x, y)| x + y).collect::<Vec<_>>())
    }

    pub fn pow_idx(&self, a: usize, k: i64) -> usize {
        let e = self.exps(a);
        self.index(
            &e.iter()
                .enumerate()
                .map(|(i, &x)| (((x as i64) * k).rem_euclid(self.order(i) as i64)) as u32)
                .collect::<Vec<_>>(),
        )
    }

    /// `σ_ℓ` for the `i`-th prime.
    pub fn sigma(&self, i: usize) -> usize {
        // H_2 is trivial, so σ_2 is the identity.
        if self.order(i) == 1 {
            0
        } else {
            self.strides[i]
        }
    }

    /// `Frob_q ∈ H_n`: the class of `q` in each `(Z/ℓ)^×`.
    pub fn frobenius(&self, q: u64) -> Result<usize> {
        if self.n % q == 0 {
            return invalid(format!("{q} divides the level {}", self.n));
        }
        self.from_unit(q)
    }

    /// `Frob_q` for `q | n`: the class of `q` in `H_{n/q}`, trivial at `q`.
    pub fn frobenius_away(&self, q: u64) -> Result<usize> {
        let iq = self.position(q).ok_or_else(|| Error::InvalidInput(format!("{q} does not divide {}", self.n)))?;
        let res: Vec<u64> = self.primes.iter().enumerate().map(|(i, &l)| if i == iq { 1 } else { q % l }).collect();
        self.from_residues(&res)
    }

    /// Divisors of `n` in increasing order.
    pub fn divisors(&self) -> Vec<u64> {
        let mut out = vec![1u64];
        for &l in &self.primes {
            let more: Vec<u64> = out.iter().map(|d| d * l).collect();
            out.extend(more);
        }
        out.sort_unstable();
        out
    }

    /// The level `d | n` with the same generators.
    pub fn sublevel(&self, d: u64) -> Result<Level> {
        if self.n % d != 0 {
            return invalid(format!("{d} does not divide {}", self.n));
        }
        let mut lv = Level::one();
        let mut gens = Vec::new();
        let mut ps = Vec::new();
        for (&l, &g) in self.primes.iter().zip(&self.gens) {
            if d % l == 0 {
                ps.push(l);
                gens.push(g);
            }
        }
        if !ps.is_empty() {
            let mut dlog = Vec::new();
            let mut strides = Vec::new();
            let mut size = 1;
            for &l in &ps {
                let i = self.position(l).expect("prime of n");
                dlog.push(self.dlog[i].clone());
                strides.push(size);
                size *= (l - 1) as usize;
            }
            lv = Level { n: d, primes: ps, gens, dlog, strides, size };
        }
        Ok(lv)
    }

    /// `H_d ↪ H_n` with trivial components away from `d`.
    pub fn embed_from(&self, sub: &Level, idx: usize) -> usize {
        let e = sub.exps(idx);
        let mut out = vec![0u32; self.primes.len()];
        for (k, &l) in sub.primes.iter().enumerate() {
            out[self.position(l).expect("sublevel")] = e[k];
        }
        self.index(&out)
    }

    /// `H_n ↠ H_d`.
    pub fn project_to(&self, sub: &Level, idx: usize) -> usize {
        let e = self.exps(idx);
        sub.index(&sub.primes.iter().map(|&l| e[self.position(l).expect("sublevel")]).collect::<Vec<_>>())
    }
}

/// The group ring `R[H_n]` over a quotient ring `R = Λ/I`. Coordinates are
/// laid out group element major: block `g` holds the `R`-coefficient of `g`.
#[derive(Debug)]
pub struct GroupRing {
    base: Arc<QuotientRing>,
    level: Level,
    bdim: usize,
    rel: OnceLock<Span>,
}

impl GroupRing {
    pub fn new(base: Arc<QuotientRing>, level: Level) -> GroupRing {
        let bdim = base.dim();
        GroupRing { base, level, bdim, rel: OnceLock::new() }
    }

    pub fn base(&self) -> &Arc<QuotientRing> {
        &self.base
    }
    pub fn level(&self) -> &Level {
        &self.level
    }

    pub fn block<'a>(&self, x: &'a [u64], g: usize) -> &'a [u64] {
        &x[g * self.bdim..(g + 1) * self.bdim]
    }

    /// `a·[g]`.
    pub fn embed(&self, a: &[u64], g: usize) -> Elem {
        let mut v = self.zero();
        v[g * self.bdim..(g + 1) * self.bdim].copy_from_slice(a);
        v
    }

    pub fn group_elem(&self, g: usize) -> Elem {
        self.embed(&self.base.one(), g)
    }

    /// The augmentation `Σ_g a_g`.
    pub fn aug(&self, x: &[u64]) -> Elem {
        let mut acc = self.base.zero();
        for g in 0..self.level.size {
            acc = self.base.add(&acc, self.block(x, g));
        }
        acc
    }

    /// `x·[h]`, a permutation of blocks.
    pub fn shift(&self, x: &[u64], h: usize) -> Elem {
        let mut v = self.zero();
        for g in 0..self.level.size {
            let t = self.level.mul_idx(g, h);
            v[t * self.bdim..(t + 1) * self.bdim].copy_from_slice(self.block(x, g));
        }
        v
    }

    /// `N_{H_n}·x = aug(x)·N_{H_n}`.
    pub fn apply_norm(&self, x: &[u64]) -> Elem {
        let a = self.aug(x);
        let mut v = Vec::with_capacity(self.dim());
        for _ in 0..self.level.size {
            v.extend_from_slice(&a);
        }
        v
    }

    /// `N_{H_n}` as an element.
    pub fn norm(&self) -> Elem {
        self.apply_norm(&self.one())
    }

    /// `N_{H_ℓ}·x` for the `i`-th prime.
    pub fn apply_partial_norm(&self, x: &[u64], i: usize) -> Elem {
        let s = self.level.sigma(i);
        let mut acc = x.to_vec();
        let mut cur = x.to_vec();
        for _ in 1..self.level.order(i) {
            cur = self.shift(&cur, s);
            acc = self.add(&acc, &cur);
        }
        acc
    }

    /// `D_ℓ = Σ_{ν=1}^{ℓ-2} ν σ_ℓ^ν` for the `i`-th prime.
    pub fn kolyvagin_d(&self, i: usize) -> Elem {
        self.apply_d(&self.one(), i)
    }

    /// `D_ℓ·x`.
    pub fn apply_d(&self, x: &[u64], i: usize) -> Elem {
        let s = self.level.sigma(i);
        let mut acc = self.zero();
        let mut cur = x.to_vec();
        for nu in 1..self.level.order(i) as u64 {
            cur = self.shift(&cur, s);
            acc = self.add(&acc, &self.scale(&cur, nu));
        }
        acc
    }

    /// `D_n·x = Π_ℓ D_ℓ·x`.
    pub fn apply_dn(&self, x: &[u64]) -> Elem {
        (0..self.level.primes.len()).fold(x.to_vec(), |acc, i| self.apply_d(&acc, i))
    }

    /// `Σ_k a_k [g]^k` for a polynomial with coefficients in `R`.
    pub fn eval_poly(&self, coeffs: &[Elem], g: usize) -> Elem {
        let mut v = self.zero();
        let mut h = 0usize;
        for a in coeffs {
            let blk = self.base.add(self.block(&v, h), a);
            v[h * self.bdim..(h + 1) * self.bdim].copy_from_slice(&blk);
            h = self.level.mul_idx(h, g);
        }
        v
    }

    /// True when `σ_ℓ x = x` for every generator.
    pub fn is_fixed(&self, x: &[u64]) -> bool {
        (0..self.level.primes.len()).all(|i| self.shift(x, self.level.sigma(i)) == x)
    }

    /// Applies a ring hom of the bases blockwise.
    pub fn map_base(&self, x: &[u64], hom: &crate::lambda::RingHom, tgt: &GroupRing) -> Elem {
        let mut v = Vec::with_capacity(tgt.dim());
        for g in 0..self.level.size {
            v.extend(hom.apply(tgt.base.as_ref(), self.block(x, g)));
        }
        v
    }
}

impl Ring for GroupRing {
    fn p(&self) -> u64 {
        self.base.p()
    }
    fn modulus(&self) -> u64 {
        self.base.modulus()
    }
    fn dim(&self) -> usize {
        self.bdim * self.level.size
    }
    fn one(&self) -> Elem {
        self.embed(&self.base.one(), 0)
    }
    fn reduce(&self, v: &mut [u64]) {
        for g in 0..self.level.size {
            self.base.reduce(&mut v[g * self.bdim..(g + 1) * self.bdim]);
        }
    }
    fn mul(&self, a: &[u64], b: &[u64]) -> Elem {
        let q = self.modulus();
        let n = self.level.size;
        let nz = |x: &[u64]| -> Vec<usize> { (0..n).filter(|&g| self.block(x, g).iter().any(|&c| c != 0)).collect() };
        let (sa, sb) = (nz(a), nz(b));
        let mut out = self.zero();
        for &g in &sa {
            for &h in &sb {
                let prod = self.base.mul(self.block(a, g), self.block(b, h));
                let t = self.level.mul_idx(g, h);
                for (o, c) in out[t * self.bdim..(t + 1) * self.bdim].iter_mut().zip(prod) {
                    *o = addmod(*o, c, q);
                }
            }
        }
        self.reduce(&mut out);
        out
    }
    fn relations(&self) -> &Span {
        self.rel.get_or_init(|| {
            let base_rows = self.base.relations().rows();
            let rows = (0..self.level.size).flat_map(|g| {
                base_rows.iter().map(move |r| {
                    let mut v = vec![0u64; self.bdim * self.level.size];
                    v[g * self.bdim..(g + 1) * self.bdim].copy_from_slice(r);
                    v
                })
            });
            Span::new(self.p(), self.modulus(), self.dim(), rows.collect::<Vec<_>>())
        })
    }
    fn algebra_generators(&self) -> Vec<Elem> {
        let mut g: Vec<Elem> = self.base.algebra_generators().iter().map(|x| self.embed(x, 0)).collect();
        g.extend((0..self.level.primes.len()).map(|i| self.group_elem(self.level.sigma(i))));
        g
    }
}

/// `e_{I,H_ℓ}`: for `z = Σ_j c_j σ_ℓ^j` in the augmentation ideal of
/// `R[H_ℓ]`, the coefficient `Σ_j j c_j` of `1 ⊗ σ_ℓ`. Requires
/// `ℓ - 1 = 0` in `R`, so that `𝔞/𝔞²` is free of rank one.
pub fn e_map(gr: &GroupRing, i: usize, z: &[u64]) -> Result<Elem> {
    let lv = gr.level();
    let base = gr.base();
    let l = lv.primes()[i];
    if !base.is_zero(&base.from_int(l as i64 - 1)) {
        return Err(Error::NotAdmissible(format!("{} - 1 is not zero in the base ring", l)));
    }
    if !base.is_zero(&gr.aug(z)) {
        return invalid("e-map argument is not in the augmentation ideal");
    }
    let mut acc = base.zero();
    for g in 0..lv.size() {
        let blk = gr.block(z, g);
        if blk.iter().all(|&c| c == 0) {
            continue;
        }
        let e = lv.exps(g);
        if e.iter().enumerate().any(|(k, &x)| k != i && x != 0) {
            return invalid("e-map argument is not supported on H_ℓ");
        }
        acc = base.add(&acc, &base.scale(blk, e[i] as u64));
    }
    Ok(acc)
}

/// An entry of a Frobenius matrix: a polynomial in the `Λ`-variables times
/// `Π (1 + x_v)^{k·s(ℓ)}`, where `s(ℓ)` is the exponent of the tautological
/// character at `Frob_ℓ`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "LamExprJson", into = "LamExprJson")]
pub struct LamExpr {
    pub poly: Poly,
    pub twist: Vec<(usize, i64)>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LamExprJson {
    Twisted { poly: Poly, twist: Vec<(usize, i64)> },
    Plain(Poly),
}

impl From<LamExprJson> for LamExpr {
    fn from(j: LamExprJson) -> Self {
        match j {
            LamExprJson::Plain(poly) => LamExpr { poly, twist: vec![] },
            LamExprJson::Twisted { poly, twist } => LamExpr { poly, twist },
        }
    }
}

impl From<LamExpr> for LamExprJson {
    fn from(e: LamExpr) -> Self {
        if e.twist.is_empty() {
            LamExprJson::Plain(e.poly)
        } else {
            LamExprJson::Twisted { poly: e.poly, twist: e.twist }
        }
    }
}

impl LamExpr {
    pub fn plain(poly: Poly) -> Self {
        LamExpr { poly, twist: vec![] }
    }

    pub fn eval(&self, real: &Realization, l: u64) -> Result<Elem> {
        let mut v = real.poly(&self.poly)?;
        for &(var, k) in &self.twist {
            let y = real.vars.get(var).ok_or_else(|| Error::InvalidInput(format!("twist variable {var} out of range")))?;
            v = real.ring.mul(&v, &twist_power(&real.ring, y, k, l)?);
        }
        Ok(v)
    }
}

/// `s(ℓ) mod p^{m-1}` with `(1+p)^{s(ℓ)} = pr(ℓ)`.
pub fn chi_exponent(p: u64, m: u32, l: u64) -> Result<u64> {
    gamma_exponent(p, m, principal_unit(p, m, l)?)
}

/// `(1 + y)^{k·s(ℓ)}` in `R`, with `s(ℓ)` taken to the `p`-adic precision
/// at which `(1 + y)^{p^e} = 1` in `R`.
pub fn twist_power(r: &QuotientRing, y: &[u64], k: i64, l: u64) -> Result<Elem> {
    let p = r.p();
    let u = r.add(&r.one(), y);
    let mut e = 0u32;
    let mut cur = u.clone();
    while cur != r.one() {
        cur = r.pow(&cur, p);
        e += 1;
        if e > 40 {
            return Err(Error::Precision("1 + y is not of finite p-power order".into()));
        }
    }
    if e == 0 {
        return Ok(r.one());
    }
    let qe = checked_pow(p, e).ok_or_else(|| Error::Precision("character precision overflow".into()))?;
    let s = chi_exponent(p, e + 1, l)?;
    let exp = mulmod(s, reduce_i64(k, qe), qe);
    Ok(r.pow(&u, exp))
}

pub type ExprMatrix = Vec<Vec<LamExpr>>;

/// Frobenius data standing in for a Galois representation on a free
/// `Λ`-module of rank `d`, over a finite pool of primes outside `Σ`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeformationData {
    pub d: usize,
    #[serde(default)]
    pub r: usize,
    pub sigma_set: Vec<u64>,
    pub frobenius: BTreeMap<u64, ExprMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<ExprMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conj: Option<ExprMatrix>,
}

/// The outcome of the admissibility test for one prime.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Admissibility {
    pub prime: u64,
    pub ell_minus_one_in_i: bool,
    pub euler_at_one_in_i: bool,
    pub fitt0_zero: bool,
    pub fitt1_unit: bool,
    pub admissible: bool,
}

fn realize_matrix(m: &ExprMatrix, real: &Realization, l: u64) -> Result<Vec<Vec<Elem>>> {
    m.iter().map(|row| row.iter().map(|e| e.eval(real, l)).collect()).collect()
}

fn minus_identity(r: &QuotientRing, a: &[Vec<Elem>], sign: i64) -> Vec<Vec<Elem>> {
    a.iter()
        .enumerate()
        .map(|(i, row)| row.iter().enumerate().map(|(j, x)| if i == j { r.sub(x, &r.from_int(sign)) } else { x.clone() }).collect())
        .collect()
}

/// `(Fitt_0 = 0, Fitt_1 = R)` for `R^d / (rows of A)`: free of rank one.
fn rank_one_cokernel(r: &QuotientRing, a: Vec<Vec<Elem>>) -> Result<(bool, bool)> {
    let d = a.len();
    let pm = PresentedModule { ngens: d, relations: a };
    let f0 = pm.fitting_ideal(r, 0)?;
    let f1 = pm.fitting_ideal(r, 1)?;
    Ok((f0.is_zero(r), f1.is_unit(r)))
}

impl DeformationData {
    pub fn validate(&self, p: u64) -> Result<()> {
        if !self.sigma_set.contains(&p) {
            return invalid("Σ must contain p");
        }
        let check_shape = |m: &ExprMatrix, what: &str| -> Result<()> {
            if m.len() != self.d || m.iter().any(|row| row.len() != self.d) {
                return invalid(format!("{what} must be a {0}x{0} matrix", self.d));
            }
            for e in m.iter().flatten() {
                if e.poly.max_var().map_or(false, |v| v >= self.r) || e.twist.iter().any(|&(v, _)| v >= self.r) {
                    return invalid(format!("{what} uses a variable beyond x_{}", self.r));
                }
            }
            Ok(())
        };
        for (&l, m) in &self.frobenius {
            if !is_prime(l) {
                return invalid(format!("pool entry {l} is not prime"));
            }
            if self.sigma_set.contains(&l) {
                return invalid(format!("pool prime {l} lies in Σ"));
            }
            check_shape(m, &format!("Frob_{l}"))?;
        }
        if let Some(t) = &self.tau {
            check_shape(t, "τ")?;
        }
        if let Some(c) = &self.conj {
            check_shape(c, "complex conjugation")?;
        }
        Ok(())
    }

    /// Pads every polynomial to `r` variables (JSON drops the count for
    /// constants).
    pub fn normalize(mut self) -> Result<Self> {
        let r = self.r;
        let fix = |m: &mut ExprMatrix| -> Result<()> {
            for e in m.iter_mut().flatten() {
                e.poly = e.poly.with_nvars(r)?;
            }
            Ok(())
        };
        for m in self.frobenius.values_mut() {
            fix(m)?;
        }
        if let Some(t) = self.tau.as_mut() {
            fix(t)?;
        }
        if let Some(c) = self.conj.as_mut() {
            fix(c)?;
        }
        Ok(self)
    }

    /// Reduces every coefficient modulo the working precision.
    pub fn reduce_coefficients(mut self, c: &crate::coeff::CoeffRing) -> Self {
        let fix = |m: &mut ExprMatrix| {
            for e in m.iter_mut().flatten() {
                e.poly = e.poly.add(&Poly::zero(e.poly.nvars()), c);
            }
        };
        self.frobenius.values_mut().for_each(fix);
        self.tau.as_mut().map(fix);
        self.conj.as_mut().map(fix);
        self
    }

    pub fn pool(&self) -> Vec<u64> {
        self.frobenius.keys().copied().collect()
    }

    /// `ρ(Frob_ℓ)` realized in a finite ring.
    pub fn frobenius_matrix(&self, l: u64, real: &Realization) -> Result<Vec<Vec<Elem>>> {
        let m = self.frobenius.get(&l).ok_or_else(|| Error::InvalidInput(format!("{l} is not in the prime pool")))?;
        realize_matrix(m, real, l)
    }

    /// True when every pool matrix has unit determinant in `real`.
    pub fn matrices_invertible(&self, real: &Realization) -> Result<bool> {
        for &l in self.frobenius.keys() {
            let a = self.frobenius_matrix(l, real)?;
            if !real.ring.is_unit(&crate::fitting::det(real.ring.as_ref(), &a)) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `P_ℓ(x) = det(1 - xρ(Frob_ℓ))` as `[a_0, ..., a_d]`.
    pub fn euler_poly(&self, l: u64, real: &Realization) -> Result<Vec<Elem>> {
        let a = self.frobenius_matrix(l, real)?;
        Ok(charpoly(real.ring.as_ref(), &a))
    }

    /// The dual Euler polynomial `Σ a_k ℓ^{-k} x^k`.
    pub fn dual_euler_poly(&self, l: u64, real: &Realization) -> Result<Vec<Elem>> {
        let r = &real.ring;
        if l % r.p() == 0 {
            return invalid("ℓ must be prime to p");
        }
        let li = inv_mod(l % r.modulus(), r.modulus()).expect("unit");
        let mut w = 1u64;
        let mut out = Vec::new();
        for a in self.euler_poly(l, real)? {
            out.push(r.scale(&a, w));
            w = mulmod(w, li, r.modulus());
        }
        Ok(out)
    }

    /// Admissibility of `ℓ` for `I`, where `real` realizes `Λ → Λ/I`.
    pub fn prime_in_p(&self, l: u64, real: &Realization) -> Result<Admissibility> {
        let r = real.ring.as_ref();
        if self.sigma_set.contains(&l) {
            return invalid(format!("{l} lies in Σ"));
        }
        let a = self.frobenius_matrix(l, real)?;
        let ell = r.is_zero(&r.from_int(l as i64 - 1));
        let p1 = charpoly(r, &a).iter().fold(r.zero(), |acc, c| r.add(&acc, c));
        let at_one = r.is_zero(&p1);
        let (f0, f1) = rank_one_cokernel(r, minus_identity(r, &a, 1))?;
        Ok(Admissibility { prime: l, ell_minus_one_in_i: ell, euler_at_one_in_i: at_one, fitt0_zero: f0, fitt1_unit: f1, admissible: ell && at_one && f0 && f1 })
    }

    /// Admissible pool primes for `I`.
    pub fn admissible_primes(&self, real: &Realization) -> Result<Vec<u64>> {
        let mut out = Vec::new();
        for &l in self.frobenius.keys() {
            if self.prime_in_p(l, real)?.admissible {
                out.push(l);
            }
        }
        Ok(out)
    }

    /// Squarefree products of at most `i_max` admissible pool primes, sorted.
    pub fn enumerate_levels(&self, real: &Realization, i_max: usize) -> Result<Vec<u64>> {
        Ok(levels_from_primes(&self.admissible_primes(real)?, i_max))
    }

    /// `T/(τ - 1)T` free of rank one.
    pub fn check_tau(&self, real: &Realization) -> Result<Option<bool>> {
        let Some(t) = &self.tau else { return Ok(None) };
        let r = real.ring.as_ref();
        let a = realize_matrix(t, real, 1)?;
        let (f0, f1) = rank_one_cokernel(r, minus_identity(r, &a, 1))?;
        Ok(Some(f0 && f1))
    }

    /// `c² = 1` and `T^- = T/(c + 1)T` free of rank one.
    pub fn check_conj(&self, real: &Realization) -> Result<Option<bool>> {
        let Some(c) = &self.conj else { return Ok(None) };
        let r = real.ring.as_ref();
        let a = realize_matrix(c, real, 1)?;
        let d = a.len();
        let squared_is_one = (0..d).all(|i| {
            (0..d).all(|j| {
                let s = (0..d).fold(r.zero(), |acc, k| r.add(&acc, &r.mul(&a[i][k], &a[k][j])));
                s == if i == j { r.one() } else { r.zero() }
            })
        });
        let (f0, f1) = rank_one_cokernel(r, minus_identity(r, &a, -1))?;
        Ok(Some(squared_is_one && f0 && f1))
    }

    /// Synthetic data: `ρ(Frob_ℓ)` is conjugate by `[[1, b], [0, 1]]` to
    /// `diag(1 + (ℓ-1)a, u)` with `u - 1` a unit (rank one: `1 + (ℓ-1)a`).
    /// Every pool prime congruent to 1 modulo `I ∩ Z` is then admissible.
    pub fn synthetic(p: u64, r: usize, d: usize, pool: &[u64], seed: u64) -> Result<DeformationData> {
        if d == 0 || d > 2 {
            return invalid("synthetic data supports d = 1 or 2");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nv = r.max(1);
        let mut frobenius = BTreeMap::new();
        for &l in pool {
            let lm1 = l as i64 - 1;
            let mut a: Vec<i64> = (0..nv).map(|_| rng.gen_range(0..p as i64)).collect();
            if r == 0 {
                a = vec![0];
            }
            let i1 = Poly::linear(lm1 * rng.gen_range(0..p as i64), &a.iter().map(|&x| lm1 * x).collect::<Vec<_>>()).with_nvars(r)?;
            let top = LamExpr::plain(add_int(&i1, 1));
            if d == 1 {
                frobenius.insert(l, vec![vec![top]]);
                continue;
            }
            let mut ucoef: Vec<i64> = (0..nv).map(|_| rng.gen_range(0..p as i64)).collect();
            if r == 0 {
                ucoef = vec![0];
            }
            let u = Poly::linear(rng.gen_range(2..p as i64), &ucoef).with_nvars(r)?;
            let b = rng.gen_range(0..p as i64);
            // b·(u - 1 - i1) above the diagonal.
            let off = scale_int(&sub_polys(&add_int(&u, -1), &i1), b);
            frobenius.insert(l, vec![vec![top, LamExpr::plain(off)], vec![LamExpr::plain(Poly::zero(r)), LamExpr::plain(u)]]);
        }
        let diag = |x: i64, y: i64| vec![vec![LamExpr::plain(Poly::int(r, x)), LamExpr::plain(Poly::zero(r))], vec![LamExpr::plain(Poly::zero(r)), LamExpr::plain(Poly::int(r, y))]];
        Ok(DeformationData {
            d,
            r,
            sigma_set: vec![p],
            frobenius,
            tau: if d == 2 { Some(diag(1, 2)) } else { None },
            conj: if d == 2 { Some(diag(1, -1)) } else { None },
        })
    }
}

fn add_int(f: &Poly, c: i64) -> Poly {
    let n = f.nvars();
    Poly::from_terms(n, f.terms().map(|(e, x)| (e.clone(), x.clone())).chain(std::iter::once((vec![0; n], vec![c]))))
}

fn scale_int(f: &Poly, c: i64) -> Poly {
    Poly::from_terms(f.nvars(), f.terms().map(|(e, x)| (e.clone(), x.iter().map(|v| v * c).collect())))
}

fn sub_polys(f: &Poly, g: &Poly) -> Poly {
    Poly::from_terms(f.nvars(), f.terms().map(|(e, x)| (e.clone(), x.clone())).chain(g.terms().map(|(e, x)| (e.clone(), x.iter().map(|v| -v).collect()))))
}

/// All squarefree products of at most `i_max` of the given primes, sorted.
pub fn levels_from_primes(primes: &[u64], i_max: usize) -> Vec<u64> {
    let mut out = vec![(1u64, 0usize)];
    for &l in primes {
        let more: Vec<(u64, usize)> = out.iter().filter(|&&(_, k)| k < i_max).map(|&(n, k)| (n * l, k + 1)).collect();
        out.extend(more);
    }
    let mut v: Vec<u64> = out.into_iter().map(|(n, _)| n).collect();
    v.sort_unstable();
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::CoeffRing;
    use crate::ring::Ideal;

    fn base(m: &[u32]) -> Arc<QuotientRing> {
        Arc::new(QuotientRing::standard(&CoeffRing::zp(5, 3).unwrap(), 1, m).unwrap())
    }

    #[test]
    fn frobenius_examples() {
        let lv = Level::new(5, &[]).unwrap();
        assert_eq!(lv.generators(), &[2]);
        assert_eq!(lv.exps(lv.frobenius(2).unwrap()), vec![1]);
        assert_eq!(lv.frobenius(11).unwrap(), 0);
        assert_eq!(Level::new(3, &[]).unwrap().frobenius(7).unwrap(), 0);
        assert!(lv.frobenius(5).is_err());
        assert!(Level::new(12, &[]).is_err());
        assert!(Level::new(15, &[5]).is_err());
    }

    #[test]
    fn kolyvagin_operator_examples() {
        let b = base(&[1, 1]);
        let gr = GroupRing::new(b.clone(), Level::new(5, &[]).unwrap());
        let d = gr.kolyvagin_d(0);
        let s = gr.level().sigma(0);
        let expect: Elem = [(1u64, 1i64), (2, 2), (3, 3)].iter().fold(gr.zero(), |acc, &(k, c)| gr.add(&acc, &gr.scale(&gr.group_elem(gr.level().pow_idx(s, k as i64)), c as u64)));
        assert_eq!(d, expect);
        let gr3 = GroupRing::new(b, Level::new(3, &[]).unwrap());
        assert_eq!(gr3.kolyvagin_d(0), gr3.group_elem(gr3.level().sigma(0)));
    }

    #[test]
    fn telescoping_and_augmentations() {
        let b = base(&[2, 2]);
        for l in [3u64, 7, 11, 13, 17, 19, 23, 29, 31] {
            let gr = GroupRing::new(b.clone(), Level::new(l, &[5]).unwrap());
            let s = gr.group_elem(gr.level().sigma(0));
            let d = gr.kolyvagin_d(0);
            let lhs = gr.mul(&gr.sub(&s, &gr.one()), &d);
            let rhs = gr.sub(&gr.from_int(l as i64 - 1), &gr.norm());
            assert_eq!(lhs, rhs, "ℓ = {l}");
            assert_eq!(gr.aug(&d), b.from_int(((l - 1) * (l - 2) / 2) as i64));
            assert_eq!(gr.aug(&gr.norm()), b.from_int(l as i64 - 1));
        }
        let gr = GroupRing::new(b.clone(), Level::new(3 * 7, &[5]).unwrap());
        assert_eq!(gr.aug(&gr.norm()), b.from_int(12));
    }

    #[test]
    fn e_map_examples_and_kernel() {
        let b = base(&[1, 2]);
        let gr = GroupRing::new(b.clone(), Level::new(11, &[5]).unwrap());
        let s = gr.level().sigma(0);
        for k in 0..10i64 {
            let z = gr.sub(&gr.group_elem(gr.level().pow_idx(s, k)), &gr.one());
            assert_eq!(e_map(&gr, 0, &z).unwrap(), b.from_int(k));
        }
        let sm1 = gr.sub(&gr.group_elem(s), &gr.one());
        let sq = gr.mul(&sm1, &sm1);
        assert!(b.is_zero(&e_map(&gr, 0, &gr.mul(&sq, &gr.embed(&b.var(0), 3))).unwrap()));
        // z = P(σ^t) − P(1) with P = 1 − ux gives −u·t.
        let u = b.add(&b.from_int(2), &b.var(0));
        for t in 0..10i64 {
            let pz = gr.eval_poly(&[b.one(), b.neg(&u)], gr.level().pow_idx(s, t));
            let z = gr.sub(&pz, &gr.embed(&b.sub(&b.one(), &u), 0));
            assert_eq!(e_map(&gr, 0, &z).unwrap(), b.scale(&b.neg(&u), t as u64));
        }
        // The kernel of e on the augmentation ideal is 𝔞².
        let aug_ideal = Ideal::generated(&gr, &[sm1.clone()]);
        let sq_ideal = Ideal::generated(&gr, &[sq]);
        let gens = aug_ideal.generators(&gr);
        let vals: Vec<Elem> = gens.iter().map(|z| e_map(&gr, 0, z).unwrap()).collect();
        let ker = crate::linalg::left_kernel(gr.p(), gr.modulus(), &vals, b.dim(), b.relations().rows());
        for lam in ker.rows() {
            let z = crate::linalg::combine(lam, &gens, gr.dim(), gr.modulus());
            assert!(sq_ideal.contains(&gr.relations().reduced(&z)));
        }
        for z in sq_ideal.generators(&gr) {
            assert!(b.is_zero(&e_map(&gr, 0, &z).unwrap()));
        }
        let z1 = gr.embed(&b.var(0), 4);
        let z1 = gr.sub(&z1, &gr.embed(&b.var(0), 0));
        let z2 = gr.sub(&gr.group_elem(7), &gr.one());
        assert_eq!(e_map(&gr, 0, &gr.add(&z1, &z2)).unwrap(), b.add(&e_map(&gr, 0, &z1).unwrap(), &e_map(&gr, 0, &z2).unwrap()));
    }

    fn diag_data(d1: Poly, d2: Poly, l: u64) -> DeformationData {
        let r = d1.nvars();
        let mut frobenius = BTreeMap::new();
        frobenius.insert(l, vec![vec![LamExpr::plain(d1), LamExpr::plain(Poly::zero(r))], vec![LamExpr::plain(Poly::zero(r)), LamExpr::plain(d2)]]);
        DeformationData { d: 2, r, sigma_set: vec![5], frobenius, tau: None, conj: None }
    }

    #[test]
    fn euler_polynomials() {
        let c = CoeffRing::zp(5, 3).unwrap();
        let b = Arc::new(QuotientRing::standard(&c, 1, &[2, 1]).unwrap());
        let real = Realization::standard(b.clone());
        let t = diag_data(Poly::int(1, 1), Poly::int(1, 2), 11);
        assert_eq!(t.euler_poly(11, &real).unwrap(), vec![b.one(), b.from_int(-3), b.from_int(2)]);
        let id = diag_data(Poly::int(1, 1), Poly::int(1, 1), 11);
        assert_eq!(id.euler_poly(11, &real).unwrap(), vec![b.one(), b.from_int(-2), b.one()]);
        let inv11 = inv_mod(11, 125).unwrap();
        assert_eq!(
            id.dual_euler_poly(11, &real).unwrap(),
            vec![b.one(), b.scale(&b.from_int(-2), inv11), b.from_int(mulmod(inv11, inv11, 125) as i64)]
        );
        let t101 = diag_data(Poly::int(1, 3), Poly::int(1, 1), 101);
        let c3 = CoeffRing::zp(5, 3).unwrap();
        let b2 = Arc::new(QuotientRing::standard(&c3, 1, &[2, 1]).unwrap());
        let real2 = Realization::standard(b2);
        assert_eq!(t101.euler_poly(101, &real2).unwrap(), t101.dual_euler_poly(101, &real2).unwrap());
        assert!(t.euler_poly(13, &real).is_err());
    }

    #[test]
    fn admissibility_examples() {
        let c = CoeffRing::zp(5, 3).unwrap();
        let b = Arc::new(QuotientRing::standard(&c, 1, &[1, 2]).unwrap());
        let real = Realization::standard(b);
        let good = diag_data(Poly::int(1, 1), Poly::linear(2, &[1]), 11);
        assert!(good.prime_in_p(11, &real).unwrap().admissible);
        let id = diag_data(Poly::int(1, 1), Poly::int(1, 1), 11);
        let a = id.prime_in_p(11, &real).unwrap();
        assert!(!a.admissible && !a.fitt1_unit);
        assert_eq!(id.enumerate_levels(&real, 2).unwrap(), vec![1]);
        assert_eq!(levels_from_primes(&[11, 31], 2), vec![1, 11, 31, 341]);
        assert_eq!(levels_from_primes(&[11, 31], 0), vec![1]);
    }

    #[test]
    fn admissibility_is_monotone_along_reductions() {
        let c = CoeffRing::zp(5, 4).unwrap();
        let pool = [11u64, 31, 101, 151];
        let t = DeformationData::synthetic(5, 1, 2, &pool, 7).unwrap();
        t.validate(5).unwrap();
        let depths = [[1u32, 1], [1, 2], [2, 2], [2, 3], [3, 3]];
        let sets: Vec<Vec<u64>> = depths
            .iter()
            .map(|m| t.admissible_primes(&Realization::standard(Arc::new(QuotientRing::standard(&c, 1, m).unwrap()))).unwrap())
            .collect();
        for w in sets.windows(2) {
            assert!(w[1].iter().all(|l| w[0].contains(l)));
        }
        assert_eq!(sets[0], vec![11, 31, 101, 151]);
        assert_eq!(sets[2], vec![101, 151]);
        let real = Realization::standard(Arc::new(QuotientRing::standard(&c, 1, &[2, 2]).unwrap()));
        assert!(t.matrices_invertible(&real).unwrap());
        assert_eq!(t.check_tau(&real).unwrap(), Some(true));
        assert_eq!(t.check_conj(&real).unwrap(), Some(true));
    }

    #[test]
    fn tautological_character() {
        assert_eq!(chi_exponent(5, 3, 6).unwrap() % 5, 1);
        let c = CoeffRing::zp(5, 4).unwrap();
        let b = QuotientRing::standard(&c, 1, &[3, 4]).unwrap();
        let y = b.var(0);
        // pr(ℓ) = 1 + p gives the factor 1 + x.
        let l = (0..).map(|k| 6 + 15625 * k).find(|&l| is_prime(l)).unwrap();
        assert_eq!(twist_power(&b, &y, 1, l).unwrap(), b.add(&b.one(), &y));
        let inv = twist_power(&b, &y, -1, l).unwrap();
        assert_eq!(b.mul(&inv, &b.add(&b.one(), &y)), b.one());
    }

    #[test]
    fn json_round_trip() {
        let t = DeformationData::synthetic(5, 2, 2, &[11, 31], 3).unwrap();
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(serde_json::from_str::<DeformationData>(&s).unwrap().normalize().unwrap(), t);
        let e = LamExpr { poly: Poly::linear(1, &[0, 2]), twist: vec![(1, 1)] };
        let s = serde_json::to_string(&e).unwrap();
        assert_eq!(serde_json::from_str::<LamExpr>(&s).unwrap(), e);
    }
}
