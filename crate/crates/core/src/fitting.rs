//! Fitting ideals of finitely presented modules, the structure data of
//! one-variable torsion modules, and lengths of specializations along
//! linear elements.

use crate::arith::*;
use crate::coeff::{CoeffElem, CoeffRing, ExtKind};
use crate::error::{invalid, Error, Result};
use crate::lambda::QuotientRing;
use crate::linalg::Span;
use crate::poly::{coords_of, Poly};
use crate::ring::{Elem, Ideal, Ring};
use serde::{Deserialize, Serialize};

/// Largest minor size evaluated.
pub const MINOR_BUDGET: usize = 6;
/// Largest number of minors evaluated for one Fitting ideal.
pub const MINOR_COUNT_BUDGET: usize = 20_000;

/// Coefficients of `det(tI - A)` from the leading term down, by the
/// division-free Berkowitz recurrence.
pub fn charpoly<R: Ring + ?Sized>(r: &R, a: &[Vec<Elem>]) -> Vec<Elem> {
    let n = a.len();
    let mut p: Vec<Elem> = vec![r.one()];
    for k in 0..n {
        let mut t = vec![r.one(), r.neg(&a[k][k])];
        let mut v: Vec<Elem> = (0..k).map(|i| a[i][k].clone()).collect();
        for _ in 0..k {
            let mut s = r.zero();
            for i in 0..k {
                s = r.add(&s, &r.mul(&a[k][i], &v[i]));
            }
            t.push(r.neg(&s));
            let nv: Vec<Elem> = (0..k)
                .map(|i| {
                    let mut acc = r.zero();
                    for j in 0..k {
                        acc = r.add(&acc, &r.mul(&a[i][j], &v[j]));
                    }
                    acc
                })
                .collect();
            v = nv;
        }
        let mut np = Vec::with_capacity(k + 2);
        for i in 0..k + 2 {
            let mut acc = r.zero();
            for j in 0..=k.min(i) {
                if i - j < t.len() {
                    acc = r.add(&acc, &r.mul(&t[i - j], &p[j]));
                }
            }
            np.push(acc);
        }
        p = np;
    }
    p
}

pub fn det<R: Ring + ?Sized>(r: &R, a: &[Vec<Elem>]) -> Elem {
    let n = a.len();
    if n == 0 {
        return r.one();
    }
    let c = charpoly(r, a).pop().expect("nonempty");
    if n % 2 == 0 {
        c
    } else {
        r.neg(&c)
    }
}

/// `det(1 - xA) = Σ_k a_k x^k`, returned as `[a_0, ..., a_n]`.
pub fn reverse_charpoly<R: Ring + ?Sized>(r: &R, a: &[Vec<Elem>]) -> Vec<Elem> {
    charpoly(r, a)
}

/// A module `R^n / (rows of relations)`.
#[derive(Clone, Debug)]
pub struct PresentedModule {
    pub ngens: usize,
    pub relations: Vec<Vec<Elem>>,
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] != i + n - k {
                break;
            }
            if i == 0 && cur[0] == n - k {
                return out;
            }
        }
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let mut r: usize = 1;
    for i in 0..k {
        r = r.saturating_mul(n - i) / (i + 1);
    }
    r
}

impl PresentedModule {
    /// `Fitt_i`: the ideal of `(n-i)`-minors of the relation matrix.
    pub fn fitting_ideal<R: Ring + ?Sized>(&self, r: &R, i: usize) -> Result<Ideal> {
        let n = self.ngens;
        if i >= n {
            return Ok(Ideal::unit(r));
        }
        let k = n - i;
        let m = self.relations.len();
        if k > m {
            return Ok(Ideal::zero(r));
        }
        if k > MINOR_BUDGET {
            return Err(Error::Budget(format!("minors of size {k} exceed the budget {MINOR_BUDGET}")));
        }
        let count = binomial(m, k).saturating_mul(binomial(n, k));
        if count > MINOR_COUNT_BUDGET {
            return Err(Error::Budget(format!("{count} minors exceed the budget")));
        }
        let mut minors = Vec::new();
        for rows in combinations(m, k) {
            for cols in combinations(n, k) {
                let sub: Vec<Vec<Elem>> = rows.iter().map(|&a| cols.iter().map(|&b| self.relations[a][b].clone()).collect()).collect();
                let d = det(r, &sub);
                if !r.is_zero(&d) {
                    minors.push(d);
                }
            }
        }
        Ok(Ideal::generated(r, &minors))
    }

    /// `Fitt_0 ⊆ Fitt_1 ⊆ ... ⊆ Fitt_n = R`, with the chain checked.
    pub fn fitting_chain<R: Ring + ?Sized>(&self, r: &R) -> Result<Vec<Ideal>> {
        let chain = (0..=self.ngens).map(|i| self.fitting_ideal(r, i)).collect::<Result<Vec<_>>>()?;
        for w in chain.windows(2) {
            if !w[0].is_subset(&w[1]) {
                return Err(Error::Verification("Fitting ideals are not increasing".into()));
            }
        }
        Ok(chain)
    }

    /// Minimal number of generators over the local ring `R`: the least `i`
    /// with `Fitt_i = R`, cross-checked against `n - rank_k(A mod 𝔪)`.
    pub fn min_generators(&self, r: &QuotientRing) -> Result<usize> {
        let n = self.ngens;
        let mut by_fitting = n;
        for i in 0..=n {
            if self.fitting_ideal(r, i)?.is_unit(r) {
                by_fitting = i;
                break;
            }
        }
        let by_residue = n - residue_rank(r, &self.relations, n)?;
        if by_fitting != by_residue {
            return Err(Error::Verification(format!(
                "Fitting ideals give {by_fitting} generators, residue rank gives {by_residue}"
            )));
        }
        Ok(by_fitting)
    }
}

/// Rank over the residue field `k` of a matrix, via the `F_p`-span of its
/// rows and their multiples by a basis of `k`.
pub fn residue_rank(r: &QuotientRing, rows: &[Vec<Elem>], ncols: usize) -> Result<usize> {
    let c = r.coeff();
    let p = c.p();
    let f = c.residue_degree() as usize;
    let kfield = if c.kind() == ExtKind::Unramified { Some(c.with_precision(1)?) } else { None };
    let mut vecs = Vec::new();
    for row in rows {
        let res: Vec<Vec<u64>> = row.iter().map(|x| r.residue(x)).collect();
        for j in 0..f {
            let mut v = Vec::with_capacity(ncols * f);
            for x in &res {
                let y = match &kfield {
                    Some(k) => {
                        let mut tj = k.one();
                        for _ in 0..j {
                            tj = k.mul(&tj, &k.generator());
                        }
                        k.mul(x, &tj)
                    }
                    None => x.clone(),
                };
                v.extend(y);
            }
            vecs.push(v);
        }
    }
    let s = Span::new(p, p, ncols * f, vecs);
    Ok(s.rows().len() / f)
}

/// Cyclic decomposition `M ~ ⊕ Λ/(d_j)` of a torsion module over
/// `Λ = O[[x_1]]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureData {
    pub factors: Vec<Poly>,
}

impl StructureData {
    /// The characteristic ideal generator `Π d_j`.
    pub fn char_poly(&self, c: &CoeffRing) -> Poly {
        self.factors.iter().fold(Poly::int(1, 1), |acc, d| acc.mul(d, c))
    }

    /// True when `d_1 | d_2 | ...`, each division certified exactly.
    pub fn is_chain(&self, c: &CoeffRing) -> Result<bool> {
        for w in self.factors.windows(2) {
            if poly_divide(&w[1], &w[0], c)?.is_none() {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `v_f(Π d_j)`, the local exponent of the characteristic ideal at `f`.
    pub fn local_exponent(&self, f: &Poly, c: &CoeffRing) -> Result<u32> {
        self.factors.iter().map(|d| f_adic_valuation(d, f, c)).sum()
    }
}

/// Exact division `a / b` in `O[x_1]` at working precision, by a linear
/// system for the quotient's coefficients. `None` if `b ∤ a`.
pub fn poly_divide(a: &Poly, b: &Poly, c: &CoeffRing) -> Result<Option<Poly>> {
    let a = a.with_nvars(1)?;
    let b = b.with_nvars(1)?;
    if b.is_zero() {
        return invalid("division by zero polynomial");
    }
    if a.is_zero() {
        return Ok(Some(Poly::zero(1)));
    }
    let da = a.degree_in(0) as usize;
    let db = b.degree_in(0) as usize;
    if db > da {
        return Ok(None);
    }
    let nq = da - db + 1;
    let deg = c.degree();
    let bc: Vec<CoeffElem> = (0..=db).map(|k| c.from_coords(&b.coeff_of_power(0, k as u32).constant_term())).collect::<Result<_>>()?;
    let mut t_pows = vec![c.one()];
    for _ in 1..deg {
        let last = t_pows.last().unwrap().clone();
        t_pows.push(c.mul(&last, &c.generator()));
    }
    let width = (da + 1) * deg;
    let mut gens = Vec::new();
    for j in 0..nq {
        for tp in &t_pows {
            let mut row = vec![0u64; width];
            for (k, bk) in bc.iter().enumerate() {
                let prod = c.mul(bk, tp);
                for l in 0..deg {
                    row[(j + k) * deg + l] = prod[l];
                }
            }
            gens.push(row);
        }
    }
    let mut target = vec![0u64; width];
    for k in 0..=da {
        let ak = c.from_coords(&a.coeff_of_power(0, k as u32).constant_term())?;
        target[k * deg..(k + 1) * deg].copy_from_slice(&ak);
    }
    let Some(lam) = crate::linalg::solve(c.p(), c.modulus(), &gens, width, &[], &target) else {
        return Ok(None);
    };
    let mut terms = Vec::new();
    for j in 0..nq {
        let mut coef = c.zero();
        for (l, tp) in t_pows.iter().enumerate() {
            coef = c.add(&coef, &c.scale(tp, lam[j * deg + l]));
        }
        terms.push((vec![j as u32], coords_of(&coef)));
    }
    Ok(Some(Poly::from_terms(1, terms)))
}

/// Largest `k` with `f^k | d`, bounded by degree and precision.
pub fn f_adic_valuation(d: &Poly, f: &Poly, c: &CoeffRing) -> Result<u32> {
    let d = d.with_nvars(1)?;
    if d.is_zero() {
        return Err(Error::Precision("valuation of zero".into()));
    }
    let f = f.with_nvars(1)?;
    if f.is_constant() {
        let v = c.valuation(&c.from_coords(&f.constant_term())?).ok_or_else(|| Error::InvalidInput("f is zero".into()))?;
        if v == 0 {
            return invalid("f must not be a unit");
        }
        let min = d
            .terms()
            .map(|(_, x)| c.valuation(&c.from_coords(x).expect("fits")).unwrap_or(c.cap()))
            .min()
            .unwrap_or(0);
        return Ok(min / v);
    }
    let mut k = 0;
    let mut cur = d;
    while let Some(qt) = poly_divide(&cur, &f, c)? {
        if qt.is_zero() {
            break;
        }
        k += 1;
        cur = qt;
        if k > 64 {
            return Err(Error::Precision("unbounded divisibility".into()));
        }
    }
    Ok(k)
}

/// Outcome of the irreducibility certification of a height-one prime.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Irreducibility {
    pub certified: bool,
    pub reason: String,
}

/// Certifies that `f ∈ O[x_1]` generates a prime: `f = ϖ`, `f` linear with
/// unit leading coefficient, Eisenstein, or a Newton polygon with a single
/// segment whose slope has full denominator (degree at most 3).
pub fn certify_prime(f: &Poly, c: &CoeffRing) -> Result<Irreducibility> {
    let f = f.with_nvars(1)?;
    if f.is_constant() {
        let v = c.valuation(&c.from_coords(&f.constant_term())?);
        let ok = v == Some(1);
        return Ok(Irreducibility { certified: ok, reason: if ok { "uniformizer".into() } else { "constant of valuation != 1".into() } });
    }
    let d = f.degree_in(0);
    let coeffs: Vec<CoeffElem> = (0..=d).map(|k| c.from_coords(&f.coeff_of_power(0, k).constant_term())).collect::<Result<_>>()?;
    if !c.is_unit(&coeffs[d as usize]) {
        return Ok(Irreducibility { certified: false, reason: "leading coefficient is not a unit".into() });
    }
    if d == 1 {
        return Ok(Irreducibility { certified: true, reason: "linear".into() });
    }
    if d > 3 {
        return Ok(Irreducibility { certified: false, reason: "degree above 3".into() });
    }
    let vals: Vec<Option<u32>> = coeffs.iter().map(|x| c.valuation(x)).collect();
    let v0 = match vals[0] {
        Some(v) if v > 0 => v,
        _ => return Ok(Irreducibility { certified: false, reason: "not distinguished".into() }),
    };
    // Single segment from (0, v0) to (d, 0): every interior point lies on or above it.
    let single = (1..d as usize).all(|k| match vals[k] {
        None => true,
        Some(v) => (v as u64) * d as u64 >= (v0 as u64) * (d as u64 - k as u64),
    });
    let full_denominator = single && gcd(v0 as u64, d as u64) == 1;
    Ok(Irreducibility {
        certified: full_denominator,
        reason: if full_denominator { "Newton polygon is one segment of slope with full denominator".into() } else { "no certificate".into() },
    })
}

/// Length of `O_N / π_N(g)` where `π_N: Λ → O_N = Λ/(f_N)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SpecLength {
    /// `None` when `π_N(g)` vanishes at working precision.
    pub length: Option<u32>,
}

/// For `f = ϖ`, `f_N = ϖ + x_1^N` and `O_N = O[ϖ^{1/N}]`; for a linear `f`
/// with unit `x_1`-coefficient, `f_N = f + ϖ^N` and `O_N = O`.
pub fn specialization_length(g: &Poly, f: &Poly, n: u32, c: &CoeffRing) -> Result<SpecLength> {
    let g = g.with_nvars(1)?;
    let f = f.with_nvars(1)?;
    if n == 0 {
        return invalid("N must be positive");
    }
    if f.is_constant() {
        if c.valuation(&c.from_coords(&f.constant_term())?) != Some(1) {
            return invalid("constant f must be a uniformizer");
        }
        let unif = c.from_coords(&f.constant_term())?;
        let minus_f = c.neg(&unif);
        let mut reduced: Vec<CoeffElem> = vec![c.zero(); n as usize];
        for (e, x) in g.terms() {
            let k = e[0];
            let (qk, s) = (k / n, (k % n) as usize);
            let term = c.mul(&c.from_coords(x)?, &c.pow(&minus_f, qk as u64));
            reduced[s] = c.add(&reduced[s], &term);
        }
        let len = reduced
            .iter()
            .enumerate()
            .filter_map(|(s, x)| c.valuation(x).map(|v| n * v + s as u32))
            .min();
        return Ok(SpecLength { length: len });
    }
    if f.degree_in(0) != 1 {
        return invalid("f must be ϖ or a linear element");
    }
    let a1 = c.from_coords(&f.coeff_of_power(0, 1).constant_term())?;
    let a0 = c.from_coords(&f.coeff_of_power(0, 0).constant_term())?;
    if !c.is_unit(&a1) || c.is_unit(&a0) {
        return invalid("linear f needs a unit x_1-coefficient and constant in the maximal ideal");
    }
    let shifted = c.add(&a0, &c.pow(&c.uniformizer(), n as u64));
    let root = c.neg(&c.mul(&shifted, &c.inv(&a1)?));
    let mut val = c.zero();
    for (e, x) in g.terms() {
        val = c.add(&val, &c.mul(&c.from_coords(x)?, &c.pow(&root, e[0] as u64)));
    }
    Ok(SpecLength { length: c.valuation(&val) })
}

/// Finite-`N` evidence for the asymptotic `ᾱ(N) ~ αN` of the lengths of
/// `Fitt_i` after specialization.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExponentEstimate {
    pub alpha: Option<u32>,
    pub lengths: Vec<(u32, Option<u32>)>,
    pub residuals: Vec<(u32, i64)>,
    pub stabilized: bool,
}

/// `ᾱ(N) = Σ` of the `s - i` smallest specialized lengths of the cyclic
/// factors; `α` is read off once the first differences agree three times.
pub fn estimate_local_exponent(s: &StructureData, f: &Poly, i: usize, ns: &[u32], c: &CoeffRing) -> Result<ExponentEstimate> {
    let mut lengths = Vec::new();
    for &n in ns {
        let mut ls = Vec::new();
        let mut infinite = false;
        for d in &s.factors {
            match specialization_length(d, f, n, c)?.length {
                Some(l) => ls.push(l),
                None => infinite = true,
            }
        }
        ls.sort_unstable();
        let keep = s.factors.len().saturating_sub(i);
        let total = if infinite && ls.len() < keep { None } else { Some(ls.iter().take(keep).sum()) };
        lengths.push((n, total));
    }
    let diffs: Vec<Option<i64>> = lengths
        .windows(2)
        .map(|w| match (w[0].1, w[1].1) {
            (Some(a), Some(b)) if w[1].0 == w[0].0 + 1 => Some(b as i64 - a as i64),
            _ => None,
        })
        .collect();
    let tail: Vec<_> = diffs.iter().rev().take(3).collect();
    let stabilized = tail.len() == 3 && tail.iter().all(|d| d.is_some() && **d == *tail[0]);
    let alpha = if stabilized { tail[0].map(|d| d as u32) } else { None };
    let residuals = match alpha {
        Some(a) => lengths.iter().filter_map(|&(n, l)| l.map(|l| (n, l as i64 - (a as i64) * n as i64))).collect(),
        None => Vec::new(),
    };
    Ok(ExponentEstimate { alpha, lengths, residuals, stabilized })
}

/// A linear element `g = a_0 + Σ a_i x_i` with its coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LinearChoice {
    pub poly: Poly,
    /// `a_0 / a_{i_0}` with `i_0` the first unit coefficient.
    pub affine_coordinate: Vec<i64>,
    /// Reduction of `(a_1 : ... : a_r)` to `P^{r-1}(k)`, normalized at `i_0`.
    pub residue_point: Vec<u64>,
}

/// The first linear element, in a fixed height order, not contained in any
/// of the given ideals of `Λ`. Membership is decided in `Λ/I(x^depth)`, so
/// a reported element is certified to avoid each ideal.
pub fn choose_linear_avoiding(c: &CoeffRing, r: usize, ideals: &[Vec<Poly>], depth: u32, max_height: u64) -> Result<LinearChoice> {
    let ring = QuotientRing::standard(c, r, &vec![depth; r + 1])?;
    let ids: Vec<Ideal> = ideals
        .iter()
        .map(|gens| {
            let els = gens.iter().map(|g| ring.elem_from_poly(g)).collect::<Result<Vec<_>>>()?;
            Ok(Ideal::generated(&ring, &els))
        })
        .collect::<Result<_>>()?;
    let p = c.p() as i64;
    for h in 1..=max_height as i64 {
        let mut cands: Vec<Vec<i64>> = Vec::new();
        let mut cur = vec![0i64; r + 1];
        loop {
            if cur.iter().copied().max() == Some(h) && cur[1..].iter().any(|&a| a % p != 0) {
                cands.push(cur.clone());
            }
            let mut k = 0;
            loop {
                if k > r {
                    break;
                }
                if cur[k] < h {
                    cur[k] += 1;
                    break;
                }
                cur[k] = 0;
                k += 1;
            }
            if k > r {
                break;
            }
        }
        cands.sort_by_key(|v| {
            let mut key = vec![v[0]];
            key.extend(v[1..].iter().rev());
            key
        });
        for v in cands {
            let a0 = v[0] * p;
            let g = Poly::linear(a0, &v[1..]);
            let ge = ring.elem_from_poly(&g)?;
            if ids.iter().all(|id| !id.contains(&ge)) {
                let i0 = (1..=r).find(|&i| v[i] % p != 0).expect("some unit coefficient");
                let inv = inv_mod(reduce_i64(v[i0], c.modulus()), c.modulus()).expect("unit");
                let aff = mulmod(reduce_i64(a0, c.modulus()), inv, c.modulus());
                let invp = inv_mod(reduce_i64(v[i0], c.p()), c.p()).expect("unit");
                let pt = (1..=r).map(|i| mulmod(reduce_i64(v[i], c.p()), invp, c.p())).collect();
                return Ok(LinearChoice { poly: g, affine_coordinate: vec![aff as i64], residue_point: pt });
            }
        }
    }
    Err(Error::Budget("no linear element found within the height bound".into()))
}
