//! Truncated Iwasawa algebras `Λ/I(h^m)` for a monic parameter system
//! `h = (h_0, h_1, ..., h_r)`, ring maps between them, and affine changes
//! of variables.
//!
//! Since every `x_i` is nilpotent modulo `I(h^m)`, the power-series quotient
//! agrees with the polynomial quotient `O[x]/I(h^m)`. Normal forms reduce
//! `x_r, x_{r-1}, ..., x_1` in turn with the monic relations `h_i^{m_i}`,
//! then reduce coefficients modulo `h_0^{m_0}`.

use crate::arith::*;
use crate::coeff::{CoeffElem, CoeffRing};
use crate::error::{invalid, Error, Result};
use crate::linalg::{vecmat, Matrix, Span};
use crate::poly::{coords_of, Poly};
use crate::ring::{Elem, Ideal, Ring};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;

/// A monic parameter system; `gens[0]` is the constant `h_0`, `gens[i]`
/// is monic in `x_i` with lower coefficients in the maximal ideal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Mps {
    pub gens: Vec<Poly>,
}

impl Mps {
    /// `(ϖ, x_1, ..., x_r)`.
    pub fn standard(c: &CoeffRing, r: usize) -> Mps {
        let mut gens = vec![Poly::constant(r, coords_of(&c.uniformizer()))];
        gens.extend((0..r).map(|i| Poly::var(r, i)));
        Mps { gens }
    }

    pub fn r(&self) -> usize {
        self.gens.len() - 1
    }

    pub fn with_nvars(&self) -> Result<Mps> {
        let r = self.r();
        Ok(Mps { gens: self.gens.iter().map(|g| g.with_nvars(r)).collect::<Result<_>>()? })
    }

    /// Replaces `h_i` (1-based).
    pub fn replace(&self, i: usize, h: Poly) -> Mps {
        let mut gens = self.gens.clone();
        gens[i] = h;
        Mps { gens }
    }

    /// Reasons the system fails to be monic; empty when valid.
    pub fn validate(&self, c: &CoeffRing) -> Vec<String> {
        let mut out = Vec::new();
        let r = self.r();
        let h0 = &self.gens[0];
        if !h0.is_constant() {
            out.push("h_0 must be a constant".into());
        } else {
            match c.from_coords(&h0.constant_term()).map(|x| c.valuation(&x)) {
                Ok(Some(v)) if v >= 1 => {}
                Ok(Some(_)) => out.push("h_0 must lie in the maximal ideal of O".into()),
                Ok(None) => out.push("h_0 vanishes at working precision".into()),
                Err(e) => out.push(e.to_string()),
            }
        }
        for i in 1..=r {
            let h = &self.gens[i];
            if h.nvars() != r {
                out.push(format!("h_{i} has {} variables, expected {r}", h.nvars()));
                continue;
            }
            if h.max_var().map_or(true, |v| v != i - 1) {
                out.push(format!("h_{i} must involve x_{i} and no later variable"));
                continue;
            }
            let d = h.degree_in(i - 1);
            let lead = h.coeff_of_power(i - 1, d);
            if lead != Poly::int(r, 1) {
                out.push(format!("h_{i} is not monic in x_{i}"));
            }
            for k in 0..d {
                let ck = h.coeff_of_power(i - 1, k).constant_term();
                let v = c.from_coords(&ck).map(|x| c.valuation(&x));
                if let Ok(Some(0)) = v {
                    out.push(format!("coefficient of x_{i}^{k} in h_{i} is a unit"));
                }
            }
        }
        out
    }
}

type Work = BTreeMap<Vec<u32>, CoeffElem>;

#[derive(Clone, Debug)]
pub struct QuotientRing {
    coeff: CoeffRing,
    mps: Mps,
    m: Vec<u32>,
    r: usize,
    bounds: Vec<u32>,
    strides: Vec<usize>,
    nmono: usize,
    deg: usize,
    mono_exps: Vec<Vec<u32>>,
    h0m: CoeffElem,
    coeff_rel: Span,
    rel: Span,
    /// Normal form of each product of basis monomials (sparse over blocks).
    table: Vec<Vec<(usize, CoeffElem)>>,
    /// `x_i^{D_i} - h_i^{m_i}`, used to rewrite `x_i^{D_i}`.
    tails: Vec<Vec<(Vec<u32>, CoeffElem)>>,
    /// Generators `h_i^{m_i}` of the ideal, `i >= 1`.
    ideal_polys: Vec<Poly>,
}

impl PartialEq for QuotientRing {
    fn eq(&self, o: &Self) -> bool {
        self.coeff == o.coeff && self.mps == o.mps && self.m == o.m
    }
}

impl QuotientRing {
    pub fn standard(coeff: &CoeffRing, r: usize, m: &[u32]) -> Result<Self> {
        Self::new(coeff, &Mps::standard(coeff, r), m)
    }

    pub fn new(coeff: &CoeffRing, mps: &Mps, m: &[u32]) -> Result<Self> {
        let mps = mps.with_nvars()?;
        let r = mps.r();
        if m.len() != r + 1 {
            return invalid(format!("exponent vector has length {}, expected {}", m.len(), r + 1));
        }
        if m.iter().any(|&x| x == 0) {
            return invalid("exponents must be positive");
        }
        let fails = mps.validate(coeff);
        if !fails.is_empty() {
            return Err(Error::InvalidMps(fails.join("; ")));
        }
        let q = coeff.modulus();
        let deg = coeff.degree();
        let h0 = coeff.from_coords(&mps.gens[0].constant_term())?;
        let h0m = coeff.pow(&h0, m[0] as u64);
        match coeff.valuation(&h0m) {
            Some(v) if v < coeff.cap() => {}
            _ => {
                return Err(Error::Precision(format!(
                    "h_0^{} needs precision beyond p^{}",
                    m[0],
                    coeff.precision()
                )))
            }
        }
        let mut t_pow = coeff.one();
        let mut crow = Vec::new();
        for _ in 0..deg {
            crow.push(coeff.mul(&h0m, &t_pow));
            t_pow = coeff.mul(&t_pow, &coeff.generator());
        }
        let coeff_rel = Span::new(coeff.p(), q, deg, crow);
        let mut bounds = Vec::new();
        let mut tails = Vec::new();
        let mut ideal_polys = Vec::new();
        for i in 1..=r {
            let g = mps.gens[i].pow(m[i], coeff);
            let d = g.degree_in(i - 1);
            bounds.push(d);
            let mut tail = Vec::new();
            for (e, c) in g.terms() {
                if e[i - 1] == d {
                    continue;
                }
                tail.push((e.clone(), coeff.neg(&coeff.from_coords(c)?)));
            }
            tails.push(tail);
            ideal_polys.push(g);
        }
        let mut strides = vec![1usize; r];
        for i in 1..r {
            strides[i] = strides[i - 1] * bounds[i - 1] as usize;
        }
        let nmono: usize = bounds.iter().map(|&b| b as usize).product();
        if nmono.saturating_mul(deg) > 4096 {
            return Err(Error::Budget(format!("quotient ring of rank {} exceeds the size budget", nmono * deg)));
        }
        let mono_exps: Vec<Vec<u32>> = (0..nmono)
            .map(|idx| (0..r).map(|i| ((idx / strides[i]) % bounds[i] as usize) as u32).collect())
            .collect();
        let full_rel = (0..nmono).flat_map(|b| {
            coeff_rel.rows().iter().map(move |row| {
                let mut v = vec![0u64; nmono * deg];
                v[b * deg..(b + 1) * deg].copy_from_slice(row);
                v
            })
        });
        let rel = Span::new(coeff.p(), q, nmono * deg, full_rel.collect::<Vec<_>>());
        let mut ring = QuotientRing {
            coeff: coeff.clone(),
            mps,
            m: m.to_vec(),
            r,
            bounds,
            strides,
            nmono,
            deg,
            mono_exps,
            h0m,
            coeff_rel,
            rel,
            table: Vec::new(),
            tails,
            ideal_polys,
        };
        let mut table = Vec::with_capacity(nmono * nmono);
        for b1 in 0..nmono {
            for b2 in 0..nmono {
                let e: Vec<u32> = ring.mono_exps[b1].iter().zip(&ring.mono_exps[b2]).map(|(x, y)| x + y).collect();
                let mut w = Work::new();
                w.insert(e, coeff.one());
                let nf = ring.normal_form(w);
                table.push(nf);
            }
        }
        ring.table = table;
        Ok(ring)
    }

    fn normal_form(&self, mut w: Work) -> Vec<(usize, CoeffElem)> {
        let c = &self.coeff;
        for i in (0..self.r).rev() {
            let d = self.bounds[i];
            loop {
                let key = w.iter().filter(|(e, v)| e[i] >= d && !c.is_zero(v)).map(|(e, _)| e.clone()).max_by_key(|e| e[i]);
                let Some(e) = key else { break };
                let coef = w.remove(&e).expect("present");
                let mut base = e.clone();
                base[i] -= d;
                for (te, tc) in &self.tails[i] {
                    let ne: Vec<u32> = base.iter().zip(te).map(|(a, b)| a + b).collect();
                    let add = c.mul(&coef, tc);
                    let slot = w.entry(ne).or_insert_with(|| c.zero());
                    *slot = c.add(slot, &add);
                }
            }
        }
        w.into_iter()
            .filter(|(_, v)| !c.is_zero(v))
            .map(|(e, v)| (self.index_of(&e), v))
            .collect()
    }

    fn index_of(&self, e: &[u32]) -> usize {
        e.iter().zip(&self.strides).map(|(&a, &s)| a as usize * s).sum()
    }

    pub fn coeff(&self) -> &CoeffRing {
        &self.coeff
    }
    pub fn mps(&self) -> &Mps {
        &self.mps
    }
    pub fn exponents(&self) -> &[u32] {
        &self.m
    }
    pub fn r(&self) -> usize {
        self.r
    }
    pub fn nmono(&self) -> usize {
        self.nmono
    }
    pub fn monomial_exps(&self, b: usize) -> &[u32] {
        &self.mono_exps[b]
    }
    /// Generators of `I(h^m)` as polynomials: `h_0^{m_0}` then `h_i^{m_i}`.
    pub fn ideal_generators(&self) -> Vec<Poly> {
        let mut v = vec![Poly::constant(self.r, coords_of(&self.h0m))];
        v.extend(self.ideal_polys.iter().cloned());
        v
    }

    /// Expected `log_p |Λ/I|` from the shape of the system.
    pub fn expected_log_cardinality(&self) -> u32 {
        let v = self.coeff.valuation(&self.h0m).expect("nonzero");
        self.nmono as u32 * self.coeff.residue_degree() * v
    }

    pub fn from_coeff(&self, c: &[u64]) -> Elem {
        let mut v = self.zero();
        v[..self.deg].copy_from_slice(c);
        self.reduce(&mut v);
        v
    }

    pub fn from_coords(&self, c: &[i64]) -> Result<Elem> {
        Ok(self.from_coeff(&self.coeff.from_coords(c)?))
    }

    /// `x_{i+1}`.
    pub fn var(&self, i: usize) -> Elem {
        let mut e = vec![0; self.r];
        e[i] = 1;
        self.monomial(&e)
    }

    pub fn monomial(&self, e: &[u32]) -> Elem {
        let mut w = Work::new();
        w.insert(e.to_vec(), self.coeff.one());
        self.assemble(self.normal_form(w))
    }

    fn assemble(&self, nf: Vec<(usize, CoeffElem)>) -> Elem {
        let mut v = self.zero();
        for (b, c) in nf {
            for j in 0..self.deg {
                v[b * self.deg + j] = addmod(v[b * self.deg + j], c[j], self.coeff.modulus());
            }
        }
        self.reduce(&mut v);
        v
    }

    /// Image of a polynomial under `Λ → Λ/I`.
    pub fn elem_from_poly(&self, p: &Poly) -> Result<Elem> {
        let p = p.with_nvars(self.r)?;
        let mut w = Work::new();
        for (e, c) in p.terms() {
            w.insert(e.clone(), self.coeff.from_coords(c)?);
        }
        Ok(self.assemble(self.normal_form(w)))
    }

    /// The canonical polynomial representative of an element.
    pub fn to_poly(&self, x: &[u64]) -> Poly {
        Poly::from_terms(
            self.r,
            (0..self.nmono)
                .map(|b| (self.mono_exps[b].clone(), coords_of(&x[b * self.deg..(b + 1) * self.deg])))
                .filter(|(_, c)| c.iter().any(|&v| v != 0)),
        )
    }

    pub fn block<'a>(&self, x: &'a [u64], b: usize) -> &'a [u64] {
        &x[b * self.deg..(b + 1) * self.deg]
    }

    /// Residue in `k` of the constant coefficient.
    pub fn residue(&self, x: &[u64]) -> Vec<u64> {
        self.coeff.residue(self.block(x, 0))
    }

    pub fn is_unit(&self, x: &[u64]) -> bool {
        self.residue(x).iter().any(|&v| v != 0)
    }

    /// Inverse of a unit by Newton iteration.
    pub fn inv(&self, x: &[u64]) -> Result<Elem> {
        if !self.is_unit(x) {
            return invalid("element is not a unit");
        }
        let c0 = self.coeff.inv(self.block(x, 0))?;
        let mut y = self.from_coeff(&c0);
        let two = self.from_int(2);
        for _ in 0..128 {
            let xy = self.mul(x, &y);
            if xy == self.one() {
                return Ok(y);
            }
            y = self.mul(&y, &self.sub(&two, &xy));
        }
        Err(Error::Precision("inverse did not converge".into()))
    }

    /// The ring hom to `tgt` sending `x_i ↦ vars[i]` and the coefficient
    /// generator `t ↦ coeff_gen`. Errors unless `I(h^m)` maps to zero.
    pub fn hom_to(&self, tgt: &Arc<QuotientRing>, vars: &[Elem], coeff_gen: &Elem) -> Result<RingHom> {
        if vars.len() != self.r {
            return invalid("wrong number of variable images");
        }
        let real = Realization { ring: tgt.clone(), vars: vars.to_vec(), coeff_gen: coeff_gen.clone() };
        real.check_compatible(&self.coeff)?;
        for g in self.ideal_generators() {
            if !tgt.is_zero(&real.poly(&g)?) {
                return Err(Error::NotAdmissible("ring map does not kill the defining ideal".into()));
            }
        }
        let mut matrix = Vec::with_capacity(self.dim());
        let tpows: Vec<Elem> = (0..self.deg).scan(tgt.one(), |acc, _| {
            let cur = acc.clone();
            *acc = tgt.mul(acc, coeff_gen);
            Some(cur)
        }).collect();
        for b in 0..self.nmono {
            let mono = real.monomial(&self.mono_exps[b]);
            for tp in &tpows {
                matrix.push(tgt.mul(&mono, tp));
            }
        }
        Ok(RingHom { tgt_dim: tgt.dim(), matrix })
    }

    /// `Λ/I → Λ/J` with `x_i ↦ x_i`, for `I ⊆ J` over the same coefficients.
    pub fn projection_to(&self, tgt: &Arc<QuotientRing>) -> Result<RingHom> {
        if tgt.coeff != self.coeff || tgt.r != self.r {
            return invalid("projection needs matching coefficient rings and variables");
        }
        let vars: Vec<Elem> = (0..self.r).map(|i| tgt.var(i)).collect();
        self.hom_to(tgt, &vars, &tgt.from_coeff(&tgt.coeff.generator()))
    }

    /// `x ↦ h_i·x̃` from `Λ/I(h^m)` into `Λ/I(h^{m + e_i})`, checked to be
    /// well defined and injective with image `ann(h_i^{m_i})`.
    pub fn multiply_by_component(&self, tgt: &QuotientRing, i: usize) -> Result<RingHom> {
        if tgt.coeff != self.coeff || tgt.mps != self.mps || i > self.r {
            return invalid("rings must share coefficients and parameter system");
        }
        let shape_ok = (0..=self.r).all(|k| if k == i { tgt.m[k] == self.m[k] + 1 } else { tgt.m[k] == self.m[k] });
        if !shape_ok {
            return invalid("exponents must differ by one in the given component");
        }
        let h = tgt.elem_from_poly(&self.mps.gens[i])?;
        let tpows: Vec<Elem> = (0..self.deg)
            .scan(tgt.one(), |acc, _| {
                let cur = acc.clone();
                *acc = tgt.mul(acc, &tgt.from_coeff(&tgt.coeff.generator()));
                Some(cur)
            })
            .collect();
        let mut matrix = Vec::with_capacity(self.dim());
        for b in 0..self.nmono {
            let hm = tgt.mul(&tgt.monomial(&self.mono_exps[b]), &h);
            for tp in &tpows {
                matrix.push(tgt.mul(&hm, tp));
            }
        }
        let hom = RingHom { tgt_dim: tgt.dim(), matrix };
        if self.rel.rows().iter().any(|row| !tgt.is_zero(&hom.apply(tgt, row))) {
            return Err(Error::Verification(format!("multiplication by h_{i} is not well defined")));
        }
        if !hom.is_injective(self, tgt) {
            return Err(Error::Verification(format!("multiplication by h_{i} is not injective")));
        }
        let image = crate::ring::Ideal::from_span(tgt, Span::new(tgt.p(), tgt.modulus(), tgt.dim(), hom.matrix.clone()));
        let ann = crate::ring::Ideal::annihilator(tgt, &tgt.pow(&h, self.m[i] as u64));
        if image != ann {
            return Err(Error::Verification(format!("image of h_{i} differs from the annihilator")));
        }
        Ok(hom)
    }
}

impl Ring for QuotientRing {
    fn p(&self) -> u64 {
        self.coeff.p()
    }
    fn modulus(&self) -> u64 {
        self.coeff.modulus()
    }
    fn dim(&self) -> usize {
        self.nmono * self.deg
    }
    fn one(&self) -> Elem {
        let mut v = self.zero();
        v[0] = 1;
        self.reduce(&mut v);
        v
    }
    fn reduce(&self, v: &mut [u64]) {
        for b in 0..self.nmono {
            self.coeff_rel.reduce(&mut v[b * self.deg..(b + 1) * self.deg]);
        }
    }
    fn mul(&self, a: &[u64], b: &[u64]) -> Elem {
        let q = self.coeff.modulus();
        let n = self.nmono;
        let d = self.deg;
        let mut out = vec![0u64; n * d];
        if d == 1 {
            for i in 0..n {
                if a[i] == 0 {
                    continue;
                }
                for j in 0..n {
                    if b[j] == 0 {
                        continue;
                    }
                    let ab = mulmod(a[i], b[j], q);
                    for (k, c) in &self.table[i * n + j] {
                        out[*k] = addmod(out[*k], mulmod(ab, c[0], q), q);
                    }
                }
            }
        } else {
            let c = &self.coeff;
            for i in 0..n {
                let ai = &a[i * d..(i + 1) * d];
                if c.is_zero(ai) {
                    continue;
                }
                for j in 0..n {
                    let bj = &b[j * d..(j + 1) * d];
                    if c.is_zero(bj) {
                        continue;
                    }
                    let ab = c.mul(ai, bj);
                    for (k, t) in &self.table[i * n + j] {
                        let prod = c.mul(&ab, t);
                        for l in 0..d {
                            out[k * d + l] = addmod(out[k * d + l], prod[l], q);
                        }
                    }
                }
            }
        }
        self.reduce(&mut out);
        out
    }
    fn relations(&self) -> &Span {
        &self.rel
    }
    fn algebra_generators(&self) -> Vec<Elem> {
        let mut g: Vec<Elem> = (0..self.r).map(|i| self.var(i)).collect();
        if self.deg > 1 {
            g.push(self.from_coeff(&self.coeff.generator()));
        }
        g
    }
}

/// A ring hom between quotient rings, as the matrix of images of the
/// source coordinate basis.
#[derive(Clone, Debug)]
pub struct RingHom {
    pub tgt_dim: usize,
    pub matrix: Matrix,
}

impl RingHom {
    pub fn apply<R: Ring + ?Sized>(&self, tgt: &R, x: &[u64]) -> Elem {
        let mut v = vecmat(x, &self.matrix, self.tgt_dim, tgt.modulus());
        tgt.reduce(&mut v);
        v
    }

    /// Injectivity on the source ring: no nonzero canonical element maps to 0.
    pub fn is_injective<R: Ring + ?Sized, S: Ring + ?Sized>(&self, src: &S, tgt: &R) -> bool {
        let ker = crate::linalg::left_kernel(src.p(), src.modulus(), &self.matrix, self.tgt_dim, tgt.relations().rows());
        ker.is_subset(src.relations())
    }

    /// The ideal of `tgt` generated by the image of `j`.
    pub fn image_ideal<R: Ring + ?Sized, S: Ring + ?Sized>(&self, src: &S, tgt: &R, j: &Ideal) -> Ideal {
        let imgs: Vec<Elem> = j.generators(src).iter().map(|g| self.apply(tgt, g)).collect();
        Ideal::generated(tgt, &imgs)
    }

    /// `{x ∈ src : f(x) ∈ j}`.
    pub fn preimage_ideal<S: Ring + ?Sized>(&self, src: &S, j: &Ideal) -> Ideal {
        let ker = crate::linalg::left_kernel(src.p(), src.modulus(), &self.matrix, self.tgt_dim, j.span().rows());
        Ideal::from_span(src, ker)
    }
}

/// A ring map `Λ^{(r)} → R` given by the images of the variables and of the
/// coefficient generator; used to evaluate symbolic data in a finite ring.
#[derive(Clone, Debug)]
pub struct Realization {
    pub ring: Arc<QuotientRing>,
    pub vars: Vec<Elem>,
    pub coeff_gen: Elem,
}

impl Realization {
    /// `x_i ↦ x_i` into a quotient of the same `Λ`.
    pub fn standard(ring: Arc<QuotientRing>) -> Self {
        let vars = (0..ring.r()).map(|i| ring.var(i)).collect();
        let coeff_gen = ring.from_coeff(&ring.coeff().generator());
        Realization { ring, vars, coeff_gen }
    }

    pub fn nvars(&self) -> usize {
        self.vars.len()
    }

    /// Source coefficient coordinates must either come from `Z_p` or from the
    /// target's own coefficient ring.
    fn check_compatible(&self, src: &CoeffRing) -> Result<()> {
        if src.degree() > 1 {
            let gen = &self.coeff_gen;
            let mut acc = self.ring.zero();
            let mut tp = self.ring.one();
            for &c in &src.spec().poly {
                acc = self.ring.add(&acc, &self.ring.scale(&tp, reduce_i64(c, self.ring.modulus())));
                tp = self.ring.mul(&tp, gen);
            }
            if !self.ring.is_zero(&acc) {
                return invalid("coefficient generator image does not satisfy the defining polynomial");
            }
        }
        if src.p() != self.ring.p() || src.modulus() != self.ring.modulus() {
            return invalid("mismatched working precision");
        }
        Ok(())
    }

    pub fn coeff(&self, c: &[i64]) -> Elem {
        let r = &self.ring;
        if c.len() <= 1 {
            return r.from_int(*c.first().unwrap_or(&0));
        }
        let mut acc = r.zero();
        let mut tp = r.one();
        for &x in c {
            acc = r.add(&acc, &r.scale(&tp, reduce_i64(x, r.modulus())));
            tp = r.mul(&tp, &self.coeff_gen);
        }
        acc
    }

    pub fn monomial(&self, e: &[u32]) -> Elem {
        let r = &self.ring;
        let mut acc = r.one();
        for (i, &k) in e.iter().enumerate() {
            if k > 0 {
                acc = r.mul(&acc, &r.pow(&self.vars[i], k as u64));
            }
        }
        acc
    }

    pub fn poly(&self, p: &Poly) -> Result<Elem> {
        if p.nvars() > self.vars.len() && p.max_var().map_or(false, |v| v >= self.vars.len()) {
            return invalid("polynomial has more variables than the realization");
        }
        let r = &self.ring;
        let mut cache: BTreeMap<(usize, u32), Elem> = BTreeMap::new();
        let mut acc = r.zero();
        for (e, c) in p.terms() {
            let mut t = self.coeff(c);
            for (i, &k) in e.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                let pw = cache.entry((i, k)).or_insert_with(|| r.pow(&self.vars[i], k as u64)).clone();
                t = r.mul(&t, &pw);
            }
            acc = r.add(&acc, &t);
        }
        Ok(acc)
    }

    /// Pre-composes with the substitution `x_i ↦ subs[i]`.
    pub fn compose(&self, subs: &[Poly]) -> Result<Realization> {
        let vars = subs.iter().map(|s| self.poly(s)).collect::<Result<Vec<_>>>()?;
        Ok(Realization { ring: self.ring.clone(), vars, coeff_gen: self.coeff_gen.clone() })
    }
}

/// An affine substitution `x ↦ A x + v` with `A ∈ GL_r(O)`, `v ∈ (ϖO)^r`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffineMap {
    pub a: Vec<Vec<Vec<i64>>>,
    pub v: Vec<Vec<i64>>,
}

/// Elementary factors of an affine substitution.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Elementary {
    /// `x_ν ↦ u x_ν`.
    P { nu: usize, u: Vec<i64> },
    /// Swap `x_μ` and `x_ν`.
    Q { mu: usize, nu: usize },
    /// `x_μ ↦ x_μ + a x_ν` with `μ > ν`.
    R { mu: usize, nu: usize, a: Vec<i64> },
    /// `x_ν ↦ x_ν + a` with `a ∈ ϖO`.
    Delta { nu: usize, a: Vec<i64> },
}

impl AffineMap {
    pub fn r(&self) -> usize {
        self.v.len()
    }

    pub fn identity(r: usize) -> Self {
        let a = (0..r).map(|i| (0..r).map(|j| vec![(i == j) as i64]).collect()).collect();
        AffineMap { a, v: vec![vec![0]; r] }
    }

    fn matrix(&self, c: &CoeffRing) -> Result<Vec<Vec<CoeffElem>>> {
        self.a.iter().map(|row| row.iter().map(|x| c.from_coords(x)).collect()).collect()
    }

    pub fn validate(&self, c: &CoeffRing) -> Result<()> {
        let r = self.r();
        if self.a.len() != r || self.a.iter().any(|row| row.len() != r) {
            return invalid("affine matrix has the wrong shape");
        }
        if local_inverse(c, &self.matrix(c)?).is_none() {
            return invalid("affine matrix is not invertible over O");
        }
        for x in &self.v {
            if c.valuation(&c.from_coords(x)?) == Some(0) {
                return invalid("translation vector must lie in the maximal ideal");
            }
        }
        Ok(())
    }

    /// The images `y_i = Σ_j A_ij x_j + v_i`.
    pub fn images(&self) -> Vec<Poly> {
        let r = self.r();
        (0..r)
            .map(|i| {
                let mut terms = vec![(vec![0; r], self.v[i].clone())];
                for j in 0..r {
                    let mut e = vec![0; r];
                    e[j] = 1;
                    terms.push((e, self.a[i][j].clone()));
                }
                Poly::from_terms(r, terms)
            })
            .collect()
    }

    /// `f(Ax + v)`.
    pub fn apply(&self, f: &Poly, c: &CoeffRing) -> Result<Poly> {
        Ok(f.with_nvars(self.r())?.substitute(&self.images(), c))
    }

    /// The inverse substitution `x ↦ A^{-1}(x - v)`.
    pub fn inverse(&self, c: &CoeffRing) -> Result<AffineMap> {
        let inv = local_inverse(c, &self.matrix(c)?).ok_or_else(|| Error::InvalidInput("singular".into()))?;
        let r = self.r();
        let v: Vec<CoeffElem> = self.v.iter().map(|x| c.from_coords(x)).collect::<Result<_>>()?;
        let w: Vec<Vec<i64>> = (0..r)
            .map(|i| {
                let mut acc = c.zero();
                for j in 0..r {
                    acc = c.sub(&acc, &c.mul(&inv[i][j], &v[j]));
                }
                coords_of(&acc)
            })
            .collect();
        Ok(AffineMap { a: inv.iter().map(|row| row.iter().map(|x| coords_of(x)).collect()).collect(), v: w })
    }

    /// `self ∘ then`: first substitute `self`, then `then`, so the result is
    /// `x ↦ A_then (A x + v) + v_then`.
    pub fn then(&self, then: &AffineMap, c: &CoeffRing) -> Result<AffineMap> {
        let r = self.r();
        let a1 = self.matrix(c)?;
        let a2 = then.matrix(c)?;
        let v1: Vec<CoeffElem> = self.v.iter().map(|x| c.from_coords(x)).collect::<Result<_>>()?;
        let v2: Vec<CoeffElem> = then.v.iter().map(|x| c.from_coords(x)).collect::<Result<_>>()?;
        let mut a = vec![vec![Vec::new(); r]; r];
        let mut v = vec![Vec::new(); r];
        for i in 0..r {
            let mut vi = v2[i].clone();
            for k in 0..r {
                vi = c.add(&vi, &c.mul(&a2[i][k], &v1[k]));
            }
            v[i] = coords_of(&vi);
            for j in 0..r {
                let mut s = c.zero();
                for k in 0..r {
                    s = c.add(&s, &c.mul(&a2[i][k], &a1[k][j]));
                }
                a[i][j] = coords_of(&s);
            }
        }
        Ok(AffineMap { a, v })
    }

    /// Canonical form with coordinates reduced modulo `p^M`.
    pub fn normalized(&self, c: &CoeffRing) -> Result<AffineMap> {
        let red = |x: &Vec<i64>| c.from_coords(x).map(|e| coords_of(&e));
        Ok(AffineMap {
            a: self.a.iter().map(|row| row.iter().map(red).collect()).collect::<Result<_>>()?,
            v: self.v.iter().map(red).collect::<Result<_>>()?,
        })
    }

    /// Factors into elementary substitutions, applied left to right.
    pub fn decompose(&self, c: &CoeffRing) -> Result<Vec<Elementary>> {
        self.validate(c)?;
        let r = self.r();
        let mut m = self.matrix(c)?;
        // Row operations g_1, ..., g_s with g_s ⋯ g_1 A = 1; then A = g_1^{-1} ⋯ g_s^{-1}
        // and the substitution applies g_s^{-1} first.
        let mut ops: Vec<Elementary> = Vec::new();
        for col in 0..r {
            let piv = (col..r).find(|&i| c.is_unit(&m[i][col])).ok_or_else(|| Error::InvalidInput("singular".into()))?;
            if piv != col {
                m.swap(piv, col);
                ops.push(Elementary::Q { mu: piv, nu: col });
            }
            let u = m[col][col].clone();
            let ui = c.inv(&u)?;
            for x in m[col].iter_mut() {
                *x = c.mul(x, &ui);
            }
            ops.push(Elementary::P { nu: col, u: coords_of(&ui) });
            for i in 0..r {
                if i == col || c.is_zero(&m[i][col]) {
                    continue;
                }
                let f = m[i][col].clone();
                let row_col = m[col].clone();
                for (x, y) in m[i].iter_mut().zip(&row_col) {
                    *x = c.sub(x, &c.mul(&f, y));
                }
                ops.push(add_multiple(i, col, &coords_of(&c.neg(&f))));
            }
        }
        let mut out: Vec<Elementary> = Vec::new();
        for g in ops.iter().rev() {
            out.extend(invert_op(g, c)?);
        }
        for (nu, x) in self.v.iter().enumerate() {
            if !c.is_zero(&c.from_coords(x)?) {
                out.push(Elementary::Delta { nu, a: x.clone() });
            }
        }
        Ok(out)
    }

    pub fn from_elementary(e: &Elementary, r: usize) -> AffineMap {
        let mut m = AffineMap::identity(r);
        match e {
            Elementary::P { nu, u } => m.a[*nu][*nu] = u.clone(),
            Elementary::Q { mu, nu } => {
                m.a[*mu][*mu] = vec![0];
                m.a[*nu][*nu] = vec![0];
                m.a[*mu][*nu] = vec![1];
                m.a[*nu][*mu] = vec![1];
            }
            Elementary::R { mu, nu, a } => m.a[*mu][*nu] = a.clone(),
            Elementary::Delta { nu, a } => m.v[*nu] = a.clone(),
        }
        m
    }

    /// Recomposes a factorization; inverse to [`AffineMap::decompose`].
    pub fn compose_all(es: &[Elementary], r: usize, c: &CoeffRing) -> Result<AffineMap> {
        let mut acc = AffineMap::identity(r);
        for e in es {
            acc = acc.then(&AffineMap::from_elementary(e, r), c)?;
        }
        acc.normalized(c)
    }
}

/// The row operation `row_i += a · row_j`; when `i < j` it is expanded
/// through a `Q` conjugation on inversion.
fn add_multiple(i: usize, j: usize, a: &[i64]) -> Elementary {
    Elementary::R { mu: i, nu: j, a: a.to_vec() }
}

fn invert_op(g: &Elementary, c: &CoeffRing) -> Result<Vec<Elementary>> {
    Ok(match g {
        Elementary::P { nu, u } => vec![Elementary::P { nu: *nu, u: coords_of(&c.inv(&c.from_coords(u)?)?) }],
        Elementary::Q { mu, nu } => vec![Elementary::Q { mu: *mu, nu: *nu }],
        Elementary::R { mu, nu, a } => {
            let na = coords_of(&c.neg(&c.from_coords(a)?));
            if mu > nu {
                vec![Elementary::R { mu: *mu, nu: *nu, a: na }]
            } else {
                vec![
                    Elementary::Q { mu: *nu, nu: *mu },
                    Elementary::R { mu: *nu, nu: *mu, a: na },
                    Elementary::Q { mu: *nu, nu: *mu },
                ]
            }
        }
        Elementary::Delta { nu, a } => vec![Elementary::Delta { nu: *nu, a: coords_of(&c.neg(&c.from_coords(a)?)) }],
    })
}

/// Inverse of a square matrix over the local ring `O/p^M`, by Gauss–Jordan
/// elimination with unit pivots.
pub fn local_inverse(c: &CoeffRing, a: &[Vec<CoeffElem>]) -> Option<Vec<Vec<CoeffElem>>> {
    let r = a.len();
    let mut m: Vec<Vec<CoeffElem>> = a.to_vec();
    let mut inv: Vec<Vec<CoeffElem>> = (0..r).map(|i| (0..r).map(|j| c.from_int((i == j) as i64)).collect()).collect();
    for col in 0..r {
        let piv = (col..r).find(|&i| c.is_unit(&m[i][col]))?;
        m.swap(piv, col);
        inv.swap(piv, col);
        let ui = c.inv(&m[col][col]).ok()?;
        for j in 0..r {
            m[col][j] = c.mul(&m[col][j], &ui);
            inv[col][j] = c.mul(&inv[col][j], &ui);
        }
        for i in 0..r {
            if i == col {
                continue;
            }
            let f = m[i][col].clone();
            if c.is_zero(&f) {
                continue;
            }
            for j in 0..r {
                let t = c.mul(&f, &m[col][j]);
                m[i][j] = c.sub(&m[i][j], &t);
                let t = c.mul(&f, &inv[col][j]);
                inv[i][j] = c.sub(&inv[i][j], &t);
            }
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zp(m: u32) -> CoeffRing {
        CoeffRing::zp(5, m).unwrap()
    }

    #[test]
    fn standard_ring_shape() {
        let c = zp(3);
        let r = QuotientRing::standard(&c, 2, &[2, 2, 3]).unwrap();
        assert_eq!(r.nmono(), 6);
        assert_eq!(r.log_cardinality(), r.expected_log_cardinality());
        assert_eq!(r.log_cardinality(), 12);
        let x1 = r.var(0);
        assert!(r.is_zero(&r.pow(&x1, 2)));
        assert!(!r.is_zero(&r.pow(&r.var(1), 2)));
        assert!(r.is_zero(&r.pow(&r.var(1), 3)));
    }

    #[test]
    fn nonstandard_system_reduces_by_h() {
        // h_1 = x_1^2 + 5 x_1 + 5, m = (2, 1): x_1^2 = -5 x_1 - 5 in (Z/25)[x_1].
        let c = zp(3);
        let h1 = Poly::from_terms(1, vec![(vec![2], vec![1]), (vec![1], vec![5]), (vec![0], vec![5])]);
        let mps = Mps { gens: vec![Poly::int(1, 5), h1.clone()] };
        let r = QuotientRing::new(&c, &mps, &[2, 1]).unwrap();
        let x = r.var(0);
        let x2 = r.mul(&x, &x);
        let expect = r.elem_from_poly(&Poly::linear(-5, &[-5])).unwrap();
        assert_eq!(x2, expect);
        assert!(r.is_zero(&r.elem_from_poly(&h1).unwrap()));
        assert_eq!(r.log_cardinality(), 4);
    }

    #[test]
    fn invalid_systems_rejected() {
        let c = zp(3);
        let not_monic = Mps { gens: vec![Poly::int(1, 5), Poly::linear(0, &[2])] };
        assert!(matches!(QuotientRing::new(&c, &not_monic, &[1, 1]), Err(Error::InvalidMps(_))));
        let unit_coeff = Mps { gens: vec![Poly::int(1, 5), Poly::linear(1, &[1])] };
        assert!(matches!(QuotientRing::new(&c, &unit_coeff, &[1, 1]), Err(Error::InvalidMps(_))));
        let deep = QuotientRing::standard(&c, 1, &[3, 1]);
        assert!(matches!(deep, Err(Error::Precision(_))));
    }

    #[test]
    fn multiplication_by_components() {
        let c = CoeffRing::zp(5, 3).unwrap();
        for (m, i, m2) in [([1u32, 1], 1usize, [1u32, 2]), ([1, 1], 0, [2, 1]), ([2, 2], 1, [2, 3])] {
            let a = QuotientRing::standard(&c, 1, &m).unwrap();
            let b = QuotientRing::standard(&c, 1, &m2).unwrap();
            let hom = a.multiply_by_component(&b, i).unwrap();
            assert!(b.is_zero(&hom.apply(&b, &a.zero())));
        }
        let mps = Mps { gens: vec![Poly::int(1, 5), Poly::from_terms(1, vec![(vec![2], vec![1]), (vec![0], vec![5])])] };
        let a = QuotientRing::new(&c, &mps, &[2, 1]).unwrap();
        let b = QuotientRing::new(&c, &mps, &[2, 2]).unwrap();
        a.multiply_by_component(&b, 1).unwrap();
    }

    #[test]
    fn projection_between_depths() {
        let c = zp(3);
        let big = Arc::new(QuotientRing::standard(&c, 1, &[2, 3]).unwrap());
        let small = Arc::new(QuotientRing::standard(&c, 1, &[1, 2]).unwrap());
        let pi = big.projection_to(&small).unwrap();
        let x = big.var(0);
        let y = big.add(&x, &big.from_int(7));
        let img = pi.apply(&*small, &big.mul(&y, &y));
        let direct = small.mul(&pi.apply(&*small, &y), &pi.apply(&*small, &y));
        assert_eq!(img, direct);
        assert!(small.projection_to(&big).is_err());
    }

    #[test]
    fn unit_inverse() {
        let c = zp(3);
        let r = QuotientRing::standard(&c, 2, &[2, 2, 2]).unwrap();
        let u = r.elem_from_poly(&Poly::linear(3, &[1, 2])).unwrap();
        let ui = r.inv(&u).unwrap();
        assert_eq!(r.mul(&u, &ui), r.one());
    }

    #[test]
    fn affine_decomposition_recomposes() {
        let c = zp(3);
        let t = AffineMap { a: vec![vec![vec![2], vec![1]], vec![vec![3], vec![1]]], v: vec![vec![5], vec![10]] };
        let es = t.decompose(&c).unwrap();
        assert_eq!(AffineMap::compose_all(&es, 2, &c).unwrap(), t.normalized(&c).unwrap());
        let inv = t.inverse(&c).unwrap();
        assert_eq!(t.then(&inv, &c).unwrap().normalized(&c).unwrap(), AffineMap::identity(2).normalized(&c).unwrap());
    }
}
