//! Finite commutative rings presented as `Z/p^M`-modules, and their ideals.
//!
//! A ring stores elements as canonical coordinate vectors: the ambient
//! `(Z/p^M)^dim` is reduced against a Howell basis of the zero submodule.

use crate::arith::*;
use crate::linalg::{FinModule, Span};

pub type Elem = Vec<u64>;

pub trait Ring {
    fn p(&self) -> u64;
    fn modulus(&self) -> u64;
    fn dim(&self) -> usize;
    fn one(&self) -> Elem;
    fn mul(&self, a: &[u64], b: &[u64]) -> Elem;
    /// Howell basis of the coordinate vectors that represent zero.
    fn relations(&self) -> &Span;
    /// Elements generating the ring as a `Z`-algebra (together with 1).
    fn algebra_generators(&self) -> Vec<Elem>;

    fn zero(&self) -> Elem {
        vec![0; self.dim()]
    }
    fn reduce(&self, v: &mut [u64]) {
        self.relations().reduce(v)
    }
    fn add(&self, a: &[u64], b: &[u64]) -> Elem {
        let q = self.modulus();
        let mut v: Elem = a.iter().zip(b).map(|(&x, &y)| addmod(x, y, q)).collect();
        self.reduce(&mut v);
        v
    }
    fn sub(&self, a: &[u64], b: &[u64]) -> Elem {
        let q = self.modulus();
        let mut v: Elem = a.iter().zip(b).map(|(&x, &y)| submod(x, y, q)).collect();
        self.reduce(&mut v);
        v
    }
    fn neg(&self, a: &[u64]) -> Elem {
        let q = self.modulus();
        let mut v: Elem = a.iter().map(|&x| negmod(x, q)).collect();
        self.reduce(&mut v);
        v
    }
    fn scale(&self, a: &[u64], c: u64) -> Elem {
        let q = self.modulus();
        let mut v: Elem = a.iter().map(|&x| mulmod(x, c % q, q)).collect();
        self.reduce(&mut v);
        v
    }
    fn from_int(&self, c: i64) -> Elem {
        self.scale(&self.one(), reduce_i64(c, self.modulus()))
    }
    fn is_zero(&self, a: &[u64]) -> bool {
        a.iter().all(|&x| x == 0)
    }
    fn pow(&self, a: &[u64], mut e: u64) -> Elem {
        let mut base = a.to_vec();
        let mut r = self.one();
        while e > 0 {
            if e & 1 == 1 {
                r = self.mul(&r, &base);
            }
            e >>= 1;
            if e > 0 {
                base = self.mul(&base, &base);
            }
        }
        r
    }
    /// The ring as a module over itself, with actions of the algebra generators.
    fn as_module(&self) -> FinModule {
        let dim = self.dim();
        let actions = self
            .algebra_generators()
            .iter()
            .map(|g| {
                (0..dim)
                    .map(|k| {
                        let mut e = self.zero();
                        e[k] = 1;
                        self.mul(&e, g)
                    })
                    .collect()
            })
            .collect();
        FinModule { p: self.p(), q: self.modulus(), dim, rel: self.relations().clone(), actions }
    }
    /// `log_p` of the number of elements.
    fn log_cardinality(&self) -> u32 {
        self.dim() as u32 * vp(self.modulus(), self.p()) - self.relations().log_size()
    }
}

/// An ideal, stored as the Howell basis of its coordinate span together
/// with the ring's zero relations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ideal {
    span: Span,
}

impl Ideal {
    pub fn zero<R: Ring + ?Sized>(r: &R) -> Ideal {
        Ideal { span: r.relations().clone() }
    }

    pub fn unit<R: Ring + ?Sized>(r: &R) -> Ideal {
        Ideal::generated(r, &[r.one()])
    }

    /// The ideal generated by `gens`: their `Z`-span closed under
    /// multiplication by the algebra generators.
    pub fn generated<R: Ring + ?Sized>(r: &R, gens: &[Elem]) -> Ideal {
        Ideal::close(r, r.relations().with_rows(gens.iter().cloned()))
    }

    /// Wraps a span already known to be an ideal's coordinate span.
    pub fn from_span<R: Ring + ?Sized>(r: &R, span: Span) -> Ideal {
        Ideal::close(r, span.join(r.relations()))
    }

    fn close<R: Ring + ?Sized>(r: &R, mut span: Span) -> Ideal {
        let gens = r.algebra_generators();
        loop {
            let new: Vec<Elem> = span.rows().iter().flat_map(|row| gens.iter().map(move |g| r.mul(row, g))).collect();
            let next = span.with_rows(new);
            if next == span {
                return Ideal { span };
            }
            span = next;
        }
    }

    pub fn span(&self) -> &Span {
        &self.span
    }

    pub fn contains(&self, x: &[u64]) -> bool {
        self.span.contains(x)
    }

    pub fn is_subset(&self, other: &Ideal) -> bool {
        self.span.is_subset(&other.span)
    }

    pub fn sum(&self, other: &Ideal) -> Ideal {
        Ideal { span: self.span.join(&other.span) }
    }

    pub fn intersect(&self, other: &Ideal) -> Ideal {
        Ideal { span: self.span.intersect(&other.span) }
    }

    pub fn is_unit<R: Ring + ?Sized>(&self, r: &R) -> bool {
        self.contains(&r.one())
    }

    pub fn is_zero<R: Ring + ?Sized>(&self, r: &R) -> bool {
        self.span == *r.relations()
    }

    /// `log_p |R/J|`.
    pub fn colength<R: Ring + ?Sized>(&self, r: &R) -> u32 {
        r.dim() as u32 * vp(r.modulus(), r.p()) - self.span.log_size()
    }

    /// `ann(a) = {x : xa = 0}`.
    pub fn annihilator<R: Ring + ?Sized>(r: &R, a: &[u64]) -> Ideal {
        let dim = r.dim();
        let mat: Vec<Elem> = (0..dim)
            .map(|k| {
                let mut e = r.zero();
                e[k] = 1;
                r.mul(&e, a)
            })
            .collect();
        let ker = crate::linalg::left_kernel(r.p(), r.modulus(), &mat, dim, r.relations().rows());
        Ideal::from_span(r, ker)
    }

    /// Nonzero `Z`-generators of the ideal, reduced modulo the ring relations.
    pub fn generators<R: Ring + ?Sized>(&self, r: &R) -> Vec<Elem> {
        self.span.rows().iter().map(|row| r.relations().reduced(row)).filter(|v| v.iter().any(|&x| x != 0)).collect()
    }

    /// The ideal as an `R`-module presented on its `Z`-generators, returned
    /// with those generators (basis vector `k` maps to `gens[k]`).
    pub fn as_module<R: Ring + ?Sized>(&self, r: &R) -> (FinModule, Vec<Elem>) {
        let (p, q, dim) = (r.p(), r.modulus(), r.dim());
        let gens = self.generators(r);
        let k = gens.len();
        let rel = crate::linalg::left_kernel(p, q, &gens, dim, r.relations().rows());
        let actions = r
            .algebra_generators()
            .iter()
            .map(|a| {
                gens.iter()
                    .map(|g| {
                        crate::linalg::solve(p, q, &gens, dim, r.relations().rows(), &r.mul(g, a))
                            .expect("an ideal is closed under multiplication")
                    })
                    .collect()
            })
            .collect();
        (FinModule { p, q, dim: k, rel, actions }, gens)
    }
}
