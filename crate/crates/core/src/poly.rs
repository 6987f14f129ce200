//! Sparse multivariate polynomials over a coefficient ring `O`.
//!
//! Coefficients are power-basis coordinates stored as `i64`, so a polynomial
//! is plain data independent of the working precision. Arithmetic takes the
//! coefficient ring explicitly and reduces modulo `p^M`.

use crate::coeff::{CoeffElem, CoeffRing};
use crate::error::{invalid, Result};
use serde::de::Deserializer;
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, Vec<i64>>,
}

fn trim(mut c: Vec<i64>) -> Vec<i64> {
    while c.len() > 1 && *c.last().unwrap() == 0 {
        c.pop();
    }
    c
}

fn is_zero_coords(c: &[i64]) -> bool {
    c.iter().all(|&x| x == 0)
}

pub fn coords_of(c: &[u64]) -> Vec<i64> {
    trim(c.iter().map(|&x| x as i64).collect())
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Poly { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, coords: Vec<i64>) -> Self {
        Poly::monomial(nvars, vec![0; nvars], coords)
    }

    pub fn int(nvars: usize, c: i64) -> Self {
        Poly::constant(nvars, vec![c])
    }

    /// The variable `x_{i+1}` (0-based index `i`).
    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        Poly::monomial(nvars, e, vec![1])
    }

    pub fn monomial(nvars: usize, exps: Vec<u32>, coords: Vec<i64>) -> Self {
        assert_eq!(exps.len(), nvars);
        let mut terms = BTreeMap::new();
        if !is_zero_coords(&coords) {
            terms.insert(exps, trim(coords));
        }
        Poly { nvars, terms }
    }

    pub fn from_terms<I: IntoIterator<Item = (Vec<u32>, Vec<i64>)>>(nvars: usize, it: I) -> Self {
        let mut p = Poly::zero(nvars);
        for (e, c) in it {
            assert_eq!(e.len(), nvars);
            let entry = p.terms.entry(e).or_insert_with(Vec::new);
            let n = entry.len().max(c.len());
            entry.resize(n, 0);
            for (i, x) in c.into_iter().enumerate() {
                entry[i] += x;
            }
        }
        p.terms.retain(|_, c| !is_zero_coords(c));
        for c in p.terms.values_mut() {
            *c = trim(std::mem::take(c));
        }
        p
    }

    /// Linear polynomial `a0 + Σ a_i x_i` with integer coefficients.
    pub fn linear(a0: i64, a: &[i64]) -> Self {
        let n = a.len();
        let mut terms = vec![(vec![0; n], vec![a0])];
        for (i, &ai) in a.iter().enumerate() {
            let mut e = vec![0; n];
            e[i] = 1;
            terms.push((e, vec![ai]));
        }
        Poly::from_terms(n, terms)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &Vec<i64>)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|e| e.iter().all(|&x| x == 0))
    }

    pub fn constant_term(&self) -> Vec<i64> {
        self.terms.get(&vec![0; self.nvars]).cloned().unwrap_or_else(|| vec![0])
    }

    pub fn degree_in(&self, v: usize) -> u32 {
        self.terms.keys().map(|e| e[v]).max().unwrap_or(0)
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    /// Highest 0-based variable index appearing, if any.
    pub fn max_var(&self) -> Option<usize> {
        self.terms.keys().filter_map(|e| e.iter().rposition(|&x| x > 0)).max()
    }

    /// Coefficient of `x_v^k`, as a polynomial in the remaining variables.
    pub fn coeff_of_power(&self, v: usize, k: u32) -> Poly {
        Poly::from_terms(
            self.nvars,
            self.terms.iter().filter(|(e, _)| e[v] == k).map(|(e, c)| {
                let mut e = e.clone();
                e[v] = 0;
                (e, c.clone())
            }),
        )
    }

    /// Pads (or checks) the number of variables.
    pub fn with_nvars(&self, n: usize) -> Result<Poly> {
        if self.max_var().map_or(false, |v| v >= n) {
            return invalid(format!("polynomial uses more than {n} variables"));
        }
        Ok(Poly::from_terms(
            n,
            self.terms.iter().map(|(e, c)| {
                let mut e2 = vec![0; n];
                for (i, &x) in e.iter().enumerate().take(n) {
                    e2[i] = x;
                }
                (e2, c.clone())
            }),
        ))
    }

    fn reduce_with(&self, c: &CoeffRing) -> Poly {
        Poly::from_terms(
            self.nvars,
            self.terms.iter().map(|(e, x)| (e.clone(), coords_of(&c.from_coords(x).expect("coefficient fits the ring")))),
        )
    }

    pub fn add(&self, o: &Poly, c: &CoeffRing) -> Poly {
        Poly::from_terms(self.nvars, self.terms.iter().chain(o.terms.iter()).map(|(e, x)| (e.clone(), x.clone())))
            .reduce_with(c)
    }

    pub fn neg(&self, c: &CoeffRing) -> Poly {
        Poly::from_terms(self.nvars, self.terms.iter().map(|(e, x)| (e.clone(), x.iter().map(|v| -v).collect())))
            .reduce_with(c)
    }

    pub fn sub(&self, o: &Poly, c: &CoeffRing) -> Poly {
        self.add(&o.neg(c), c)
    }

    pub fn mul(&self, o: &Poly, c: &CoeffRing) -> Poly {
        let mut acc: BTreeMap<Vec<u32>, CoeffElem> = BTreeMap::new();
        for (e1, c1) in &self.terms {
            let a = c.from_coords(c1).expect("coefficient fits the ring");
            for (e2, c2) in &o.terms {
                let b = c.from_coords(c2).expect("coefficient fits the ring");
                let e: Vec<u32> = e1.iter().zip(e2).map(|(x, y)| x + y).collect();
                let prod = c.mul(&a, &b);
                let slot = acc.entry(e).or_insert_with(|| c.zero());
                *slot = c.add(slot, &prod);
            }
        }
        Poly::from_terms(self.nvars, acc.into_iter().map(|(e, v)| (e, coords_of(&v))))
    }

    pub fn pow(&self, mut e: u32, c: &CoeffRing) -> Poly {
        let mut r = Poly::int(self.nvars, 1);
        let mut b = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                r = r.mul(&b, c);
            }
            e >>= 1;
            if e > 0 {
                b = b.mul(&b, c);
            }
        }
        r
    }

    /// `f(images)`, where `images[i]` replaces `x_{i+1}`.
    pub fn substitute(&self, images: &[Poly], c: &CoeffRing) -> Poly {
        let n = images.first().map_or(0, |p| p.nvars);
        let mut out = Poly::zero(n);
        for (e, x) in &self.terms {
            let mut t = Poly::constant(n, x.clone());
            for (i, &k) in e.iter().enumerate() {
                if k > 0 {
                    t = t.mul(&images[i].pow(k, c), c);
                }
            }
            out = out.add(&t, c);
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CoeffJson {
    Int(i64),
    Coords(Vec<i64>),
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    coeff: CoeffJson,
    exps: Vec<u32>,
}

impl Serialize for Poly {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let terms: Vec<TermJson> = self
            .terms
            .iter()
            .map(|(e, c)| TermJson {
                coeff: if c.len() == 1 { CoeffJson::Int(c[0]) } else { CoeffJson::Coords(c.clone()) },
                exps: e.clone(),
            })
            .collect();
        terms.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Poly {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let terms: Vec<TermJson> = Vec::deserialize(d)?;
        let n = terms.iter().map(|t| t.exps.len()).max().unwrap_or(0);
        Ok(Poly::from_terms(
            n,
            terms.into_iter().map(|t| {
                let mut e = t.exps;
                e.resize(n, 0);
                let c = match t.coeff {
                    CoeffJson::Int(x) => vec![x],
                    CoeffJson::Coords(v) => v,
                };
                (e, c)
            }),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_square() {
        let c = CoeffRing::zp(5, 3).unwrap();
        let h = Poly::linear(5, &[1]);
        let h2 = h.pow(2, &c);
        assert_eq!(h2.coeff_of_power(0, 1).constant_term(), vec![10]);
        assert_eq!(h2.coeff_of_power(0, 0).constant_term(), vec![25]);
        assert_eq!(h2.degree_in(0), 2);
    }

    #[test]
    fn json_round_trip() {
        let p = Poly::from_terms(2, vec![(vec![1, 0], vec![3]), (vec![0, 2], vec![1, 2])]);
        let s = serde_json::to_string(&p).unwrap();
        let back: Poly = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn substitution_composes() {
        let c = CoeffRing::zp(5, 4).unwrap();
        let f = Poly::from_terms(1, vec![(vec![2], vec![1])]);
        let g = Poly::linear(5, &[1]);
        let fg = f.substitute(&[g.clone()], &c);
        assert_eq!(fg, g.pow(2, &c));
    }
}
