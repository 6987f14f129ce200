//! Coefficient rings: the integers `O` of a monogenic finite extension of
//! `Q_p`, truncated modulo `p^M`.
//!
//! Elements are coordinate vectors in the power basis `1, t, ..., t^{d-1}`
//! where `t` is a root of the defining polynomial. The trivial extension has
//! `d = 1` and is plain `Z/p^M`.

use crate::arith::*;
use crate::error::{invalid, Error, Result};
use serde::{Deserialize, Serialize};

pub type CoeffElem = Vec<u64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtKind {
    Trivial,
    Unramified,
    Eisenstein,
}

/// User-facing description of an extension: a monic integer polynomial,
/// coefficients listed from the constant term upwards.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtSpec {
    pub kind: ExtKind,
    pub poly: Vec<i64>,
}

#[derive(Clone, Debug)]
pub struct CoeffRing {
    p: u64,
    m: u32,
    q: u64,
    deg: usize,
    kind: ExtKind,
    spec_poly: Vec<i64>,
    e: u32,
    f: u32,
    /// `t^k` in the power basis for `k < 2d - 1`.
    red: Vec<CoeffElem>,
}

impl PartialEq for CoeffRing {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.m == other.m && self.kind == other.kind && self.spec_poly == other.spec_poly
    }
}

impl Eq for CoeffRing {}

impl CoeffRing {
    /// `Z/p^M`.
    pub fn zp(p: u64, m: u32) -> Result<Self> {
        Self::new(p, m, None)
    }

    pub fn new(p: u64, m: u32, ext: Option<&ExtSpec>) -> Result<Self> {
        if p < 3 || !is_prime(p) {
            return invalid(format!("p = {p} must be an odd prime"));
        }
        if m == 0 {
            return invalid("precision M must be positive");
        }
        let q = checked_pow(p, m).ok_or_else(|| Error::Precision(format!("{p}^{m} exceeds the word size")))?;
        let (kind, spec_poly) = match ext {
            None => (ExtKind::Trivial, vec![0, 1]),
            Some(s) if s.kind == ExtKind::Trivial => (ExtKind::Trivial, vec![0, 1]),
            Some(s) => (s.kind, s.poly.clone()),
        };
        let deg = spec_poly.len() - 1;
        if spec_poly.last() != Some(&1) {
            return invalid("extension polynomial must be monic");
        }
        let (e, f) = match kind {
            ExtKind::Trivial => (1, 1),
            ExtKind::Unramified => {
                if deg < 2 {
                    return invalid("unramified extension needs degree at least 2");
                }
                let red: Vec<u64> = spec_poly.iter().map(|&c| reduce_i64(c, p)).collect();
                if !fp_irreducible(&red, p) {
                    return invalid("polynomial is not irreducible modulo p");
                }
                (1, deg as u32)
            }
            ExtKind::Eisenstein => {
                if deg < 2 {
                    return invalid("Eisenstein extension needs degree at least 2");
                }
                if m < 2 {
                    return Err(Error::Precision("Eisenstein check needs M >= 2".into()));
                }
                let c0 = reduce_i64(spec_poly[0], p * p);
                if c0 % p != 0 || c0 == 0 {
                    return invalid("constant term must have valuation exactly 1");
                }
                if spec_poly[1..deg].iter().any(|&c| reduce_i64(c, p) != 0) {
                    return invalid("non-leading coefficients must be divisible by p");
                }
                (deg as u32, 1)
            }
        };
        let minpoly: Vec<u64> = spec_poly.iter().map(|&c| reduce_i64(c, q)).collect();
        let mut red = Vec::new();
        for k in 0..(2 * deg).saturating_sub(1).max(1) {
            if k < deg {
                let mut v = vec![0; deg];
                v[k] = 1;
                red.push(v);
            } else {
                let prev: &CoeffElem = &red[k - 1];
                let top = prev[deg - 1];
                let mut v = vec![0; deg];
                for j in (1..deg).rev() {
                    v[j] = prev[j - 1];
                }
                for j in 0..deg {
                    v[j] = submod(v[j], mulmod(top, minpoly[j], q), q);
                }
                red.push(v);
            }
        }
        let ring = CoeffRing { p, m, q, deg, kind, spec_poly, e, f, red };
        if kind == ExtKind::Eisenstein {
            let te = ring.pow(&ring.generator(), e as u64);
            if ring.valuation(&te) != Some(e) {
                return invalid("uniformizer power is not p times a unit");
            }
        }
        Ok(ring)
    }

    /// The same extension at a different precision.
    pub fn with_precision(&self, m: u32) -> Result<Self> {
        let spec = ExtSpec { kind: self.kind, poly: self.spec_poly.clone() };
        Self::new(self.p, m, if self.kind == ExtKind::Trivial { None } else { Some(&spec) })
    }

    pub fn p(&self) -> u64 {
        self.p
    }
    pub fn precision(&self) -> u32 {
        self.m
    }
    pub fn modulus(&self) -> u64 {
        self.q
    }
    pub fn degree(&self) -> usize {
        self.deg
    }
    pub fn kind(&self) -> ExtKind {
        self.kind
    }
    pub fn ramification(&self) -> u32 {
        self.e
    }
    pub fn residue_degree(&self) -> u32 {
        self.f
    }
    pub fn spec(&self) -> ExtSpec {
        ExtSpec { kind: self.kind, poly: self.spec_poly.clone() }
    }
    /// Largest finite valuation representable: `e * M`.
    pub fn cap(&self) -> u32 {
        self.e * self.m
    }
    pub fn residue_field_size(&self) -> u64 {
        self.p.pow(self.f)
    }

    pub fn zero(&self) -> CoeffElem {
        vec![0; self.deg]
    }
    pub fn one(&self) -> CoeffElem {
        self.from_int(1)
    }
    pub fn from_int(&self, c: i64) -> CoeffElem {
        let mut v = self.zero();
        v[0] = reduce_i64(c, self.q);
        v
    }
    pub fn from_coords(&self, c: &[i64]) -> Result<CoeffElem> {
        if c.len() > self.deg {
            return invalid(format!("coefficient has {} coordinates, ring degree is {}", c.len(), self.deg));
        }
        let mut v = self.zero();
        for (i, &x) in c.iter().enumerate() {
            v[i] = reduce_i64(x, self.q);
        }
        Ok(v)
    }
    /// The power-basis generator `t` (equal to 0 in the trivial ring).
    pub fn generator(&self) -> CoeffElem {
        if self.deg == 1 {
            return self.zero();
        }
        let mut v = self.zero();
        v[1] = 1;
        v
    }
    pub fn uniformizer(&self) -> CoeffElem {
        match self.kind {
            ExtKind::Eisenstein => self.generator(),
            _ => self.from_int(self.p as i64),
        }
    }

    pub fn is_zero(&self, a: &[u64]) -> bool {
        a.iter().all(|&x| x == 0)
    }
    pub fn add(&self, a: &[u64], b: &[u64]) -> CoeffElem {
        a.iter().zip(b).map(|(&x, &y)| addmod(x, y, self.q)).collect()
    }
    pub fn sub(&self, a: &[u64], b: &[u64]) -> CoeffElem {
        a.iter().zip(b).map(|(&x, &y)| submod(x, y, self.q)).collect()
    }
    pub fn neg(&self, a: &[u64]) -> CoeffElem {
        a.iter().map(|&x| negmod(x, self.q)).collect()
    }
    pub fn scale(&self, a: &[u64], c: u64) -> CoeffElem {
        a.iter().map(|&x| mulmod(x, c, self.q)).collect()
    }
    pub fn mul(&self, a: &[u64], b: &[u64]) -> CoeffElem {
        let q = self.q;
        if self.deg == 1 {
            return vec![mulmod(a[0], b[0], q)];
        }
        let d = self.deg;
        let mut conv = vec![0u128; 2 * d - 1];
        for i in 0..d {
            if a[i] == 0 {
                continue;
            }
            for j in 0..d {
                conv[i + j] = (conv[i + j] + a[i] as u128 * b[j] as u128) % q as u128;
            }
        }
        let mut out = vec![0u64; d];
        for (k, &c) in conv.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let c = c as u64;
            for (o, &r) in out.iter_mut().zip(&self.red[k]) {
                *o = addmod(*o, mulmod(c, r, q), q);
            }
        }
        out
    }
    pub fn pow(&self, a: &[u64], mut e: u64) -> CoeffElem {
        let mut base = a.to_vec();
        let mut r = self.one();
        while e > 0 {
            if e & 1 == 1 {
                r = self.mul(&r, &base);
            }
            base = self.mul(&base, &base);
            e >>= 1;
        }
        r
    }

    /// Normalized valuation `v(ϖ) = 1`; `None` means zero at working precision.
    pub fn valuation(&self, a: &[u64]) -> Option<u32> {
        let vals = a.iter().enumerate().filter(|(_, &c)| c != 0).map(|(j, &c)| match self.kind {
            ExtKind::Eisenstein => self.e * vp(c, self.p) + j as u32,
            _ => vp(c, self.p),
        });
        vals.min()
    }

    pub fn is_unit(&self, a: &[u64]) -> bool {
        self.valuation(a) == Some(0)
    }

    pub fn inv(&self, a: &[u64]) -> Result<CoeffElem> {
        if !self.is_unit(a) {
            return invalid("element is not a unit");
        }
        if self.deg == 1 {
            return Ok(vec![inv_mod(a[0], self.q).expect("unit")]);
        }
        let mut y = self.pow(a, self.residue_field_size() - 2);
        let two = self.from_int(2);
        for _ in 0..64 {
            let ay = self.mul(a, &y);
            if ay == self.one() {
                return Ok(y);
            }
            y = self.mul(&y, &self.sub(&two, &ay));
        }
        Err(Error::Precision("Newton inversion did not converge".into()))
    }

    /// Residue of `a` modulo the maximal ideal, as coordinates over `F_p`
    /// (length `f`).
    pub fn residue(&self, a: &[u64]) -> Vec<u64> {
        match self.kind {
            ExtKind::Unramified => a.iter().map(|&c| c % self.p).collect(),
            _ => vec![a[0] % self.p],
        }
    }

    /// Divides by `p^k` coordinate-wise; errors unless every coordinate is
    /// divisible. The result is only meaningful modulo `p^{M-k}`.
    pub fn div_p_pow(&self, a: &[u64], k: u32) -> Result<CoeffElem> {
        let pk = self.p.pow(k);
        if a.iter().any(|&c| c % pk != 0) {
            return invalid(format!("element not divisible by p^{k}"));
        }
        Ok(a.iter().map(|&c| c / pk).collect())
    }

    /// `log(u)` for `u ∈ 1 + pO`, computed at a raised internal precision so
    /// the divisions by `k` lose nothing. Returns the value and its precision.
    pub fn padic_log(&self, u: &[u64]) -> Result<(CoeffElem, u32)> {
        let w0 = self.sub(u, &self.one());
        if w0.iter().any(|&c| c % self.p != 0) {
            return invalid("logarithm argument must lie in 1 + pO");
        }
        let terms = 2 * self.m as u64 + 4;
        let extra = ilog(self.p, terms);
        let hi = self.with_precision(self.m + extra)?;
        let w: CoeffElem = w0.clone();
        let mut acc = hi.zero();
        let mut pw = w.clone();
        for k in 1..=terms {
            let v = vp(k, self.p);
            let mut term = hi.div_p_pow(&pw, v)?;
            let unit = k / self.p.pow(v);
            term = hi.scale(&term, inv_mod(unit % hi.q, hi.q).expect("unit"));
            acc = if k % 2 == 1 { hi.add(&acc, &term) } else { hi.sub(&acc, &term) };
            pw = hi.mul(&pw, &w);
        }
        Ok((acc.iter().map(|&c| c % self.q).collect(), self.m))
    }
}

/// `log(u)` in `Z/p^M` for an integer `u ≡ 1 mod p`.
pub fn zp_log(p: u64, m: u32, u: u64) -> Result<u64> {
    let r = CoeffRing::zp(p, m)?;
    Ok(r.padic_log(&r.from_int((u % r.q) as i64))?.0[0])
}

/// The exponent `s ∈ Z_p` with `(1+p)^s = u`, for `u ∈ 1 + pZ_p`, known
/// modulo `p^{M-1}`.
pub fn gamma_exponent(p: u64, m: u32, u: u64) -> Result<u64> {
    if m < 2 {
        return Err(Error::Precision("gamma_exponent needs M >= 2".into()));
    }
    let q1 = p.pow(m - 1);
    let lu = zp_log(p, m, u)?;
    let lg = zp_log(p, m, 1 + p)?;
    if lu % p != 0 || lg % p != 0 || (lg / p) % p == 0 {
        return Err(Error::Precision("unexpected logarithm valuation".into()));
    }
    let inv = inv_mod((lg / p) % q1, q1).expect("unit");
    Ok(mulmod((lu / p) % q1, inv, q1))
}

/// Teichmüller representative of an integer prime to `p`, modulo `p^M`.
pub fn teichmuller(p: u64, m: u32, a: u64) -> Result<u64> {
    if a % p == 0 {
        return invalid("Teichmüller lift needs a unit");
    }
    let q = checked_pow(p, m).ok_or_else(|| Error::Precision("modulus overflow".into()))?;
    let mut x = a % q;
    for _ in 0..=m {
        x = powmod(x, p, q);
    }
    Ok(x)
}

/// The projection `pr(ℓ) = ℓ ω(ℓ)^{-1} ∈ 1 + pZ_p`, modulo `p^M`.
pub fn principal_unit(p: u64, m: u32, l: u64) -> Result<u64> {
    let q = checked_pow(p, m).ok_or_else(|| Error::Precision("modulus overflow".into()))?;
    let w = teichmuller(p, m, l)?;
    Ok(mulmod(l % q, inv_mod(w, q).expect("unit"), q))
}

/// Irreducibility over `F_p` of a monic polynomial (low-to-high coefficients),
/// by the Ben-Or criterion.
pub fn fp_irreducible(f: &[u64], p: u64) -> bool {
    let n = f.len() - 1;
    if n == 0 {
        return false;
    }
    if n == 1 {
        return true;
    }
    let x = vec![0, 1];
    let mut xp = x.clone();
    for _ in 0..n / 2 {
        xp = fp_powmod(&xp, p, f, p);
        let diff = fp_sub(&xp, &x, p);
        if fp_gcd(&diff, f, p).len() > 1 {
            return false;
        }
    }
    true
}

fn fp_trim(mut a: Vec<u64>) -> Vec<u64> {
    while a.len() > 1 && *a.last().unwrap() == 0 {
        a.pop();
    }
    if a.is_empty() {
        a.push(0);
    }
    a
}

fn fp_sub(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let n = a.len().max(b.len());
    let v = (0..n)
        .map(|i| submod(*a.get(i).unwrap_or(&0), *b.get(i).unwrap_or(&0), p))
        .collect();
    fp_trim(v)
}

fn fp_rem(a: &[u64], m: &[u64], p: u64) -> Vec<u64> {
    let mut r = fp_trim(a.to_vec());
    let dm = m.len() - 1;
    let lead_inv = inv_mod(m[dm], p).expect("nonzero leading coefficient");
    while r.len() > dm && !(r.len() == 1 && r[0] == 0) {
        let dr = r.len() - 1;
        let c = mulmod(r[dr], lead_inv, p);
        for j in 0..=dm {
            r[dr - dm + j] = submod(r[dr - dm + j], mulmod(c, m[j], p), p);
        }
        r = fp_trim(r);
        if r.len() - 1 < dm {
            break;
        }
    }
    r
}

fn fp_mulmod(a: &[u64], b: &[u64], m: &[u64], p: u64) -> Vec<u64> {
    let mut c = vec![0u64; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            c[i + j] = addmod(c[i + j], mulmod(x, y, p), p);
        }
    }
    fp_rem(&c, m, p)
}

fn fp_powmod(a: &[u64], mut e: u64, m: &[u64], p: u64) -> Vec<u64> {
    let mut r = vec![1];
    let mut b = fp_rem(a, m, p);
    while e > 0 {
        if e & 1 == 1 {
            r = fp_mulmod(&r, &b, m, p);
        }
        b = fp_mulmod(&b, &b, m, p);
        e >>= 1;
    }
    r
}

fn fp_gcd(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mut a = fp_trim(a.to_vec());
    let mut b = fp_trim(b.to_vec());
    while !(b.len() == 1 && b[0] == 0) {
        let r = fp_rem(&a, &b, p);
        a = b;
        b = r;
    }
    a
}
