//! Kolyvagin derivative classes, the universal Kolyvagin element, the
//! ideals `𝒦ℐ(𝐜; I; n)` and `𝔠(𝐜; I; n)`, their ladders over truncation
//! depths, and the numerical checks of their compatibility laws.
//!
//! Everything lives in the free mock model `M(n) = F ⊗ R[H_n]` with
//! `F = R^ρ`. There `Hom_{R[H_n]}(M(n), R[H_n])` is spanned by the coordinate
//! functionals, so the ideal of homomorphic images of an element is the
//! ideal generated by its coordinates. The literal route through the Hom
//! module is kept as a cross-check on small group rings.
//!
//! A truncation depth is a quotient `Λ/I(𝐡^𝐦)` written in the coordinates
//! of `𝐡`, together with a realization of the symbolic data of `Λ` in it.
//! Ring maps between depths are always built through `hom_to`, which fails
//! unless the source ideal maps to zero; this doubles as the containment
//! test `I′ ⊆ I`.

use crate::arith::*;
use crate::coeff::{CoeffRing, ExtSpec};
use crate::error::{invalid, verification, Error, Result};
use crate::euler::{norm_preimage, res, EulerSystem, MockElem};
use crate::fitting::PresentedModule;
use crate::galois::{e_map, levels_from_primes, twist_power, DeformationData, GroupRing, Level};
use crate::lambda::{AffineMap, Mps, QuotientRing, Realization, RingHom};
use crate::linalg::{extend_homs, hom_module, image_ideal, left_kernel, vecmat, FinModule, Span};
use crate::poly::Poly;
use crate::ring::{Elem, Ideal, Ring};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

/// Largest `#Prime(n)` for the signed permutation sum.
pub const PERMUTATION_BUDGET: usize = 6;
/// Largest `dim(M) · dim(R[H_n])` for which Hom modules are enumerated.
pub const HOM_BUDGET: usize = 6000;
/// Largest `rank · |H_n|² · dim(R)²` for the hom-lifting check; its cost
/// grows roughly with the cube of this size.
pub const LIFT_BUDGET: usize = 1000;
/// Largest `dim R[H_n]` for ideal closures inside the group ring.
pub const GROUP_IDEAL_BUDGET: usize = 400;
/// Number of consecutive equal images required to flag a ladder as stabilized.
pub const STABILITY_WINDOW: usize = 3;
/// Largest exponent tried when searching for a containing depth.
const DEPTH_SEARCH: u32 = 48;

/// `κ(𝐜; n)_I`, stored as coordinates in `F/IF`; the twist by `⊗σ_ℓ` is
/// recorded through the generators used.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DerivativeClass {
    pub n: u64,
    pub generators: Vec<u64>,
    pub kappa: Vec<Elem>,
}

/// A coordinate system on `Λ`: a monic parameter system `mps` written in
/// its own variables `u`, with `forward[k]` expressing `u_k` through the
/// variables `x` of `Λ` and `inverse[j]` expressing `x_j` through `u`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Coordinates {
    pub mps: Mps,
    pub forward: Vec<Poly>,
    pub inverse: Vec<Poly>,
}

fn variables(r: usize) -> Vec<Poly> {
    (0..r).map(|i| Poly::var(r, i)).collect()
}

impl Coordinates {
    pub fn standard(c: &CoeffRing, r: usize) -> Self {
        Coordinates { mps: Mps::standard(c, r), forward: variables(r), inverse: variables(r) }
    }

    /// A parameter system in the variables of `Λ` itself.
    pub fn with_mps(mps: Mps) -> Result<Self> {
        let mps = mps.with_nvars()?;
        let r = mps.r();
        Ok(Coordinates { mps, forward: variables(r), inverse: variables(r) })
    }

    /// The standard system in `y = A x + v`.
    pub fn affine(map: &AffineMap, c: &CoeffRing) -> Result<Self> {
        map.validate(c)?;
        let inv = map.inverse(c)?;
        Ok(Coordinates { mps: Mps::standard(c, map.r()), forward: map.images(), inverse: inv.images() })
    }

    /// `Λ^{(r)} → Λ^{(r-1)}` killing a linear element `h = x_r + g(x_{<r})`
    /// with `g(0) ∈ ϖO`: the standard system of `Λ^{(r-1)}`, with
    /// `x_r ↦ -g`.
    pub fn specialization(c: &CoeffRing, h: &Poly) -> Result<Self> {
        let r = h.nvars();
        if r == 0 {
            return invalid("specialization needs at least one variable");
        }
        if h.total_degree() > 1 {
            return invalid("specialization element must be linear");
        }
        let lead = h.coeff_of_power(r - 1, 1);
        if lead != Poly::int(r, 1) {
            return invalid("specialization element must be monic in the last variable");
        }
        let g = h.sub(&Poly::var(r, r - 1), c);
        if c.valuation(&c.from_coords(&g.constant_term())?) == Some(0) {
            return invalid("constant term of the specialization element must lie in ϖO");
        }
        let low = Poly::from_terms(r - 1, g.terms().map(|(e, x)| (e[..r - 1].to_vec(), x.clone())));
        let mut inverse = variables(r - 1);
        inverse.push(low.neg(c));
        let forward = (0..r - 1).map(|i| Poly::var(r, i)).collect();
        Ok(Coordinates { mps: Mps::standard(c, r - 1), forward, inverse })
    }

    pub fn depth(&self, c: &CoeffRing, m: &[u32]) -> Result<Depth> {
        let ring = Arc::new(QuotientRing::new(c, &self.mps, m)?);
        let real = Realization::standard(ring).compose(&self.inverse)?;
        Ok(Depth { m: m.to_vec(), real, forward: self.forward.clone() })
    }
}

/// A finite quotient `Λ/I(𝐡^𝐦)` with the data of `Λ` realized in it.
#[derive(Clone, Debug)]
pub struct Depth {
    pub m: Vec<u32>,
    pub real: Realization,
    forward: Vec<Poly>,
}

impl Depth {
    pub fn ring(&self) -> &Arc<QuotientRing> {
        &self.real.ring
    }
}

/// The reduction `from → to`, defined exactly when the ideal of `from`
/// contains that of `to` (as ideals of `Λ`).
pub fn depth_hom(from: &Depth, to: &Depth) -> Result<RingHom> {
    let vars = from.forward.iter().map(|f| to.real.poly(f)).collect::<Result<Vec<_>>>()?;
    let gen = to.ring().from_coeff(&to.ring().coeff().generator());
    from.ring().hom_to(to.ring(), &vars, &gen)
}

/// Renders an ideal as its canonical generators.
pub fn ideal_polys(ring: &QuotientRing, j: &Ideal) -> Vec<Poly> {
    j.generators(ring).iter().map(|g| ring.to_poly(g)).collect()
}

/// Permutations of `0..k` with their parity (true when odd).
fn permutations(k: usize) -> Vec<(Vec<usize>, bool)> {
    fn rec(i: usize, cur: &mut Vec<usize>, odd: bool, out: &mut Vec<(Vec<usize>, bool)>) {
        if i + 1 >= cur.len() {
            out.push((cur.clone(), odd));
            return;
        }
        for j in i..cur.len() {
            cur.swap(i, j);
            rec(i + 1, cur, odd ^ (i != j), out);
            cur.swap(i, j);
        }
    }
    let mut out = Vec::new();
    rec(0, &mut (0..k).collect(), false, &mut out);
    out
}

/// Which levels enter `𝔠_i` at each depth.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Family {
    /// `𝒩(𝕋, I) ∩ {#Prime(n) ≤ i}`.
    Admissible,
    /// Admissible levels built from the listed primes only.
    Primes(Vec<u64>),
    /// One explicit level list per depth; must be nested and admissible.
    Custom(Vec<Vec<u64>>),
}

/// `𝔠_i(𝐜; I(𝐡^𝐦))` over a depth schedule.
#[derive(Clone, Debug, Serialize)]
pub struct IdealLadder {
    pub i: usize,
    pub depth: Vec<Vec<u32>>,
    pub generators: Vec<Vec<Poly>>,
    pub levels: Vec<Vec<u64>>,
    pub colength: Vec<u32>,
    /// Image of rung `j + 1` contained in rung `j`.
    pub containment: Vec<bool>,
    pub stabilized: bool,
    pub stability_rule: String,
    #[serde(skip)]
    pub ideals: Vec<Ideal>,
    #[serde(skip)]
    pub depths: Vec<Depth>,
}

impl IdealLadder {
    pub fn containments_hold(&self) -> bool {
        self.containment.iter().all(|&b| b)
    }
}

/// Both sides of the level compatibility at one level.
#[derive(Clone, Debug, Serialize)]
pub struct LevelCompat {
    pub n: u64,
    pub fine: Vec<u32>,
    pub coarse: Vec<u32>,
    pub c_equal: bool,
    /// Equality of the reduced `𝒦ℐ` ideals, when the group ring is small enough.
    pub ki_equal: Option<bool>,
    /// Hom lifting through the self-injectivity of the group rings, when run.
    pub lifting: Option<bool>,
}

impl LevelCompat {
    pub fn pass(&self) -> bool {
        self.c_equal && self.ki_equal != Some(false) && self.lifting != Some(false)
    }
}

/// One consecutive pair of an interleaved schedule.
#[derive(Clone, Debug, Serialize)]
pub struct InterleaveStep {
    pub fine_system: usize,
    pub fine: Vec<u32>,
    pub coarse_system: usize,
    pub coarse: Vec<u32>,
    /// `𝔠(𝐜; I_fine; n)_{I_coarse} = 𝔠(𝐜; I_coarse; n)` for every fine level.
    pub per_level_equal: bool,
    pub ladder_contained: bool,
    /// Same admissible level sets at both depths.
    pub matched: bool,
    pub ladder_equal: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct IndependenceReport {
    pub i: usize,
    pub steps: Vec<InterleaveStep>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalarExtensionRung {
    pub depth: Vec<u32>,
    pub extended_depth: Vec<u32>,
    pub injective: bool,
    pub levels_equal: bool,
    pub per_level_equal: bool,
    pub extension_equal: bool,
    pub contraction_equal: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalarExtensionReport {
    pub extension: ExtSpec,
    pub i: usize,
    pub rungs: Vec<ScalarExtensionRung>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpecializationRung {
    pub depth: Vec<u32>,
    pub fine_depth: Vec<u32>,
    pub reduced: Vec<Poly>,
    pub specialized: Vec<Poly>,
    pub contained: bool,
    pub equal: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpecializationReport {
    pub h: Poly,
    pub i: usize,
    pub rungs: Vec<SpecializationRung>,
    /// The containment always holds in the model and is asserted.
    pub pass: bool,
    /// Equality is diagnostic only.
    pub equal_count: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct StrongSpecializationReport {
    pub a: Vec<i64>,
    pub m0: u32,
    pub embedding_injective: bool,
    /// `log_p |ker ē_{m′_0}|` and `Z`-generators of that kernel.
    pub embedding_kernel_log_size: u32,
    pub embedding_kernel: Vec<Elem>,
    pub coarse_embedding_injective: bool,
    pub diagram_commutes: bool,
    pub admissible_sets_equal: bool,
    pub per_level_equal: bool,
    pub specialization: SpecializationReport,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CyclotomicRung {
    pub m: u32,
    /// `None` when no `N ≤ M - 1` satisfies the congruence on the pool.
    pub n_of_m: Option<u32>,
    pub restricted_primes: Vec<u64>,
    pub vacuous: bool,
    pub level_sets_equal: bool,
    pub inner_contained: bool,
    pub outer_contained: bool,
    pub equal: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CyclotomicReport {
    pub h: Poly,
    pub i: usize,
    pub rungs: Vec<CyclotomicRung>,
    pub pass: bool,
}

/// `∂(κ; n)`, capped at the precision of the coefficient ring.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DelValue {
    pub n: u64,
    pub value: u32,
    pub capped: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DelStatistics {
    pub t: u32,
    pub primes: Vec<u64>,
    pub values: Vec<DelValue>,
    /// `∂_i(κ)_t` for `i = 0, 1, …`; `None` when no level qualifies.
    pub del_i: Vec<Option<DelValue>>,
}

/// The derivative-and-ideal engine for one Euler system.
#[derive(Clone)]
pub struct Engine<'a> {
    pub t: &'a DeformationData,
    pub es: &'a EulerSystem,
    /// Use `Frob_q^{-1}` inside the `e`-coefficients.
    pub inverse_frobenius: bool,
    /// Generator `σ_ℓ` per prime; the smallest primitive root otherwise.
    pub generators: BTreeMap<u64, u64>,
}

impl<'a> Engine<'a> {
    pub fn new(t: &'a DeformationData, es: &'a EulerSystem) -> Self {
        Engine { t, es, inverse_frobenius: false, generators: BTreeMap::new() }
    }

    pub fn with_generators(mut self, gens: BTreeMap<u64, u64>) -> Self {
        self.generators = gens;
        self
    }

    pub fn with_inverse_frobenius(mut self, on: bool) -> Self {
        self.inverse_frobenius = on;
        self
    }

    pub fn level(&self, n: u64) -> Result<Level> {
        let gens: Vec<u64> = prime_factors(n).iter().map(|l| self.generators.get(l).copied().unwrap_or_else(|| primitive_root(*l))).collect();
        Level::with_generators(n, &self.t.sigma_set, &gens)
    }

    /// Fails with `NotAdmissible` unless `n ∈ 𝒩(𝕋, I)`.
    pub fn check_admissible(&self, real: &Realization, n: u64) -> Result<()> {
        for l in prime_factors(n) {
            if !self.t.frobenius.contains_key(&l) {
                return Err(Error::NotAdmissible(format!("{l} is not in the prime pool")));
            }
            if !self.t.prime_in_p(l, real)?.admissible {
                return Err(Error::NotAdmissible(format!("{l} is not admissible at this depth")));
            }
        }
        Ok(())
    }

    /// `D_n c(n)` in `M(n)` over `gr`.
    fn derivative_on(&self, gr: &GroupRing, real: &Realization) -> Result<MockElem> {
        let c = self.es.class(self.t, gr, real)?;
        Ok(c.iter().map(|x| gr.apply_dn(x)).collect())
    }

    /// `D_n c(n)` modulo `I`, at the engine's generators.
    pub fn derivative(&self, real: &Realization, n: u64) -> Result<MockElem> {
        let gr = GroupRing::new(real.ring.clone(), self.level(n)?);
        self.derivative_on(&gr, real)
    }

    /// `κ(𝐜; n)_I`: verifies `(σ - 1) D_n c(n) ∈ I M(n)` for every
    /// generator, then divides off the norm.
    pub fn derivative_class(&self, real: &Realization, n: u64) -> Result<DerivativeClass> {
        self.check_admissible(real, n)?;
        let lv = self.level(n)?;
        let gr = GroupRing::new(real.ring.clone(), lv.clone());
        let dc = self.derivative_on(&gr, real)?;
        for (i, &l) in lv.primes().iter().enumerate() {
            for x in &dc {
                if gr.shift(x, lv.sigma(i)) != *x {
                    return verification(format!("derivative congruence fails at n = {n} for σ_{l}"));
                }
            }
        }
        let kappa = norm_preimage(&gr, &dc).ok_or_else(|| Error::Verification(format!("D_{n} c({n}) is not in the norm image")))?;
        Ok(DerivativeClass { n, generators: lv.generators().to_vec(), kappa })
    }

    /// `e_{I,H_ℓ}(P_ℓ(Frob_q))` in `R`, for admissible `ℓ` and `q ≠ ℓ`.
    pub fn a_coefficient(&self, real: &Realization, l: u64, q: u64) -> Result<Elem> {
        let lv = self.level(l)?;
        let gr = GroupRing::new(real.ring.clone(), lv.clone());
        let coeffs = self.t.euler_poly(l, real)?;
        let mut fr = lv.frobenius(q)?;
        if self.inverse_frobenius {
            fr = lv.pow_idx(fr, -1);
        }
        e_map(&gr, 0, &gr.eval_poly(&coeffs, fr))
    }

    /// The closed form `t · P′_ℓ(1)` of the `e`-coefficient, where
    /// `Frob_q = σ_ℓ^t`; a lift `A(α, ℓ)` valid at every admissible depth.
    pub fn a_lift(&self, real: &Realization, l: u64, q: u64) -> Result<Elem> {
        let lv = self.level(l)?;
        let mut t = lv.exps(lv.frobenius(q)?)[0] as i64;
        if self.inverse_frobenius {
            t = -t;
        }
        let r = real.ring.as_ref();
        let coeffs = self.t.euler_poly(l, real)?;
        let deriv = coeffs.iter().enumerate().skip(1).fold(r.zero(), |acc, (k, a)| r.add(&acc, &r.scale(a, k as u64)));
        Ok(r.mul(&deriv, &r.from_int(t)))
    }

    /// Signed permutation terms: `(d_α, Π_{ℓ ∤ d_α} e(P_ℓ(Frob_{α(ℓ)})), odd)`.
    fn permutation_terms(&self, real: &Realization, n: u64) -> Result<Vec<(u64, Elem, bool)>> {
        let primes = prime_factors(n);
        if primes.len() > PERMUTATION_BUDGET {
            return Err(Error::Budget(format!("#Prime({n}) exceeds {PERMUTATION_BUDGET}")));
        }
        let r = real.ring.as_ref();
        let mut a_cache: HashMap<(u64, u64), Elem> = HashMap::new();
        let mut out = Vec::new();
        for (perm, odd) in permutations(primes.len()) {
            let mut d = 1u64;
            let mut coef = r.one();
            for (k, &j) in perm.iter().enumerate() {
                if j == k {
                    d *= primes[k];
                    continue;
                }
                let key = (primes[k], primes[j]);
                if !a_cache.contains_key(&key) {
                    a_cache.insert(key, self.a_coefficient(real, key.0, key.1)?);
                }
                coef = r.mul(&coef, &a_cache[&key]);
            }
            out.push((d, coef, odd));
        }
        Ok(out)
    }

    /// `κ_n^univ(𝐜)_I = Σ_α sign(α) κ(𝐜; d_α)_I ⊗ Π e(P_ℓ(Frob_{α(ℓ)}))`.
    pub fn universal_kolyvagin(&self, real: &Realization, n: u64) -> Result<Vec<Elem>> {
        self.check_admissible(real, n)?;
        let r = real.ring.as_ref();
        let mut cache: HashMap<u64, Vec<Elem>> = HashMap::new();
        let mut acc = vec![r.zero(); self.es.rank];
        for (d, coef, odd) in self.permutation_terms(real, n)? {
            if r.is_zero(&coef) {
                continue;
            }
            if !cache.contains_key(&d) {
                cache.insert(d, self.derivative_class(real, d)?.kappa);
            }
            for (a, x) in acc.iter_mut().zip(&cache[&d]) {
                let t = r.mul(&coef, x);
                *a = if odd { r.sub(a, &t) } else { r.add(a, &t) };
            }
        }
        Ok(acc)
    }

    /// `d_n^univ(𝐜)_I = Σ_α sign(α) (Π A(α, ℓ)) res_{d_α → n} D_{d_α} c(d_α)` in `M(n)`.
    pub fn d_universal(&self, real: &Realization, n: u64) -> Result<MockElem> {
        self.check_admissible(real, n)?;
        let lv = self.level(n)?;
        let gr = GroupRing::new(real.ring.clone(), lv.clone());
        let mut cache: HashMap<u64, MockElem> = HashMap::new();
        let mut acc: MockElem = vec![gr.zero(); self.es.rank];
        for (d, coef, odd) in self.permutation_terms(real, n)? {
            if real.ring.is_zero(&coef) {
                continue;
            }
            if !cache.contains_key(&d) {
                let gs = GroupRing::new(real.ring.clone(), lv.sublevel(d)?);
                let dd = self.derivative_on(&gs, real)?;
                cache.insert(d, res(&gs, &gr, &dd)?);
            }
            let g = gr.embed(&coef, 0);
            for (a, x) in acc.iter_mut().zip(&cache[&d]) {
                let t = gr.mul(&g, x);
                *a = if odd { gr.sub(a, &t) } else { gr.add(a, &t) };
            }
        }
        Ok(acc)
    }

    /// The norm-preimage of `d_n^univ` equals `κ_n^univ`.
    pub fn check_norm_inverse(&self, real: &Realization, n: u64) -> Result<()> {
        let d = self.d_universal(real, n)?;
        let gr = GroupRing::new(real.ring.clone(), self.level(n)?);
        let y = norm_preimage(&gr, &d).ok_or_else(|| Error::Verification(format!("d^univ at {n} is not fixed modulo I")))?;
        if y != self.universal_kolyvagin(real, n)? {
            return verification(format!("norm-preimage of d^univ differs from κ^univ at {n}"));
        }
        Ok(())
    }

    /// `𝒦ℐ(𝐜; I; n)`: the ideal of `R[H_n]` generated by the coordinates of `d_n^univ`.
    pub fn ki_ideal(&self, depth: &Depth, n: u64) -> Result<Ideal> {
        let gr = GroupRing::new(depth.ring().clone(), self.level(n)?);
        if gr.dim() > GROUP_IDEAL_BUDGET {
            return Err(Error::Budget(format!("R[H_{n}] has rank {} > {GROUP_IDEAL_BUDGET}", gr.dim())));
        }
        let d = self.d_universal(&depth.real, n)?;
        Ok(Ideal::generated(&gr, &d))
    }

    /// `𝔠(𝐜; I; n)` by the shortcut: the coordinate ideal of `κ_n^univ`.
    pub fn c_ideal_level(&self, depth: &Depth, n: u64) -> Result<Ideal> {
        let k = self.universal_kolyvagin(&depth.real, n)?;
        Ok(Ideal::generated(depth.ring().as_ref(), &k))
    }

    /// `𝔠(𝐜; I′; n)_I` for `I′ ⊆ I`: reduce `d_n^univ` along `hom`, check
    /// that it is fixed, and pull back along `x ↦ N_{H_n} x`.
    pub fn c_ideal(&self, fine: &Depth, coarse: &Depth, hom: &RingHom, n: u64) -> Result<Ideal> {
        self.check_admissible(&coarse.real, n)?;
        let d = self.d_universal(&fine.real, n)?;
        let lv = self.level(n)?;
        let grf = GroupRing::new(fine.ring().clone(), lv.clone());
        let grc = GroupRing::new(coarse.ring().clone(), lv);
        let mut gens = Vec::new();
        for x in &d {
            let y = grf.map_base(x, hom, &grc);
            if !grc.is_fixed(&y) {
                return verification(format!("reduced Kolyvagin image at {n} is not fixed by H_{n}"));
            }
            gens.push(grc.block(&y, 0).to_vec());
        }
        Ok(Ideal::generated(coarse.ring().as_ref(), &gens))
    }

    /// `𝔠(𝐜; I; n)` computed literally: the images of `d_n^univ` under all of
    /// `Hom_{R[H_n]}(M(n), R[H_n])`, then the preimage under `x ↦ N x`.
    pub fn c_ideal_by_homs(&self, depth: &Depth, n: u64) -> Result<Ideal> {
        self.check_admissible(&depth.real, n)?;
        let gr = GroupRing::new(depth.ring().clone(), self.level(n)?);
        let rmod = gr.as_module();
        let m = free_module(&rmod, self.es.rank);
        if m.dim * rmod.dim > HOM_BUDGET {
            return Err(Error::Budget(format!("Hom enumeration of size {} exceeds {HOM_BUDGET}", m.dim * rmod.dim)));
        }
        let homs = hom_module(&m, &rmod)?;
        let flat: Vec<u64> = self.d_universal(&depth.real, n)?.concat();
        let span = image_ideal(&homs, &rmod, &flat);
        for row in span.rows() {
            if !gr.is_fixed(&gr.relations().reduced(row)) {
                return verification(format!("a Kolyvagin image at {n} is not fixed by H_{n}"));
            }
        }
        let base = depth.ring();
        let norms: Vec<Elem> = (0..base.dim())
            .map(|k| {
                let mut e = base.zero();
                e[k] = 1;
                gr.apply_norm(&gr.embed(&e, 0))
            })
            .collect();
        let ker = left_kernel(gr.p(), gr.modulus(), &norms, gr.dim(), span.rows());
        Ok(Ideal::from_span(base.as_ref(), ker))
    }

    /// The levels entering `𝔠_i` at a depth.
    pub fn levels(&self, depth: &Depth, i: usize, family: &Family, index: usize) -> Result<Vec<u64>> {
        let adm = self.t.admissible_primes(&depth.real)?;
        match family {
            Family::Admissible => Ok(levels_from_primes(&adm, i)),
            Family::Primes(ps) => {
                let keep: Vec<u64> = adm.into_iter().filter(|l| ps.contains(l)).collect();
                Ok(levels_from_primes(&keep, i))
            }
            Family::Custom(lists) => {
                let list = lists.get(index).ok_or_else(|| Error::InvalidInput("custom level family is shorter than the depth schedule".into()))?;
                let allowed: BTreeSet<u64> = levels_from_primes(&adm, usize::MAX).into_iter().collect();
                if let Some(n) = list.iter().find(|n| !allowed.contains(n)) {
                    return invalid(format!("custom level {n} is not admissible at depth {:?}", depth.m));
                }
                let mut out: Vec<u64> = list.iter().copied().filter(|&n| prime_factors(n).len() <= i).collect();
                if !out.contains(&1) {
                    out.push(1);
                }
                out.sort_unstable();
                out.dedup();
                Ok(out)
            }
        }
    }

    /// `𝔠_i(𝐜; I)` over an explicit level list.
    pub fn c_i_over(&self, depth: &Depth, levels: &[u64]) -> Result<Ideal> {
        let ring = depth.ring().as_ref();
        let mut acc = Ideal::zero(ring);
        for &n in levels {
            let j = self.c_ideal_level(depth, n).map_err(|e| with_context(e, &format!("level {n}, depth {:?}", depth.m)))?;
            acc = acc.sum(&j);
        }
        Ok(acc)
    }

    /// `𝔠_i(𝐜; I′)_I = Σ_{n ∈ levels} 𝔠(𝐜; I′; n)_I`.
    pub fn c_i_reduced(&self, fine: &Depth, coarse: &Depth, levels: &[u64]) -> Result<Ideal> {
        let hom = depth_hom(fine, coarse)?;
        let ring = coarse.ring().as_ref();
        let mut acc = Ideal::zero(ring);
        for &n in levels {
            acc = acc.sum(&self.c_ideal(fine, coarse, &hom, n)?);
        }
        Ok(acc)
    }

    /// The ladder of `𝔠_i(𝐜; I(𝐡^𝐦))` over a nondecreasing depth schedule.
    pub fn c_i_ladder(&self, coords: &Coordinates, c: &CoeffRing, i: usize, depths: &[Vec<u32>], family: &Family) -> Result<IdealLadder> {
        for w in depths.windows(2) {
            if w[0].len() != w[1].len() || w[0].iter().zip(&w[1]).any(|(a, b)| a > b) {
                return invalid(format!("depth schedule is not nondecreasing at {:?} → {:?}", w[0], w[1]));
            }
        }
        let mut ds = Vec::new();
        let mut ideals = Vec::new();
        let mut levels = Vec::new();
        for (k, m) in depths.iter().enumerate() {
            let d = coords.depth(c, m)?;
            let lv = self.levels(&d, i, family, k)?;
            ideals.push(self.c_i_over(&d, &lv)?);
            levels.push(lv);
            ds.push(d);
        }
        for w in levels.windows(2) {
            if w[1].iter().any(|n| !w[0].contains(n)) {
                return invalid("level family is not nested along the depth schedule");
            }
        }
        let mut containment = Vec::new();
        for k in 0..ds.len().saturating_sub(1) {
            let hom = depth_hom(&ds[k + 1], &ds[k])?;
            let img = hom.image_ideal(ds[k + 1].ring().as_ref(), ds[k].ring().as_ref(), &ideals[k + 1]);
            containment.push(img.is_subset(&ideals[k]));
        }
        let stabilized = window_stable(&ds, &ideals)?;
        Ok(IdealLadder {
            i,
            depth: depths.to_vec(),
            generators: ds.iter().zip(&ideals).map(|(d, j)| ideal_polys(d.ring(), j)).collect(),
            levels,
            colength: ds.iter().zip(&ideals).map(|(d, j)| j.colength(d.ring().as_ref())).collect(),
            containment,
            stabilized,
            stability_rule: format!("images of the last {STABILITY_WINDOW} rungs agree in the shallowest ring of the window (heuristic)"),
            ideals,
            depths: ds,
        })
    }

    /// Per-depth coordinate ideals of `c(1)`; checked against the `i = 0` ladder.
    pub fn ind_ideal(&self, coords: &Coordinates, c: &CoeffRing, depths: &[Vec<u32>]) -> Result<(IdealLadder, bool)> {
        let mut ladder = self.c_i_ladder(coords, c, 0, depths, &Family::Admissible)?;
        for (k, d) in ladder.depths.iter().enumerate() {
            let seed = self.es.seed_class(self.t, &d.real)?;
            if Ideal::generated(d.ring().as_ref(), &seed) != ladder.ideals[k] {
                return verification(format!("Ind ideal differs from the i = 0 ladder at depth {:?}", d.m));
            }
        }
        ladder.stability_rule.push_str("; Ind ideal");
        let nonzero = ladder.ideals.last().zip(ladder.depths.last()).map_or(false, |(j, d)| !j.is_zero(d.ring().as_ref()));
        Ok((ladder, nonzero))
    }

    /// Level compatibility between `coarse = I(𝐡^𝐦)` and `fine = I(𝐡^{𝐦′})`.
    pub fn check_level_compat(&self, fine: &Depth, coarse: &Depth, n: u64) -> Result<LevelCompat> {
        let hom = depth_hom(fine, coarse)?;
        let lhs = self.c_ideal(fine, coarse, &hom, n)?;
        let rhs = self.c_ideal_level(coarse, n)?;
        let lv = self.level(n)?;
        let small = lv.size() * fine.ring().dim() <= GROUP_IDEAL_BUDGET;
        let ki_equal = if small {
            let grf = GroupRing::new(fine.ring().clone(), lv.clone());
            let grc = GroupRing::new(coarse.ring().clone(), lv.clone());
            let kf = self.ki_ideal(fine, n)?;
            let red: Vec<Elem> = kf.generators(&grf).iter().map(|g| grf.map_base(g, &hom, &grc)).collect();
            Some(Ideal::generated(&grc, &red) == self.ki_ideal(coarse, n)?)
        } else {
            None
        };
        let step = fine.m.iter().zip(&coarse.m).enumerate().filter(|(_, (a, b))| a != b).map(|(k, _)| k).collect::<Vec<_>>();
        let one_step = step.len() == 1 && fine.m[step[0]] == coarse.m[step[0]] + 1 && fine.ring().mps() == coarse.ring().mps();
        let lifting = if one_step && self.es.rank * lv.size() * lv.size() * fine.ring().dim() * fine.ring().dim() <= LIFT_BUDGET {
            Some(self.check_hom_lifting(coarse, fine, step[0], n)?)
        } else {
            None
        };
        Ok(LevelCompat { n, fine: fine.m.clone(), coarse: coarse.m.clone(), c_equal: lhs == rhs, ki_equal, lifting })
    }

    /// Every `f: M_I(n) → R_I[H_n]` lifts to `f′: M_{I′}(n) → R_{I′}[H_n]`
    /// with `π∘f′ = f∘π`, where `I′ = I·h_k`-step: `f′` is obtained by
    /// extending `ν_2∘f∘ν_1^{-1}` from the image of multiplication by `h_k`.
    pub fn check_hom_lifting(&self, coarse: &Depth, fine: &Depth, k: usize, n: u64) -> Result<bool> {
        let nu = coarse.ring().multiply_by_component(fine.ring(), k)?;
        let proj = fine.ring().projection_to(coarse.ring())?;
        let lv = self.level(n)?;
        let gr = GroupRing::new(coarse.ring().clone(), lv.clone());
        let gr2 = GroupRing::new(fine.ring().clone(), lv);
        let (rmod, rmod2) = (gr.as_module(), gr2.as_module());
        let rho = self.es.rank;
        let (m, m2) = (free_module(&rmod, rho), free_module(&rmod2, rho));
        let homs = hom_module(&m, &rmod)?;
        let blockwise = |x: &[u64], hom: &RingHom, src: &GroupRing, tgt: &GroupRing| -> Vec<u64> {
            x.chunks(src.dim()).flat_map(|c| src.map_base(c, hom, tgt)).collect()
        };
        let basis = |dim: usize| (0..dim).map(move |j| {
            let mut e = vec![0u64; dim];
            e[j] = 1;
            e
        });
        let sub_gens: Vec<Vec<u64>> = basis(m.dim).map(|e| blockwise(&e, &nu, &gr, &gr2)).collect();
        let fs = homs.basis();
        let values: Vec<Vec<Vec<u64>>> =
            fs.iter().map(|f| basis(m.dim).map(|e| gr.map_base(&vecmat(&e, f, gr.dim(), gr.modulus()), &nu, &gr2)).collect()).collect();
        for (f, f2) in fs.iter().zip(extend_homs(&m2, &rmod2, &sub_gens, &values)?) {
            let Some(f2) = f2 else { return Ok(false) };
            for e in basis(m2.dim) {
                let lhs = gr2.map_base(&rmod2.reduce(&vecmat(&e, &f2, gr2.dim(), gr2.modulus())), &proj, &gr);
                let down = blockwise(&e, &proj, &gr2, &gr);
                let rhs = rmod.reduce(&vecmat(&m.reduce(&down), f, gr.dim(), gr.modulus()));
                if rmod.reduce(&lhs) != rhs {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

fn with_context(e: Error, ctx: &str) -> Error {
    match e {
        Error::InvalidInput(s) => Error::InvalidInput(format!("{ctx}: {s}")),
        Error::InvalidMps(s) => Error::InvalidMps(format!("{ctx}: {s}")),
        Error::Precision(s) => Error::Precision(format!("{ctx}: {s}")),
        Error::NotAdmissible(s) => Error::NotAdmissible(format!("{ctx}: {s}")),
        Error::Budget(s) => Error::Budget(format!("{ctx}: {s}")),
        Error::Verification(s) => Error::Verification(format!("{ctx}: {s}")),
    }
}

/// `ρ` copies of a module, block diagonally.
pub fn free_module(base: &FinModule, rho: usize) -> FinModule {
    let d = base.dim;
    let place = |row: &[u64], k: usize| {
        let mut v = vec![0u64; rho * d];
        v[k * d..(k + 1) * d].copy_from_slice(row);
        v
    };
    let rel_rows: Vec<Vec<u64>> = (0..rho).flat_map(|k| base.rel.rows().iter().map(move |r| place(r, k))).collect();
    let actions = base
        .actions
        .iter()
        .map(|a| (0..rho).flat_map(|k| a.iter().map(move |row| place(row, k))).collect())
        .collect();
    FinModule { p: base.p, q: base.q, dim: rho * d, rel: Span::new(base.p, base.q, rho * d, rel_rows), actions }
}

/// Images of the last `k` ideals in the shallowest ring of the window agree.
fn window_stable(ds: &[Depth], ideals: &[Ideal]) -> Result<bool> {
    if ds.len() < STABILITY_WINDOW {
        return Ok(false);
    }
    let j0 = ds.len() - STABILITY_WINDOW;
    let tgt = ds[j0].ring().as_ref();
    let mut first: Option<Ideal> = None;
    for j in j0..ds.len() {
        let img = if j == j0 { ideals[j].clone() } else { depth_hom(&ds[j], &ds[j0])?.image_ideal(ds[j].ring().as_ref(), tgt, &ideals[j]) };
        match &first {
            None => first = Some(img),
            Some(f) if *f != img => return Ok(false),
            _ => {}
        }
    }
    Ok(true)
}

/// The smallest `k ≤ DEPTH_SEARCH` such that `fixed ++ [k; free]` gives a
/// depth of `coords` whose ideal is contained in that of `target`.
fn containing_depth(coords: &Coordinates, c: &CoeffRing, fixed: &[u32], free: usize, target: &Depth) -> Result<Depth> {
    for k in 1..=DEPTH_SEARCH {
        let mut m = fixed.to_vec();
        m.extend(std::iter::repeat(k).take(free));
        let d = match coords.depth(c, &m) {
            Ok(d) => d,
            Err(Error::Budget(_)) => break,
            Err(e) => return Err(e),
        };
        match depth_hom(&d, target) {
            Ok(_) => return Ok(d),
            Err(Error::NotAdmissible(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Budget(format!("no depth within budget is contained in {:?}", target.m)))
}

impl<'a> Engine<'a> {
    /// Compares one fine/coarse pair: per-level reduced ideals and ladders.
    fn compare_pair(&self, fine: &Depth, coarse: &Depth, i: usize) -> Result<(bool, bool, bool, bool)> {
        let hom = depth_hom(fine, coarse)?;
        let lf = self.t.enumerate_levels(&fine.real, i)?;
        let lc = self.t.enumerate_levels(&coarse.real, i)?;
        let mut per_level = true;
        let ring = coarse.ring().as_ref();
        let mut reduced = Ideal::zero(ring);
        for &n in &lf {
            let a = self.c_ideal(fine, coarse, &hom, n)?;
            per_level &= a == self.c_ideal_level(coarse, n)?;
            reduced = reduced.sum(&a);
        }
        let full = self.c_i_over(coarse, &lc)?;
        let matched = lf == lc;
        Ok((per_level, reduced.is_subset(&full), matched, reduced == full))
    }

    /// Independence of the parameter system: alternates between the two
    /// coordinate systems, each time descending to the smallest uniform
    /// depth whose ideal sits inside the previous one, with `m_0` held at
    /// `m0` so that the admissible primes stay comparable.
    pub fn check_independence(&self, c: &CoeffRing, a: &Coordinates, b: &Coordinates, i: usize, m0: u32, start: u32, len: usize) -> Result<IndependenceReport> {
        let systems = [a, b];
        let r = a.mps.r();
        let mut m = vec![m0];
        m.extend(std::iter::repeat(start).take(r));
        let mut cur = a.depth(c, &m)?;
        let mut steps = Vec::new();
        for k in 1..len {
            let sys = k % 2;
            let next = containing_depth(systems[sys], c, &[m0], systems[sys].mps.r(), &cur)
                .map_err(|e| with_context(e, "interleaving schedule infeasible"))?;
            let (per_level_equal, ladder_contained, matched, ladder_equal) = self.compare_pair(&next, &cur, i)?;
            steps.push(InterleaveStep { fine_system: sys, fine: next.m.clone(), coarse_system: 1 - sys, coarse: cur.m.clone(), per_level_equal, ladder_contained, matched, ladder_equal });
            cur = next;
        }
        let pass = steps.iter().all(|s| s.per_level_equal && s.ladder_contained && (!s.matched || s.ladder_equal));
        Ok(IndependenceReport { i, steps, pass })
    }

    /// Affine invariance for `y = A x + v`: the whole map and each of its
    /// elementary factors, each against the standard system.
    pub fn check_affine(&self, c: &CoeffRing, map: &AffineMap, i: usize, m0: u32, start: u32, len: usize) -> Result<Vec<IndependenceReport>> {
        let std = Coordinates::standard(c, map.r());
        let mut maps = vec![map.clone()];
        maps.extend(map.decompose(c)?.iter().map(|e| AffineMap::from_elementary(e, map.r())));
        maps.iter().map(|f| self.check_independence(c, &std, &Coordinates::affine(f, c)?, i, m0, start, len)).collect()
    }
}

/// Extends and contracts ideals along `Λ_O/I → Λ_{O′}/I′` with
/// `𝐦′ = (e·m_0, 𝐦_{≥1})`.
pub fn scalar_extension_check(eng: &Engine, c: &CoeffRing, ext: &ExtSpec, i: usize, depths: &[Vec<u32>]) -> Result<ScalarExtensionReport> {
    if c.degree() > 1 {
        return invalid("scalar extension is supported over a base O = Z_p");
    }
    let c2 = CoeffRing::new(c.p(), c.precision(), Some(ext))?;
    let e = c2.ramification();
    let r = eng.t.r;
    let (s1, s2) = (Coordinates::standard(c, r), Coordinates::standard(&c2, r));
    let mut rungs = Vec::new();
    for m in depths {
        let d = s1.depth(c, m)?;
        let mut m2 = m.clone();
        m2[0] *= e;
        let d2 = s2.depth(&c2, &m2)?;
        let iota = depth_hom(&d, &d2)?;
        let injective = iota.is_injective(d.ring().as_ref(), d2.ring().as_ref());
        let l1 = eng.t.enumerate_levels(&d.real, i)?;
        let l2 = eng.t.enumerate_levels(&d2.real, i)?;
        let mut per_level = true;
        for &n in &l1 {
            let j = eng.c_ideal_level(&d, n)?;
            let j2 = eng.c_ideal_level(&d2, n)?;
            per_level &= iota.image_ideal(d.ring().as_ref(), d2.ring().as_ref(), &j) == j2;
        }
        let a = eng.c_i_over(&d, &l1)?;
        let a2 = eng.c_i_over(&d2, &l2)?;
        let extension_equal = iota.image_ideal(d.ring().as_ref(), d2.ring().as_ref(), &a) == a2;
        let contraction_equal = iota.preimage_ideal(d.ring().as_ref(), &a2) == a;
        rungs.push(ScalarExtensionRung { depth: m.clone(), extended_depth: m2, injective, levels_equal: l1 == l2, per_level_equal: per_level, extension_equal, contraction_equal });
    }
    let pass = rungs.iter().all(|x| x.injective && x.levels_equal && x.per_level_equal && x.extension_equal && x.contraction_equal);
    Ok(ScalarExtensionReport { extension: ext.clone(), i, rungs, pass })
}

/// `Fitt_i` commutes with the scalar extension `Λ_O/I → Λ_{O′}/I′`.
pub fn fitting_base_change(c: &CoeffRing, ext: &ExtSpec, r: usize, m: &[u32], pm: &PresentedModule, i: usize) -> Result<bool> {
    let c2 = CoeffRing::new(c.p(), c.precision(), Some(ext))?;
    let mut m2 = m.to_vec();
    m2[0] *= c2.ramification();
    let d = Coordinates::standard(c, r).depth(c, m)?;
    let d2 = Coordinates::standard(&c2, r).depth(&c2, &m2)?;
    let iota = depth_hom(&d, &d2)?;
    let (r1, r2) = (d.ring().as_ref(), d2.ring().as_ref());
    let pm2 = PresentedModule { ngens: pm.ngens, relations: pm.relations.iter().map(|row| row.iter().map(|x| iota.apply(r2, x)).collect()).collect() };
    Ok(iota.image_ideal(r1, r2, &pm.fitting_ideal(r1, i)?) == pm2.fitting_ideal(r2, i)?)
}

/// Containment of the reduced ladder in the specialized one, for a linear
/// `h` monic in `x_r`. Each specialized depth (in `r - 1` variables plus
/// `m_0`) is matched with the shallowest uniform standard depth of `Λ^{(r)}`
/// mapping into it.
pub fn weak_specialization(eng: &Engine, c: &CoeffRing, h: &Poly, i: usize, depths: &[Vec<u32>]) -> Result<SpecializationReport> {
    let r = eng.t.r;
    let h = h.with_nvars(r)?;
    let spec = Coordinates::specialization(c, &h)?;
    let std = Coordinates::standard(c, r);
    let mut rungs = Vec::new();
    for m in depths {
        let coarse = spec.depth(c, m)?;
        let fine = containing_depth(&std, c, &m[..m.len().min(r)], r + 1 - m.len().min(r), &coarse)?;
        let lf = eng.t.enumerate_levels(&fine.real, i)?;
        let lc = eng.t.enumerate_levels(&coarse.real, i)?;
        let reduced = eng.c_i_reduced(&fine, &coarse, &lf)?;
        let specialized = eng.c_i_over(&coarse, &lc)?;
        let ring = coarse.ring();
        rungs.push(SpecializationRung {
            depth: m.clone(),
            fine_depth: fine.m.clone(),
            reduced: ideal_polys(ring, &reduced),
            specialized: ideal_polys(ring, &specialized),
            contained: reduced.is_subset(&specialized),
            equal: reduced == specialized,
        });
    }
    let pass = rungs.iter().all(|x| x.contained);
    let equal_count = rungs.iter().filter(|x| x.equal).count();
    Ok(SpecializationReport { h, i, rungs, pass, equal_count })
}

/// The one-variable machinery at `x ↦ a`: with `m′_1 = 2`, `b` a lift of a
/// generator of `k^×`, `β² = b` and `m′_0 = 2m_0`, builds
/// `ē_{m′_0}: Λ/(ϖ^{m′_0}, (x - a)²) → O′/ϖ^{m′_0}`, `x ↦ a + ϖ^{m_0}β`, and
/// `ē_{m_0}: Λ/(ϖ^{m_0}, x - a) → O′/ϖ^{m_0}`. Checks both are injective
/// (the fine map is not: `ϖ^{m_0}(x - a)` lands in `ϖ^{m′_0}O′`, so its
/// kernel is reported),
/// that the reduction square commutes, that the admissible primes agree on
/// both sides, and that Kolyvagin ideals correspond per level. The two
/// sides of the strong compatibility are then compared over `depths`
/// (containment asserted, equality diagnostic).
pub fn strong_specialization(eng: &Engine, c: &CoeffRing, a: &[i64], m0: u32, i: usize, depths: &[Vec<u32>]) -> Result<StrongSpecializationReport> {
    if eng.t.r != 1 || c.degree() > 1 {
        return invalid("strong specialization needs one variable over Z_p");
    }
    let p = c.p();
    let a0 = c.from_coords(a)?;
    if c.valuation(&a0) == Some(0) {
        return invalid("the specialization point must lie in ϖO");
    }
    let b = primitive_root(p) as i64;
    let c2 = CoeffRing::new(p, c.precision(), Some(&ExtSpec { kind: crate::coeff::ExtKind::Unramified, poly: vec![-b, 0, 1] }))?;
    let m0p = 2 * m0;
    let xa = Poly::var(1, 0).sub(&Poly::constant(1, a.to_vec()), c);
    let mps = Mps { gens: vec![Poly::constant(1, coords_of_u(&c.uniformizer())), xa.clone()] };
    let local = Coordinates::with_mps(mps)?;
    let d_i = local.depth(c, &[m0, 1])?;
    let d_ip = local.depth(c, &[m0p, 2])?;
    let pm0 = checked_pow(p, m0).ok_or_else(|| Error::Precision("ϖ^{m_0} overflows".into()))? as i64;
    let mut point = a.to_vec();
    point.resize(2, 0);
    point[1] += pm0;
    let e_sys = |t: Vec<i64>| Coordinates { mps: Mps::standard(&c2, 0), forward: vec![], inverse: vec![Poly::constant(0, t)] };
    let o_fine = e_sys(point).depth(&c2, &[m0p])?;
    let o_coarse = e_sys(a.to_vec()).depth(&c2, &[m0])?;
    let e_fine = depth_hom(&d_ip, &o_fine)?;
    let e_coarse = depth_hom(&d_i, &o_coarse)?;
    let embedding_injective = e_fine.is_injective(d_ip.ring().as_ref(), o_fine.ring().as_ref());
    let kernel = e_fine.preimage_ideal(d_ip.ring().as_ref(), &Ideal::zero(o_fine.ring().as_ref()));
    let embedding_kernel_log_size = d_ip.ring().log_cardinality() - kernel.colength(d_ip.ring().as_ref());
    let embedding_kernel = kernel.generators(d_ip.ring().as_ref());
    let coarse_embedding_injective = e_coarse.is_injective(d_i.ring().as_ref(), o_coarse.ring().as_ref());
    let pi1 = d_ip.ring().projection_to(d_i.ring())?;
    let pi2 = o_fine.ring().projection_to(o_coarse.ring())?;
    let src = d_ip.ring();
    let diagram_commutes = (0..src.dim()).all(|k| {
        let mut v = src.zero();
        v[k] = 1;
        pi2.apply(o_coarse.ring().as_ref(), &e_fine.apply(o_fine.ring().as_ref(), &v)) == e_coarse.apply(o_coarse.ring().as_ref(), &pi1.apply(d_i.ring().as_ref(), &v))
    });
    let admissible_sets_equal = eng.t.admissible_primes(&d_i.real)? == eng.t.admissible_primes(&o_coarse.real)?
        && eng.t.admissible_primes(&d_ip.real)? == eng.t.admissible_primes(&o_fine.real)?;
    let mut per_level_equal = true;
    for (dl, ol, hom) in [(&d_i, &o_coarse, &e_coarse), (&d_ip, &o_fine, &e_fine)] {
        for n in eng.t.enumerate_levels(&dl.real, i)? {
            let j = eng.c_ideal_level(dl, n)?;
            let j2 = eng.c_ideal_level(ol, n)?;
            per_level_equal &= hom.image_ideal(dl.ring().as_ref(), ol.ring().as_ref(), &j) == j2;
            per_level_equal &= hom.preimage_ideal(dl.ring().as_ref(), &j2) == j;
        }
    }
    let specialization = weak_specialization(eng, c, &xa, i, depths)?;
    let pass = embedding_injective && coarse_embedding_injective && diagram_commutes && admissible_sets_equal && per_level_equal && specialization.pass;
    Ok(StrongSpecializationReport { a: a.to_vec(), m0, embedding_injective, embedding_kernel_log_size, embedding_kernel, coarse_embedding_injective, diagram_commutes, admissible_sets_equal, per_level_equal, specialization, pass })
}

fn coords_of_u(x: &[u64]) -> Vec<i64> {
    crate::poly::coords_of(x)
}

/// The sandwich for a cyclotomic deformation over `Λ^{(2)}` and
/// `h = a x_1 + x_2 + b`: with `I = (ϖ^m, x_1^m, h)`, `I′ = (ϖ^m, x_1^m, h^m)`
/// and `I″ = (ϖ^N, x_1^m, h)`, where `N = N(m)` is the least exponent such
/// that `(1 + x_2)^{s(ℓ)} = 1` in `Λ/I′` for every pool prime `ℓ ≡ 1 mod ϖ^N`.
pub fn cyclotomic_strong(eng: &Engine, c: &CoeffRing, h: &Poly, i: usize, ms: &[u32]) -> Result<CyclotomicReport> {
    if eng.t.r != 2 {
        return invalid("the cyclotomic report needs a two-variable deformation");
    }
    let h = h.with_nvars(2)?;
    Coordinates::specialization(c, &h)?;
    let mps = Mps { gens: vec![Poly::constant(2, coords_of_u(&c.uniformizer())), Poly::var(2, 0), h.clone()] };
    let coords = Coordinates::with_mps(mps)?;
    let p = c.p();
    let mut rungs = Vec::new();
    for &m in ms {
        let d_i = coords.depth(c, &[m, m, 1])?;
        let d_ip = coords.depth(c, &[m, m, m])?;
        let ring = d_ip.ring();
        let y = ring.var(1);
        let mut n_of_m = None;
        let mut restricted = Vec::new();
        for nn in m..c.precision() {
            let pn = checked_pow(p, nn).expect("below the working modulus");
            let primes: Vec<u64> = eng.t.pool().into_iter().filter(|l| l % pn == 1).collect();
            let mut ok = true;
            for &l in &primes {
                ok &= twist_power(ring, &y, 1, l)? == ring.one();
            }
            if ok {
                n_of_m = Some(nn);
                restricted = primes;
                break;
            }
        }
        let Some(nn) = n_of_m else {
            rungs.push(CyclotomicRung { m, n_of_m: None, restricted_primes: vec![], vacuous: true, level_sets_equal: true, inner_contained: true, outer_contained: true, equal: true });
            continue;
        };
        let d_ipp = coords.depth(c, &[nn, m, 1])?;
        let fam = Family::Primes(restricted.clone());
        let l_i = eng.levels(&d_i, i, &fam, 0)?;
        let l_ip = eng.levels(&d_ip, i, &fam, 0)?;
        let l_ipp = eng.levels(&d_ipp, i, &fam, 0)?;
        let level_sets_equal = l_i == l_ip && l_ipp.iter().all(|n| l_i.contains(n));
        let inner = eng.c_i_reduced(&d_ipp, &d_i, &l_ipp)?;
        let middle = eng.c_i_reduced(&d_ip, &d_i, &l_ip)?;
        let outer = eng.c_i_over(&d_i, &l_i)?;
        rungs.push(CyclotomicRung {
            m,
            n_of_m,
            vacuous: restricted.is_empty(),
            restricted_primes: restricted,
            level_sets_equal,
            inner_contained: inner.is_subset(&middle),
            outer_contained: middle.is_subset(&outer),
            equal: inner == outer,
        });
    }
    let pass = rungs.iter().all(|x| x.level_sets_equal && x.inner_contained && x.outer_contained);
    Ok(CyclotomicReport { h, i, rungs, pass })
}

/// `∂(κ; n)` and `∂_i(κ)_t` over a one-dimensional coefficient quotient
/// `R = O′/ϖ^m`: valuations of coordinates, with
/// `𝒫(t) = {ℓ : min(v(ℓ - 1), v(P_ℓ(1))) ≥ t}`.
pub fn del_statistics(t: &DeformationData, real: &Realization, kappa: &BTreeMap<u64, Vec<Elem>>, tt: u32, i_max: usize) -> Result<DelStatistics> {
    let ring = real.ring.as_ref();
    if ring.r() != 0 {
        return invalid("∂ statistics need a coefficient quotient without variables");
    }
    let c = ring.coeff();
    let cap = ring.exponents()[0];
    let val = |x: &[u64]| -> u32 { c.valuation(&x[..c.degree()]).map_or(cap, |v| v.min(cap)) };
    let mut primes = Vec::new();
    for &l in t.frobenius.keys() {
        let p1 = t.euler_poly(l, real)?.iter().fold(ring.zero(), |acc, x| ring.add(&acc, x));
        if val(&ring.from_int(l as i64 - 1)).min(val(&p1)) >= tt {
            primes.push(l);
        }
    }
    let mut values = Vec::new();
    for (&n, k) in kappa {
        let v = k.iter().map(|x| val(x)).min().unwrap_or(cap);
        values.push(DelValue { n, value: v, capped: v >= cap });
    }
    let del_i = (0..=i_max)
        .map(|i| {
            values
                .iter()
                .filter(|d| {
                    let ps = prime_factors(d.n);
                    ps.len() == i && ps.iter().all(|l| primes.contains(l))
                })
                .min_by_key(|d| d.value)
                .cloned()
        })
        .collect();
    Ok(DelStatistics { t: tt, primes, values, del_i })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::ExtKind;
    use crate::euler::{Classes, Flavor, PrimitivePart, TableClass, TableTerm};

    fn c() -> CoeffRing {
        CoeffRing::zp(5, 3).unwrap()
    }

    fn data() -> DeformationData {
        DeformationData::synthetic(5, 1, 2, &[11, 31, 41], 11).unwrap()
    }

    fn system() -> EulerSystem {
        let seed = vec![Poly::linear(5, &[1]), Poly::int(1, 1)];
        let w = |a: u64, pl: Poly| TableClass { coords: vec![vec![TableTerm { unit: a, coeff: pl }], vec![]] };
        EulerSystem {
            rank: 2,
            flavor: Flavor::C,
            classes: Classes::Generated {
                seed,
                primitive: vec![PrimitivePart { level: 11, w: w(3, Poly::int(1, 1)) }, PrimitivePart { level: 341, w: w(5, Poly::var(1, 0)) }],
                b: BTreeMap::new(),
            },
        }
    }

    fn depth(m: &[u32]) -> Depth {
        Coordinates::standard(&c(), 1).depth(&c(), m).unwrap()
    }

    #[test]
    fn permutations_and_parity() {
        let ps = permutations(3);
        assert_eq!(ps.len(), 6);
        assert_eq!(ps.iter().filter(|(_, odd)| *odd).count(), 3);
        for (p, odd) in &ps {
            let inversions = (0..3).flat_map(|i| (i + 1..3).map(move |j| (i, j))).filter(|&(i, j)| p[i] > p[j]).count();
            assert_eq!(inversions % 2 == 1, *odd);
        }
        assert_eq!(permutations(0), vec![(vec![], false)]);
    }

    #[test]
    fn level_one_is_the_seed() {
        let (t, es) = (data(), system());
        let eng = Engine::new(&t, &es);
        let d = depth(&[1, 2]);
        let seed = es.seed_class(&t, &d.real).unwrap();
        assert_eq!(eng.derivative_class(&d.real, 1).unwrap().kappa, seed);
        assert_eq!(eng.universal_kolyvagin(&d.real, 1).unwrap(), seed);
        let du = eng.d_universal(&d.real, 1).unwrap();
        assert_eq!(du, seed);
    }

    #[test]
    fn prime_level_has_no_correction() {
        let (t, es) = (data(), system());
        let eng = Engine::new(&t, &es);
        let d = depth(&[1, 2]);
        for l in [11, 31, 41] {
            assert_eq!(eng.universal_kolyvagin(&d.real, l).unwrap(), eng.derivative_class(&d.real, l).unwrap().kappa);
        }
        let k11 = eng.derivative_class(&d.real, 11).unwrap().kappa;
        assert!(k11.iter().any(|x| !d.ring().is_zero(x)));
    }

    #[test]
    fn two_prime_level_matches_expansion() {
        let (t, es) = (data(), system());
        let eng = Engine::new(&t, &es);
        let d = depth(&[1, 2]);
        let r = d.ring().as_ref();
        let k = eng.derivative_class(&d.real, 341).unwrap().kappa;
        let k1 = eng.derivative_class(&d.real, 1).unwrap().kappa;
        let a = r.mul(&eng.a_coefficient(&d.real, 11, 31).unwrap(), &eng.a_coefficient(&d.real, 31, 11).unwrap());
        let expect: Vec<Elem> = k.iter().zip(&k1).map(|(x, y)| r.sub(x, &r.mul(y, &a))).collect();
        assert_eq!(eng.universal_kolyvagin(&d.real, 341).unwrap(), expect);
    }

    #[test]
    fn derivative_matches_direct_expansion() {
        let (t, es) = (data(), system());
        let eng = Engine::new(&t, &es);
        let d = depth(&[1, 2]);
        let r = d.ring().as_ref();
        let lv = eng.level(11).unwrap();
        let gr = GroupRing::new(d.ring().clone(), lv.clone());
        let cls = es.class(&t, &gr, &d.real).unwrap();
        // (D x)(σ^j) = Σ_i i · x(σ^{j-i}), with x(g) read off the blocks.
        let sigma = primitive_root(11);
        let idx = |k: u64| lv.from_unit(powmod(sigma, k, 11)).unwrap();
        for x in &cls {
            let blocks: Vec<Elem> = (0..10).map(|j| {
                (0..10u64).fold(r.zero(), |acc, i| r.add(&acc, &r.scale(gr.block(x, idx((j + 10 - i) % 10)), i)))
            }).collect();
            assert!(blocks.iter().all(|b| *b == blocks[0]), "D_11 c(11) is fixed modulo I");
        }
        let kappa = eng.derivative_class(&d.real, 11).unwrap().kappa;
        for (x, kx) in cls.iter().zip(&kappa) {
            let b0 = (0..10u64).fold(r.zero(), |acc, i| r.add(&acc, &r.scale(gr.block(x, idx((10 - i) % 10)), i)));
            assert_eq!(&b0, kx);
        }
    }

    #[test]
    fn perturbed_table_breaks_the_congruence() {
        let (t, es) = (data(), system());
        let d = depth(&[1, 2]);
        let mut tab = es.tabulate(&t, &d.real, &[1, 11]).unwrap();
        if let Classes::Table { table } = &mut tab.classes {
            table.get_mut(&11).unwrap().coords[0].push(TableTerm { unit: 2, coeff: Poly::int(1, 1) });
        }
        let eng = Engine::new(&t, &tab);
        assert!(matches!(eng.derivative_class(&d.real, 11), Err(Error::Verification(_))));
    }

    #[test]
    fn inadmissible_level_is_rejected() {
        let (t, es) = (data(), system());
        let eng = Engine::new(&t, &es);
        let d = depth(&[1, 2]);
        assert!(matches!(eng.derivative_class(&d.real, 13), Err(Error::NotAdmissible(_))));
        let deep = Coordinates::standard(&c(), 1).depth(&c(), &[2, 2]).unwrap();
        assert!(matches!(eng.universal_kolyvagin(&deep.real, 11), Err(Error::NotAdmissible(_))));
    }

    #[test]
    fn norm_inverse_of_d_universal() {
        let (t, es) = (data(), system());
        let eng = Engine::new(&t, &es);
        let d = depth(&[1, 2]);
        for n in [1, 11, 31, 341, 451] {
            eng.check_norm_inverse(&d.real, n).unwrap();
        }
        eng.with_inverse_frobenius(true).check_norm_inverse(&d.real, 341).unwrap();
    }

    #[test]
    fn closed_form_lift_agrees_with_e_map() {
        let (t, es) = (data(), system());
        let d = depth(&[1, 3]);
        for inv in [false, true] {
            let eng = Engine::new(&t, &es).with_inverse_frobenius(inv);
            for (l, q) in [(11, 31), (31, 11), (41, 11), (11, 41)] {
                assert_eq!(eng.a_coefficient(&d.real, l, q).unwrap(), eng.a_lift(&d.real, l, q).unwrap());
            }
        }
    }

    #[test]
    fn generator_change_rescales_kappa() {
        let (t, es) = (data(), system());
        let d = depth(&[1, 2]);
        let r = d.ring().as_ref();
        let base = Engine::new(&t, &es);
        let sigma = primitive_root(11);
        let alt = Engine::new(&t, &es).with_generators(BTreeMap::from([(11, powmod(sigma, 3, 11))]));
        let k = base.derivative_class(&d.real, 11).unwrap().kappa;
        let k2 = alt.derivative_class(&d.real, 11).unwrap().kappa;
        assert_eq!(k, k2.iter().map(|x| r.scale(x, 3)).collect::<Vec<_>>());
        for n in [11, 341] {
            assert_eq!(base.c_ideal_level(&d, n).unwrap(), alt.c_ideal_level(&d, n).unwrap());
        }
    }

    #[test]
    fn hom_enumeration_agrees_with_coordinates() {
        let (t, es) = (data(), system());
        let eng = Engine::new(&t, &es);
        let d = depth(&[1, 1]);
        for n in [1, 11] {
            let short = eng.c_ideal_level(&d, n).unwrap();
            assert_eq!(eng.c_ideal_by_homs(&d, n).unwrap(), short);
            let id = depth_hom(&d, &d).unwrap();
            assert_eq!(eng.c_ideal(&d, &d, &id, n).unwrap(), short);
        }
    }

    #[test]
    fn seed_examples() {
        let t = data();
        let d = depth(&[1, 2]);
        let es = EulerSystem::multiplicative(vec![Poly::int(1, 5), Poly::var(1, 0)], Flavor::C);
        let j = Engine::new(&t, &es).c_ideal_level(&d, 1).unwrap();
        let r = d.ring().as_ref();
        assert_eq!(j, Ideal::generated(r, &[r.from_int(5), r.var(0)]));
        let zero = EulerSystem::multiplicative(vec![Poly::zero(1), Poly::zero(1)], Flavor::C);
        assert!(Engine::new(&t, &zero).c_ideal_level(&d, 1).unwrap().is_zero(r));
    }

    #[test]
    fn ladder_laws_and_ind_ideal() {
        let (t, es) = (data(), system());
        let eng = Engine::new(&t, &es);
        let coords = Coordinates::standard(&c(), 1);
        let depths = vec![vec![1, 1], vec![1, 2], vec![1, 3], vec![1, 4]];
        let l0 = eng.c_i_ladder(&coords, &c(), 0, &depths, &Family::Admissible).unwrap();
        let l1 = eng.c_i_ladder(&coords, &c(), 1, &depths, &Family::Admissible).unwrap();
        assert!(l0.containments_hold() && l1.containments_hold());
        for k in 0..depths.len() {
            assert!(l0.ideals[k].is_subset(&l1.ideals[k]));
        }
        let (ind, nonzero) = eng.ind_ideal(&coords, &c(), &depths).unwrap();
        assert_eq!(ind.ideals, l0.ideals);
        assert!(nonzero);
        let json = serde_json::to_value(&l1).unwrap();
        assert!(json.get("depth").is_some() && json.get("generators").is_some() && json.get("stabilized").is_some());
    }

    #[test]
    fn empty_pool_collapses_the_ladder() {
        let t = DeformationData::synthetic(5, 1, 2, &[], 1).unwrap();
        let es = EulerSystem::multiplicative(vec![Poly::linear(5, &[1]), Poly::int(1, 0)], Flavor::C);
        let eng = Engine::new(&t, &es);
        let coords = Coordinates::standard(&c(), 1);
        let depths = vec![vec![1, 1], vec![1, 2]];
        let a = eng.c_i_ladder(&coords, &c(), 0, &depths, &Family::Admissible).unwrap();
        let b = eng.c_i_ladder(&coords, &c(), 2, &depths, &Family::Admissible).unwrap();
        assert_eq!(a.ideals, b.ideals);
    }

    #[test]
    fn custom_family_must_be_admissible() {
        let (t, es) = (data(), system());
        let eng = Engine::new(&t, &es);
        let coords = Coordinates::standard(&c(), 1);
        let bad = Family::Custom(vec![vec![1, 13]]);
        assert!(eng.c_i_ladder(&coords, &c(), 1, &[vec![1, 1]], &bad).is_err());
        let ok = Family::Custom(vec![vec![1, 11], vec![1]]);
        assert!(eng.c_i_ladder(&coords, &c(), 1, &[vec![1, 1], vec![1, 2]], &ok).is_ok());
        let not_nested = Family::Custom(vec![vec![1], vec![1, 11]]);
        assert!(eng.c_i_ladder(&coords, &c(), 1, &[vec![1, 1], vec![1, 2]], &not_nested).is_err());
    }

    #[test]
    fn level_compat_with_lifting() {
        let (t, es) = (data(), system());
        let eng = Engine::new(&t, &es);
        let (coarse, fine) = (depth(&[1, 1]), depth(&[1, 2]));
        let rep = eng.check_level_compat(&fine, &coarse, 11).unwrap();
        assert!(rep.c_equal);
        assert_eq!(rep.ki_equal, Some(true));
        assert_eq!(rep.lifting, Some(true));
        let same = eng.check_level_compat(&coarse, &coarse, 11).unwrap();
        assert!(same.pass());
        let far = eng.check_level_compat(&depth(&[1, 4]), &depth(&[1, 2]), 341).unwrap();
        assert!(far.c_equal);
    }

    #[test]
    fn nonstandard_system_gives_the_same_ideals() {
        let (t, es) = (data(), system());
        let eng = Engine::new(&t, &es);
        let cc = c();
        let h = Mps { gens: vec![Poly::int(1, 5), Poly::from_terms(1, vec![(vec![2], vec![1]), (vec![0], vec![5])])] };
        let alt = Coordinates::with_mps(h).unwrap();
        let rep = eng.check_independence(&cc, &Coordinates::standard(&cc, 1), &alt, 1, 1, 1, 4).unwrap();
        assert!(rep.pass, "{rep:?}");
        let same = eng.check_independence(&cc, &Coordinates::standard(&cc, 1), &Coordinates::standard(&cc, 1), 1, 1, 2, 3).unwrap();
        assert!(same.pass && same.steps.iter().all(|s| s.matched && s.ladder_equal));
    }

    #[test]
    fn affine_change_of_variables() {
        let (t, es) = (data(), system());
        let eng = Engine::new(&t, &es);
        let map = AffineMap { a: vec![vec![vec![2]]], v: vec![vec![5]] };
        for rep in eng.check_affine(&c(), &map, 1, 1, 1, 3).unwrap() {
            assert!(rep.pass, "{rep:?}");
        }
    }

    #[test]
    fn scalar_extension_equalities() {
        let (t, es) = (data(), system());
        let eng = Engine::new(&t, &es);
        let depths = vec![vec![1, 1], vec![1, 2]];
        for ext in [ExtSpec { kind: ExtKind::Unramified, poly: vec![-2, 0, 1] }, ExtSpec { kind: ExtKind::Eisenstein, poly: vec![-5, 0, 1] }] {
            let rep = scalar_extension_check(&eng, &c(), &ext, 1, &depths).unwrap();
            assert!(rep.pass, "{rep:?}");
        }
    }

    #[test]
    fn fitting_commutes_with_extension() {
        let cc = c();
        let d = depth(&[1, 2]);
        let r = d.ring().as_ref();
        let pm = PresentedModule { ngens: 2, relations: vec![vec![r.from_int(5), r.var(0)], vec![r.var(0), r.zero()]] };
        let ext = ExtSpec { kind: ExtKind::Unramified, poly: vec![-2, 0, 1] };
        for i in 0..3 {
            assert!(fitting_base_change(&cc, &ext, 1, &[1, 2], &pm, i).unwrap());
        }
    }

    #[test]
    fn trivial_specialization_is_equality() {
        let cc = c();
        let t = DeformationData::synthetic(5, 2, 2, &[11, 31], 3).unwrap();
        let es = EulerSystem::multiplicative(vec![Poly::linear(5, &[1, 0]), Poly::linear(0, &[0, 1])], Flavor::C);
        let eng = Engine::new(&t, &es);
        let rep = weak_specialization(&eng, &cc, &Poly::var(2, 1), 1, &[vec![1, 1], vec![1, 2]]).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.equal_count, rep.rungs.len());
        let rep = weak_specialization(&eng, &cc, &Poly::linear(5, &[2, 1]), 1, &[vec![1, 1], vec![1, 2]]).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn strong_specialization_machinery() {
        let (t, es) = (data(), system());
        let eng = Engine::new(&t, &es);
        let rep = strong_specialization(&eng, &c(), &[0], 1, 0, &[vec![1], vec![2]]).unwrap();
        assert!(rep.coarse_embedding_injective && rep.diagram_commutes && rep.admissible_sets_equal, "{rep:?}");
        assert!(rep.per_level_equal && rep.specialization.pass, "{rep:?}");
        // ē(5x) = 25β = 0 in O′/25, so the fine embedding has kernel 5x·Z/5.
        assert!(!rep.embedding_injective && !rep.pass);
        assert_eq!(rep.embedding_kernel_log_size, 1);
        let d = Coordinates::standard(&c(), 1).depth(&c(), &[2, 2]).unwrap();
        let r = d.ring();
        assert_eq!(rep.embedding_kernel, vec![r.scale(&r.var(0), 5)]);
        let rep = strong_specialization(&eng, &c(), &[5], 1, 1, &[vec![1]]).unwrap();
        assert!(rep.coarse_embedding_injective && rep.diagram_commutes && rep.admissible_sets_equal);
        assert_eq!(rep.embedding_kernel_log_size, 1);
    }

    #[test]
    fn cyclotomic_sandwich() {
        let cc = c();
        let t0 = DeformationData::synthetic(5, 1, 2, &[11, 101, 151], 5).unwrap();
        let es0 = system();
        let (t, es) = crate::euler::extend_cyclotomic(&es0, &t0).unwrap();
        let eng = Engine::new(&t, &es);
        let rep = cyclotomic_strong(&eng, &cc, &Poly::linear(5, &[1, 1]), 1, &[1, 2]).unwrap();
        assert!(rep.pass, "{rep:?}");
        // 101 and 151 are 1 mod 25 but not mod 125, which is out of reach at M = 3.
        assert!(rep.rungs[0].n_of_m.is_some() && !rep.rungs[0].vacuous);
        assert_eq!(rep.rungs[1].n_of_m, None);
    }

    #[test]
    fn del_statistics_examples() {
        let c2 = CoeffRing::zp(5, 4).unwrap();
        let ring = Arc::new(QuotientRing::standard(&c2, 0, &[3]).unwrap());
        let real = Realization::standard(ring.clone());
        let t = DeformationData::synthetic(5, 0, 1, &[11, 101], 1).unwrap();
        let r = ring.as_ref();
        let kappa = BTreeMap::from([
            (1, vec![r.from_int(5), r.one()]),
            (11, vec![r.from_int(25), r.from_int(125)]),
            (101, vec![r.zero(), r.zero()]),
        ]);
        let s = del_statistics(&t, &real, &kappa, 1, 1).unwrap();
        assert_eq!(s.values[0], DelValue { n: 1, value: 0, capped: false });
        assert_eq!(s.values[1], DelValue { n: 11, value: 2, capped: false });
        assert_eq!(s.values[2], DelValue { n: 101, value: 3, capped: true });
        assert_eq!(s.primes, vec![11, 101]);
        assert_eq!(s.del_i[1].as_ref().unwrap().value, 2);
        let s2 = del_statistics(&t, &real, &kappa, 2, 1).unwrap();
        assert_eq!(s2.primes, vec![101]);
        let s3 = del_statistics(&t, &real, &kappa, 3, 1).unwrap();
        assert!(s3.del_i[1].is_none());
    }
}
