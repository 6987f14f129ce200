//! The property battery behind `verify`: one entry per acceptance
//! criterion, each run at small documented parameters from its own seeded
//! generator so criteria can run in parallel without changing the report.
//!
//! Quick mode shrinks instance counts (fitting 10, self-injectivity 40,
//! specialization 5, affine 2, scalar extension 3, Euler-system pools of
//! three primes); every criterion still runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;
use std::sync::Arc;

use super::h1::{brute_force_group_h1, GroupSpec, ORDER_BUDGET};
use crate::arith::{gcd, powmod, primitive_root};
use crate::coeff::{CoeffRing, ExtKind, ExtSpec};
use crate::error::{Error, Result};
use crate::euler::{convert_rubin, extend_cyclotomic, Classes, EulerSystem, Flavor, PrimitivePart, TableClass, TableTerm};
use crate::fitting::{estimate_local_exponent, specialization_length, PresentedModule, StructureData};
use crate::galois::{levels_from_primes, DeformationData, GroupRing, Level};
use crate::kolyvagin::{
    cyclotomic_strong, fitting_base_change, scalar_extension_check, strong_specialization, weak_specialization, Coordinates, Engine, Family,
};
use crate::lambda::{AffineMap, Elementary, Mps, QuotientRing, Realization};
use crate::linalg::{extend_homs, hom_module, left_kernel, Span};
use crate::poly::Poly;
use crate::ring::{Elem, Ideal, Ring};

const MAX_LISTED_FAILURES: usize = 20;

/// Largest `|H_n|` at which `𝔠(n)` is recomputed by enumerating homomorphisms.
const HOM_LEVEL_SIZE: usize = 10;

/// A deliberate perturbation that must make one named invariant fail.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Inject {
    /// Compare `Fitt_s` of a diagonal presentation against the zero ideal.
    Fitting,
    /// Add the identity to one value of each homomorphism before extending.
    SelfInjectivity,
    /// Replace `D_ℓ` by `D_ℓ + 1` in the telescoping identity.
    Telescoping,
    /// Add a stray group element to a tabulated class.
    NormRelation,
    /// Rescale by `a + 1` instead of `a` under a change of generator.
    GeneratorChange,
    /// Let the second generator of `SL_2` act trivially.
    H1Action,
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionReport {
    pub id: u32,
    pub name: String,
    pub pass: bool,
    pub checks: u64,
    pub failure_count: u64,
    pub failures: Vec<String>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub schema: u32,
    pub version: String,
    pub seed: u64,
    pub quick: bool,
    pub inject: Option<Inject>,
    pub criteria: Vec<CriterionReport>,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct Options {
    pub seed: u64,
    pub quick: bool,
    pub inject: Option<Inject>,
    pub threads: usize,
    /// Criterion ids to run; all when empty.
    pub only: Vec<u32>,
}

#[derive(Default)]
struct Tally {
    checks: u64,
    failure_count: u64,
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Tally {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.fail(what());
        }
    }

    fn fail(&mut self, msg: String) {
        self.failure_count += 1;
        if self.failures.len() < MAX_LISTED_FAILURES {
            self.failures.push(msg);
        }
    }

    fn note(&mut self, msg: String) {
        self.notes.push(msg);
    }

    /// Runs a fallible block; an error counts as one failed check.
    fn run(&mut self, what: &str, f: impl FnOnce(&mut Tally) -> Result<()>) {
        if let Err(e) = f(self) {
            self.checks += 1;
            self.fail(format!("{what}: {e}"));
        }
    }

    fn finish(self, id: u32, name: &str) -> CriterionReport {
        CriterionReport {
            id,
            name: name.to_string(),
            pass: self.failure_count == 0,
            checks: self.checks,
            failure_count: self.failure_count,
            failures: self.failures,
            notes: self.notes,
        }
    }
}

type Criterion = fn(&Options, &mut ChaCha8Rng, &mut Tally);

const CRITERIA: [(u32, &str, Criterion); 11] = [
    (1, "fitting-oracle", fitting_oracle),
    (2, "self-injectivity", self_injectivity),
    (3, "group-ring-identities", group_ring_identities),
    (4, "euler-system-laws", euler_system_laws),
    (5, "kolyvagin-coherence", kolyvagin_coherence),
    (6, "ladder-laws", ladder_laws),
    (7, "scalar-extension", scalar_extension),
    (8, "specialization", specialization),
    (9, "asymptotics", asymptotics),
    (10, "sl2-cohomology", sl2_cohomology),
    (11, "scenario-determinism", scenario_determinism),
];

pub fn criterion_names() -> Vec<(u32, &'static str)> {
    CRITERIA.iter().map(|&(id, name, _)| (id, name)).collect()
}

/// Runs one criterion by id.
pub fn run_criterion(id: u32, opts: &Options) -> Option<CriterionReport> {
    let &(id, name, f) = CRITERIA.iter().find(|c| c.0 == id)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (u64::from(id) << 32));
    let mut t = Tally::default();
    f(opts, &mut rng, &mut t);
    Some(t.finish(id, name))
}

/// The whole battery; criteria run on up to `opts.threads` threads and are
/// reported in id order.
pub fn verify_suite(opts: &Options) -> VerifyReport {
    let ids: Vec<u32> = CRITERIA.iter().map(|c| c.0).filter(|id| opts.only.is_empty() || opts.only.contains(id)).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots: Vec<std::sync::Mutex<Option<CriterionReport>>> = ids.iter().map(|_| std::sync::Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..opts.threads.clamp(1, ids.len()) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if k >= ids.len() {
                    break;
                }
                let start = std::time::Instant::now();
                let rep = run_criterion(ids[k], opts);
                eprintln!("[timing] criterion {}: {:.2?}", ids[k], start.elapsed());
                *slots[k].lock().expect("unpoisoned") = rep;
            });
        }
    });
    let criteria: Vec<CriterionReport> = slots.into_iter().filter_map(|m| m.into_inner().expect("unpoisoned")).collect();
    let pass = criteria.iter().all(|c| c.pass);
    VerifyReport { schema: super::SCHEMA_VERSION, version: env!("CARGO_PKG_VERSION").into(), seed: opts.seed, quick: opts.quick, inject: opts.inject, criteria, pass }
}

fn random_elem<R: Ring + ?Sized>(r: &R, rng: &mut ChaCha8Rng) -> Elem {
    let q = r.modulus();
    let mut v: Vec<u64> = (0..r.dim()).map(|_| rng.gen_range(0..q)).collect();
    r.reduce(&mut v);
    v
}

/// A random element of the maximal ideal: a random multiple of `ϖ` or of a variable.
fn random_nonunit(r: &QuotientRing, rng: &mut ChaCha8Rng) -> Elem {
    let gen = match rng.gen_range(0..=r.r()) {
        0 => r.from_int(r.p() as i64),
        k => r.var(k - 1),
    };
    r.mul(&gen, &random_elem(r, rng))
}

/// Exponent vectors `m ∈ Z_{>0}^{r+1}` with `Π m_k ≤ bound`.
fn shapes(r: usize, bound: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in 0..=r {
        out = out
            .into_iter()
            .flat_map(|m: Vec<u32>| {
                let used: u32 = m.iter().product();
                (1..=bound / used).map(move |k| {
                    let mut m2 = m.clone();
                    m2.push(k);
                    m2
                })
            })
            .collect();
    }
    out
}

/// `ann(R^n / N)`: elements `x` with `x·e_j ∈ N` for every basis vector.
fn module_annihilator(r: &QuotientRing, pm: &PresentedModule) -> Ideal {
    let (n, dim) = (pm.ngens, r.dim());
    let unit = |b: usize| {
        let mut e = r.zero();
        e[b] = 1;
        e
    };
    let mut span_rows: Vec<Vec<u64>> = Vec::new();
    for row in &pm.relations {
        for b in 0..dim {
            span_rows.push(row.iter().flat_map(|x| r.mul(x, &unit(b))).collect());
        }
    }
    for j in 0..n {
        for rel in r.relations().rows() {
            let mut v = vec![0u64; n * dim];
            v[j * dim..(j + 1) * dim].copy_from_slice(rel);
            span_rows.push(v);
        }
    }
    let mut ann = Ideal::unit(r);
    for j in 0..n {
        let mat: Vec<Vec<u64>> = (0..dim)
            .map(|b| {
                let mut v = vec![0u64; n * dim];
                v[j * dim + b] = 1;
                v
            })
            .collect();
        let ker = left_kernel(r.p(), r.modulus(), &mat, n * dim, &span_rows);
        ann = ann.intersect(&Ideal::from_span(r, ker));
    }
    ann
}

fn map_presentation(pm: &PresentedModule, hom: &crate::lambda::RingHom, tgt: &QuotientRing) -> PresentedModule {
    PresentedModule { ngens: pm.ngens, relations: pm.relations.iter().map(|row| row.iter().map(|x| hom.apply(tgt, x)).collect()).collect() }
}

/// Fitting checks shared by diagonal and general presentations: ascending
/// chain, `Fitt_0 ⊆ ann`, and base change along every one-step reduction.
fn fitting_laws(c: &CoeffRing, r: usize, m: &[u32], ring: &Arc<QuotientRing>, pm: &PresentedModule, t: &mut Tally) -> Result<()> {
    let chain = (0..=pm.ngens + 1).map(|i| pm.fitting_ideal(ring.as_ref(), i)).collect::<Result<Vec<_>>>()?;
    for (i, w) in chain.windows(2).enumerate() {
        t.check(w[0].is_subset(&w[1]), || format!("Fitt_{i} ⊄ Fitt_{} at depth {m:?}", i + 1));
    }
    t.check(chain[0].is_subset(&module_annihilator(ring, pm)), || format!("Fitt_0 ⊄ ann at depth {m:?}"));
    for k in 0..m.len() {
        if m[k] < 2 {
            continue;
        }
        let mut m2 = m.to_vec();
        m2[k] -= 1;
        let coarse = Arc::new(QuotientRing::standard(c, r, &m2)?);
        let pi = ring.projection_to(&coarse)?;
        let reduced = map_presentation(pm, &pi, &coarse);
        for (i, f) in chain.iter().enumerate() {
            let lhs = reduced.fitting_ideal(coarse.as_ref(), i)?;
            let rhs = pi.image_ideal(ring.as_ref(), coarse.as_ref(), f);
            t.check(lhs == rhs, || format!("base change of Fitt_{i} fails from {m:?} to {m2:?}"));
        }
    }
    Ok(())
}

fn fitting_oracle(o: &Options, rng: &mut ChaCha8Rng, t: &mut Tally) {
    let count = if o.quick { 10 } else { 50 };
    t.run("setup", |t| {
        let c = CoeffRing::zp(5, 7)?;
        let all: Vec<(usize, Vec<u32>)> = (0..=2).flat_map(|r| shapes(r, 6).into_iter().map(move |m| (r, m))).collect();
        for _ in 0..count {
            let (r, m) = all[rng.gen_range(0..all.len())].clone();
            let ring = Arc::new(QuotientRing::standard(&c, r, &m)?);
            let s = rng.gen_range(1..=3);
            let mut d = vec![random_nonunit(&ring, rng)];
            for j in 1..s {
                let e = random_elem(ring.as_ref(), rng);
                d.push(ring.mul(&d[j - 1], &e));
            }
            let relations = (0..s)
                .map(|j| (0..s).map(|k| if j == k { d[j].clone() } else { ring.zero() }).collect())
                .collect();
            let pm = PresentedModule { ngens: s, relations };
            for i in 0..=s + 1 {
                let got = pm.fitting_ideal(ring.as_ref(), i)?;
                let expect = if i < s {
                    let prod = d[..s - i].iter().fold(ring.one(), |acc, x| ring.mul(&acc, x));
                    Ideal::generated(ring.as_ref(), &[prod])
                } else if o.inject == Some(Inject::Fitting) {
                    Ideal::zero(ring.as_ref())
                } else {
                    Ideal::unit(ring.as_ref())
                };
                t.check(got == expect, || format!("fitting-oracle: Fitt_{i} of a diagonal presentation differs from the product formula at depth {m:?}"));
            }
            fitting_laws(&c, r, &m, &ring, &pm, t)?;
            // A general presentation for the filtration and annihilator laws.
            let (ng, nr) = (rng.gen_range(1..=2), rng.gen_range(1..=3));
            let relations = (0..nr).map(|_| (0..ng).map(|_| random_elem(ring.as_ref(), rng)).collect()).collect();
            fitting_laws(&c, r, &m, &ring, &PresentedModule { ngens: ng, relations }, t)?;
        }
        Ok(())
    });
}

fn self_injectivity(o: &Options, rng: &mut ChaCha8Rng, t: &mut Tally) {
    t.run("multiplication by components", |t| {
        let c = CoeffRing::zp(5, 8)?;
        let mut rings = 0;
        for r in 0..=2 {
            for m in shapes(r, 6) {
                let src = QuotientRing::standard(&c, r, &m)?;
                for i in 0..=r {
                    let mut m2 = m.clone();
                    m2[i] += 1;
                    let tgt = QuotientRing::standard(&c, r, &m2)?;
                    match src.multiply_by_component(&tgt, i) {
                        Ok(hom) => {
                            t.check(hom.is_injective(&src, &tgt), || format!("h_{i}· not injective on {m:?}"));
                            let h = tgt.elem_from_poly(&src.mps().gens[i])?;
                            let ann = Ideal::annihilator(&tgt, &tgt.pow(&h, u64::from(m[i])));
                            let img = Ideal::from_span(&tgt, Span::new(5, c.modulus(), tgt.dim(), (0..src.dim()).map(|k| {
                                let mut e = src.zero();
                                e[k] = 1;
                                hom.apply(&tgt, &e)
                            }).collect::<Vec<_>>()));
                            t.check(img == ann, || format!("image of h_{i}· differs from ann(h_{i}^{}) on {m:?}", m[i]));
                        }
                        Err(e) => t.fail(format!("multiply_by_component on {m:?}, component {i}: {e}")),
                    }
                }
                rings += 1;
            }
        }
        t.note(format!("{rings} standard rings of size at most 5^6"));
        Ok(())
    });
    let sets = if o.quick { 8 } else { 40 };
    let per_set = 5;
    t.run("homomorphism extension", |t| {
        let c = CoeffRing::zp(5, 4)?;
        let bases: [(usize, &[u32]); 5] = [(0, &[2]), (0, &[3]), (1, &[1, 1]), (1, &[1, 2]), (1, &[2, 1])];
        let levels = [3u64, 7, 11, 21];
        for _ in 0..sets {
            let (r, m) = bases[rng.gen_range(0..bases.len())];
            let base = Arc::new(QuotientRing::standard(&c, r, m)?);
            let n = levels[rng.gen_range(0..levels.len())];
            let gr = GroupRing::new(base, Level::new(n, &[5])?);
            let rmod = gr.as_module();
            let k = rng.gen_range(1..=3);
            let gens: Vec<Elem> = (0..k).map(|_| random_elem(&gr, rng)).collect();
            let s = Ideal::generated(&gr, &gens);
            let (smod, sgens) = s.as_module(&gr);
            if sgens.is_empty() {
                t.note(format!("zero ideal drawn over level {n}"));
                continue;
            }
            let homs = hom_module(&smod, &rmod)?;
            let basis = homs.basis();
            let q = gr.modulus();
            let mut all_values = Vec::new();
            for _ in 0..per_set {
                let coeffs: Vec<u64> = basis.iter().map(|_| rng.gen_range(0..q)).collect();
                let mut values: Vec<Vec<u64>> = (0..sgens.len())
                    .map(|g| {
                        let mut v = vec![0u64; gr.dim()];
                        for (b, &a) in basis.iter().zip(&coeffs) {
                            for (x, &y) in v.iter_mut().zip(&b[g]) {
                                *x = (*x + crate::arith::mulmod(a, y, q)) % q;
                            }
                        }
                        rmod.reduce(&v)
                    })
                    .collect();
                if o.inject == Some(Inject::SelfInjectivity) {
                    values[0] = gr.add(&values[0], &gr.one());
                }
                all_values.push(values);
            }
            let ext = extend_homs(&rmod, &rmod, &sgens, &all_values)?;
            for (values, f2) in all_values.iter().zip(ext) {
                match f2 {
                    None => t.fail(format!("self-injectivity: a homomorphism from an ideal of level {n} over depth {m:?} does not extend")),
                    Some(f2) => {
                        let ok = sgens.iter().zip(values).all(|(g, v)| rmod.reduce(&crate::linalg::vecmat(g, &f2, gr.dim(), q)) == rmod.reduce(v));
                        t.check(ok, || format!("self-injectivity: extension does not restrict to f at level {n}"));
                    }
                }
            }
        }
        Ok(())
    });
}

fn group_ring_identities(o: &Options, _rng: &mut ChaCha8Rng, t: &mut Tally) {
    t.run("telescoping", |t| {
        let c = CoeffRing::zp(5, 4)?;
        let primes: Vec<u64> = (2..=31).filter(|&l| crate::arith::is_prime(l) && l != 5).collect();
        for (r, m) in [(0usize, vec![3u32]), (1, vec![2, 2])] {
            let base = Arc::new(QuotientRing::standard(&c, r, &m)?);
            for &l in &primes {
                let gr = GroupRing::new(base.clone(), Level::new(l, &[5])?);
                let s = gr.group_elem(gr.level().sigma(0));
                let mut d = gr.kolyvagin_d(0);
                if o.inject == Some(Inject::Telescoping) {
                    d = gr.add(&d, &gr.one());
                }
                let lhs = gr.mul(&gr.sub(&s, &gr.one()), &d);
                let rhs = gr.sub(&gr.from_int(l as i64 - 1), &gr.norm());
                t.check(lhs == rhs, || format!("telescoping: (σ_ℓ - 1)D_ℓ ≠ (ℓ - 1) - N at ℓ = {l}"));
                t.check(gr.aug(&d) == base.from_int(((l - 1) * (l - 2) / 2) as i64), || format!("aug(D_ℓ) ≠ (ℓ-1)(ℓ-2)/2 at ℓ = {l}"));
            }
        }
        t.note(format!("primes {primes:?}"));
        Ok(())
    });
}

fn random_linear(rng: &mut ChaCha8Rng, r: usize) -> Poly {
    let a: Vec<i64> = (0..r).map(|_| rng.gen_range(0..5)).collect();
    Poly::linear(rng.gen_range(0..5), &a)
}

/// A generated system of rank `rank` with a random seed and one random
/// primitive part at the first pool prime.
fn random_system(rng: &mut ChaCha8Rng, r: usize, rank: usize, pool: &[u64]) -> EulerSystem {
    let seed = (0..rank).map(|_| random_linear(rng, r)).collect();
    let primitive = pool
        .first()
        .map(|&l| {
            let coords = (0..rank).map(|_| vec![TableTerm { unit: rng.gen_range(1..l), coeff: random_linear(rng, r) }]).collect();
            vec![PrimitivePart { level: l, w: TableClass { coords } }]
        })
        .unwrap_or_default();
    EulerSystem { rank, flavor: Flavor::C, classes: Classes::Generated { seed, primitive, b: BTreeMap::new() } }
}

fn euler_system_laws(o: &Options, rng: &mut ChaCha8Rng, t: &mut Tally) {
    let pool: &[u64] = if o.quick { &[3, 7, 11] } else { &[3, 7, 11, 13] };
    t.run("norm relations", |t| {
        let c = CoeffRing::zp(5, 3)?;
        let levels = levels_from_primes(pool, pool.len());
        let ring = Arc::new(QuotientRing::standard(&c, 1, &[1, 2])?);
        let real = Realization::standard(ring);
        for d in 1..=2 {
            for rho in 1..=2 {
                for flavor in [Flavor::C, Flavor::Z] {
                    let data = DeformationData::synthetic(5, 1, d, pool, rng.gen())?;
                    let seed = (0..rho).map(|_| random_linear(rng, 1)).collect();
                    let es = EulerSystem::multiplicative(seed, flavor);
                    for chk in es.verify_all(&data, &real, &levels)? {
                        t.check(chk.pass, || format!("norm-relation fails at ({}, {}) for d = {d}, ρ = {rho}, {flavor:?}", chk.n, chk.l));
                    }
                    if flavor == Flavor::Z {
                        match convert_rubin(&es, &data, &real, &levels) {
                            Ok(conv) => {
                                for chk in conv.verify_all(&data, &real, &levels)? {
                                    t.check(chk.pass, || format!("converted system fails the c-relation at ({}, {})", chk.n, chk.l));
                                }
                            }
                            Err(Error::Verification(e)) => t.fail(format!("conversion: {e}")),
                            Err(e) => t.note(format!("conversion skipped for d = {d}, ρ = {rho}: {e}")),
                        }
                    }
                }
            }
        }
        Ok(())
    });
    t.run("derivative congruence", |t| {
        let c = CoeffRing::zp(5, 3)?;
        let apool = [11u64, 31, 41];
        let data = DeformationData::synthetic(5, 1, 2, &apool, rng.gen())?;
        for _ in 0..3 {
            let mut es = random_system(rng, 1, 2, &apool);
            let coords = Coordinates::standard(&c, 1);
            for m in [vec![1, 1], vec![1, 2]] {
                let depth = coords.depth(&c, &m)?;
                let levels = data.enumerate_levels(&depth.real, 2)?;
                if o.inject == Some(Inject::NormRelation) {
                    let mut tab = es.tabulate(&data, &depth.real, &levels)?;
                    if let Classes::Table { table } = &mut tab.classes {
                        if let Some(cls) = table.get_mut(&11) {
                            cls.coords[0].push(TableTerm { unit: 2, coeff: Poly::int(1, 1) });
                        }
                    }
                    es = tab;
                }
                for chk in es.verify_all(&data, &depth.real, &levels)? {
                    t.check(chk.pass, || format!("norm-relation fails at ({}, {}) at depth {m:?}", chk.n, chk.l));
                }
                let eng = Engine::new(&data, &es);
                for &n in &levels {
                    t.check(eng.derivative_class(&depth.real, n).is_ok(), || format!("derivative congruence fails at n = {n}, depth {m:?}"));
                }
            }
        }
        Ok(())
    });
}

fn synthetic_setup(seed: u64) -> Result<(CoeffRing, DeformationData)> {
    Ok((CoeffRing::zp(5, 3)?, DeformationData::synthetic(5, 1, 2, &[11, 31, 41], seed)?))
}

fn alternative_generators(level: &Level) -> (BTreeMap<u64, u64>, u64) {
    let mut gens = BTreeMap::new();
    let mut total = 1u64;
    for &l in level.primes() {
        let a = (2..l - 1).find(|&a| gcd(a, l - 1) == 1).unwrap_or(1);
        gens.insert(l, powmod(primitive_root(l), a, l));
        total *= a;
    }
    (gens, total)
}

fn kolyvagin_coherence(o: &Options, rng: &mut ChaCha8Rng, t: &mut Tally) {
    t.run("universal element identities", |t| {
        let (c, data) = synthetic_setup(rng.gen())?;
        let es = random_system(rng, 1, 2, &[11, 31]);
        let coords = Coordinates::standard(&c, 1);
        let depth = coords.depth(&c, &[1, 2])?;
        let ring = depth.ring().clone();
        let eng = Engine::new(&data, &es);
        let seed = es.seed_class(&data, &depth.real)?;
        t.check(eng.derivative_class(&depth.real, 1)?.kappa == seed, || "κ(1) ≠ c(1)".into());
        t.check(eng.universal_kolyvagin(&depth.real, 1)? == seed, || "κ^univ_1 ≠ c(1)".into());
        t.check(eng.d_universal(&depth.real, 1)? == seed, || "d^univ_1 ≠ c(1)".into());
        let levels = data.enumerate_levels(&depth.real, 2)?;
        for &n in &levels {
            for inv in [false, true] {
                t.check(eng.clone().with_inverse_frobenius(inv).check_norm_inverse(&depth.real, n).is_ok(), || {
                    format!("norm inverse of d^univ differs from κ^univ at n = {n} (inverse Frobenius {inv})")
                });
            }
            let lv = eng.level(n)?;
            let (gens, a) = alternative_generators(&lv);
            let a = if o.inject == Some(Inject::GeneratorChange) { a + 1 } else { a };
            let alt = Engine::new(&data, &es).with_generators(gens);
            let k = eng.derivative_class(&depth.real, n)?.kappa;
            let k2 = alt.derivative_class(&depth.real, n)?.kappa;
            t.check(k == k2.iter().map(|x| ring.scale(x, a)).collect::<Vec<_>>(), || format!("generator-change: κ(n) does not rescale by Π a_ℓ at n = {n}"));
            let u = eng.universal_kolyvagin(&depth.real, n)?;
            let u2 = alt.universal_kolyvagin(&depth.real, n)?;
            t.check(u == u2.iter().map(|x| ring.scale(x, a)).collect::<Vec<_>>(), || format!("generator-change: κ^univ does not rescale at n = {n}"));
            t.check(eng.c_ideal_level(&depth, n)? == alt.c_ideal_level(&depth, n)?, || format!("𝔠(n) depends on the generators at n = {n}"));
        }
        for (l, q) in [(11, 31), (31, 11), (41, 11), (11, 41)] {
            for inv in [false, true] {
                let e = eng.clone().with_inverse_frobenius(inv);
                t.check(e.a_coefficient(&depth.real, l, q)? == e.a_lift(&depth.real, l, q)?, || format!("closed-form A({l}, {q}) differs from the e-map value"));
            }
        }
        t.note(format!("levels {levels:?}"));
        Ok(())
    });
    t.run("hom enumeration", |t| {
        let (c, data) = synthetic_setup(rng.gen())?;
        let mut skipped = Vec::new();
        for _ in 0..3 {
            let es = random_system(rng, 1, 2, &[11]);
            let eng = Engine::new(&data, &es);
            for m in [[1, 1], [1, 2]] {
                let depth = Coordinates::standard(&c, 1).depth(&c, &m)?;
                for n in data.enumerate_levels(&depth.real, 1)? {
                    // Enumerating Hom(M(n), R[H_n]) is exponential in |H_n|.
                    if eng.level(n)?.size() > HOM_LEVEL_SIZE {
                        skipped.push(n);
                        continue;
                    }
                    match eng.c_ideal_by_homs(&depth, n) {
                        Ok(j) => t.check(j == eng.c_ideal_level(&depth, n)?, || format!("hom enumeration differs from the shortcut at n = {n}, depth {m:?}")),
                        Err(Error::Budget(e)) => t.note(format!("hom enumeration skipped at n = {n}: {e}")),
                        Err(e) => return Err(e),
                    }
                }
            }
        }
        skipped.sort_unstable();
        skipped.dedup();
        t.note(format!("hom enumeration limited to |H_n| ≤ {HOM_LEVEL_SIZE}; skipped levels {skipped:?}"));
        Ok(())
    });
}

fn ladder_laws(o: &Options, rng: &mut ChaCha8Rng, t: &mut Tally) {
    t.run("containment and level compatibility", |t| {
        let (c, data) = synthetic_setup(rng.gen())?;
        let es = random_system(rng, 1, 2, &[11, 31]);
        let eng = Engine::new(&data, &es);
        let coords = Coordinates::standard(&c, 1);
        for depths in [vec![vec![1, 1], vec![1, 2], vec![1, 3], vec![1, 4]], vec![vec![1, 1], vec![2, 1], vec![2, 2], vec![2, 3]]] {
            let mut lifted = 0;
            for i in 0..=2 {
                let ladder = eng.c_i_ladder(&coords, &c, i, &depths, &Family::Admissible)?;
                t.check(ladder.containments_hold(), || format!("ladder containment fails for i = {i} over {depths:?}"));
                if i < 2 {
                    continue;
                }
                // Levels for i = 2 include those for smaller i.
                for w in ladder.depths.windows(2) {
                    for n in data.enumerate_levels(&w[1].real, i)? {
                        let rep = eng.check_level_compat(&w[1], &w[0], n)?;
                        lifted += usize::from(rep.lifting.is_some());
                        t.check(rep.pass(), || format!("level compatibility fails at n = {n} from {:?} to {:?}", w[1].m, w[0].m));
                    }
                }
            }
            t.note(format!("{depths:?}: hom lifting checked at {lifted} (level, rung) pairs"));
        }
        Ok(())
    });
    t.run("parameter-system independence", |t| {
        let (c, data) = synthetic_setup(rng.gen())?;
        let es = random_system(rng, 1, 2, &[11, 31]);
        let eng = Engine::new(&data, &es);
        let std = Coordinates::standard(&c, 1);
        let x = || Poly::var(1, 0);
        for h in [x().add(&Poly::int(1, 5), &c), x().pow(2, &c).add(&Poly::int(1, 5), &c)] {
            let alt = Coordinates::with_mps(Mps { gens: vec![Poly::int(1, 5), h.clone()] })?;
            let rep = eng.check_independence(&c, &std, &alt, 1, 1, 1, 4)?;
            t.check(rep.pass, || format!("independence fails for (5, {})", crate::cli::poly_text(&h)));
        }
        let data2 = DeformationData::synthetic(5, 2, 2, &[11], rng.gen())?;
        let es2 = EulerSystem::multiplicative(vec![random_linear(rng, 2), random_linear(rng, 2)], Flavor::C);
        let eng2 = Engine::new(&data2, &es2);
        let std2 = Coordinates::standard(&c, 2);
        let (x1, x2) = (Poly::var(2, 0), Poly::var(2, 1));
        let systems = [
            vec![Poly::int(2, 5), x1.add(&Poly::int(2, 5), &c), x2.add(&x1, &c)],
            vec![Poly::int(2, 5), x1.pow(2, &c).add(&Poly::int(2, 5), &c), x2.add(&Poly::int(2, 5), &c)],
        ];
        for gens in systems {
            let alt = Coordinates::with_mps(Mps { gens: gens.clone() })?;
            let rep = eng2.check_independence(&c, &std2, &alt, 1, 1, 1, 3)?;
            t.check(rep.pass, || format!("independence fails at r = 2 for {:?}", gens.iter().map(crate::cli::poly_text).collect::<Vec<_>>()));
        }
        Ok(())
    });
    let count = if o.quick { 2 } else { 5 };
    t.run("affine invariance", |t| {
        let (c, data) = synthetic_setup(rng.gen())?;
        let es = random_system(rng, 1, 2, &[11]);
        let eng = Engine::new(&data, &es);
        let data2 = DeformationData::synthetic(5, 2, 2, &[11], rng.gen())?;
        let es2 = EulerSystem::multiplicative(vec![random_linear(rng, 2), random_linear(rng, 2)], Flavor::C);
        let eng2 = Engine::new(&data2, &es2);
        for k in 0..count {
            let r = if k % 2 == 0 { 1 } else { 2 };
            let factors = random_elementaries(rng, r, 3);
            let map = AffineMap::compose_all(&factors, r, &c)?;
            let e = if r == 1 { &eng } else { &eng2 };
            for rep in e.check_affine(&c, &map, 1, 1, 1, 3)? {
                t.check(rep.pass, || format!("affine invariance fails for {factors:?}"));
            }
        }
        Ok(())
    });
}

pub(crate) fn random_elementaries(rng: &mut ChaCha8Rng, r: usize, len: usize) -> Vec<Elementary> {
    (0..len)
        .map(|_| match rng.gen_range(0..4) {
            0 => Elementary::P { nu: rng.gen_range(0..r), u: vec![[1, 2, 3, 4][rng.gen_range(0..4)]] },
            1 if r > 1 => Elementary::Q { mu: 0, nu: 1 },
            2 if r > 1 => Elementary::R { mu: 1, nu: 0, a: vec![rng.gen_range(1..5)] },
            _ => Elementary::Delta { nu: rng.gen_range(0..r), a: vec![5 * rng.gen_range(1..5)] },
        })
        .collect()
}

fn scalar_extension(o: &Options, rng: &mut ChaCha8Rng, t: &mut Tally) {
    let count = if o.quick { 3 } else { 10 };
    let exts = [("unramified", ExtSpec { kind: ExtKind::Unramified, poly: vec![-2, 0, 1] }), ("ramified", ExtSpec { kind: ExtKind::Eisenstein, poly: vec![-5, 0, 1] })];
    for (label, ext) in exts {
        t.run(label, |t| {
            for _ in 0..count {
                let (c, data) = synthetic_setup(rng.gen())?;
                let es = random_system(rng, 1, 2, &[11, 31]);
                let eng = Engine::new(&data, &es);
                let rep = scalar_extension_check(&eng, &c, &ext, 1, &[vec![1, 1], vec![1, 2]])?;
                t.check(rep.pass, || format!("scalar extension ({label}) fails"));
                let ring = QuotientRing::standard(&c, 1, &[1, 2])?;
                let (ng, nr) = (rng.gen_range(1..=2), rng.gen_range(1..=3));
                let relations = (0..nr).map(|_| (0..ng).map(|_| random_elem(&ring, rng)).collect()).collect();
                let pm = PresentedModule { ngens: ng, relations };
                for i in 0..=ng {
                    t.check(fitting_base_change(&c, &ext, 1, &[1, 2], &pm, i)?, || format!("Fitt_{i} does not commute with the {label} extension"));
                }
            }
            Ok(())
        });
    }
}

fn specialization(o: &Options, rng: &mut ChaCha8Rng, t: &mut Tally) {
    let count = if o.quick { 5 } else { 20 };
    t.run("weak specialization", |t| {
        let c = CoeffRing::zp(5, 3)?;
        let mut equal = 0;
        let mut rungs = 0;
        for _ in 0..count {
            let data = DeformationData::synthetic(5, 2, 2, &[11, 31], rng.gen())?;
            let es = random_system(rng, 2, 2, &[11]);
            let eng = Engine::new(&data, &es);
            // h = x_2 + a_1 x_1 + 5 a_0
            let h = Poly::linear(5 * rng.gen_range(0..5), &[rng.gen_range(0..5), 1]);
            let rep = weak_specialization(&eng, &c, &h, 1, &[vec![1, 1], vec![1, 2]])?;
            t.check(rep.pass, || format!("specialized ladder does not contain the reduced one for h = {}", crate::cli::poly_text(&h)));
            equal += rep.equal_count;
            rungs += rep.rungs.len();
        }
        t.note(format!("weak specialization equality held on {equal} of {rungs} rungs (recorded, not asserted)"));
        Ok(())
    });
    t.run("strong specialization machinery", |t| {
        let (c, data) = synthetic_setup(rng.gen())?;
        let es = random_system(rng, 1, 2, &[11]);
        let eng = Engine::new(&data, &es);
        for (a, i, depths) in [(0i64, 0, vec![vec![1], vec![2]]), (5, 1, vec![vec![1]])] {
            let rep = strong_specialization(&eng, &c, &[a], 1, i, &depths)?;
            t.check(rep.embedding_injective, || {
                format!(
                    "ē_{{m′_0}} is not injective at a = {a}: kernel of order 5^{} generated by {:?}",
                    rep.embedding_kernel_log_size, rep.embedding_kernel
                )
            });
            t.check(rep.coarse_embedding_injective, || format!("ē_{{m_0}} is not injective at a = {a}"));
            t.check(rep.diagram_commutes, || format!("reduction square does not commute at a = {a}"));
            t.check(rep.admissible_sets_equal, || format!("admissible primes differ across ē at a = {a}"));
            t.check(rep.specialization.pass, || format!("strong specialization containment fails at a = {a}"));
            t.note(format!(
                "a = {a}: per-level image/preimage equality {}, two-sided equality on {} of {} rungs",
                rep.per_level_equal,
                rep.specialization.equal_count,
                rep.specialization.rungs.len()
            ));
        }
        Ok(())
    });
    t.run("cyclotomic two-sided report", |t| {
        let c = CoeffRing::zp(5, 3)?;
        let base = DeformationData::synthetic(5, 1, 2, &[11, 101, 151], rng.gen())?;
        let es0 = random_system(rng, 1, 2, &[11]);
        let (data, es) = extend_cyclotomic(&es0, &base)?;
        let eng = Engine::new(&data, &es);
        let rep = cyclotomic_strong(&eng, &c, &Poly::linear(5, &[1, 1]), 1, &[1, 2])?;
        t.check(rep.pass, || "cyclotomic sandwich containments fail".into());
        for rung in &rep.rungs {
            t.note(format!("m = {}: N(m) = {:?}, equality {} (recorded, not asserted)", rung.m, rung.n_of_m, rung.equal));
        }
        Ok(())
    });
}

fn asymptotics(_o: &Options, _rng: &mut ChaCha8Rng, t: &mut Tally) {
    t.run("specialization lengths", |t| {
        let c = CoeffRing::zp(5, 21)?;
        let x = Poly::var(1, 0);
        let ns: Vec<u32> = (3..=10).collect();
        let m = StructureData { factors: vec![x.pow(2, &c)] };
        let est = estimate_local_exponent(&m, &x, 0, &ns, &c)?;
        for &(n, l) in &est.lengths {
            t.check(l == Some(2 * n), || format!("ᾱ({n}) = {l:?} for Λ/(x²), expected {}", 2 * n));
        }
        t.check(est.alpha == Some(2), || format!("estimated α = {:?}, expected 2", est.alpha));
        for g in [x.add(&Poly::int(1, 1), &c), x.add(&Poly::int(1, 5), &c)] {
            let lens = ns.iter().map(|&n| specialization_length(&g, &x, n, &c).map(|s| s.length)).collect::<Result<Vec<_>>>()?;
            t.check(lens.windows(2).all(|w| w[0] == w[1]), || format!("lengths of {} are not constant: {lens:?}", crate::cli::poly_text(&g)));
        }
        // ⊕ Λ/(x), Λ/(x³), Λ/(x+5): lengths N, 3N, 1 at x ↦ -5^N; 3N stays
        // below the precision 21 for N ≤ 6.
        let s = StructureData { factors: vec![x.clone(), x.pow(3, &c), x.add(&Poly::int(1, 5), &c)] };
        let short: Vec<u32> = (3..=6).collect();
        for (i, alpha, offset) in [(0usize, 4u32, 1i64), (1, 1, 1), (2, 0, 1)] {
            let est = estimate_local_exponent(&s, &x, i, &short, &c)?;
            t.check(est.alpha == Some(alpha), || format!("α_{i} = {:?}, expected {alpha}", est.alpha));
            t.check(est.residuals.iter().all(|&(_, r)| r == offset), || format!("residuals drift for i = {i}: {:?}", est.residuals));
        }
        Ok(())
    });
}

fn sl2_cohomology(o: &Options, _rng: &mut ChaCha8Rng, t: &mut Tally) {
    t.run("SL_2 brute force", |t| {
        let mut g = GroupSpec::sl2(5);
        if o.inject == Some(Inject::H1Action) {
            g.action[1] = vec![vec![1, 0], vec![0, 1]];
        }
        let start = std::time::Instant::now();
        let rep = brute_force_group_h1(&g, ORDER_BUDGET)?;
        t.check(rep.order == 120, || format!("|SL_2(F_5)| = {}", rep.order));
        t.check(rep.h1_dim == 0, || format!("dim H¹(SL_2(F_5), F_5²) = {}", rep.h1_dim));
        t.check(start.elapsed().as_secs() < 60, || "brute force exceeded 60 seconds".into());
        t.note(format!("cocycles {}, coboundaries {}", rep.cocycle_dim, rep.coboundary_dim));
        for (label, g) in [("trivial group", GroupSpec::trivial(5, 2)), ("±1 on k", GroupSpec::sign_acting_trivially(5))] {
            let rep = brute_force_group_h1(&g, ORDER_BUDGET)?;
            t.check(rep.h1_dim == 0, || format!("H¹ of the {label} is {}", rep.h1_dim));
        }
        Ok(())
    });
}

fn scenario_determinism(_o: &Options, _rng: &mut ChaCha8Rng, t: &mut Tally) {
    t.run("minimal scenario", |t| {
        let sc: super::Scenario = serde_json::from_str(super::MINIMAL_SCENARIO).map_err(|e| Error::InvalidInput(e.to_string()))?;
        let a = super::render(&super::run_scenario(&sc, 1)?);
        let b = super::render(&super::run_scenario(&sc, 2)?);
        t.check(a == b, || "two runs of the minimal scenario differ".into());
        Ok(())
    });
}
