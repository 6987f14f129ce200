//! Scenario runner and reporting behind the `iwasawa` binary.
//!
//! A scenario is a JSON document (schema version 1) that fixes the
//! coefficient ring, the coordinates, a depth schedule, the deformation data
//! and an Euler system, followed by a list of tasks. Tasks run in parallel
//! but the report lists them in declaration order and carries no timings,
//! so a fixed (config, seed) pair always gives the same bytes.
//!
//! Exit codes: 0 when every task passes, 1 when an invariant fails, 2 for
//! usage or configuration errors.

pub mod battery;
pub mod h1;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::time::Instant;

use crate::coeff::{CoeffRing, ExtSpec};
use crate::error::{invalid, Error, Result};
use crate::euler::{extend_cyclotomic, EulerSystem, Flavor};
use crate::fitting::{estimate_local_exponent, PresentedModule, StructureData};
use crate::galois::DeformationData;
use crate::kolyvagin::{
    cyclotomic_strong, ideal_polys, scalar_extension_check, strong_specialization, weak_specialization, Coordinates, Engine, Family,
    STABILITY_WINDOW,
};
use crate::lambda::{AffineMap, Mps};
use crate::poly::Poly;

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable overriding the worker thread count.
pub const THREADS_ENV: &str = "IWASAWA_THREADS";

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAIL: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

/// The smallest end-to-end scenario: `Z/5³`, `r = 1`, standard parameters,
/// a multiplicative Euler system and one `cideal` task.
pub const MINIMAL_SCENARIO: &str = r#"{
  "schema": 1,
  "coeff": {"p": 5, "M": 3},
  "r": 1,
  "depths": [[1, 1], [1, 2], [1, 3]],
  "deformation": {"synthetic": {"d": 2, "pool": [11, 31, 41], "seed": 11}},
  "euler_system": {"multiplicative": {
    "seed": [[{"coeff": 5, "exps": [0]}, {"coeff": 1, "exps": [1]}], [{"coeff": 1, "exps": [0]}]],
    "flavor": "c"
  }},
  "seed": 1,
  "tasks": [{"task": "cideal", "i": 1}]
}"#;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffSpec {
    pub p: u64,
    #[serde(rename = "M")]
    pub m: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ext: Option<ExtSpec>,
}

impl CoeffSpec {
    pub fn build(&self) -> Result<CoeffRing> {
        CoeffRing::new(self.p, self.m, self.ext.as_ref())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub d: usize,
    pub pool: Vec<u64>,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeformationSpec {
    Synthetic(SyntheticSpec),
    Explicit(DeformationData),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiplicativeSpec {
    pub seed: Vec<Poly>,
    pub flavor: Flavor,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EulerSpec {
    Multiplicative(MultiplicativeSpec),
    Explicit(EulerSystem),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilySpec {
    Admissible,
    Primes(Vec<u64>),
    Custom(Vec<Vec<u64>>),
}

impl From<&FamilySpec> for Family {
    fn from(f: &FamilySpec) -> Family {
        match f {
            FamilySpec::Admissible => Family::Admissible,
            FamilySpec::Primes(v) => Family::Primes(v.clone()),
            FamilySpec::Custom(v) => Family::Custom(v.clone()),
        }
    }
}

fn default_i_max() -> usize {
    2
}

fn default_m0() -> u32 {
    1
}

/// One requested computation, tagged by `"task"`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case", deny_unknown_fields)]
pub enum Task {
    /// The ladder `𝔠_i` over the depth schedule.
    Cideal {
        i: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        family: Option<FamilySpec>,
    },
    /// The ladder of `ind(𝐜)`.
    Ind,
    /// `κ(n)` at one depth.
    Kolyvagin { n: u64, depth: Vec<u32> },
    /// Norm relations at every admissible level with at most `i_max` primes.
    Check {
        #[serde(default = "default_i_max")]
        i_max: usize,
    },
    /// The Fitting chain of `R^ngens / (relations)` at one depth.
    Fitting { depth: Vec<u32>, ngens: usize, relations: Vec<Vec<Poly>> },
    /// Local exponent estimate for structure data over `O[[x]]`.
    Asymptotics { factors: Vec<Poly>, f: Poly, i: usize, ns: Vec<u32> },
    /// Ladder comparison against another monic parameter system.
    Independence {
        mps: Mps,
        i: usize,
        #[serde(default = "default_m0")]
        m0: u32,
        start: u32,
        len: usize,
    },
    /// Ladder comparison along an affine change of variables and its factors.
    Affine {
        map: AffineMap,
        i: usize,
        #[serde(default = "default_m0")]
        m0: u32,
        start: u32,
        len: usize,
    },
    ScalarExtension { ext: ExtSpec, i: usize },
    /// Weak specialization along `x_r ↦ -g` for `h = x_r + g`.
    Specialization { h: Poly, i: usize },
    /// Specialization at `x = a` with the finer embedding checks.
    StrongSpecialization {
        a: Vec<i64>,
        #[serde(default = "default_m0")]
        m0: u32,
        i: usize,
    },
    /// Two-sided report after adjoining the cyclotomic variable.
    Cyclotomic { h: Poly, i: usize, ms: Vec<u32> },
    /// Random elementary affine compositions; needs the scenario seed.
    RandomAffine {
        count: usize,
        factors: usize,
        i: usize,
        #[serde(default = "default_m0")]
        m0: u32,
        start: u32,
        len: usize,
    },
    /// Brute-force `H¹(SL_2(F_p), F_p²)`.
    H1 { p: u64 },
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Cideal { .. } => "cideal",
            Task::Ind => "ind",
            Task::Kolyvagin { .. } => "kolyvagin",
            Task::Check { .. } => "check",
            Task::Fitting { .. } => "fitting",
            Task::Asymptotics { .. } => "asymptotics",
            Task::Independence { .. } => "independence",
            Task::Affine { .. } => "affine",
            Task::ScalarExtension { .. } => "scalar_extension",
            Task::Specialization { .. } => "specialization",
            Task::StrongSpecialization { .. } => "strong_specialization",
            Task::Cyclotomic { .. } => "cyclotomic",
            Task::RandomAffine { .. } => "random_affine",
            Task::H1 { .. } => "h1",
        }
    }

    fn randomized(&self) -> bool {
        matches!(self, Task::RandomAffine { .. })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    pub coeff: CoeffSpec,
    pub r: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mps: Option<Mps>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affine: Option<AffineMap>,
    pub depths: Vec<Vec<u32>>,
    pub deformation: DeformationSpec,
    pub euler_system: EulerSpec,
    #[serde(default)]
    pub inverse_frobenius: bool,
    /// Generator `σ_ℓ` per prime, as a residue mod `ℓ`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub generators: BTreeMap<u64, u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub tasks: Vec<Task>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub version: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct TaskReport {
    pub task: String,
    pub pass: bool,
    /// The failed invariant, when `pass` is false.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    pub result: Value,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema: u32,
    pub provenance: Provenance,
    pub stability_rule: String,
    pub tasks: Vec<TaskReport>,
    pub pass: bool,
}

impl Report {
    pub fn exit_code(&self) -> u8 {
        if self.pass {
            EXIT_OK
        } else {
            EXIT_FAIL
        }
    }
}

/// Pretty JSON with a trailing newline.
pub fn render<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("scenario schema: {e}")))
}

/// Thread count: an explicit value, then the environment, then the machine.
pub fn thread_count(explicit: Option<usize>) -> usize {
    explicit
        .or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok()))
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1)
}

/// A compact human-readable rendering such as `5 + x1^2`.
pub fn poly_text(p: &Poly) -> String {
    let terms: Vec<String> = p
        .terms()
        .map(|(e, c)| {
            let coeff = if c.len() == 1 { c[0].to_string() } else { format!("{c:?}") };
            let mono: Vec<String> = e
                .iter()
                .enumerate()
                .filter(|(_, &k)| k > 0)
                .map(|(v, &k)| if k == 1 { format!("x{}", v + 1) } else { format!("x{}^{k}", v + 1) })
                .collect();
            match (mono.is_empty(), coeff.as_str()) {
                (true, _) => coeff,
                (false, "1") => mono.join("*"),
                _ => format!("{coeff}*{}", mono.join("*")),
            }
        })
        .collect();
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join(" + ")
    }
}

/// Everything a task needs, built once per scenario.
struct Context {
    c: CoeffRing,
    coords: Coordinates,
    depths: Vec<Vec<u32>>,
    data: DeformationData,
    es: EulerSystem,
    inverse_frobenius: bool,
    generators: BTreeMap<u64, u64>,
    seed: Option<u64>,
}

impl Context {
    fn new(sc: &Scenario) -> Result<Context> {
        if sc.schema != SCHEMA_VERSION {
            return invalid(format!("unsupported schema version {}", sc.schema));
        }
        let c = sc.coeff.build()?;
        let r = sc.r;
        let coords = match (&sc.mps, &sc.affine) {
            (Some(_), Some(_)) => return invalid("give at most one of mps and affine"),
            (Some(m), None) => {
                if m.r() != r {
                    return invalid("mps has the wrong number of variables");
                }
                Coordinates::with_mps(m.clone())?
            }
            (None, Some(a)) => {
                if a.r() != r {
                    return invalid("affine map has the wrong number of variables");
                }
                Coordinates::affine(a, &c)?
            }
            (None, None) => Coordinates::standard(&c, r),
        };
        if sc.depths.is_empty() {
            return invalid("the depth schedule is empty");
        }
        for m in &sc.depths {
            if m.len() != r + 1 || m.iter().any(|&k| k == 0) {
                return invalid(format!("depth {m:?} needs {} positive exponents", r + 1));
            }
        }
        for w in sc.depths.windows(2) {
            if w[0].iter().zip(&w[1]).any(|(a, b)| a > b) {
                return invalid(format!("depth schedule is not monotone at {:?} → {:?}", w[0], w[1]));
            }
        }
        let p = c.p();
        let data = match &sc.deformation {
            DeformationSpec::Synthetic(s) => DeformationData::synthetic(p, r, s.d, &s.pool, s.seed)?,
            DeformationSpec::Explicit(d) => {
                let d = d.clone().normalize()?.reduce_coefficients(&c);
                d.validate(p)?;
                d
            }
        };
        if data.r != r {
            return invalid("deformation data has a different number of variables");
        }
        let es = match &sc.euler_system {
            EulerSpec::Multiplicative(m) => {
                let seed = m.seed.iter().map(|s| s.with_nvars(r)).collect::<Result<Vec<_>>>()?;
                EulerSystem::multiplicative(seed, m.flavor)
            }
            EulerSpec::Explicit(e) => e.clone(),
        };
        if es.rank != data.d {
            return invalid("Euler system rank differs from the rank of the deformation");
        }
        es.validate(&data)?;
        if sc.tasks.iter().any(Task::randomized) && sc.seed.is_none() {
            return invalid("randomized tasks need a top-level seed");
        }
        Ok(Context {
            c,
            coords,
            depths: sc.depths.clone(),
            data,
            es,
            inverse_frobenius: sc.inverse_frobenius,
            generators: sc.generators.clone(),
            seed: sc.seed,
        })
    }

    fn engine(&self) -> Engine<'_> {
        Engine::new(&self.data, &self.es).with_inverse_frobenius(self.inverse_frobenius).with_generators(self.generators.clone())
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn outcome(pass: bool, failure: &str, result: Value) -> (bool, Option<String>, Value) {
    (pass, (!pass).then(|| failure.to_string()), result)
}

fn run_task(ctx: &Context, task: &Task) -> Result<(bool, Option<String>, Value)> {
    let c = &ctx.c;
    let eng = ctx.engine();
    Ok(match task {
        Task::Cideal { i, family } => {
            let fam = family.as_ref().map_or(Family::Admissible, Family::from);
            let ladder = eng.c_i_ladder(&ctx.coords, c, *i, &ctx.depths, &fam)?;
            outcome(ladder.containments_hold(), "ladder containment", to_value(&ladder))
        }
        Task::Ind => {
            let (ladder, nonzero) = eng.ind_ideal(&ctx.coords, c, &ctx.depths)?;
            let mut v = to_value(&ladder);
            v["nonzero"] = json!(nonzero);
            outcome(ladder.containments_hold(), "ladder containment", v)
        }
        Task::Kolyvagin { n, depth } => {
            let d = ctx.coords.depth(c, depth)?;
            let k = eng.derivative_class(&d.real, *n)?;
            let kappa: Vec<Poly> = k.kappa.iter().map(|x| d.ring().to_poly(x)).collect();
            (true, None, json!({"n": k.n, "depth": depth, "generators": k.generators, "kappa": kappa}))
        }
        Task::Check { i_max } => {
            let mut rows = Vec::new();
            let mut pass = true;
            for m in &ctx.depths {
                let d = ctx.coords.depth(c, m)?;
                let levels = ctx.data.enumerate_levels(&d.real, *i_max)?;
                let checks = ctx.es.verify_all(&ctx.data, &d.real, &levels)?;
                let failed: Vec<_> = checks.iter().filter(|k| !k.pass).map(|k| json!([k.n, k.l])).collect();
                pass &= failed.is_empty();
                rows.push(json!({"depth": m, "levels": levels, "checks": checks.len(), "failed": failed}));
            }
            outcome(pass, "norm relation", json!({"i_max": i_max, "depths": rows}))
        }
        Task::Fitting { depth, ngens, relations } => {
            let d = ctx.coords.depth(c, depth)?;
            let ring = d.ring();
            if relations.iter().any(|row| row.len() != *ngens) {
                return invalid("every relation needs one entry per generator");
            }
            let rows = relations.iter().map(|row| row.iter().map(|x| d.real.poly(&x.with_nvars(ctx.data.r)?)).collect()).collect::<Result<Vec<_>>>()?;
            let pm = PresentedModule { ngens: *ngens, relations: rows };
            let chain = pm.fitting_chain(ring.as_ref())?;
            let ideals: Vec<Value> = chain
                .iter()
                .enumerate()
                .map(|(i, f)| json!({"i": i, "generators": ideal_polys(ring, f), "colength": f.colength(ring.as_ref())}))
                .collect();
            (true, None, json!({"depth": depth, "fitting": ideals}))
        }
        Task::Asymptotics { factors, f, i, ns } => {
            let est = estimate_local_exponent(&StructureData { factors: factors.clone() }, f, *i, ns, c)?;
            (true, None, to_value(&est))
        }
        Task::Independence { mps, i, m0, start, len } => {
            let alt = Coordinates::with_mps(mps.clone())?;
            let rep = eng.check_independence(c, &ctx.coords, &alt, *i, *m0, *start, *len)?;
            outcome(rep.pass, "ladders differ between parameter systems", to_value(&rep))
        }
        Task::Affine { map, i, m0, start, len } => {
            let reps = eng.check_affine(c, map, *i, *m0, *start, *len)?;
            outcome(reps.iter().all(|r| r.pass), "affine invariance", to_value(&reps))
        }
        Task::ScalarExtension { ext, i } => {
            let rep = scalar_extension_check(&eng, c, ext, *i, &ctx.depths)?;
            outcome(rep.pass, "scalar extension equalities", to_value(&rep))
        }
        Task::Specialization { h, i } => {
            let rep = weak_specialization(&eng, c, h, *i, &ctx.depths)?;
            outcome(rep.pass, "specialization containment", to_value(&rep))
        }
        Task::StrongSpecialization { a, m0, i } => {
            let depths: Vec<Vec<u32>> = ctx.depths.iter().map(|m| m[..m.len() - 1].to_vec()).collect();
            let rep = strong_specialization(&eng, c, a, *m0, *i, &depths)?;
            let failure = if !rep.embedding_injective { "fine embedding is not injective" } else { "strong specialization machinery" };
            outcome(rep.pass, failure, to_value(&rep))
        }
        Task::Cyclotomic { h, i, ms } => {
            let (data, es) = extend_cyclotomic(&ctx.es, &ctx.data)?;
            let eng = Engine::new(&data, &es).with_inverse_frobenius(ctx.inverse_frobenius);
            let rep = cyclotomic_strong(&eng, c, h, *i, ms)?;
            outcome(rep.pass, "cyclotomic containments", to_value(&rep))
        }
        Task::RandomAffine { count, factors, i, m0, start, len } => {
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed.expect("checked when the context was built"));
            let r = ctx.data.r;
            let mut rows = Vec::new();
            let mut pass = true;
            for _ in 0..*count {
                let es = battery::random_elementaries(&mut rng, r, *factors);
                let map = AffineMap::compose_all(&es, r, c)?;
                let reps = eng.check_affine(c, &map, *i, *m0, *start, *len)?;
                let ok = reps.iter().all(|x| x.pass);
                pass &= ok;
                rows.push(json!({"factors": es, "pass": ok}));
            }
            outcome(pass, "affine invariance", Value::Array(rows))
        }
        Task::H1 { p } => {
            let rep = h1::brute_force_group_h1(&h1::GroupSpec::sl2(*p), h1::ORDER_BUDGET)?;
            outcome(rep.h1_dim == 0, "H¹(SL_2, k²) is nonzero", to_value(&rep))
        }
    })
}

/// The report for one scenario. Configuration problems are returned as
/// errors; a failed verification inside a task marks that task as failed.
pub fn run_scenario(sc: &Scenario, threads: usize) -> Result<Report> {
    let ctx = Context::new(sc)?;
    let canonical = serde_json::to_vec(sc).expect("scenarios serialize");
    let hash: String = Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect();
    let n = sc.tasks.len();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots: Vec<std::sync::Mutex<Option<Result<(bool, Option<String>, Value)>>>> = (0..n).map(|_| std::sync::Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..threads.clamp(1, n.max(1)) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if k >= n {
                    break;
                }
                let start = Instant::now();
                let out = run_task(&ctx, &sc.tasks[k]);
                eprintln!("[timing] task {k} ({}): {:.2?}", sc.tasks[k].name(), start.elapsed());
                *slots[k].lock().expect("unpoisoned") = Some(out);
            });
        }
    });
    let mut tasks = Vec::with_capacity(n);
    for (task, slot) in sc.tasks.iter().zip(slots) {
        let out = slot.into_inner().expect("unpoisoned").expect("every task ran");
        let (pass, failure, result) = match out {
            Ok(x) => x,
            Err(Error::Verification(msg)) => (false, Some(msg), Value::Null),
            Err(e) => return Err(e),
        };
        tasks.push(TaskReport { task: task.name().to_string(), pass, failure, result });
    }
    let pass = tasks.iter().all(|t| t.pass);
    Ok(Report {
        schema: SCHEMA_VERSION,
        provenance: Provenance { config_sha256: hash, seed: sc.seed, version: env!("CARGO_PKG_VERSION").into() },
        stability_rule: format!("a ladder counts as stabilized once {STABILITY_WINDOW} consecutive rungs have equal colength; this is a heuristic"),
        tasks,
        pass,
    })
}

/// Input for the `fitting` shortcut.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FittingInput {
    pub coeff: CoeffSpec,
    pub r: usize,
    #[serde(default)]
    pub mps: Option<Mps>,
    pub depth: Vec<u32>,
    pub ngens: usize,
    pub relations: Vec<Vec<Poly>>,
}

/// Input for the `asymptotics` shortcut.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsymptoticsInput {
    pub coeff: CoeffSpec,
    pub factors: Vec<Poly>,
    pub f: Poly,
    pub i: usize,
    pub ns: Vec<u32>,
}

pub fn run_fitting(input: &FittingInput) -> Result<Value> {
    let c = input.coeff.build()?;
    let coords = match &input.mps {
        Some(m) => Coordinates::with_mps(m.clone())?,
        None => Coordinates::standard(&c, input.r),
    };
    let d = coords.depth(&c, &input.depth)?;
    let ring = d.ring();
    if input.relations.iter().any(|row| row.len() != input.ngens) {
        return invalid("every relation needs one entry per generator");
    }
    let rows = input.relations.iter().map(|row| row.iter().map(|x| d.real.poly(&x.with_nvars(input.r)?)).collect()).collect::<Result<Vec<_>>>()?;
    let pm = PresentedModule { ngens: input.ngens, relations: rows };
    let chain = pm.fitting_chain(ring.as_ref())?;
    let ideals: Vec<Value> = chain
        .iter()
        .enumerate()
        .map(|(i, f)| json!({"i": i, "generators": ideal_polys(ring, f), "colength": f.colength(ring.as_ref())}))
        .collect();
    Ok(json!({"schema": SCHEMA_VERSION, "depth": input.depth, "fitting": ideals}))
}

pub fn run_asymptotics(input: &AsymptoticsInput) -> Result<Value> {
    let c = input.coeff.build()?;
    let est = estimate_local_exponent(&StructureData { factors: input.factors.clone() }, &input.f, input.i, &input.ns, &c)?;
    let mut v = to_value(&est);
    v["schema"] = json!(SCHEMA_VERSION);
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_scenario_produces_a_ladder() {
        let sc = parse_scenario(MINIMAL_SCENARIO).unwrap();
        let rep = run_scenario(&sc, 1).unwrap();
        assert!(rep.pass);
        let ladder = &rep.tasks[0].result;
        assert_eq!(ladder["depth"].as_array().unwrap().len(), 3);
        assert!(ladder.get("generators").is_some() && ladder.get("stabilized").is_some());
        assert_eq!(render(&rep), render(&run_scenario(&sc, 4).unwrap()));
    }

    #[test]
    fn malformed_scenarios_are_input_errors() {
        assert!(parse_scenario("{").unwrap_err().is_input_error());
        let extra = MINIMAL_SCENARIO.replacen("\"r\": 1,", "\"r\": 1, \"bogus\": 0,", 1);
        assert!(parse_scenario(&extra).is_err());
        let mut sc = parse_scenario(MINIMAL_SCENARIO).unwrap();
        sc.depths = vec![vec![1, 2], vec![1, 1]];
        assert!(matches!(run_scenario(&sc, 1), Err(Error::InvalidInput(_))));
        let mut sc = parse_scenario(MINIMAL_SCENARIO).unwrap();
        sc.seed = None;
        sc.tasks = vec![Task::RandomAffine { count: 1, factors: 1, i: 1, m0: 1, start: 1, len: 2 }];
        assert!(matches!(run_scenario(&sc, 1), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn shortcut_inputs() {
        let f: FittingInput = serde_json::from_str(
            r#"{"coeff": {"p": 5, "M": 3}, "r": 1, "depth": [1, 2], "ngens": 1, "relations": [[[{"coeff": 1, "exps": [1]}]]]}"#,
        )
        .unwrap();
        let v = run_fitting(&f).unwrap();
        assert_eq!(v["fitting"][0]["colength"], 1);
        let a: AsymptoticsInput = serde_json::from_str(
            r#"{"coeff": {"p": 5, "M": 21}, "factors": [[{"coeff": 1, "exps": [2]}]], "f": [{"coeff": 1, "exps": [1]}], "i": 0, "ns": [3, 4, 5, 6, 7]}"#,
        )
        .unwrap();
        assert_eq!(run_asymptotics(&a).unwrap()["alpha"], 2);
    }

    #[test]
    fn poly_text_is_readable() {
        assert_eq!(poly_text(&Poly::linear(5, &[1])), "5 + x1");
        assert_eq!(poly_text(&Poly::zero(1)), "0");
    }
}
