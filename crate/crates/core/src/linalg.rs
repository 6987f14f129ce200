//! Linear algebra over `Z/p^N`: Howell normal forms, membership, kernels,
//! solving, intersections, and homomorphism modules between finite modules.
//!
//! `Z/p^N` is a chain ring, so a Howell basis is obtained by ordinary
//! elimination with minimal-valuation pivots, closed under the annihilator
//! multiples `p^{N-v}·row` of every pivot row. Reduced against such a basis,
//! each vector has a unique remainder.

use crate::arith::*;
use crate::error::{invalid, Result};

pub type Matrix = Vec<Vec<u64>>;

/// A submodule of `(Z/p^N)^n` in reduced Howell form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Span {
    p: u64,
    q: u64,
    n_exp: u32,
    ncols: usize,
    rows: Matrix,
    /// Pivot column and pivot value `p^v` of each row.
    piv: Vec<(usize, u64)>,
}

fn exponent_of(p: u64, q: u64) -> u32 {
    vp(q, p)
}

impl Span {
    pub fn zero(p: u64, q: u64, ncols: usize) -> Self {
        Span { p, q, n_exp: exponent_of(p, q), ncols, rows: Vec::new(), piv: Vec::new() }
    }

    /// Howell form of the span of `input`.
    pub fn new<I: IntoIterator<Item = Vec<u64>>>(p: u64, q: u64, ncols: usize, input: I) -> Self {
        let n_exp = exponent_of(p, q);
        let mut work: Vec<Vec<u64>> = input
            .into_iter()
            .map(|r| {
                debug_assert_eq!(r.len(), ncols);
                r.into_iter().map(|x| x % q).collect::<Vec<u64>>()
            })
            .filter(|r| r.iter().any(|&x| x != 0))
            .collect();
        let mut rows = Vec::new();
        let mut piv = Vec::new();
        for c in 0..ncols {
            if work.is_empty() {
                break;
            }
            let mut best: Option<(usize, u32)> = None;
            for (i, r) in work.iter().enumerate() {
                if r[c] != 0 {
                    let v = vp(r[c], p);
                    if best.map_or(true, |(_, bv)| v < bv) {
                        best = Some((i, v));
                        if v == 0 {
                            break;
                        }
                    }
                }
            }
            let Some((bi, v)) = best else { continue };
            let mut pr = work.swap_remove(bi);
            let pv = p.pow(v);
            let u = inv_mod((pr[c] / pv) % q, q).expect("pivot cofactor is a unit");
            for x in pr[c..].iter_mut() {
                *x = mulmod(*x, u, q);
            }
            for r in work.iter_mut() {
                if r[c] != 0 {
                    let f = r[c] / pv;
                    for k in c..ncols {
                        if pr[k] != 0 {
                            r[k] = submod(r[k], mulmod(f, pr[k], q), q);
                        }
                    }
                }
            }
            if v > 0 {
                let s = p.pow(n_exp - v);
                let extra: Vec<u64> = pr.iter().map(|&x| mulmod(x, s, q)).collect();
                if extra.iter().any(|&x| x != 0) {
                    work.push(extra);
                }
            }
            work.retain(|r| r.iter().any(|&x| x != 0));
            rows.push(pr);
            piv.push((c, pv));
        }
        for j in 0..rows.len() {
            for i in j + 1..rows.len() {
                let (c, pv) = piv[i];
                let f = rows[j][c] / pv;
                if f != 0 {
                    let (head, tail) = rows.split_at_mut(i);
                    let src = &tail[0];
                    for k in c..ncols {
                        if src[k] != 0 {
                            head[j][k] = submod(head[j][k], mulmod(f, src[k], q), q);
                        }
                    }
                }
            }
        }
        Span { p, q, n_exp, ncols, rows, piv }
    }

    pub fn p(&self) -> u64 {
        self.p
    }
    pub fn modulus(&self) -> u64 {
        self.q
    }
    pub fn ncols(&self) -> usize {
        self.ncols
    }
    pub fn rows(&self) -> &[Vec<u64>] {
        &self.rows
    }
    pub fn pivots(&self) -> &[(usize, u64)] {
        &self.piv
    }
    pub fn is_zero(&self) -> bool {
        self.rows.is_empty()
    }

    /// `log_p` of the cardinality of the span.
    pub fn log_size(&self) -> u32 {
        self.piv.iter().map(|&(_, pv)| self.n_exp - vp(pv, self.p)).sum()
    }

    /// Canonical remainder of `v` modulo the span.
    pub fn reduce(&self, v: &mut [u64]) {
        let q = self.q;
        for (row, &(c, pv)) in self.rows.iter().zip(&self.piv) {
            let f = v[c] / pv;
            if f != 0 {
                for k in c..self.ncols {
                    if row[k] != 0 {
                        v[k] = submod(v[k], mulmod(f, row[k], q), q);
                    }
                }
            }
        }
    }

    pub fn reduced(&self, v: &[u64]) -> Vec<u64> {
        let mut w: Vec<u64> = v.iter().map(|&x| x % self.q).collect();
        self.reduce(&mut w);
        w
    }

    pub fn contains(&self, v: &[u64]) -> bool {
        self.reduced(v).iter().all(|&x| x == 0)
    }

    pub fn is_subset(&self, other: &Span) -> bool {
        self.rows.iter().all(|r| other.contains(r))
    }

    pub fn join(&self, other: &Span) -> Span {
        Span::new(self.p, self.q, self.ncols, self.rows.iter().chain(other.rows.iter()).cloned())
    }

    pub fn with_rows<I: IntoIterator<Item = Vec<u64>>>(&self, extra: I) -> Span {
        Span::new(self.p, self.q, self.ncols, self.rows.iter().cloned().chain(extra))
    }

    pub fn intersect(&self, other: &Span) -> Span {
        let stacked: Matrix = self.rows.iter().chain(other.rows.iter()).cloned().collect();
        let ker = left_kernel(self.p, self.q, &stacked, self.ncols, &[]);
        let a = self.rows.len();
        let gens = ker.rows.iter().map(|k| combine(&k[..a], &self.rows, self.ncols, self.q));
        Span::new(self.p, self.q, self.ncols, gens)
    }
}

/// `Σ coeffs[i] · rows[i]`.
pub fn combine(coeffs: &[u64], rows: &[Vec<u64>], ncols: usize, q: u64) -> Vec<u64> {
    let mut out = vec![0u64; ncols];
    for (&c, r) in coeffs.iter().zip(rows) {
        if c == 0 {
            continue;
        }
        for (o, &x) in out.iter_mut().zip(r) {
            if x != 0 {
                *o = addmod(*o, mulmod(c, x, q), q);
            }
        }
    }
    out
}

/// Row vector times matrix.
pub fn vecmat(v: &[u64], m: &[Vec<u64>], ncols: usize, q: u64) -> Vec<u64> {
    combine(v, m, ncols, q)
}

fn augmented(mat: &[Vec<u64>], ncols: usize, rel: &[Vec<u64>]) -> (Matrix, usize) {
    let k = mat.len();
    let width = ncols + k;
    let mut rows = Vec::with_capacity(k + rel.len());
    for (i, r) in mat.iter().enumerate() {
        let mut v = vec![0u64; width];
        v[..ncols].copy_from_slice(r);
        v[ncols + i] = 1;
        rows.push(v);
    }
    for r in rel {
        let mut v = vec![0u64; width];
        v[..ncols].copy_from_slice(r);
        rows.push(v);
    }
    (rows, width)
}

/// `{u : u·mat ∈ span(rel)}` as a span in `(Z/p^N)^{mat.len()}`.
pub fn left_kernel(p: u64, q: u64, mat: &[Vec<u64>], ncols: usize, rel: &[Vec<u64>]) -> Span {
    let k = mat.len();
    let (rows, width) = augmented(mat, ncols, rel);
    let h = Span::new(p, q, width, rows);
    let tails = h
        .rows
        .iter()
        .zip(&h.piv)
        .filter(|(_, &(c, _))| c >= ncols)
        .map(|(r, _)| r[ncols..].to_vec());
    Span::new(p, q, k, tails)
}

/// Coordinates `λ` with `Σ λ_i gens_i ≡ target (mod span(rel))`, reduced
/// modulo the kernel so the answer is canonical. `None` if unsolvable.
pub fn solve(p: u64, q: u64, gens: &[Vec<u64>], ncols: usize, rel: &[Vec<u64>], target: &[u64]) -> Option<Vec<u64>> {
    Solver::new(p, q, gens, ncols, rel).solve(target)
}

/// A factored linear system for repeated [`solve`] calls with one matrix.
pub struct Solver {
    q: u64,
    ncols: usize,
    h: Span,
    ker: Span,
}

impl Solver {
    pub fn new(p: u64, q: u64, gens: &[Vec<u64>], ncols: usize, rel: &[Vec<u64>]) -> Solver {
        let k = gens.len();
        let (rows, width) = augmented(gens, ncols, rel);
        let h = Span::new(p, q, width, rows);
        let ker_rows = h.rows.iter().zip(&h.piv).filter(|(_, &(c, _))| c >= ncols).map(|(r, _)| r[ncols..].to_vec());
        let ker = Span::new(p, q, k, ker_rows);
        Solver { q, ncols, h, ker }
    }

    pub fn solve(&self, target: &[u64]) -> Option<Vec<u64>> {
        let (q, ncols, width) = (self.q, self.ncols, self.h.ncols);
        let mut v = vec![0u64; width];
        for (o, &t) in v.iter_mut().zip(target) {
            *o = t % q;
        }
        for (row, &(c, pv)) in self.h.rows.iter().zip(&self.h.piv) {
            if c >= ncols {
                break;
            }
            let f = v[c] / pv;
            if f != 0 {
                for j in c..width {
                    if row[j] != 0 {
                        v[j] = submod(v[j], mulmod(f, row[j], q), q);
                    }
                }
            }
        }
        if v[..ncols].iter().any(|&x| x != 0) {
            return None;
        }
        let lambda: Vec<u64> = v[ncols..].iter().map(|&x| negmod(x, q)).collect();
        Some(self.ker.reduced(&lambda))
    }
}

/// A finitely generated module `(Z/p^N)^dim / rel` with the action of a list
/// of ring generators; `actions[g][k]` is the image of the k-th basis vector.
#[derive(Clone, Debug)]
pub struct FinModule {
    pub p: u64,
    pub q: u64,
    pub dim: usize,
    pub rel: Span,
    pub actions: Vec<Matrix>,
}

impl FinModule {
    pub fn reduce(&self, v: &[u64]) -> Vec<u64> {
        self.rel.reduced(v)
    }

    /// `log_p |M|`.
    pub fn log_size(&self) -> u32 {
        self.dim as u32 * exponent_of(self.p, self.q) - self.rel.log_size()
    }

    /// Annihilator-dual of the relations: vectors `y` with `rel · y = 0`.
    fn dual_checks(&self) -> Matrix {
        let b = self.dim;
        let mut transposed = vec![vec![0u64; self.rel.rows.len()]; b];
        for (j, r) in self.rel.rows.iter().enumerate() {
            for i in 0..b {
                transposed[i][j] = r[i];
            }
        }
        left_kernel(self.p, self.q, &transposed, self.rel.rows.len(), &[]).rows
    }

    /// Membership in the zero submodule, tested through the dual checks.
    pub fn is_zero_via_duals(&self, v: &[u64]) -> bool {
        self.dual_checks().iter().all(|y| dot(v, y, self.q) == 0)
    }
}

fn dot(a: &[u64], b: &[u64], q: u64) -> u64 {
    a.iter().zip(b).fold(0, |acc, (&x, &y)| addmod(acc, mulmod(x, y, q), q))
}

/// Homomorphisms `M → R` of modules over the same generator list, as
/// `dim(M) × dim(R)` matrices acting on row vectors.
#[derive(Clone, Debug)]
pub struct HomModule {
    pub src_dim: usize,
    pub tgt_dim: usize,
    /// All matrices defining module maps.
    pub solutions: Span,
    /// Matrices defining the zero map.
    pub zero_maps: Span,
}

impl HomModule {
    pub fn log_size(&self) -> u32 {
        self.solutions.log_size() - self.zero_maps.log_size()
    }

    pub fn matrix(&self, flat: &[u64]) -> Matrix {
        flat.chunks(self.tgt_dim).map(|c| c.to_vec()).collect()
    }

    pub fn basis(&self) -> Vec<Matrix> {
        self.solutions.rows.iter().map(|r| self.matrix(r)).collect()
    }
}

fn hom_constraints(m: &FinModule, r: &FinModule) -> Result<(Matrix, Matrix)> {
    if m.actions.len() != r.actions.len() || m.q != r.q {
        return invalid("modules are over different generator lists or moduli");
    }
    let (a, b, q) = (m.dim, r.dim, m.q);
    let duals = r.dual_checks();
    let mut cols: Vec<Vec<u64>> = Vec::new();
    for rel in &m.rel.rows {
        for y in &duals {
            let mut col = vec![0u64; a * b];
            for i in 0..a {
                if rel[i] == 0 {
                    continue;
                }
                for j in 0..b {
                    col[i * b + j] = mulmod(rel[i], y[j], q);
                }
            }
            cols.push(col);
        }
    }
    for (x, yg) in m.actions.iter().zip(&r.actions) {
        for y in &duals {
            let ygy: Vec<u64> = (0..b).map(|j| dot(&yg[j], y, q)).collect();
            for i in 0..a {
                let mut col = vec![0u64; a * b];
                for k in 0..a {
                    if x[i][k] == 0 {
                        continue;
                    }
                    for j in 0..b {
                        col[k * b + j] = addmod(col[k * b + j], mulmod(x[i][k], y[j], q), q);
                    }
                }
                for j in 0..b {
                    col[i * b + j] = submod(col[i * b + j], ygy[j], q);
                }
                cols.push(col);
            }
        }
    }
    Ok((transpose(&cols, a * b), duals))
}

fn transpose(cols: &[Vec<u64>], nrows: usize) -> Matrix {
    let mut out = vec![vec![0u64; cols.len()]; nrows];
    for (j, c) in cols.iter().enumerate() {
        for i in 0..nrows {
            out[i][j] = c[i];
        }
    }
    out
}

/// `Hom(M, R)` by linear algebra: a matrix qualifies when it sends the
/// relations of `M` into those of `R` and commutes with every generator.
pub fn hom_module(m: &FinModule, r: &FinModule) -> Result<HomModule> {
    let (a, b) = (m.dim, r.dim);
    let (k, _) = hom_constraints(m, r)?;
    let ncons = k.first().map_or(0, |row| row.len());
    let solutions = left_kernel(m.p, m.q, &k, ncons, &[]);
    let zero_rows = (0..a).flat_map(|i| {
        r.rel.rows.iter().map(move |rr| {
            let mut v = vec![0u64; a * b];
            v[i * b..(i + 1) * b].copy_from_slice(rr);
            v
        })
    });
    let zero_maps = Span::new(m.p, m.q, a * b, zero_rows.collect::<Vec<_>>());
    Ok(HomModule { src_dim: a, tgt_dim: b, solutions, zero_maps })
}

/// Extends `f: S → R`, given on generators `sub_gens` of `S ⊆ M` by
/// `values`, to a module map `M → R`. `None` if no extension exists.
pub fn extend_hom(m: &FinModule, r: &FinModule, sub_gens: &[Vec<u64>], values: &[Vec<u64>]) -> Result<Option<Matrix>> {
    Ok(extend_homs(m, r, sub_gens, std::slice::from_ref(&values.to_vec()))?.pop().flatten())
}

/// [`extend_hom`] for several value lists on the same generators, sharing
/// one factorization.
pub fn extend_homs(m: &FinModule, r: &FinModule, sub_gens: &[Vec<u64>], values: &[Vec<Vec<u64>>]) -> Result<Vec<Option<Matrix>>> {
    let (a, b, q) = (m.dim, r.dim, m.q);
    let (mut k, duals) = hom_constraints(m, r)?;
    if k.is_empty() {
        return Ok(vec![None; values.len()]);
    }
    let base = k[0].len();
    for s in sub_gens {
        for y in &duals {
            for i in 0..a {
                for j in 0..b {
                    k[i * b + j].push(mulmod(s[i], y[j], q));
                }
            }
        }
    }
    let ncons = base + sub_gens.len() * duals.len();
    let solver = Solver::new(m.p, q, &k, ncons, &[]);
    Ok(values
        .iter()
        .map(|vals| {
            let mut target = vec![0u64; base];
            for f in vals {
                target.extend(duals.iter().map(|y| dot(f, y, q)));
            }
            solver.solve(&target).map(|flat| flat.chunks(b).map(|c| c.to_vec()).collect())
        })
        .collect())
}

/// `{f(v) : f ∈ Hom(M, R)}` as a span in `R` (including the relations of `R`).
pub fn image_ideal(hom: &HomModule, r: &FinModule, v: &[u64]) -> Span {
    let imgs = hom.basis().into_iter().map(|f| vecmat(v, &f, r.dim, r.q));
    r.rel.with_rows(imgs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn enumerate_span(gens: &[Vec<u64>], ncols: usize, q: u64) -> std::collections::BTreeSet<Vec<u64>> {
        let mut set = std::collections::BTreeSet::new();
        set.insert(vec![0u64; ncols]);
        loop {
            let mut grew = false;
            let cur: Vec<_> = set.iter().cloned().collect();
            for v in &cur {
                for g in gens {
                    let w: Vec<u64> = v.iter().zip(g).map(|(&a, &b)| (a + b) % q).collect();
                    grew |= set.insert(w);
                }
            }
            if !grew {
                return set;
            }
        }
    }

    #[test]
    fn howell_adds_annihilator_row() {
        let s = Span::new(2, 4, 2, vec![vec![2, 1]]);
        assert!(s.contains(&[0, 2]));
        assert_eq!(s.rows().len(), 2);
        assert_eq!(s.log_size(), 2);
    }

    #[test]
    fn double_annihilator_recovers_relations() {
        let rel = Span::new(5, 25, 2, vec![vec![5, 0], vec![0, 1]]);
        let m = FinModule { p: 5, q: 25, dim: 2, rel, actions: vec![] };
        assert!(m.is_zero_via_duals(&[10, 3]));
        assert!(!m.is_zero_via_duals(&[1, 0]));
    }

    #[test]
    fn hom_from_z5_to_z25() {
        let m = FinModule { p: 5, q: 25, dim: 1, rel: Span::new(5, 25, 1, vec![vec![5]]), actions: vec![] };
        let r = FinModule { p: 5, q: 25, dim: 1, rel: Span::zero(5, 25, 1), actions: vec![] };
        let h = hom_module(&m, &r).unwrap();
        assert_eq!(h.log_size(), 1);
    }

    proptest! {
        #[test]
        fn howell_membership_matches_enumeration(
            q in prop::sample::select(vec![4u64, 8, 9, 25, 27]),
            raw in prop::collection::vec(prop::collection::vec(0u64..27, 3), 1..4),
            probe in prop::collection::vec(0u64..27, 3),
        ) {
            let p = if q % 2 == 0 { 2 } else if q % 3 == 0 { 3 } else { 5 };
            let gens: Vec<Vec<u64>> = raw.iter().map(|r| r.iter().map(|&x| x % q).collect()).collect();
            let probe: Vec<u64> = probe.iter().map(|&x| x % q).collect();
            let s = Span::new(p, q, 3, gens.clone());
            let all = enumerate_span(&gens, 3, q);
            prop_assert_eq!(s.contains(&probe), all.contains(&probe));
            prop_assert_eq!(p.pow(s.log_size()) as usize, all.len());
            let again = Span::new(p, q, 3, s.rows().to_vec());
            prop_assert_eq!(&again, &s);
        }

        #[test]
        fn solve_and_kernel_are_consistent(
            raw in prop::collection::vec(prop::collection::vec(0u64..25, 3), 1..4),
            coeffs in prop::collection::vec(0u64..25, 4),
        ) {
            let (p, q) = (5u64, 25u64);
            let target = combine(&coeffs[..raw.len()], &raw, 3, q);
            let lam = solve(p, q, &raw, 3, &[], &target).expect("target is in the span");
            prop_assert_eq!(combine(&lam, &raw, 3, q), target);
            let ker = left_kernel(p, q, &raw, 3, &[]);
            for k in ker.rows() {
                prop_assert!(combine(k, &raw, 3, q).iter().all(|&x| x == 0));
            }
            let s = Span::new(p, q, 3, raw.clone());
            prop_assert_eq!(ker.log_size() + s.log_size(), 2 * raw.len() as u32);
        }

        #[test]
        fn intersection_is_largest_common_submodule(
            a in prop::collection::vec(prop::collection::vec(0u64..9, 2), 1..3),
            b in prop::collection::vec(prop::collection::vec(0u64..9, 2), 1..3),
        ) {
            let (p, q) = (3u64, 9u64);
            let sa = Span::new(p, q, 2, a.clone());
            let sb = Span::new(p, q, 2, b.clone());
            let si = sa.intersect(&sb);
            let ea = enumerate_span(&a, 2, q);
            let eb = enumerate_span(&b, 2, q);
            let common = ea.intersection(&eb).count();
            prop_assert_eq!(p.pow(si.log_size()) as usize, common);
            prop_assert!(si.is_subset(&sa) && si.is_subset(&sb));
        }
    }
}
