//! Brute-force `H¹(G, k^n)` for a small matrix group `G` acting on a
//! residue-field vector space, by explicit 1-cocycle linear algebra.
//!
//! The group is closed by enumerating its full multiplication table from a
//! generating set. Each edge `g → g·s` of the Cayley graph either defines
//! `f(g·s) = f(g) + g·f(s)` as a linear form in the unknown generator values
//! or, when `g·s` was already reached, imposes that identity as a relation.

use serde::Serialize;
use std::collections::HashMap;

use crate::arith::{addmod, mulmod, submod};
use crate::error::{invalid, Error, Result};
use crate::linalg::Span;

pub type Mat = Vec<Vec<u64>>;

/// Default enumeration budget on the group order.
pub const ORDER_BUDGET: usize = 20_000;

/// A group given by generators in a faithful representation over `F_p`,
/// together with the action of each generator on `k^module_dim`.
#[derive(Clone, Debug, Serialize)]
pub struct GroupSpec {
    pub p: u64,
    pub faithful_dim: usize,
    pub generators: Vec<Mat>,
    pub module_dim: usize,
    pub action: Vec<Mat>,
}

impl GroupSpec {
    /// `SL_2(F_p)`, generated by `[[1,1],[0,1]]` and `[[0,-1],[1,0]]`, on `F_p²`.
    pub fn sl2(p: u64) -> Self {
        let gens = vec![vec![vec![1, 1], vec![0, 1]], vec![vec![0, p - 1], vec![1, 0]]];
        GroupSpec { p, faithful_dim: 2, generators: gens.clone(), module_dim: 2, action: gens }
    }

    pub fn trivial(p: u64, module_dim: usize) -> Self {
        GroupSpec { p, faithful_dim: 1, generators: vec![], module_dim, action: vec![] }
    }

    /// `{±1}` acting trivially on `k`.
    pub fn sign_acting_trivially(p: u64) -> Self {
        GroupSpec { p, faithful_dim: 1, generators: vec![vec![vec![p - 1]]], module_dim: 1, action: vec![vec![vec![1]]] }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct H1Report {
    pub order: usize,
    pub edges: usize,
    pub cocycle_dim: u32,
    pub coboundary_dim: u32,
    pub h1_dim: u32,
}

fn mat_mul(a: &Mat, b: &Mat, p: u64) -> Mat {
    let (n, k, m) = (a.len(), b.len(), b.first().map_or(0, |r| r.len()));
    (0..n).map(|i| (0..m).map(|j| (0..k).fold(0, |acc, t| addmod(acc, mulmod(a[i][t], b[t][j], p), p))).collect()).collect()
}

fn identity(n: usize) -> Mat {
    (0..n).map(|i| (0..n).map(|j| (i == j) as u64).collect()).collect()
}

fn check_square(m: &Mat, n: usize, p: u64, what: &str) -> Result<()> {
    if m.len() != n || m.iter().any(|r| r.len() != n || r.iter().any(|&x| x >= p)) {
        return invalid(format!("{what} must be a {n}×{n} matrix with entries below p"));
    }
    Ok(())
}

pub fn brute_force_group_h1(g: &GroupSpec, budget: usize) -> Result<H1Report> {
    let (p, n, k) = (g.p, g.module_dim, g.generators.len());
    if !crate::arith::is_prime(p) {
        return invalid("the residue field needs a prime p");
    }
    if g.action.len() != k {
        return invalid("one action matrix per generator is required");
    }
    for (a, b) in g.generators.iter().zip(&g.action) {
        check_square(a, g.faithful_dim, p, "a generator")?;
        check_square(b, n, p, "an action matrix")?;
    }
    let unknowns = n * k;
    // f(g) as an n × unknowns matrix of linear forms.
    let mut index: HashMap<Mat, usize> = HashMap::new();
    let mut elems: Vec<Mat> = vec![identity(g.faithful_dim)];
    let mut acts: Vec<Mat> = vec![identity(n)];
    let mut forms: Vec<Mat> = vec![vec![vec![0; unknowns]; n]];
    index.insert(elems[0].clone(), 0);
    let mut relations: Vec<Vec<u64>> = Vec::new();
    let mut edges = 0;
    let mut head = 0;
    while head < elems.len() {
        for s in 0..k {
            edges += 1;
            let h = mat_mul(&elems[head], &g.generators[s], p);
            let act = mat_mul(&acts[head], &g.action[s], p);
            // f(g) + g·f(s), where f(s) is the s-th block of unknowns.
            let mut form = forms[head].clone();
            for i in 0..n {
                for j in 0..n {
                    form[i][s * n + j] = addmod(form[i][s * n + j], acts[head][i][j], p);
                }
            }
            match index.get(&h) {
                Some(&t) => {
                    if acts[t] != act {
                        return Err(Error::Verification("the action is not a homomorphism on the generated group".into()));
                    }
                    for i in 0..n {
                        relations.push((0..unknowns).map(|u| submod(forms[t][i][u], form[i][u], p)).collect());
                    }
                }
                None => {
                    if elems.len() >= budget {
                        return Err(Error::Budget(format!("group order exceeds {budget}")));
                    }
                    index.insert(h.clone(), elems.len());
                    elems.push(h);
                    acts.push(act);
                    forms.push(form);
                }
            }
        }
        head += 1;
    }
    let rank = Span::new(p, p, unknowns, relations).log_size();
    let cocycle_dim = unknowns as u32 - rank;
    // Coboundaries g ↦ (g - 1)v are determined by ((s - 1)v)_s.
    let cob_rows: Vec<Vec<u64>> = (0..n)
        .map(|j| {
            let mut row = vec![0u64; unknowns];
            for s in 0..k {
                for i in 0..n {
                    let delta = submod(g.action[s][i][j], (i == j) as u64, p);
                    row[s * n + i] = delta;
                }
            }
            row
        })
        .collect();
    let coboundary_dim = Span::new(p, p, unknowns, cob_rows).log_size();
    Ok(H1Report { order: elems.len(), edges, cocycle_dim, coboundary_dim, h1_dim: cocycle_dim - coboundary_dim })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_and_coprime_groups_have_no_cohomology() {
        let r = brute_force_group_h1(&GroupSpec::trivial(5, 2), ORDER_BUDGET).unwrap();
        assert_eq!((r.order, r.h1_dim), (1, 0));
        let r = brute_force_group_h1(&GroupSpec::sign_acting_trivially(5), ORDER_BUDGET).unwrap();
        assert_eq!((r.order, r.h1_dim), (2, 0));
    }

    #[test]
    fn cyclic_p_group_on_trivial_module() {
        // Hom(Z/5, F_5) is one-dimensional.
        let g = GroupSpec { p: 5, faithful_dim: 2, generators: vec![vec![vec![1, 1], vec![0, 1]]], module_dim: 1, action: vec![vec![vec![1]]] };
        let r = brute_force_group_h1(&g, ORDER_BUDGET).unwrap();
        assert_eq!((r.order, r.cocycle_dim, r.coboundary_dim, r.h1_dim), (5, 1, 0, 1));
    }

    #[test]
    fn unipotent_group_on_its_natural_module() {
        // U = <[[1,1],[0,1]]> on F_5²: the norm of u vanishes mod 5, so
        // Z¹ = F_5², while B¹ = (u - 1)F_5² is a line.
        let u = vec![vec![1, 1], vec![0, 1]];
        let g = GroupSpec { p: 5, faithful_dim: 2, generators: vec![u.clone()], module_dim: 2, action: vec![u] };
        let r = brute_force_group_h1(&g, ORDER_BUDGET).unwrap();
        assert_eq!((r.cocycle_dim, r.coboundary_dim, r.h1_dim), (2, 1, 1));
    }

    #[test]
    fn sl2_f5_has_vanishing_h1() {
        let r = brute_force_group_h1(&GroupSpec::sl2(5), ORDER_BUDGET).unwrap();
        assert_eq!(r.order, 120);
        assert_eq!(r.coboundary_dim, 2);
        assert_eq!(r.h1_dim, 0);
    }

    #[test]
    fn inconsistent_action_and_budget_are_reported() {
        let mut g = GroupSpec::sign_acting_trivially(5);
        g.action = vec![vec![vec![2]]];
        assert!(matches!(brute_force_group_h1(&g, ORDER_BUDGET), Err(Error::Verification(_))));
        assert!(matches!(brute_force_group_h1(&GroupSpec::sl2(5), 50), Err(Error::Budget(_))));
    }
}
