//! Randomized invariants of the arithmetic layers: coefficient rings,
//! truncated Iwasawa algebras, module linear algebra, Fitting ideals, group
//! rings and Euler-system module maps.

use proptest::prelude::*;
use std::sync::Arc;

use iwasawa_kit::coeff::{gamma_exponent, CoeffRing, ExtKind, ExtSpec};
use iwasawa_kit::euler::{cor, norm_preimage, res};
use iwasawa_kit::fitting::{specialization_length, PresentedModule};
use iwasawa_kit::galois::{e_map, DeformationData, GroupRing, Level};
use iwasawa_kit::kolyvagin::free_module;
use iwasawa_kit::lambda::{AffineMap, QuotientRing, Realization};
use iwasawa_kit::linalg::{hom_module, image_ideal, Span};
use iwasawa_kit::poly::Poly;
use iwasawa_kit::ring::{Elem, Ideal, Ring};

fn coeff_ring(kind: usize, m: u32) -> CoeffRing {
    let ext = match kind {
        0 => None,
        1 => Some(ExtSpec { kind: ExtKind::Unramified, poly: vec![-2, 0, 1] }),
        _ => Some(ExtSpec { kind: ExtKind::Eisenstein, poly: vec![-5, 0, 1] }),
    };
    CoeffRing::new(5, m, ext.as_ref()).unwrap()
}

/// Exponent vectors for the standard system with `Π m_k ≤ bound`.
fn shape(r: usize, raw: &[u32], bound: u32) -> Vec<u32> {
    let mut m = Vec::new();
    let mut used = 1;
    for (j, &x) in raw.iter().take(r + 1).enumerate() {
        // The ϖ-exponent cannot exceed the precision of the test rings.
        let cap = if j == 0 { (bound / used).min(3) } else { bound / used };
        let k = 1 + x % cap.max(1);
        m.push(k);
        used *= k;
    }
    m
}

fn elem_from_seed<R: Ring + ?Sized>(r: &R, seed: &[u64]) -> Elem {
    let q = r.modulus();
    let mut v: Vec<u64> = (0..r.dim()).map(|k| seed[k % seed.len()].wrapping_mul(k as u64 + 1) % q).collect();
    r.reduce(&mut v);
    v
}

fn poly_from_seed(r: usize, seed: &[i64]) -> Poly {
    let terms = seed.chunks(r + 1).map(|c| (c[1..].iter().map(|&e| (e.rem_euclid(3)) as u32).collect::<Vec<_>>(), vec![c[0]]));
    Poly::from_terms(r, terms)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn coefficient_ring_axioms(kind in 0usize..3, m in 2u32..6, a in prop::collection::vec(-500i64..500, 6)) {
        let c = coeff_ring(kind, m);
        let d = c.degree();
        let x = c.from_coords(&a[0..d]).unwrap();
        let y = c.from_coords(&a[2..2 + d]).unwrap();
        let z = c.from_coords(&a[4..4 + d]).unwrap();
        prop_assert_eq!(c.mul(&c.mul(&x, &y), &z), c.mul(&x, &c.mul(&y, &z)));
        prop_assert_eq!(c.mul(&x, &c.add(&y, &z)), c.add(&c.mul(&x, &y), &c.mul(&x, &z)));
        prop_assert_eq!(c.mul(&x, &y), c.mul(&y, &x));
        prop_assert_eq!(c.add(&x, &c.neg(&x)), c.zero());
        prop_assert_eq!(c.mul(&x, &c.one()), x);
    }

    #[test]
    fn valuation_is_additive_below_the_cap(kind in 0usize..3, m in 2u32..6, a in prop::collection::vec(-500i64..500, 4)) {
        let c = coeff_ring(kind, m);
        let d = c.degree();
        let x = c.from_coords(&a[0..d]).unwrap();
        let y = c.from_coords(&a[2..2 + d]).unwrap();
        if let (Some(vx), Some(vy)) = (c.valuation(&x), c.valuation(&y)) {
            if vx + vy < c.cap() {
                prop_assert_eq!(c.valuation(&c.mul(&x, &y)), Some(vx + vy));
            }
        }
    }

    #[test]
    fn logarithm_is_a_homomorphism(kind in 0usize..3, m in 2u32..6, a in prop::collection::vec(-500i64..500, 4)) {
        let c = coeff_ring(kind, m);
        let d = c.degree();
        let p = c.p() as i64;
        let principal = |s: &[i64]| {
            let mut v: Vec<i64> = s.iter().map(|&t| p * t).collect();
            v[0] += 1;
            c.from_coords(&v).unwrap()
        };
        let (u, v) = (principal(&a[0..d]), principal(&a[2..2 + d]));
        let (lu, _) = c.padic_log(&u).unwrap();
        let (lv, _) = c.padic_log(&v).unwrap();
        let (luv, _) = c.padic_log(&c.mul(&u, &v)).unwrap();
        prop_assert_eq!(luv, c.add(&lu, &lv));
    }

    #[test]
    fn gamma_exponent_inverts_powers(m in 2u32..7, s_raw in 0u64..1_000_000) {
        let (p, q) = (5u64, 5u64.pow(m));
        let s = s_raw % 5u64.pow(m - 1);
        let u = iwasawa_kit::arith::powmod(1 + p, s, q);
        prop_assert_eq!(gamma_exponent(p, m, u).unwrap(), s);
    }

    #[test]
    fn standard_rings_have_the_expected_size(r in 0usize..3, raw in prop::collection::vec(0u32..6, 3), seed in prop::collection::vec(0u64..1000, 3)) {
        let c = CoeffRing::zp(5, 4).unwrap();
        let m = shape(r, &raw, 6);
        let ring = QuotientRing::standard(&c, r, &m).unwrap();
        prop_assert_eq!(ring.log_cardinality(), m.iter().product::<u32>());
        prop_assert_eq!(ring.log_cardinality(), ring.expected_log_cardinality());
        let (x, y, z) = (elem_from_seed(&ring, &seed), elem_from_seed(&ring, &seed[1..]), elem_from_seed(&ring, &seed[2..]));
        prop_assert_eq!(ring.mul(&ring.mul(&x, &y), &z), ring.mul(&x, &ring.mul(&y, &z)));
        prop_assert_eq!(ring.mul(&x, &y), ring.mul(&y, &x));
        prop_assert_eq!(ring.mul(&x, &ring.add(&y, &z)), ring.add(&ring.mul(&x, &y), &ring.mul(&x, &z)));
    }

    #[test]
    fn multiplication_by_components_commutes_with_reduction(
        r in 0usize..3, raw in prop::collection::vec(0u32..6, 3), i_raw in 0usize..3, j_raw in 0usize..3, seed in prop::collection::vec(0u64..1000, 2),
    ) {
        let c = CoeffRing::zp(5, 6).unwrap();
        let mut m = shape(r, &raw, 4);
        let (i, j) = (i_raw % (r + 1), j_raw % (r + 1));
        m[j] += 1;
        let bump = |m: &[u32], k: usize, d: i32| {
            let mut m2 = m.to_vec();
            m2[k] = (m2[k] as i32 + d) as u32;
            Arc::new(QuotientRing::standard(&c, r, &m2).unwrap())
        };
        // A = R(m) → B = R(m + e_i) by h_i, and the same one step coarser in j.
        let a = Arc::new(QuotientRing::standard(&c, r, &m).unwrap());
        let b = bump(&m, i, 1);
        let a2 = bump(&m, j, -1);
        let mut mb = m.clone();
        mb[i] += 1;
        let b2 = bump(&mb, j, -1);
        let mu = a.multiply_by_component(&b, i).unwrap();
        let mu2 = a2.multiply_by_component(&b2, i).unwrap();
        let pa = a.projection_to(&a2).unwrap();
        let pb = b.projection_to(&b2).unwrap();
        let x = elem_from_seed(a.as_ref(), &seed);
        prop_assert_eq!(pb.apply(b2.as_ref(), &mu.apply(b.as_ref(), &x)), mu2.apply(b2.as_ref(), &pa.apply(a2.as_ref(), &x)));
    }

    #[test]
    fn affine_substitution_is_a_ring_map_and_decomposes(
        a in prop::collection::vec(0i64..5, 4), v in prop::collection::vec(0i64..5, 2), f in prop::collection::vec(-20i64..20, 9), g in prop::collection::vec(-20i64..20, 9),
    ) {
        let c = CoeffRing::zp(5, 4).unwrap();
        // Entries chosen so the residual determinant is a unit.
        let det = (1 + 5 * a[0]) * (1 + 5 * a[3]) - a[1] * 5 * a[2];
        prop_assume!(det.rem_euclid(5) != 0);
        let map = AffineMap {
            a: vec![vec![vec![1 + 5 * a[0]], vec![a[1]]], vec![vec![5 * a[2]], vec![1 + 5 * a[3]]]],
            v: vec![vec![5 * v[0]], vec![5 * v[1]]],
        };
        let (f, g) = (poly_from_seed(2, &f), poly_from_seed(2, &g));
        prop_assert_eq!(map.apply(&f.add(&g, &c), &c).unwrap(), map.apply(&f, &c).unwrap().add(&map.apply(&g, &c).unwrap(), &c));
        prop_assert_eq!(map.apply(&f.mul(&g, &c), &c).unwrap(), map.apply(&f, &c).unwrap().mul(&map.apply(&g, &c).unwrap(), &c));
        let factors = map.decompose(&c).unwrap();
        prop_assert_eq!(AffineMap::compose_all(&factors, 2, &c).unwrap(), map.normalized(&c).unwrap());
    }

    #[test]
    fn howell_form_is_idempotent(q in prop::sample::select(vec![8u64, 25, 27, 125]), raw in prop::collection::vec(prop::collection::vec(0u64..125, 3), 1..5)) {
        let p = if q % 2 == 0 { 2 } else if q % 3 == 0 { 3 } else { 5 };
        let rows: Vec<Vec<u64>> = raw.iter().map(|r| r.iter().map(|x| x % q).collect()).collect();
        let s = Span::new(p, q, 3, rows.clone());
        prop_assert_eq!(&Span::new(p, q, 3, s.rows().to_vec()), &s);
        for r in &rows {
            prop_assert!(s.contains(r));
        }
    }

    #[test]
    fn image_ideals_on_free_modules(rank in 1usize..3, m_raw in 0u32..3, seed in prop::collection::vec(0u64..1000, 4)) {
        let c = CoeffRing::zp(5, 3).unwrap();
        let ring = QuotientRing::standard(&c, 1, &[1, 1 + m_raw]).unwrap();
        let rmod = ring.as_module();
        let fm = free_module(&rmod, rank);
        let hom = hom_module(&fm, &rmod).unwrap();
        let coords: Vec<Elem> = (0..rank).map(|k| elem_from_seed(&ring, &seed[k..])).collect();
        let v: Vec<u64> = coords.concat();
        let img = image_ideal(&hom, &rmod, &v);
        prop_assert_eq!(Ideal::from_span(&ring, img.clone()), Ideal::generated(&ring, &coords));
        let t = elem_from_seed(&ring, &seed[3..]);
        let tv: Vec<u64> = coords.iter().flat_map(|x| ring.mul(&t, x)).collect();
        prop_assert!(image_ideal(&hom, &rmod, &tv).is_subset(&img));
    }

    #[test]
    fn fitting_ideals_ignore_the_presentation(seed in prop::collection::vec(0u64..1000, 8), op in prop::collection::vec(0u64..1000, 2)) {
        let c = CoeffRing::zp(5, 3).unwrap();
        let ring = QuotientRing::standard(&c, 1, &[2, 2]).unwrap();
        let e = |k: usize| elem_from_seed(&ring, &seed[k..]);
        let rows = vec![vec![e(0), e(1)], vec![e(2), e(3)], vec![e(4), e(5)]];
        let pm = PresentedModule { ngens: 2, relations: rows.clone() };
        let t = elem_from_seed(&ring, &op);
        // Row operation, column operation and an extra consequence relation.
        let mut r1 = rows.clone();
        r1[0] = vec![ring.add(&r1[0][0], &ring.mul(&t, &r1[1][0])), ring.add(&r1[0][1], &ring.mul(&t, &r1[1][1]))];
        let c1: Vec<Vec<Elem>> = rows.iter().map(|r| vec![r[0].clone(), ring.add(&r[1], &ring.mul(&t, &r[0]))]).collect();
        let mut r2 = rows.clone();
        r2.push(vec![ring.add(&rows[0][0], &rows[2][0]), ring.add(&rows[0][1], &rows[2][1])]);
        for other in [r1, c1, r2] {
            let alt = PresentedModule { ngens: 2, relations: other };
            for i in 0..3 {
                prop_assert_eq!(pm.fitting_ideal(&ring, i).unwrap(), alt.fitting_ideal(&ring, i).unwrap());
            }
        }
    }

    #[test]
    fn specialization_lengths_have_the_dichotomy(e in 1u32..4, k in 0i64..5, u in 1i64..5) {
        let c = CoeffRing::zp(5, 25).unwrap();
        let x = Poly::var(1, 0);
        // g = u·x^e has first differences e; g = unit + 5k·x is bounded.
        let power = x.pow(e, &c).mul(&Poly::int(1, u), &c);
        let lens: Vec<u32> = (3..9).map(|n| specialization_length(&power, &x, n, &c).unwrap().length.unwrap()).collect();
        prop_assert!(lens.windows(2).all(|w| w[1] - w[0] == e), "{:?}", lens);
        let coprime = Poly::linear(u, &[5 * k]);
        let lens: Vec<Option<u32>> = (3..9).map(|n| specialization_length(&coprime, &x, n, &c).unwrap().length).collect();
        prop_assert!(lens.iter().all(|l| *l == lens[0] && l.is_some()), "{:?}", lens);
    }

    #[test]
    fn group_ring_norms_and_e_map(mask in 1u8..8, seed in prop::collection::vec(0u64..1000, 3)) {
        let c = CoeffRing::zp(5, 3).unwrap();
        let primes: Vec<u64> = [2u64, 3, 11].iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, &l)| l).collect();
        let n: u64 = primes.iter().product();
        let base = Arc::new(QuotientRing::standard(&c, 1, &[1, 2]).unwrap());
        let gr = GroupRing::new(base.clone(), Level::new(n, &[5]).unwrap());
        let order: u64 = primes.iter().map(|l| l - 1).product();
        prop_assert_eq!(gr.aug(&gr.norm()), base.from_int(order as i64));
        // e on the augmentation ideal of R[H_11] at depth ϖ: additive.
        let b1 = Arc::new(QuotientRing::standard(&c, 1, &[1, 2]).unwrap());
        let g11 = GroupRing::new(b1, Level::new(11, &[5]).unwrap());
        let z = |s: &[u64]| {
            let x = elem_from_seed(&g11, s);
            g11.sub(&x, &g11.apply_norm(&x).iter().take(0).copied().chain(g11.embed(&g11.aug(&x), 0)).collect::<Vec<_>>())
        };
        let (z1, z2) = (z(&seed), z(&seed[1..]));
        let sum = e_map(&g11, 0, &g11.add(&z1, &z2)).unwrap();
        let b = g11.base();
        prop_assert_eq!(sum, b.add(&e_map(&g11, 0, &z1).unwrap(), &e_map(&g11, 0, &z2).unwrap()));
    }

    #[test]
    fn restriction_and_corestriction(seed in prop::collection::vec(0u64..1000, 4)) {
        let c = CoeffRing::zp(5, 3).unwrap();
        let base = Arc::new(QuotientRing::standard(&c, 1, &[1, 2]).unwrap());
        let big = GroupRing::new(base.clone(), Level::new(33, &[5]).unwrap());
        let small = GroupRing::new(base.clone(), big.level().sublevel(3).unwrap());
        let x: Vec<Elem> = vec![elem_from_seed(&small, &seed), elem_from_seed(&small, &seed[1..])];
        let y: Vec<Elem> = vec![elem_from_seed(&big, &seed[2..]), elem_from_seed(&big, &seed[3..])];
        let cr = cor(&big, &small, &res(&small, &big, &x).unwrap()).unwrap();
        prop_assert_eq!(cr, x.iter().map(|v| small.scale(v, 10)).collect::<Vec<_>>());
        let rc = res(&small, &big, &cor(&big, &small, &y).unwrap()).unwrap();
        let i11 = big.level().position(11).unwrap();
        prop_assert_eq!(rc, y.iter().map(|v| big.apply_partial_norm(v, i11)).collect::<Vec<_>>());
        // H_n-fixed elements are exactly the multiples of the norm.
        let fixed: Vec<Elem> = y.iter().map(|v| big.apply_norm(v)).collect();
        let pre = norm_preimage(&big, &fixed).unwrap();
        prop_assert_eq!(pre.iter().map(|b| big.apply_norm(&big.embed(b, 0))).collect::<Vec<_>>(), fixed);
        let moved: Vec<Elem> = y.iter().map(|v| big.sub(v, &big.shift(v, big.level().sigma(0)))).collect();
        prop_assert_eq!(norm_preimage(&big, &moved).is_some(), moved.iter().all(|v| big.is_fixed(v)));
    }

    #[test]
    fn euler_polynomials_reduce_along_projections(seed in 0u64..1000) {
        let c = CoeffRing::zp(5, 3).unwrap();
        let t = DeformationData::synthetic(5, 1, 2, &[11, 31, 41], seed).unwrap();
        let fine = Arc::new(QuotientRing::standard(&c, 1, &[2, 3]).unwrap());
        let coarse = Arc::new(QuotientRing::standard(&c, 1, &[1, 2]).unwrap());
        let pi = fine.projection_to(&coarse).unwrap();
        let (rf, rc) = (Realization::standard(fine.clone()), Realization::standard(coarse.clone()));
        for l in [11u64, 31, 41] {
            let pf: Vec<Elem> = t.euler_poly(l, &rf).unwrap().iter().map(|a| pi.apply(coarse.as_ref(), a)).collect();
            prop_assert_eq!(pf, t.euler_poly(l, &rc).unwrap());
            if t.prime_in_p(l, &rf).unwrap().admissible {
                prop_assert!(t.prime_in_p(l, &rc).unwrap().admissible);
            }
        }
    }
}
