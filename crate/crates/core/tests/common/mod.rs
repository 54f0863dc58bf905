//! Property checks shared by the property and acceptance targets.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use nodal_enum::ring::{rat, Coeff, GradedPoly, Monomial, RingBuilder, RingExt, RingModel, Terms};
use nodal_enum::sheaf::{difference, sym_rank2, tensor_line, whitney_sum, FormalSheaf};
use nodal_enum::spaces::{
    base_surface_model, grassmannian_quotients, projective_bundle, projective_space, segre,
    SpaceModel, SurfaceInvariants, Tower,
};
use num_bigint::BigInt;
use num_traits::Zero;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

pub const CASES: u32 = 1000;

pub type Check = fn(u32) -> Result<(), String>;

/// Named property checks, each run for the given number of cases.
pub const PROPERTIES: [(&str, Check); 8] = [
    ("ring laws and normalize idempotence", ring_laws),
    ("whitney sum and difference round trips", whitney_difference),
    ("line twist then untwist", twist_untwist),
    (
        "sym^k of rank 2 vs splitting-principle oracle",
        sym_vs_roots,
    ),
    (
        "projection formula for level pushforwards",
        projection_formula,
    ),
    ("segre pushforward identity", segre_pushforward),
    ("euler sequence anchors on projective spaces", euler_anchor),
    ("grassmannian anchors", grassmannian_anchors),
];

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    runner(cases)
        .run(&strategy, test)
        .map_err(|e| e.to_string())
}

fn fail<E: std::fmt::Display>(e: E) -> TestCaseError {
    TestCaseError::fail(e.to_string())
}

/// All monomials of weighted degree `1..=max` in `ring`.
pub fn monomials(ring: &RingModel, max: u32) -> Vec<Monomial> {
    fn rec(degs: &[u32], i: usize, left: u32, cur: &mut Vec<u16>, out: &mut Vec<Vec<u16>>) {
        if i == degs.len() {
            out.push(cur.clone());
            return;
        }
        let mut e = 0u16;
        while e as u32 * degs[i] <= left {
            cur.push(e);
            rec(degs, i + 1, left - e as u32 * degs[i], cur, out);
            cur.pop();
            e += 1;
        }
    }
    let degs: Vec<u32> = ring.vars().iter().map(|v| v.degree).collect();
    let mut out = Vec::new();
    rec(&degs, 0, max, &mut Vec::new(), &mut out);
    out.into_iter()
        .map(Monomial::from_exponents)
        .filter(|m| !m.is_one())
        .collect()
}

/// Random sparse polynomial: `(monomial index, coefficient)` pairs.
fn sparse(len: usize, max_terms: usize) -> impl Strategy<Value = Vec<(usize, i64)>> {
    prop::collection::vec((0..len, -4i64..=4), 0..=max_terms)
}

fn build(ring: &Arc<RingModel>, basis: &[Monomial], c0: i64, picks: &[(usize, i64)]) -> GradedPoly {
    let mut t = Terms::new();
    for (i, c) in picks {
        *t.entry(basis[*i].clone()).or_insert_with(Coeff::zero) += rat(*c);
    }
    t.retain(|_, c| !c.is_zero());
    ring.from_terms(t).expect("valid terms") + ring.int(c0)
}

fn laws_ring() -> Arc<RingModel> {
    let mut b = RingBuilder::new("laws", 4);
    let c = b.var("c", 2).unwrap();
    let a = b.var("a", 1).unwrap();
    let bb = b.var("b", 1).unwrap();
    let rhs: Terms = [
        (Monomial::from_pairs(&[(a, 1), (bb, 1)]), rat(1)),
        (Monomial::var(c, 1), rat(-1)),
    ]
    .into_iter()
    .collect();
    b.rule(Monomial::var(bb, 2), rhs).unwrap();
    b.rule(Monomial::var(a, 3), Terms::new()).unwrap();
    b.build()
}

pub fn ring_laws(cases: u32) -> Result<(), String> {
    let r = laws_ring();
    let basis = monomials(&r, 4);
    let n = basis.len();
    run(
        cases,
        (-3i64..=3, sparse(n, 5), sparse(n, 5), sparse(n, 5)),
        |(c0, p, q, s)| {
            let p = build(&r, &basis, c0, &p);
            let q = build(&r, &basis, 0, &q);
            let s = build(&r, &basis, 1, &s);
            prop_assert_eq!(&(&p + &q) + &s, &p + &(&q + &s));
            prop_assert_eq!(&p + &q, &q + &p);
            prop_assert_eq!(&p * &q, &q * &p);
            prop_assert_eq!(&(&p * &q) * &s, &p * &(&q * &s));
            prop_assert_eq!(&p * &(&q + &s), &(&p * &q) + &(&p * &s));
            prop_assert!((&p + &p.neg()).is_zero());
            prop_assert_eq!(&p * &r.one(), p.clone());
            prop_assert_eq!(p.normalize().map_err(fail)?, p.clone());
            let raw: Terms = (&p * &q)
                .terms()
                .iter()
                .map(|(m, c)| (m.mul(&basis[0]), c.clone()))
                .collect();
            let once = r.normalize_terms(raw).map_err(fail)?;
            prop_assert_eq!(r.normalize_terms(once.clone()).map_err(fail)?, once);
            Ok(())
        },
    )
}

fn free_ring(names: &[&str], dim: u32) -> Arc<RingModel> {
    let mut b = RingBuilder::new("free", dim);
    for n in names {
        b.var(*n, 1).unwrap();
    }
    b.build()
}

pub fn whitney_difference(cases: u32) -> Result<(), String> {
    let r = free_ring(&["x", "y", "z"], 5);
    let basis = monomials(&r, 5);
    let n = basis.len();
    let sheaf = move |rank: i64, picks: &[(usize, i64)], r: &Arc<RingModel>| {
        FormalSheaf::new(rank, build(r, &basis, 1, picks)).expect("unit chern")
    };
    run(
        cases,
        (-2i64..=4, sparse(n, 4), -2i64..=4, sparse(n, 4)),
        |(ra, pa, rb, pb)| {
            let a = sheaf(ra, &pa, &r);
            let b = sheaf(rb, &pb, &r);
            let ab = whitney_sum(&a, &b).map_err(fail)?;
            prop_assert_eq!(&ab, &whitney_sum(&b, &a).map_err(fail)?);
            prop_assert_eq!(&difference(&ab, &b).map_err(fail)?, &a);
            let d = difference(&a, &b).map_err(fail)?;
            prop_assert_eq!(&whitney_sum(&d, &b).map_err(fail)?, &a);
            Ok(())
        },
    )
}

pub fn twist_untwist(cases: u32) -> Result<(), String> {
    let r = free_ring(&["x", "y", "z"], 5);
    let all = monomials(&r, 5);
    let deg1 = monomials(&r, 1);
    let n = all.len();
    run(
        cases,
        (1u32..=4, sparse(n, 5), prop::collection::vec(-3i64..=3, 3)),
        |(rank, picks, lc)| {
            let parts: Vec<(usize, i64)> = picks
                .into_iter()
                .filter(|(i, _)| r.degree_of(&all[*i]) <= rank)
                .collect();
            let a = FormalSheaf::new(rank as i64, build(&r, &all, 1, &parts)).map_err(fail)?;
            let line_terms: Vec<(usize, i64)> = lc.into_iter().enumerate().collect();
            let l = build(&r, &deg1, 0, &line_terms);
            let t = tensor_line(&a, &l).map_err(fail)?;
            prop_assert_eq!(t.c(1), a.c(1) + l.scale(&rat(rank as i64)));
            prop_assert_eq!(tensor_line(&t, &-&l).map_err(fail)?, a);
            Ok(())
        },
    )
}

type RootPoly = BTreeMap<(u32, u32), BigInt>;

fn root_mul(a: &RootPoly, b: &RootPoly) -> RootPoly {
    let mut out = RootPoly::new();
    for ((i, j), c) in a {
        for ((k, l), d) in b {
            *out.entry((i + k, j + l)).or_default() += c * d;
        }
    }
    out.retain(|_, c| !c.is_zero());
    out
}

/// `Π_{i=0..k} (1 + i·α + (k−i)·β)` in the root variables.
fn sym_roots(k: u32) -> RootPoly {
    let mut acc: RootPoly = [((0, 0), BigInt::from(1))].into_iter().collect();
    for i in 0..=k {
        let f: RootPoly = [
            ((0, 0), BigInt::from(1)),
            ((1, 0), BigInt::from(i)),
            ((0, 1), BigInt::from(k - i)),
        ]
        .into_iter()
        .filter(|(_, c)| !c.is_zero())
        .collect();
        acc = root_mul(&acc, &f);
    }
    acc
}

/// Writes a symmetric polynomial in `α, β` as `Σ c · e1^p · e2^q`.
fn symmetric_reduce(mut f: RootPoly) -> BTreeMap<(u32, u32), BigInt> {
    let mut out = BTreeMap::new();
    while let Some(((a, b), c)) = f.iter().next_back().map(|(k, v)| (*k, v.clone())) {
        assert!(a >= b, "not symmetric");
        out.insert((a - b, b), c.clone());
        let e1: RootPoly = [((1, 0), BigInt::from(1)), ((0, 1), BigInt::from(1))]
            .into_iter()
            .collect();
        let mut g: RootPoly = [((b, b), c)].into_iter().collect();
        for _ in 0..(a - b) {
            g = root_mul(&g, &e1);
        }
        for (m, v) in g {
            *f.entry(m).or_default() -= v;
        }
        f.retain(|_, c| !c.is_zero());
    }
    out
}

pub fn sym_vs_roots(cases: u32) -> Result<(), String> {
    let r = free_ring(&["x", "y"], 6);
    let x = r.gen("x").unwrap();
    let y = r.gen("y").unwrap();
    let oracles: Vec<BTreeMap<(u32, u32), BigInt>> =
        (0..=5).map(|k| symmetric_reduce(sym_roots(k))).collect();
    run(
        cases,
        (0u32..=5, prop::collection::vec(-4i64..=4, 5)),
        |(k, v)| {
            let c1 = x.scale(&rat(v[0])) + y.scale(&rat(v[1]));
            let c2 = x.pow(2).scale(&rat(v[2]))
                + (&x * &y).scale(&rat(v[3]))
                + y.pow(2).scale(&rat(v[4]));
            let e = FormalSheaf::new(2, r.one() + &c1 + &c2).map_err(fail)?;
            let s = sym_rank2(&e, k).map_err(fail)?;
            let mut expect = r.zero();
            for ((p, q), c) in &oracles[k as usize] {
                expect = expect + (c1.pow(*p) * c2.pow(*q)).scale(&Coeff::from_integer(c.clone()));
            }
            prop_assert_eq!(s.rank(), k as i64 + 1);
            prop_assert_eq!(s.chern(), &expect);
            Ok(())
        },
    )
}

fn bundle_over_p3(rank: u32, coeffs: &[i64]) -> Arc<SpaceModel> {
    let base = projective_space(3, "t").unwrap();
    let t = base.gen("t").unwrap();
    let mut c = base.ring().one();
    for i in 1..=rank.min(3) {
        c = c + t.pow(i).scale(&rat(coeffs[i as usize - 1]));
    }
    projective_bundle(&base, &FormalSheaf::new(rank as i64, c).unwrap(), "y").unwrap()
}

pub fn projection_formula(cases: u32) -> Result<(), String> {
    let mut spaces: Vec<Arc<SpaceModel>> = Vec::new();
    for (rank, cs) in [(2, [1, 2, 0]), (3, [-2, 1, 3]), (2, [0, -1, 0])] {
        spaces.push(bundle_over_p3(rank, &cs));
    }
    for inv in [
        SurfaceInvariants::new(16, -12, 9, 3),
        SurfaceInvariants::new(7, 3, -2, 11),
    ] {
        let fam = base_surface_model(inv, 2).unwrap();
        spaces.push(fam.clone());
        spaces.push(Tower::new(&fam, 2).unwrap().level(2).clone());
    }
    let bases: Vec<Vec<Monomial>> = spaces
        .iter()
        .map(|s| monomials(s.parent().unwrap().ring(), s.parent().unwrap().dim()))
        .collect();
    let tops: Vec<Vec<Monomial>> = spaces
        .iter()
        .map(|s| monomials(s.ring(), s.dim()))
        .collect();
    run(
        cases,
        (
            0..spaces.len(),
            -3i64..=3,
            sparse(1 << 16, 3),
            sparse(1 << 16, 4),
        ),
        |(k, c0, a, b)| {
            let x = &spaces[k];
            let pr = x.parent().unwrap().ring();
            let fix = |v: Vec<(usize, i64)>, len: usize| -> Vec<(usize, i64)> {
                v.into_iter().map(|(i, c)| (i % len, c)).collect()
            };
            let a = build(pr, &bases[k], c0, &fix(a, bases[k].len()));
            let b = build(x.ring(), &tops[k], 0, &fix(b, tops[k].len()));
            let lhs = x
                .pushforward(&(x.pullback(&a).map_err(fail)? * b.clone()))
                .map_err(fail)?;
            let rhs = a * x.pushforward(&b).map_err(fail)?;
            prop_assert_eq!(lhs, rhs);
            Ok(())
        },
    )
}

pub fn segre_pushforward(cases: u32) -> Result<(), String> {
    let base = projective_space(4, "t").unwrap();
    let t = base.gen("t").unwrap();
    run(
        cases,
        (1u32..=3, prop::collection::vec(-5i64..=5, 3)),
        |(rank, cs)| {
            let mut c = base.ring().one();
            for i in 1..=rank {
                c = c + t.pow(i).scale(&rat(cs[i as usize - 1]));
            }
            let e = FormalSheaf::new(rank as i64, c).map_err(fail)?;
            let x = projective_bundle(&base, &e, "y").map_err(fail)?;
            let y = x.gen("y").map_err(fail)?;
            let s = segre(&e).map_err(fail)?;
            for j in 0..rank - 1 {
                prop_assert!(x.pushforward(&y.pow(j)).map_err(fail)?.is_zero());
            }
            for i in 0..=4 {
                prop_assert_eq!(
                    x.pushforward(&y.pow(rank - 1 + i)).map_err(fail)?,
                    s.part(i)
                );
            }
            Ok(())
        },
    )
}

fn binom(n: u32, k: u32) -> i64 {
    (0..k).fold(1i64, |acc, i| acc * (n - i) as i64 / (i + 1) as i64)
}

pub fn euler_anchor(cases: u32) -> Result<(), String> {
    let pt = projective_space(0, "t").unwrap();
    let p2 = projective_bundle(&pt, &FormalSheaf::trivial(pt.ring(), 3), "y").unwrap();
    let y = p2.gen("y").unwrap();
    let w = p2.cotangent().unwrap();
    if w.c(1) != y.scale(&rat(-3)) || w.c(2) != y.pow(2).scale(&rat(3)) {
        return Err(format!("P^2 cotangent has c = {}", w.chern()));
    }
    let spaces: Vec<Arc<SpaceModel>> = (2..=6)
        .map(|n| projective_bundle(&pt, &FormalSheaf::trivial(pt.ring(), n), "y").unwrap())
        .collect();
    run(cases, (2u32..=6, 0u32..=6), |(n, i)| {
        let x = &spaces[n as usize - 2];
        let y = x.gen("y").map_err(fail)?;
        let w = x.cotangent().unwrap();
        let sign = if i % 2 == 0 { 1 } else { -1 };
        let expect = if i < n {
            y.pow(i).scale(&rat(sign * binom(n, i)))
        } else {
            x.ring().zero()
        };
        prop_assert_eq!(w.c(i), expect);
        prop_assert_eq!(x.integrate(&y.pow(n - 1)).map_err(fail)?, rat(1));
        Ok(())
    })
}

/// Degree of the Grassmannian of rank-`q` quotients of a rank-`n` space.
fn grassmannian_degree(n: u32, q: u32) -> BigInt {
    let k = n - q;
    let fact = |m: u32| (1..=m).fold(BigInt::from(1), |a, i| a * i);
    let mut num = fact(q * k);
    let mut den = BigInt::from(1);
    for i in 0..q {
        num *= fact(i);
        den *= fact(k + i);
    }
    num / den
}

pub fn grassmannian_anchors(cases: u32) -> Result<(), String> {
    let mut table = BTreeMap::new();
    for n in 2..=6u32 {
        for q in 1..n {
            table.insert(
                (n, q),
                grassmannian_quotients(n, q).map_err(|e| e.to_string())?,
            );
        }
    }
    let g = &table[&(5, 3)];
    let x1 = g.gen("x1").unwrap();
    if g.integrate(&x1.pow(6)).map_err(|e| e.to_string())? != rat(5) {
        return Err("planes in P^4: degree is not 5".into());
    }
    run(cases, (2u32..=6, 1u32..=5), |(n, q)| {
        let q = 1 + (q - 1) % (n - 1);
        let g = &table[&(n, q)];
        let dim = q * (n - q);
        let c = g.sheaf("Q2").map_err(fail)?.chern() * g.sheaf("S2").map_err(fail)?.chern();
        prop_assert_eq!(c, g.ring().one());
        let x1 = g.gen("x1").map_err(fail)?;
        let deg = g.integrate(&x1.pow(dim)).map_err(fail)?;
        prop_assert_eq!(&deg, &Coeff::from_integer(grassmannian_degree(n, q)));
        let d = &table[&(n, n - q)];
        let xd = d.gen("x1").map_err(fail)?;
        prop_assert_eq!(d.integrate(&xd.pow(dim)).map_err(fail)?, deg);
        Ok(())
    })
}
