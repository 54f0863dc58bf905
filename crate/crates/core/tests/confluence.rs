//! Empirical confluence: normal forms must not depend on rule priority.

use std::sync::Arc;

use nodal_enum::ring::{rat, Monomial, RingModel, Terms};
use nodal_enum::spaces::{
    base_surface_model, grassmannian_planes_p4, incidence_flag, planes_through_line_model,
    universal_plane, SpaceModel, Tower,
};
use nodal_enum::surfaces::{preset_k3, preset_p2};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const SAMPLES: usize = 1500;

fn random_monomial(ring: &RingModel, rng: &mut StdRng) -> Monomial {
    let degs: Vec<u32> = ring.vars().iter().map(|v| v.degree).collect();
    let target = rng.gen_range(1..=ring.dim());
    let mut exps = vec![0u16; degs.len()];
    let mut left = target;
    for _ in 0..64 {
        let i = rng.gen_range(0..degs.len());
        if degs[i] <= left {
            exps[i] += 1;
            left -= degs[i];
        }
        if left == 0 {
            break;
        }
    }
    Monomial::from_exponents(exps)
}

fn assert_confluent(label: &str, ring: &Arc<RingModel>, seed: u64) {
    let mut rng = StdRng::seed_from_u64(seed);
    for _ in 0..SAMPLES {
        let m = random_monomial(ring, &mut rng);
        let t: Terms = [(m.clone(), rat(1))].into_iter().collect();
        let a = ring.normalize_terms(t.clone()).unwrap();
        let b = ring.normalize_terms_reversed(t).unwrap();
        assert_eq!(a, b, "{label}: {} reduces differently", ring.render_monomial(&m));
    }
}

fn tower_rings(label: &str, family: &Arc<SpaceModel>, depth: u32) {
    let tower = Tower::new(family, depth).unwrap();
    for i in 1..=depth {
        assert_confluent(&format!("{label} level {i}"), tower.level(i).ring(), 17 + i as u64);
    }
}

#[test]
fn surface_towers() {
    tower_rings("P2 quartics", &base_surface_model(preset_p2(4), 6).unwrap(), 6);
    tower_rings("K3", &base_surface_model(preset_k3(5), 5).unwrap(), 5);
}

#[test]
fn plane_family_tower() {
    let g = grassmannian_planes_p4().unwrap();
    assert_confluent("grassmannian", g.ring(), 3);
    tower_rings("universal plane", &universal_plane(&g, "y").unwrap(), 6);
}

#[test]
fn flags_and_planes_through_a_line() {
    let g = grassmannian_planes_p4().unwrap();
    let f1 = incidence_flag(&g, "z1").unwrap();
    let f2 = incidence_flag(&f1, "z2").unwrap();
    let f3 = incidence_flag(&f2, "z3").unwrap();
    assert_confluent("triple flag", f3.ring(), 5);
    tower_rings("planes through a line", &planes_through_line_model().unwrap(), 2);
}
