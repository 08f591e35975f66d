mod common;

use common::{lattice_instance, random_table_estimator};
use locest_core::bounds::{lemma_bound_check, s_bound_one_sample, sumset_yk, t_bound_one_sample_discrete};
use locest_core::estimators::discrete_one_sample_estimator;
use locest_core::quality::exact_quality_discrete;
use locest_core::{Distribution, Rational};
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Heaviest atom subset with no two locations a nonzero multiple of 2δ
/// apart, by exhaustive search.
fn brute_force_t(d: &Distribution, two_delta: Rational) -> f64 {
    let atoms = d.as_atoms().unwrap();
    let z = atoms.exact_locations().unwrap();
    let p = atoms.masses();
    let r = z.len();
    let clash = |i: usize, j: usize| {
        let q: Ratio<i128> = (z[j] - z[i]) / two_delta;
        q.is_integer() && q != Ratio::from_integer(0)
    };
    let mut best = 0.0f64;
    for mask in 0u32..(1 << r) {
        let members: Vec<usize> = (0..r).filter(|i| mask >> i & 1 == 1).collect();
        let ok = members.iter().enumerate().all(|(a, &i)| members[a + 1..].iter().all(|&j| !clash(i, j)));
        if ok {
            best = best.max(members.iter().map(|&i| p[i]).sum());
        }
    }
    best
}

#[test]
fn s_never_exceeds_t() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..25 {
        let r = rng.random_range(1..=5);
        let (d, t) = lattice_instance(&mut rng, r);
        let s = s_bound_one_sample(&d, t).unwrap().value;
        let tv = t_bound_one_sample_discrete(&d, t).unwrap().value;
        assert!(s <= tv, "{d}: S={s} T={tv}");
    }
}

#[test]
fn t_matches_subset_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for r in 1..=12 {
        for _ in 0..4 {
            let (d, t) = lattice_instance(&mut rng, r);
            let got = t_bound_one_sample_discrete(&d, t).unwrap().value;
            let want = brute_force_t(&d, Rational::from_integer(1));
            assert!((got - want).abs() < 1e-12, "{d}: T={got} brute force {want}");
        }
    }
}

#[test]
fn window_estimator_attains_s_on_sumset() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..25 {
        let r = rng.random_range(1..=5);
        let (d, t) = lattice_instance(&mut rng, r);
        let s = s_bound_one_sample(&d, t).unwrap().value;
        let e = discrete_one_sample_estimator(&d, t).unwrap();
        let y = sumset_yk(d.as_atoms().unwrap().locations(), 6).unwrap();
        let worst = y.iter().map(|&th| exact_quality_discrete(&e, &d, th, t, 1).unwrap()).fold(1.0, f64::min);
        assert!((worst - s).abs() < 1e-12, "{d}: worst {worst} vs S {s}");
    }
}

#[test]
fn lemma_holds_for_random_tables() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..10 {
        let r = rng.random_range(1..=4);
        let (d, t) = lattice_instance(&mut rng, r);
        for salt in 0..100 {
            let k = rng.random_range(1..=5);
            let e = random_table_estimator(&d, salt);
            let c = lemma_bound_check(&e, &d, t, k).unwrap();
            assert!(c.holds, "{d}, k={k}: avg {} > bound {}", c.avg_quality, c.bound);
        }
    }
}
