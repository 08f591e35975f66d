#![allow(dead_code)]

use locest_core::{Distribution, Estimator, FiniteAtoms, Invariance, Rational, Threshold};
use rand::Rng;

/// Atoms on the lattice `Z/4` inside `[0, 8]` with `δ = 1/2`, so residue
/// collisions modulo `2δ = 1` are common.
pub fn lattice_instance<R: Rng>(rng: &mut R, r: usize) -> (Distribution, Threshold) {
    let mut slots: Vec<i128> = Vec::new();
    while slots.len() < r {
        let s = rng.random_range(0..=32);
        if !slots.contains(&s) {
            slots.push(s);
        }
    }
    let weights: Vec<u32> = (0..r).map(|_| rng.random_range(1..=10)).collect();
    let total: u32 = weights.iter().sum();
    let atoms = slots
        .iter()
        .zip(&weights)
        .map(|(&s, &w)| (Rational::new(s, 4), w as f64 / total as f64))
        .collect();
    let d = Distribution::Atoms(FiniteAtoms::exact(atoms).unwrap());
    (d, Threshold::rational(Rational::new(1, 2)).unwrap())
}

/// Atoms at random reals with random masses; pairwise distances are
/// distinct with probability one.
pub fn generic_instance<R: Rng>(rng: &mut R, r: usize) -> Distribution {
    let weights: Vec<f64> = (0..r).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let atoms = weights.iter().map(|w| (rng.random_range(-5.0..5.0), w / total)).collect();
    Distribution::atoms(atoms).unwrap()
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One-sample estimator guessing `x - z_j` with `j` a hash of `x`: an
/// arbitrary, non-invariant map from samples to atom-consistent guesses.
pub fn random_table_estimator(d: &Distribution, salt: u64) -> Estimator {
    let z = d.as_atoms().unwrap().locations().to_vec();
    Estimator::custom(format!("table#{salt}"), Some(1), Invariance::None, move |x| {
        let key = (x[0] * 1e6).round() as i64 as u64;
        let j = (mix(key ^ mix(salt)) % z.len() as u64) as usize;
        Ok(x[0] - z[j])
    })
}
