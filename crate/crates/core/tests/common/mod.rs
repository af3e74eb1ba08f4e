#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ttc_core::Taxonomy;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random tree with the given level sizes; every class below level 1 gets a
/// uniformly chosen parent in the level above.
pub fn random_tree<R: Rng>(rng: &mut R, sizes: &[usize]) -> Taxonomy {
    let names = sizes
        .iter()
        .enumerate()
        .map(|(l, &k)| (0..k).map(|i| format!("c{}_{}", l + 1, i)).collect())
        .collect();
    let parents = sizes
        .windows(2)
        .map(|w| (0..w[1]).map(|_| rng.random_range(0..w[0])).collect())
        .collect();
    Taxonomy::from_levels(names, parents).expect("random tree is valid")
}

/// Random level sizes for an `n`-level tree, each in `1..=max`.
pub fn random_sizes<R: Rng>(rng: &mut R, n: usize, max: usize) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(1..=max)).collect()
}

pub fn random_vec<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..=scale)).collect()
}
