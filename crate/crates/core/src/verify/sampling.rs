//! Seeded random inputs for the randomized checks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::simplex::{Allocation, Profile};

pub const DEFAULT_SEED: u64 = 1729;
pub const SEED_ENV: &str = "PHANTOM_FORGE_SEED";

pub type VerifyRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> VerifyRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The seed from `PHANTOM_FORGE_SEED`, or the fixed default.
pub fn seed_from_env() -> u64 {
    std::env::var(SEED_ENV)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_SEED)
}

/// Uniform draw from the simplex (flat Dirichlet).
pub fn random_allocation<R: Rng + ?Sized>(rng: &mut R, m: usize) -> Allocation {
    let draws: Vec<f64> = (0..m).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    Allocation::renormalized(draws)
}

/// A simplex point with at least `share` on alternative `j`.
fn extreme_allocation<R: Rng + ?Sized>(rng: &mut R, m: usize, j: usize, share: f64) -> Allocation {
    let top = share + (1.0 - share) * rng.gen::<f64>();
    let rest = random_allocation(rng, m - 1);
    let mut values = Vec::with_capacity(m);
    let mut others = rest.values().iter();
    for k in 0..m {
        if k == j {
            values.push(top);
        } else {
            values.push((1.0 - top) * others.next().expect("m - 1 shares"));
        }
    }
    Allocation::renormalized(values)
}

/// Rounds a simplex point to multiples of `1/steps` keeping the unit sum.
fn grid_round(a: &Allocation, steps: usize) -> Allocation {
    let scaled: Vec<f64> = a.values().iter().map(|v| v * steps as f64).collect();
    let mut units: Vec<usize> = scaled.iter().map(|v| v.floor() as usize).collect();
    let mut missing = steps - units.iter().sum::<usize>().min(steps);
    let mut order: Vec<usize> = (0..units.len()).collect();
    order.sort_by(|&x, &y| {
        let fx = scaled[x] - scaled[x].floor();
        let fy = scaled[y] - scaled[y].floor();
        fy.total_cmp(&fx)
    });
    for &j in order.iter().cycle() {
        if missing == 0 {
            break;
        }
        units[j] += 1;
        missing -= 1;
    }
    Allocation::renormalized(units.into_iter().map(|u| u as f64).collect())
}

/// Mixed-population profiles: flat Dirichlet votes, votes sharing one
/// alternative above a high threshold, and votes rounded to a coarse grid so
/// that ties across voters are common.
pub fn random_profile<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize) -> Profile {
    let style = rng.gen_range(0..4);
    let common = rng.gen_range(0..m);
    let share = [0.5, 0.6, 0.8][rng.gen_range(0..3)];
    let votes = (0..n)
        .map(|_| match style {
            0 | 1 => random_allocation(rng, m),
            2 => {
                if rng.gen_bool(0.75) {
                    extreme_allocation(rng, m, common, share)
                } else {
                    random_allocation(rng, m)
                }
            }
            _ => grid_round(
                &random_allocation(rng, m),
                [4, 5, 10, 20][rng.gen_range(0..4)],
            ),
        })
        .collect();
    Profile::new(votes).expect("non-empty profile with a common dimension")
}

pub fn random_permutation<R: Rng + ?Sized>(rng: &mut R, size: usize) -> Vec<usize> {
    let mut sigma: Vec<usize> = (0..size).collect();
    sigma.shuffle(rng);
    sigma
}

/// All points of the simplex whose coordinates are multiples of `1/steps`.
pub fn simplex_grid(m: usize, steps: usize) -> Vec<Vec<f64>> {
    fn fill(prefix: &mut Vec<usize>, m: usize, left: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() + 1 == m {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for take in 0..=left {
            prefix.push(take);
            fill(prefix, m, left - take, out);
            prefix.pop();
        }
    }
    let mut raw = Vec::new();
    fill(&mut Vec::with_capacity(m), m, steps, &mut raw);
    raw.into_iter()
        .map(|units| units.into_iter().map(|u| u as f64 / steps as f64).collect())
        .collect()
}
