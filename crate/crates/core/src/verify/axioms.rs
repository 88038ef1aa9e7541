//! Randomized checks of anonymity, neutrality, unanimity and continuity.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mechanisms::Mechanism;
use crate::simplex::{
    l1_raw, linf_distance, permute_allocation, permute_alternatives, permute_voters, Allocation,
    Profile, Tolerance,
};

use super::sampling::{random_permutation, VerifyRng};

/// Outputs closer than this in the max norm count as equal.
pub const AXIOM_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomOutcome {
    pub holds: bool,
    pub trials: usize,
    pub max_deviation: f64,
    /// The first permutation that broke the property.
    pub counterexample: Option<Vec<usize>>,
}

fn run_permutation_trials(
    trials: usize,
    size: usize,
    rng: &mut VerifyRng,
    mut deviation: impl FnMut(&[usize]) -> Result<f64>,
) -> Result<AxiomOutcome> {
    let mut max_deviation: f64 = 0.0;
    let mut counterexample = None;
    for _ in 0..trials {
        let sigma = random_permutation(rng, size);
        let d = deviation(&sigma)?;
        if d > AXIOM_EPS && counterexample.is_none() {
            counterexample = Some(sigma);
        }
        max_deviation = max_deviation.max(d);
    }
    Ok(AxiomOutcome {
        holds: counterexample.is_none(),
        trials,
        max_deviation,
        counterexample,
    })
}

/// Output must not change when voters are reordered.
pub fn check_anonymity(
    mechanism: &dyn Mechanism,
    profile: &Profile,
    trials: usize,
    rng: &mut VerifyRng,
    tol: &Tolerance,
) -> Result<AxiomOutcome> {
    let base = mechanism.aggregate(profile, tol)?;
    run_permutation_trials(trials, profile.n(), rng, |sigma| {
        let out = mechanism.aggregate(&permute_voters(profile, sigma)?, tol)?;
        linf_distance(&out, &base)
    })
}

/// Relabelling alternatives in the input must relabel the output the same way.
pub fn check_neutrality(
    mechanism: &dyn Mechanism,
    profile: &Profile,
    trials: usize,
    rng: &mut VerifyRng,
    tol: &Tolerance,
) -> Result<AxiomOutcome> {
    let base = mechanism.aggregate(profile, tol)?;
    run_permutation_trials(trials, profile.m(), rng, |sigma| {
        let out = mechanism.aggregate(&permute_alternatives(profile, sigma)?, tol)?;
        linf_distance(&out, &permute_allocation(&base, sigma)?)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnanimityOutcome {
    pub holds: bool,
    pub output: Allocation,
    pub deviation: f64,
}

/// Whether `n` identical reports of `vote` return `vote`.
pub fn check_unanimity(
    mechanism: &dyn Mechanism,
    vote: &Allocation,
    n: usize,
    tol: &Tolerance,
) -> Result<UnanimityOutcome> {
    let output = mechanism.aggregate(&Profile::unanimous(vote, n)?, tol)?;
    let deviation = linf_distance(&output, vote)?;
    Ok(UnanimityOutcome {
        holds: deviation <= AXIOM_EPS,
        output,
        deviation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleRatio {
    pub delta: f64,
    /// Largest observed `|dA|_1 / |dP|_1` at this scale.
    pub max_ratio: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    pub scales: Vec<ScaleRatio>,
    /// Ratios grow by more than an order of magnitude towards small steps.
    pub diverging: bool,
}

/// A random direction in the tangent space of the simplex, scaled so that
/// the step from `vote` stays on the simplex and has l1 size at most `delta`.
fn tangent_step(rng: &mut VerifyRng, vote: &Allocation, delta: f64) -> Vec<f64> {
    let m = vote.dim();
    let raw: Vec<f64> = (0..m).map(|_| rng.gen::<f64>() - 0.5).collect();
    let shift = raw.iter().sum::<f64>() / m as f64;
    let dir: Vec<f64> = raw.iter().map(|x| x - shift).collect();
    let norm: f64 = dir.iter().map(|x| x.abs()).sum();
    if norm == 0.0 {
        return vote.values().to_vec();
    }
    let mut scale = delta * rng.gen_range(0.5..=1.0) / norm;
    for (v, d) in vote.values().iter().zip(&dir) {
        if *d < 0.0 {
            scale = scale.min(v / -d);
        }
    }
    vote.values()
        .iter()
        .zip(&dir)
        .map(|(v, d)| (v + scale * d).max(0.0))
        .collect()
}

/// Empirical Lipschitz ratios at decreasing perturbation scales.
pub fn continuity_probe(
    mechanism: &dyn Mechanism,
    profile: &Profile,
    deltas: &[f64],
    trials: usize,
    rng: &mut VerifyRng,
    tol: &Tolerance,
) -> Result<ContinuityReport> {
    let base = mechanism.aggregate(profile, tol)?;
    let mut scales = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let mut max_ratio: f64 = 0.0;
        let mut samples = 0;
        for _ in 0..trials {
            let voter = rng.gen_range(0..profile.n());
            let moved = Allocation::renormalized(tangent_step(rng, profile.vote(voter), delta));
            let input_change = l1_raw(moved.values(), profile.vote(voter).values());
            if input_change <= 0.0 {
                continue;
            }
            let out = mechanism.aggregate(&profile.with_vote(voter, moved)?, tol)?;
            max_ratio = max_ratio.max(l1_raw(out.values(), base.values()) / input_change);
            samples += 1;
        }
        scales.push(ScaleRatio {
            delta,
            max_ratio,
            samples,
        });
    }
    let diverging = match (scales.first(), scales.last()) {
        (Some(coarse), Some(fine)) if scales.len() > 1 => {
            fine.max_ratio > 10.0 * coarse.max_ratio.max(1.0)
        }
        _ => false,
    };
    Ok(ContinuityReport { scales, diverging })
}
