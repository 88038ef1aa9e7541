//! Distance of a mechanism's output from the coordinate-wise mean.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::mechanisms::Mechanism;
use crate::simplex::{
    l1_distance, linf_distance, lower_bound_profile, mean, symmetric_vote, Allocation, Profile,
    Tolerance,
};

use super::sampling::{random_profile, rng_from_seed};

const SYMMETRIC_LEVELS: usize = 10;
const MAX_FAMILY_PROFILES: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessResult {
    pub mechanism: String,
    pub l1: f64,
    pub linf: f64,
    pub profile_digest: String,
}

/// Short hex digest of the profile's canonical JSON form.
pub fn profile_digest(profile: &Profile) -> String {
    let hash = Sha256::digest(profile.to_json().as_bytes());
    hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

pub fn fairness(
    mechanism: &dyn Mechanism,
    profile: &Profile,
    tol: &Tolerance,
) -> Result<FairnessResult> {
    let out = mechanism.aggregate(profile, tol)?;
    let avg = mean(profile);
    Ok(FairnessResult {
        mechanism: mechanism.name().to_string(),
        l1: l1_distance(&out, &avg)?,
        linf: linf_distance(&out, &avg)?,
        profile_digest: profile_digest(profile),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCase {
    pub result: FairnessResult,
    pub profile: Profile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseFairness {
    pub worst_l1: WorstCase,
    pub worst_linf: WorstCase,
    pub profiles_evaluated: usize,
}

/// Every assignment of the `n` voters to vertices, up to voter order.
fn vertex_profiles(n: usize, m: usize) -> Vec<Profile> {
    let mut out = Vec::new();
    let mut counts = vec![0usize; n];
    loop {
        let votes = counts
            .iter()
            .map(|&j| Allocation::vertex(m, j).expect("index below m"))
            .collect();
        out.push(Profile::new(votes).expect("n >= 1"));
        if out.len() >= MAX_FAMILY_PROFILES {
            return out;
        }
        // next non-decreasing sequence over 0..m
        let Some(pos) = (0..n).rev().find(|&i| counts[i] + 1 < m) else {
            return out;
        };
        let next = counts[pos] + 1;
        for c in counts.iter_mut().skip(pos) {
            *c = next;
        }
    }
}

/// Profiles whose votes all lie on the line through the first vertex and the
/// center, with parameters on a uniform grid plus the center itself.
fn symmetric_line_profiles(n: usize, m: usize) -> Result<Vec<Profile>> {
    let mut levels: Vec<f64> = (0..=SYMMETRIC_LEVELS)
        .map(|i| i as f64 / SYMMETRIC_LEVELS as f64)
        .collect();
    levels.push(1.0 / m as f64);
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let votes: Vec<Allocation> = levels
        .iter()
        .map(|&alpha| symmetric_vote(alpha, m))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    let mut idx = vec![0usize; n];
    loop {
        out.push(Profile::new(
            idx.iter().map(|&i| votes[i].clone()).collect(),
        )?);
        if out.len() >= MAX_FAMILY_PROFILES {
            return Ok(out);
        }
        let Some(pos) = (0..n).rev().find(|&i| idx[i] + 1 < votes.len()) else {
            return Ok(out);
        };
        let next = idx[pos] + 1;
        for c in idx.iter_mut().skip(pos) {
            *c = next;
        }
    }
}

/// Largest observed distances to the mean over random profiles and, when
/// `structured` is set, the lower-bound, all-vertex and symmetric-line families.
/// The result is a lower bound on the true worst case.
pub fn worst_case_fairness(
    mechanism: &dyn Mechanism,
    n: usize,
    m: usize,
    trials: usize,
    structured: bool,
    seed: u64,
    tol: &Tolerance,
) -> Result<WorstCaseFairness> {
    let mut candidates = Vec::new();
    if structured {
        candidates.push(lower_bound_profile(n, m)?);
        candidates.extend(vertex_profiles(n, m));
        candidates.extend(symmetric_line_profiles(n, m)?);
    }
    let mut rng = rng_from_seed(seed);
    candidates.extend((0..trials).map(|_| random_profile(&mut rng, n, m)));

    let mut worst_l1: Option<WorstCase> = None;
    let mut worst_linf: Option<WorstCase> = None;
    let mut evaluated = 0;
    for profile in candidates {
        let result = fairness(mechanism, &profile, tol)?;
        evaluated += 1;
        if worst_l1.as_ref().is_none_or(|w| result.l1 > w.result.l1) {
            worst_l1 = Some(WorstCase {
                result: result.clone(),
                profile: profile.clone(),
            });
        }
        if worst_linf
            .as_ref()
            .is_none_or(|w| result.linf > w.result.linf)
        {
            worst_linf = Some(WorstCase { result, profile });
        }
    }
    match (worst_l1, worst_linf) {
        (Some(worst_l1), Some(worst_linf)) => Ok(WorstCaseFairness {
            worst_l1,
            worst_linf,
            profiles_evaluated: evaluated,
        }),
        _ => Err(crate::error::Error::InvalidArgument(
            "worst-case search needs at least one trial or the structured families".into(),
        )),
    }
}
