//! Search for profitable misreports.
//!
//! The search evaluates a grid of the simplex (or random samples in higher
//! dimension) plus structured candidates, then hill-climbs around the best
//! one by moving mass between pairs of coordinates. A reported gain above the
//! tolerance is a genuine counterexample; finding none proves nothing.

use serde::{Deserialize, Serialize};

use crate::cutoffs::aggregate_cutoff;
use crate::error::{Error, Result};
use crate::mechanisms::Mechanism;
use crate::simplex::{l1_raw, Allocation, Profile, Tolerance};

use super::sampling::{random_allocation, rng_from_seed, simplex_grid, DEFAULT_SEED};

const STRUCTURED_TAUS: [f64; 3] = [0.5, 0.6, 0.8];
const MAX_CLIMB_SWEEPS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Grid step is `1 / resolution`.
    pub resolution: usize,
    pub refinement_rounds: usize,
    /// Random samples used instead of the grid when `m` is above `max_grid_m`.
    pub random_samples: usize,
    pub max_grid_m: usize,
    pub seed: u64,
}

impl SearchConfig {
    /// Resolution 50 up to three alternatives, 20 for four, sampling beyond.
    pub fn for_dimension(m: usize) -> Self {
        SearchConfig {
            resolution: if m <= 3 { 50 } else { 20 },
            refinement_rounds: 3,
            random_samples: 2000,
            max_grid_m: 4,
            seed: DEFAULT_SEED,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub candidates_evaluated: usize,
    pub refinement_rounds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManipulationResult {
    pub voter: usize,
    pub truthful_disutility: f64,
    pub best_misreport: Allocation,
    pub best_disutility: f64,
    pub gain: f64,
    pub search_stats: SearchStats,
}

impl ManipulationResult {
    pub fn is_violation(&self, tol: &Tolerance) -> bool {
        self.gain > tol.eps_gain
    }
}

struct Evaluator<'a> {
    mechanism: &'a dyn Mechanism,
    profile: &'a Profile,
    voter: usize,
    truth: &'a [f64],
    tol: &'a Tolerance,
    evaluated: usize,
}

impl Evaluator<'_> {
    fn disutility(&mut self, report: &[f64]) -> Result<f64> {
        self.evaluated += 1;
        let report = Allocation::renormalized(report.to_vec());
        let profile = self.profile.with_vote(self.voter, report)?;
        let out = self.mechanism.aggregate(&profile, self.tol)?;
        Ok(l1_raw(self.truth, out.values()))
    }
}

fn structured_candidates(
    profile: &Profile,
    truthful_outcome: &Allocation,
) -> Result<Vec<Vec<f64>>> {
    let m = profile.m();
    let mut base: Vec<Allocation> = (0..m)
        .map(|j| Allocation::vertex(m, j))
        .collect::<Result<_>>()?;
    base.push(Allocation::center(m)?);
    base.extend(profile.votes().iter().cloned());
    base.push(truthful_outcome.clone());
    let mut out: Vec<Vec<f64>> = base.iter().map(|a| a.values().to_vec()).collect();
    for a in &base {
        for tau in STRUCTURED_TAUS {
            let cut = aggregate_cutoff(a, tau)?;
            if cut != *a {
                out.push(cut.into_vec());
            }
        }
    }
    Ok(out)
}

/// Best response search for `voter` against the other reports in `profile`.
pub fn manipulation_search(
    mechanism: &dyn Mechanism,
    profile: &Profile,
    voter: usize,
    cfg: &SearchConfig,
    tol: &Tolerance,
) -> Result<ManipulationResult> {
    if voter >= profile.n() {
        return Err(Error::InvalidArgument(format!(
            "voter {voter} out of range for n = {}",
            profile.n()
        )));
    }
    if cfg.resolution < 2 {
        return Err(Error::InvalidArgument(format!(
            "grid resolution must be at least 2, got {}",
            cfg.resolution
        )));
    }
    let m = profile.m();
    let truth = profile.vote(voter).values().to_vec();
    let truthful_outcome = mechanism.aggregate(profile, tol)?;
    let truthful_disutility = l1_raw(&truth, truthful_outcome.values());

    let mut eval = Evaluator {
        mechanism,
        profile,
        voter,
        truth: &truth,
        tol,
        evaluated: 1,
    };
    let mut best = truth.clone();
    let mut best_value = truthful_disutility;
    let mut consider = |point: Vec<f64>, eval: &mut Evaluator| -> Result<()> {
        let value = eval.disutility(&point)?;
        if value < best_value {
            best_value = value;
            best = point;
        }
        Ok(())
    };

    for point in structured_candidates(profile, &truthful_outcome)? {
        consider(point, &mut eval)?;
    }
    if m <= cfg.max_grid_m {
        for point in simplex_grid(m, cfg.resolution) {
            consider(point, &mut eval)?;
        }
    } else {
        let mut rng = rng_from_seed(cfg.seed ^ (voter as u64).wrapping_mul(0x9e37_79b9));
        for _ in 0..cfg.random_samples {
            let point = random_allocation(&mut rng, m).into_vec();
            consider(point, &mut eval)?;
        }
    }

    let mut step = 1.0 / cfg.resolution as f64;
    for _ in 0..cfg.refinement_rounds {
        for _ in 0..MAX_CLIMB_SWEEPS {
            let mut improved = false;
            for from in 0..m {
                for to in 0..m {
                    if from == to || best[from] <= 0.0 {
                        continue;
                    }
                    let moved = step.min(best[from]);
                    let mut point = best.clone();
                    point[from] -= moved;
                    point[to] += moved;
                    let value = eval.disutility(&point)?;
                    if value < best_value - 1e-15 {
                        best_value = value;
                        best = point;
                        improved = true;
                    }
                }
            }
            if !improved {
                break;
            }
        }
        step /= 5.0;
    }

    let gain = (truthful_disutility - best_value).max(0.0);
    Ok(ManipulationResult {
        voter,
        truthful_disutility,
        best_misreport: Allocation::renormalized(best),
        best_disutility: best_value,
        gain,
        search_stats: SearchStats {
            candidates_evaluated: eval.evaluated,
            refinement_rounds: cfg.refinement_rounds,
        },
    })
}

/// Runs [`manipulation_search`] for every voter and returns the largest gain.
pub fn best_manipulation(
    mechanism: &dyn Mechanism,
    profile: &Profile,
    cfg: &SearchConfig,
    tol: &Tolerance,
) -> Result<ManipulationResult> {
    let mut best: Option<ManipulationResult> = None;
    for voter in 0..profile.n() {
        let result = manipulation_search(mechanism, profile, voter, cfg, tol)?;
        if best.as_ref().is_none_or(|b| result.gain > b.gain) {
            best = Some(result);
        }
    }
    Ok(best.expect("profiles have at least one voter"))
}
