//! Cutoff maps that cap an allocation's largest share, applied either to the
//! aggregate or to the individual votes, and the threshold derived from a
//! slow phantom system.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phantoms::PhantomSystem;
use crate::simplex::{Allocation, Profile, Tolerance};

const SCAN_POINTS: usize = 10_000;
const POSITION_EPS: f64 = 1e-9;
const MAX_BISECTION_STEPS: usize = 80;

/// How the cutoff threshold is chosen for a given `(n, m)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThresholdFn {
    Constant {
        tau: f64,
    },
    /// Derived from the mechanism's own phantom system, which must be slow.
    SlowDerived,
}

impl ThresholdFn {
    pub fn constant(tau: f64) -> Result<Self> {
        check_tau(tau)?;
        Ok(ThresholdFn::Constant { tau })
    }

    pub fn evaluate(&self, system: Option<&PhantomSystem>, m: usize) -> Result<f64> {
        match self {
            ThresholdFn::Constant { tau } => {
                check_tau(*tau)?;
                Ok(*tau)
            }
            ThresholdFn::SlowDerived => {
                let system = system.ok_or_else(|| {
                    Error::InvalidArgument(
                        "a slow-derived threshold needs a phantom-based mechanism".into(),
                    )
                })?;
                slow_threshold(system, m)
            }
        }
    }
}

/// Parameters of the pairwise cutoff used on two-voter profiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairCutoffParams {
    /// Votes above this share are candidates for cutting.
    pub upper: f64,
    /// The other voter's share at or below which the full cut applies.
    pub lower: f64,
}

impl Default for PairCutoffParams {
    fn default() -> Self {
        PairCutoffParams {
            upper: 0.8,
            lower: 0.7,
        }
    }
}

fn is_default_params(p: &PairCutoffParams) -> bool {
    *p == PairCutoffParams::default()
}

/// Which cutoff a mechanism applies and where.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CutoffKind {
    #[default]
    None,
    Aggregate {
        threshold: ThresholdFn,
    },
    PerVote {
        threshold: ThresholdFn,
    },
    UnanimousPair {
        #[serde(default, skip_serializing_if = "is_default_params")]
        params: PairCutoffParams,
    },
}

fn check_tau(tau: f64) -> Result<()> {
    if !(0.5..1.0).contains(&tau) {
        return Err(Error::InvalidThreshold(tau));
    }
    Ok(())
}

fn cut_values(values: &[f64], tau: f64) -> Result<Vec<f64>> {
    let above: Vec<usize> = (0..values.len()).filter(|&j| values[j] > tau).collect();
    match above.as_slice() {
        [] => Ok(values.to_vec()),
        &[k] => {
            let surplus = (values[k] - tau) / (values.len() - 1) as f64;
            Ok(values
                .iter()
                .enumerate()
                .map(|(j, &v)| if j == k { tau } else { v + surplus })
                .collect())
        }
        _ => Err(Error::Internal(format!(
            "{} coordinates exceed the threshold {tau}",
            above.len()
        ))),
    }
}

/// Caps the largest coordinate at `tau` and spreads the excess evenly over
/// the others.
pub fn aggregate_cutoff(a: &Allocation, tau: f64) -> Result<Allocation> {
    check_tau(tau)?;
    if a.max_value() <= tau {
        return Ok(a.clone());
    }
    Ok(Allocation::renormalized(cut_values(a.values(), tau)?))
}

/// [`aggregate_cutoff`] applied to each vote separately.
pub fn vote_cutoff(profile: &Profile, tau: f64) -> Result<Profile> {
    check_tau(tau)?;
    let votes = profile
        .votes()
        .iter()
        .map(|v| aggregate_cutoff(v, tau))
        .collect::<Result<Vec<_>>>()?;
    Profile::new(votes)
}

/// The pairwise cut with the default `0.8` / `0.7` parameters.
pub fn unanimous_vote_cutoff(v: &Allocation, w: &Allocation) -> Result<Allocation> {
    unanimous_vote_cutoff_with(v, w, &PairCutoffParams::default())
}

/// Cuts `v`'s top share above `params.upper` by an amount that fades in
/// linearly as the paired vote `w` drops from `upper` to `lower` on the same
/// alternative. Identical votes are never cut.
pub fn unanimous_vote_cutoff_with(
    v: &Allocation,
    w: &Allocation,
    params: &PairCutoffParams,
) -> Result<Allocation> {
    if v.dim() != 3 {
        return Err(Error::UnsupportedDimension { m: v.dim() });
    }
    if w.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: v.dim(),
            found: w.dim(),
        });
    }
    if !(params.lower < params.upper) {
        return Err(Error::InvalidArgument(format!(
            "pair cutoff needs lower < upper, got {} and {}",
            params.lower, params.upper
        )));
    }
    let k = v.argmax();
    if v[k] <= params.upper {
        return Ok(v.clone());
    }
    let factor = ((params.upper - w[k]) / (params.upper - params.lower)).clamp(0.0, 1.0);
    let gamma = (v[k] - params.upper) * factor;
    let values = v
        .values()
        .iter()
        .enumerate()
        .map(|(j, &x)| if j == k { x - gamma } else { x + gamma / 2.0 })
        .collect();
    Ok(Allocation::renormalized(values))
}

/// Smallest time at which `f_0` reaches one, if it ever does.
fn first_phantom_top(system: &PhantomSystem) -> Option<f64> {
    let reached = |t: f64| system.position(0, t) >= 1.0 - 1e-12;
    if !reached(1.0) {
        return None;
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..MAX_BISECTION_STEPS {
        if hi - lo <= Tolerance::default().eps_time {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if reached(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Whether the second-to-last phantom starts moving while the first is still
/// below one, and the last phantom is still at zero when the first reaches one.
pub fn is_slow(system: &PhantomSystem) -> bool {
    let n = system.n();
    let early_move = |t: f64| {
        system.position(0, t) < 1.0 - POSITION_EPS && system.position(n - 1, t) > POSITION_EPS
    };
    let overlaps = (0..=SCAN_POINTS)
        .map(|i| i as f64 / SCAN_POINTS as f64)
        .chain(system.breakpoint_hint())
        .any(early_move);
    if !overlaps {
        return false;
    }
    match first_phantom_top(system) {
        Some(t) => system.position(n, t) <= POSITION_EPS,
        None => false,
    }
}

/// `1 - f_{n-1}(t)` at the largest `t` with `f_0(t) + (m-1) f_{n-1}(t) <= 1`.
pub fn slow_threshold(system: &PhantomSystem, m: usize) -> Result<f64> {
    if m < 2 {
        return Err(Error::TooFewAlternatives { m });
    }
    if !is_slow(system) {
        return Err(Error::NotSlow(system.id().to_string()));
    }
    let n = system.n();
    let excess = |t: f64| system.position(0, t) + (m - 1) as f64 * system.position(n - 1, t) - 1.0;
    let t = if excess(1.0) <= 0.0 {
        1.0
    } else {
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..MAX_BISECTION_STEPS {
            if hi - lo <= Tolerance::default().eps_time {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if excess(mid) <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let tau = 1.0 - system.position(n - 1, t);
    check_tau(tau)?;
    Ok(tau)
}
