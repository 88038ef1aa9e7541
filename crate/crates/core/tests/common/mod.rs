//! Oracles and targeted generators shared by the property and acceptance suites.
#![allow(dead_code)]

use phantom_forge::verify::sampling::random_allocation;
use phantom_forge::{
    make_allocation, medians_at, run_moving_phantom, Allocation, BuiltinSystem, PhantomSystem,
    Profile, Tolerance,
};
use rand::Rng;

pub const EPS: f64 = 1e-9;

pub fn tol() -> Tolerance {
    Tolerance::default()
}

/// Normalizes `values` and wraps them as an allocation.
pub fn alloc(values: &[f64]) -> Allocation {
    let sum: f64 = values.iter().sum();
    let scaled: Vec<f64> = values.iter().map(|v| v / sum).collect();
    make_allocation(&scaled, &tol()).expect("normalized values")
}

pub fn profile(rows: &[Vec<f64>]) -> Profile {
    Profile::new(rows.iter().map(|r| alloc(r)).collect()).expect("non-empty")
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Piecewise-uniform phantom position written exactly as its two-regime
/// definition reads, kept separate from the library's rearranged form.
pub fn piecewise_uniform_literal(n: usize, k: usize, t: f64) -> f64 {
    let (nf, kf) = (n as f64, k as f64);
    let first_half = kf / nf <= 0.5;
    if t < 0.5 {
        if first_half {
            4.0 * t * (nf - kf) / nf - 2.0 * t
        } else {
            0.0
        }
    } else if first_half {
        (nf - kf) * (3.0 - 2.0 * t) / nf - 2.0 + 2.0 * t
    } else {
        (nf - kf) * (2.0 * t - 1.0) / nf
    }
}

/// Greedy-max medians follow `min(t, column max)` exactly.
pub fn check_greedymax_medians(p: &Profile, t: f64) -> Result<(), String> {
    let system = PhantomSystem::builtin(BuiltinSystem::GreedyMax, p.n()).unwrap();
    let medians = medians_at(&system, p, t).unwrap();
    for (j, &got) in medians.iter().enumerate() {
        let want = t.min(p.column_max(j));
        if got != want {
            return Err(format!("alternative {j} at t={t}: {got} != {want}"));
        }
    }
    Ok(())
}

/// Votes whose `j`-th share is at least `tau` and whose column maxima on the
/// other alternatives sum to at most `1 - tau`.
pub fn dominant_column_profile<R: Rng>(
    rng: &mut R,
    n: usize,
    m: usize,
    j: usize,
    tau: f64,
) -> Profile {
    let slack = (1.0 - tau) * rng.gen_range(0.2..1.0);
    let weights = random_allocation(rng, m - 1);
    let caps: Vec<f64> = weights.values().iter().map(|w| slack * w).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let rest: Vec<f64> = caps
                .iter()
                .map(|c| if i == 0 { *c } else { c * rng.gen::<f64>() })
                .collect();
            let top = 1.0 - rest.iter().sum::<f64>();
            let mut row = rest;
            row.insert(j, top);
            row
        })
        .collect();
    profile(&rows)
}

/// Profiles concentrated around the threshold on alternative `j`, so that
/// both sides of the extreme-output characterization occur.
pub fn near_threshold_profile<R: Rng>(
    rng: &mut R,
    n: usize,
    m: usize,
    j: usize,
    tau: f64,
) -> Profile {
    let lo = tau - 0.05;
    let hi = (tau + 0.3).min(1.0);
    let concentrate = rng.gen_bool(0.5);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let top = rng.gen_range(lo..hi);
            let rest = if concentrate {
                let mut r = vec![0.0; m - 1];
                r[rng.gen_range(0..m - 1)] = 1.0;
                r
            } else {
                random_allocation(rng, m - 1).into_vec()
            };
            let mut row: Vec<f64> = rest.iter().map(|x| (1.0 - top) * x).collect();
            row.insert(j, top);
            row
        })
        .collect();
    profile(&rows)
}

/// Closed form of greedy-max when some column dominates.
pub fn check_dominant_column(p: &Profile, j: usize) -> Result<(), String> {
    let system = PhantomSystem::builtin(BuiltinSystem::GreedyMax, p.n()).unwrap();
    let out = run_moving_phantom(&system, p, &tol()).map_err(|e| e.to_string())?;
    let mut want: Vec<f64> = (0..p.m()).map(|k| p.column_max(k)).collect();
    want[j] = 1.0 - (0..p.m()).filter(|&k| k != j).map(|k| want[k]).sum::<f64>();
    let d = max_diff(out.values(), &want);
    if d > EPS {
        return Err(format!("output {:?} vs closed form {want:?}", out.values()));
    }
    Ok(())
}

/// Outcome of the extreme-output characterization on one profile.
pub enum Characterization {
    Holds {
        extreme: bool,
    },
    /// Too close to a boundary for a floating-point verdict.
    Skipped,
}

/// `a_j > tau` iff `min_i p_ij > tau` and the other column maxima sum below `1 - tau`.
pub fn check_extreme_characterization(
    p: &Profile,
    j: usize,
    tau: f64,
) -> Result<Characterization, String> {
    let system = PhantomSystem::builtin(BuiltinSystem::GreedyMax, p.n()).unwrap();
    let out = run_moving_phantom(&system, p, &tol()).map_err(|e| e.to_string())?;
    let a_j = out.values()[j];
    let min_j = p.column_min(j);
    let others: f64 = (0..p.m())
        .filter(|&k| k != j)
        .map(|k| p.column_max(k))
        .sum();
    let margins = [a_j - tau, min_j - tau, (1.0 - tau) - others];
    if margins.iter().any(|d| d.abs() <= EPS) {
        return Ok(Characterization::Skipped);
    }
    let lhs = a_j > tau;
    let rhs = min_j > tau && others < 1.0 - tau;
    if lhs != rhs {
        return Err(format!(
            "a_j = {a_j}, min = {min_j}, other maxima = {others}, tau = {tau}"
        ));
    }
    Ok(Characterization::Holds { extreme: lhs })
}

/// Greedy-min bounds: normalization between 1/2 and (1+m)/(2m), outputs
/// between the column minimum and max(1/m, column minimum), and every
/// voter's least-favoured alternative receiving at least that voter's share.
pub fn check_greedymin_bounds(p: &Profile) -> Result<(), String> {
    let (n, m) = (p.n(), p.m());
    let system = PhantomSystem::builtin(BuiltinSystem::GreedyMin, n).unwrap();
    let sum_at = |t: f64| medians_at(&system, p, t).unwrap().iter().sum::<f64>();
    let upper_t = (1.0 + m as f64) / (2.0 * m as f64);
    if sum_at(0.5) > 1.0 + EPS {
        return Err(format!("sum at t=1/2 is {}", sum_at(0.5)));
    }
    if sum_at(upper_t) < 1.0 - EPS {
        return Err(format!("sum at t={upper_t} is {}", sum_at(upper_t)));
    }
    let out = run_moving_phantom(&system, p, &tol()).map_err(|e| e.to_string())?;
    let a = out.values();
    let center = 1.0 / m as f64;
    for j in 0..m {
        let min_j = p.column_min(j);
        if a[j] > center.max(min_j) + EPS {
            return Err(format!("a_{j} = {} above max(1/m, {min_j})", a[j]));
        }
        if a[j] < min_j - EPS {
            return Err(format!("a_{j} = {} below column minimum {min_j}", a[j]));
        }
    }
    for vote in p.votes() {
        let v = vote.values();
        let k = (0..m).fold(0, |best, j| if v[j] < v[best] { j } else { best });
        if a[k] < v[k] - EPS {
            return Err(format!(
                "a_{k} = {} below the voter's minimum share {}",
                a[k], v[k]
            ));
        }
    }
    Ok(())
}
