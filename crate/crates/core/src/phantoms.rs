//! Phantom systems and the moving-phantom aggregation rule.
//!
//! A phantom system for `n` voters is a list of `n + 1` non-decreasing
//! functions `f_0 >= f_1 >= ... >= f_n` of a time parameter `t` in `[0, 1]`.
//! The mechanism takes, per alternative, the median of the `n` votes and the
//! `n + 1` phantom positions, and moves time forward until the medians sum to
//! one.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::{Allocation, Profile, Tolerance};

const MAX_BISECTION_STEPS: usize = 80;

/// The built-in phantom families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "&'static str")]
pub enum BuiltinSystem {
    GreedyMax,
    GreedyMin,
    MaxUtilitarianWelfare,
    IndependentMarkets,
    Ladder,
    PiecewiseUniform,
}

impl BuiltinSystem {
    pub const ALL: [BuiltinSystem; 6] = [
        BuiltinSystem::GreedyMax,
        BuiltinSystem::GreedyMin,
        BuiltinSystem::MaxUtilitarianWelfare,
        BuiltinSystem::IndependentMarkets,
        BuiltinSystem::Ladder,
        BuiltinSystem::PiecewiseUniform,
    ];

    pub fn id(self) -> &'static str {
        match self {
            BuiltinSystem::GreedyMax => "greedymax",
            BuiltinSystem::GreedyMin => "greedymin",
            BuiltinSystem::MaxUtilitarianWelfare => "max_utilitarian_welfare",
            BuiltinSystem::IndependentMarkets => "independent_markets",
            BuiltinSystem::Ladder => "ladder",
            BuiltinSystem::PiecewiseUniform => "piecewise_uniform",
        }
    }

    /// Position of phantom `k` at time `t` for `n` voters.
    pub fn position(self, n: usize, k: usize, t: f64) -> f64 {
        let nf = n as f64;
        let kf = k as f64;
        match self {
            BuiltinSystem::GreedyMax => {
                if k < n {
                    t
                } else {
                    0.0
                }
            }
            BuiltinSystem::GreedyMin => {
                if k == 0 {
                    (2.0 * t).min(1.0)
                } else {
                    (2.0 * t - 1.0).max(0.0)
                }
            }
            BuiltinSystem::MaxUtilitarianWelfare => (t * (nf + 1.0) - kf).clamp(0.0, 1.0),
            BuiltinSystem::IndependentMarkets => (t * (nf - kf) / nf).max(0.0),
            BuiltinSystem::Ladder => (t - kf / nf).max(0.0),
            BuiltinSystem::PiecewiseUniform => {
                let lower_half = 2 * k <= n;
                // expanded forms of 4t(n-k)/n - 2t and (n-k)(3-2t)/n - 2 + 2t,
                // which stay monotone under rounding
                let value = if t < 0.5 {
                    if lower_half {
                        2.0 * t * (nf - 2.0 * kf) / nf
                    } else {
                        0.0
                    }
                } else if lower_half {
                    1.0 - kf * (3.0 - 2.0 * t) / nf
                } else {
                    (nf - kf) * (2.0 * t - 1.0) / nf
                };
                value.clamp(0.0, 1.0)
            }
        }
    }

    /// Times in `(0, 1)` where some phantom has a kink.
    pub fn breakpoints(self, n: usize) -> Vec<f64> {
        match self {
            BuiltinSystem::GreedyMax | BuiltinSystem::IndependentMarkets => Vec::new(),
            BuiltinSystem::GreedyMin | BuiltinSystem::PiecewiseUniform => vec![0.5],
            BuiltinSystem::MaxUtilitarianWelfare => {
                (1..=n).map(|k| k as f64 / (n + 1) as f64).collect()
            }
            BuiltinSystem::Ladder => (1..n).map(|k| k as f64 / n as f64).collect(),
        }
    }
}

impl fmt::Display for BuiltinSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl From<BuiltinSystem> for &'static str {
    fn from(system: BuiltinSystem) -> Self {
        system.id()
    }
}

impl TryFrom<String> for BuiltinSystem {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl FromStr for BuiltinSystem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        let system = match key.as_str() {
            "greedymax" | "greedy_max" => BuiltinSystem::GreedyMax,
            "greedymin" | "greedy_min" => BuiltinSystem::GreedyMin,
            "max_utilitarian_welfare" | "maxutilitarianwelfare" | "muw" => {
                BuiltinSystem::MaxUtilitarianWelfare
            }
            "independent_markets" | "independentmarkets" | "im" => {
                BuiltinSystem::IndependentMarkets
            }
            "ladder" => BuiltinSystem::Ladder,
            "piecewise_uniform" | "piecewiseuniform" | "piecewise" => {
                BuiltinSystem::PiecewiseUniform
            }
            _ => return Err(Error::UnknownSystem(s.to_string())),
        };
        Ok(system)
    }
}

/// A user-supplied phantom system given by breakpoint rows
/// `[t, f_0(t), ..., f_n(t)]`, linearly interpolated in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomTable {
    pub id: String,
    pub n: usize,
    pub breakpoints: Vec<Vec<f64>>,
}

impl PhantomTable {
    pub fn from_json(text: &str) -> Result<Self> {
        let table: PhantomTable = serde_json::from_str(text)?;
        table.validate()?;
        Ok(table)
    }

    /// Checks the row layout and the phantom axioms at every breakpoint.
    ///
    /// Interpolation is linear, so the axioms at the rows imply them everywhere.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSystem(format!("{}: {msg}", self.id)));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.breakpoints.len() < 2 {
            return bad("at least two breakpoint rows are required".into());
        }
        for (r, row) in self.breakpoints.iter().enumerate() {
            if row.len() != self.n + 2 {
                return bad(format!(
                    "row {r} has {} entries, expected {}",
                    row.len(),
                    self.n + 2
                ));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return bad(format!("row {r} contains a non-finite value"));
            }
            if row[1..].iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return bad(format!("row {r} has a position outside [0, 1]"));
            }
            if row[1..].windows(2).any(|w| w[0] < w[1]) {
                return bad(format!("row {r} is not ordered f_0 >= ... >= f_n"));
            }
        }
        let first = &self.breakpoints[0];
        let last = &self.breakpoints[self.breakpoints.len() - 1];
        if first[0] != 0.0 || last[0] != 1.0 {
            return bad("rows must start at t = 0 and end at t = 1".into());
        }
        if first[1..].iter().any(|&v| v != 0.0) {
            return bad("every phantom must start at 0".into());
        }
        for (r, pair) in self.breakpoints.windows(2).enumerate() {
            if pair[1][0] <= pair[0][0] {
                return bad(format!("times must increase strictly (row {})", r + 1));
            }
            if pair[0][1..].iter().zip(&pair[1][1..]).any(|(a, b)| b < a) {
                return bad(format!(
                    "a phantom decreases between rows {r} and {}",
                    r + 1
                ));
            }
        }
        Ok(())
    }

    fn position(&self, k: usize, t: f64) -> f64 {
        let rows = &self.breakpoints;
        let upper = rows
            .partition_point(|row| row[0] < t)
            .clamp(1, rows.len() - 1);
        let (a, b) = (&rows[upper - 1], &rows[upper]);
        let w = ((t - a[0]) / (b[0] - a[0])).clamp(0.0, 1.0);
        a[k + 1] + w * (b[k + 1] - a[k + 1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemSource {
    Builtin(BuiltinSystem),
    Table(PhantomTable),
}

/// A phantom system bound to a voter count.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSystem {
    source: SystemSource,
    n: usize,
}

pub fn builtin_system(id: &str, n: usize) -> Result<PhantomSystem> {
    PhantomSystem::builtin(id.parse()?, n)
}

impl PhantomSystem {
    pub fn builtin(system: BuiltinSystem, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyProfile);
        }
        Ok(PhantomSystem {
            source: SystemSource::Builtin(system),
            n,
        })
    }

    pub fn from_table(table: PhantomTable) -> Result<Self> {
        table.validate()?;
        let n = table.n;
        Ok(PhantomSystem {
            source: SystemSource::Table(table),
            n,
        })
    }

    pub fn id(&self) -> &str {
        match &self.source {
            SystemSource::Builtin(b) => b.id(),
            SystemSource::Table(t) => &t.id,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn source(&self) -> &SystemSource {
        &self.source
    }

    pub fn builtin_kind(&self) -> Option<BuiltinSystem> {
        match self.source {
            SystemSource::Builtin(b) => Some(b),
            SystemSource::Table(_) => None,
        }
    }

    /// Position of phantom `k` (0-based, `k <= n`) at time `t`.
    pub fn position(&self, k: usize, t: f64) -> f64 {
        debug_assert!(k <= self.n);
        match &self.source {
            SystemSource::Builtin(b) => b.position(self.n, k, t),
            SystemSource::Table(table) => table.position(k, t),
        }
    }

    /// All `n + 1` positions at time `t`.
    pub fn positions(&self, t: f64) -> Vec<f64> {
        (0..=self.n).map(|k| self.position(k, t)).collect()
    }

    fn fill_positions(&self, t: f64, out: &mut [f64]) {
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = self.position(k, t);
        }
    }

    pub fn breakpoint_hint(&self) -> Vec<f64> {
        match &self.source {
            SystemSource::Builtin(b) => b.breakpoints(self.n),
            SystemSource::Table(table) => table
                .breakpoints
                .iter()
                .map(|row| row[0])
                .filter(|&t| t > 0.0 && t < 1.0)
                .collect(),
        }
    }

    /// Checks start at zero, monotonicity in time, ordering and range on a
    /// uniform grid of `grid_size` points plus the breakpoint hints.
    pub fn validate_axioms(&self, grid_size: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSystem(format!("{}: {msg}", self.id())));
        let mut times: Vec<f64> = (0..grid_size.max(2))
            .map(|i| i as f64 / (grid_size.max(2) - 1) as f64)
            .chain(self.breakpoint_hint())
            .collect();
        times.sort_by(f64::total_cmp);
        let mut previous: Option<Vec<f64>> = None;
        for &t in &times {
            let current = self.positions(t);
            if t == 0.0 && current.iter().any(|&v| v != 0.0) {
                return bad("phantoms must start at 0".into());
            }
            if current.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return bad(format!("a phantom leaves [0, 1] at t = {t}"));
            }
            if current.windows(2).any(|w| w[0] < w[1]) {
                return bad(format!("phantoms are not ordered at t = {t}"));
            }
            if let Some(prev) = &previous {
                if prev.iter().zip(&current).any(|(a, b)| b < a) {
                    return bad(format!("a phantom moves backwards before t = {t}"));
                }
            }
            previous = Some(current);
        }
        Ok(())
    }
}

fn check_profile(system: &PhantomSystem, profile: &Profile) -> Result<()> {
    if system.n() != profile.n() {
        return Err(Error::DimensionMismatch {
            expected: system.n(),
            found: profile.n(),
        });
    }
    Ok(())
}

/// Scratch space for repeated median evaluations on one profile.
struct MedianEval<'a> {
    system: &'a PhantomSystem,
    profile: &'a Profile,
    phantoms: Vec<f64>,
    pool: Vec<f64>,
}

impl<'a> MedianEval<'a> {
    fn new(system: &'a PhantomSystem, profile: &'a Profile) -> Self {
        let n = profile.n();
        MedianEval {
            system,
            profile,
            phantoms: vec![0.0; n + 1],
            pool: Vec::with_capacity(2 * n + 1),
        }
    }

    fn medians_into(&mut self, t: f64, out: &mut Vec<f64>) {
        self.system.fill_positions(t, &mut self.phantoms);
        out.clear();
        let n = self.profile.n();
        for j in 0..self.profile.m() {
            self.pool.clear();
            self.pool.extend_from_slice(&self.phantoms);
            self.pool.extend(self.profile.column(j));
            self.pool.sort_unstable_by(f64::total_cmp);
            out.push(self.pool[n]);
        }
    }

    fn sum(&mut self, t: f64, scratch: &mut Vec<f64>) -> f64 {
        self.medians_into(t, scratch);
        scratch.iter().sum()
    }
}

/// Per-alternative medians of the votes and the phantom positions at time `t`.
pub fn medians_at(system: &PhantomSystem, profile: &Profile, t: f64) -> Result<Vec<f64>> {
    check_profile(system, profile)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!(
            "time {t} is outside [0, 1]"
        )));
    }
    let mut out = Vec::with_capacity(profile.m());
    MedianEval::new(system, profile).medians_into(t, &mut out);
    Ok(out)
}

/// Result of running a moving-phantom mechanism.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomRun {
    pub t_star: f64,
    /// Raw medians at `t_star` before the final division by their sum.
    pub medians: Vec<f64>,
    /// Phantom positions at `t_star`.
    pub phantoms: Vec<f64>,
    pub allocation: Allocation,
}

/// Bisection for the smallest `t` where the medians sum to one.
pub fn solve(system: &PhantomSystem, profile: &Profile, tol: &Tolerance) -> Result<PhantomRun> {
    check_profile(system, profile)?;
    let mut eval = MedianEval::new(system, profile);
    let mut scratch = Vec::with_capacity(profile.m());
    let top = eval.sum(1.0, &mut scratch);
    if top < 1.0 - tol.eps_simplex {
        return Err(Error::NotNormalizable { sum: top });
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..MAX_BISECTION_STEPS {
        if hi - lo <= tol.eps_time {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if eval.sum(mid, &mut scratch) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // The sum is piecewise linear, so a secant step inside the final bracket
    // usually lands on the root up to rounding.
    let (s_lo, s_hi) = (eval.sum(lo, &mut scratch), eval.sum(hi, &mut scratch));
    if s_hi > s_lo && s_lo < 1.0 {
        let t = lo + (1.0 - s_lo) * (hi - lo) / (s_hi - s_lo);
        if (lo..=hi).contains(&t) && (eval.sum(t, &mut scratch) - 1.0).abs() < (s_hi - 1.0).abs() {
            hi = t;
        }
    }
    let mut medians = Vec::with_capacity(profile.m());
    eval.medians_into(hi, &mut medians);
    let sum: f64 = medians.iter().sum();
    if !(sum > 0.0) || (sum - 1.0).abs() > tol.eps_simplex.max(1e-6) {
        return Err(Error::Internal(format!(
            "medians sum to {sum} at the normalization time of {}",
            system.id()
        )));
    }
    Ok(PhantomRun {
        t_star: hi,
        allocation: Allocation::renormalized(medians.clone()),
        medians,
        phantoms: system.positions(hi),
    })
}

pub fn normalization_time(
    system: &PhantomSystem,
    profile: &Profile,
    tol: &Tolerance,
) -> Result<f64> {
    Ok(solve(system, profile, tol)?.t_star)
}

pub fn run_moving_phantom(
    system: &PhantomSystem,
    profile: &Profile,
    tol: &Tolerance,
) -> Result<Allocation> {
    Ok(solve(system, profile, tol)?.allocation)
}

/// Water-filling over alternatives ordered by `key`, capping at the key while
/// it stays on the correct side of the even share of the remaining budget.
fn greedy_fill(keys: Vec<f64>, ascending: bool) -> Allocation {
    let m = keys.len();
    let mut order: Vec<usize> = (0..m).collect();
    if ascending {
        order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]));
    } else {
        order.sort_by(|&a, &b| keys[b].total_cmp(&keys[a]));
    }
    let mut out = vec![0.0; m];
    let mut budget = 1.0;
    for (assigned, &j) in order.iter().enumerate() {
        let share = budget / (m - assigned) as f64;
        let keep = if ascending {
            keys[j] < share
        } else {
            keys[j] > share
        };
        if keep {
            out[j] = keys[j];
            budget -= keys[j];
        } else {
            for &rest in &order[assigned..] {
                out[rest] = share;
            }
            break;
        }
    }
    Allocation::renormalized(out)
}

/// Direct form of the greedy-max rule: small maxima are granted in full and
/// the remaining alternatives split what is left evenly.
pub fn greedy_max_direct(profile: &Profile) -> Allocation {
    greedy_fill(
        (0..profile.m()).map(|j| profile.column_max(j)).collect(),
        true,
    )
}

/// Direct form of the greedy-min rule: large minima are granted in full and
/// the remaining alternatives split what is left evenly.
pub fn greedy_min_direct(profile: &Profile) -> Allocation {
    greedy_fill(
        (0..profile.m()).map(|j| profile.column_min(j)).collect(),
        false,
    )
}

/// Medians and their sums sampled on a uniform time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianTrace {
    pub t_grid: Vec<f64>,
    pub medians: Vec<Vec<f64>>,
    pub sums: Vec<f64>,
}

impl MedianTrace {
    pub fn header(m: usize) -> String {
        let mut cols = vec!["t".to_string()];
        cols.extend((1..=m).map(|j| format!("median_{j}")));
        cols.push("sum".into());
        cols.join(",")
    }

    pub fn push(&mut self, t: f64, medians: Vec<f64>) {
        self.sums.push(medians.iter().sum());
        self.t_grid.push(t);
        self.medians.push(medians);
    }

    /// CSV with the fixed `t,median_1,...,median_m,sum` header.
    pub fn to_csv(&self, format_number: impl Fn(f64) -> String) -> String {
        let m = self.medians.first().map_or(0, Vec::len);
        let mut out = Self::header(m);
        out.push('\n');
        for ((t, row), sum) in self.t_grid.iter().zip(&self.medians).zip(&self.sums) {
            let mut cells = vec![format_number(*t)];
            cells.extend(row.iter().map(|&v| format_number(v)));
            cells.push(format_number(*sum));
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn median_trace(
    system: &PhantomSystem,
    profile: &Profile,
    grid_size: usize,
) -> Result<MedianTrace> {
    check_profile(system, profile)?;
    if grid_size < 2 {
        return Err(Error::InvalidArgument(format!(
            "grid size must be at least 2, got {grid_size}"
        )));
    }
    let mut trace = MedianTrace {
        t_grid: Vec::with_capacity(grid_size),
        medians: Vec::with_capacity(grid_size),
        sums: Vec::with_capacity(grid_size),
    };
    let mut eval = MedianEval::new(system, profile);
    for i in 0..grid_size {
        let t = i as f64 / (grid_size - 1) as f64;
        let mut row = Vec::with_capacity(profile.m());
        eval.medians_into(t, &mut row);
        trace.push(t, row);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn profile(m: usize, rows: &[&[f64]]) -> Profile {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        Profile::from_rows(m, &rows, &Tolerance::default()).unwrap()
    }

    fn sys(id: &str, n: usize) -> PhantomSystem {
        builtin_system(id, n).unwrap()
    }

    #[test]
    fn closed_form_positions() {
        assert_eq!(sys("greedymax", 3).position(1, 0.4), 0.4);
        assert_eq!(sys("greedymax", 3).position(3, 0.4), 0.0);
        assert_abs_diff_eq!(sys("independent_markets", 4).position(1, 0.5), 0.375);
        assert_abs_diff_eq!(sys("ladder", 4).position(2, 0.7), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(sys("max_utilitarian_welfare", 2).position(1, 0.5), 0.5);
        assert_abs_diff_eq!(sys("greedymin", 2).position(0, 0.3), 0.6);
        assert_abs_diff_eq!(sys("greedymin", 2).position(1, 0.7), 0.4, epsilon = 1e-15);
    }

    #[test]
    fn piecewise_uniform_branches() {
        let pu = sys("piecewise_uniform", 4);
        // k = 1 lies in the lower half: 4t(3/4) - 2t = t before 1/2
        assert_abs_diff_eq!(pu.position(1, 0.25), 0.25, epsilon = 1e-15);
        // after 1/2: (3/4)(3 - 2t) - 2 + 2t, equal to 1/2 at t = 1/2 and 3/4 at t = 1
        assert_abs_diff_eq!(pu.position(1, 0.5), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(pu.position(1, 1.0), 0.75, epsilon = 1e-15);
        // k = 3 lies in the upper half: zero before 1/2, (1/4)(2t - 1) after
        assert_eq!(pu.position(3, 0.4), 0.0);
        assert_abs_diff_eq!(pu.position(3, 1.0), 0.25, epsilon = 1e-15);
        assert_eq!(pu.position(0, 1.0), 1.0);
    }

    #[test]
    fn unknown_system_is_rejected() {
        assert!(matches!(
            builtin_system("nosuch", 2),
            Err(Error::UnknownSystem(_))
        ));
        assert_eq!(
            "IM".parse::<BuiltinSystem>().unwrap(),
            BuiltinSystem::IndependentMarkets
        );
    }

    #[test]
    fn builtins_satisfy_axioms() {
        for system in BuiltinSystem::ALL {
            for n in 1..=8 {
                PhantomSystem::builtin(system, n)
                    .unwrap()
                    .validate_axioms(1001)
                    .unwrap();
            }
        }
    }

    #[test]
    fn medians_examples() {
        let p = profile(3, &[&[1.0, 0.0, 0.0], &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]]);
        let med = medians_at(&sys("greedymax", 2), &p, 0.2).unwrap();
        assert_eq!(med, vec![0.2, 0.2, 0.2]);
        let zero = medians_at(&sys("ladder", 2), &p, 0.0).unwrap();
        assert_eq!(zero, vec![0.0, 0.0, 0.0]);
        let q = profile(3, &[&[0.5, 0.3, 0.2], &[0.5, 0.3, 0.2]]);
        let med = medians_at(&sys("greedymin", 2), &q, 0.5).unwrap();
        assert_eq!(med, vec![0.5, 0.3, 0.2]);
        assert!(medians_at(&sys("greedymin", 3), &q, 0.5).is_err());
    }

    #[test]
    fn normalization_examples() {
        let tol = Tolerance::default();
        let lb = crate::simplex::lower_bound_profile(2, 3).unwrap();
        let t = normalization_time(&sys("greedymax", 2), &lb, &tol).unwrap();
        assert_abs_diff_eq!(t, 1.0 / 3.0, epsilon = 1e-9);

        let u = profile(3, &[&[0.5, 0.3, 0.2][..]; 3]);
        let t = normalization_time(&sys("greedymax", 3), &u, &tol).unwrap();
        assert_abs_diff_eq!(t, 0.5, epsilon = 1e-9);

        let prop = profile(3, &[&[1.0, 0.0, 0.0], &[0.75, 0.25, 0.0]]);
        let run = solve(&sys("greedymax", 2), &prop, &tol).unwrap();
        assert_abs_diff_eq!(run.t_star, 0.75, epsilon = 1e-9);
        assert_abs_diff_eq!(run.allocation[0], 0.75, epsilon = 1e-9);
        assert_abs_diff_eq!(run.allocation[1], 0.25, epsilon = 1e-9);
        assert_abs_diff_eq!(run.allocation[2], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn greedymin_reference_profile() {
        let tol = Tolerance::default();
        let p = profile(3, &[&[0.8, 0.18, 0.02], &[0.7, 0.3, 0.0]]);
        let expected = [0.7, 0.18, 0.12];
        let phantom = run_moving_phantom(&sys("greedymin", 2), &p, &tol).unwrap();
        let direct = greedy_min_direct(&p);
        for j in 0..3 {
            assert_abs_diff_eq!(phantom[j], expected[j], epsilon = 1e-9);
            assert_abs_diff_eq!(direct[j], expected[j], epsilon = 1e-12);
        }
        let spread = profile(3, &[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
        for &v in greedy_min_direct(&spread).values() {
            assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn greedy_max_direct_examples() {
        let lb = crate::simplex::lower_bound_profile(2, 3).unwrap();
        for &v in greedy_max_direct(&lb).values() {
            assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-15);
        }
        let p = profile(3, &[&[1.0, 0.0, 0.0], &[0.75, 0.25, 0.0]]);
        assert_eq!(greedy_max_direct(&p).values(), &[0.75, 0.25, 0.0]);
    }

    #[test]
    fn unreachable_normalization_is_reported() {
        // every phantom stays below 0.2, so two alternatives with one vote
        // each cannot reach a unit sum
        let table = PhantomTable {
            id: "low".into(),
            n: 1,
            breakpoints: vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.2, 0.0]],
        };
        let system = PhantomSystem::from_table(table).unwrap();
        let p = profile(2, &[&[0.5, 0.5]]);
        assert!(matches!(
            run_moving_phantom(&system, &p, &Tolerance::default()),
            Err(Error::NotNormalizable { .. })
        ));
    }

    #[test]
    fn table_interpolation_matches_builtin() {
        let n = 3;
        let ladder = sys("ladder", n);
        let mut times = vec![0.0];
        times.extend(ladder.breakpoint_hint());
        times.push(1.0);
        let rows = times
            .iter()
            .map(|&t| {
                let mut row = vec![t];
                row.extend(ladder.positions(t));
                row
            })
            .collect();
        let table = PhantomSystem::from_table(PhantomTable {
            id: "ladder_table".into(),
            n,
            breakpoints: rows,
        })
        .unwrap();
        for i in 0..=200 {
            let t = i as f64 / 200.0;
            for k in 0..=n {
                assert_abs_diff_eq!(table.position(k, t), ladder.position(k, t), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn table_validation_rejects_bad_rows() {
        let unordered = PhantomTable {
            id: "bad".into(),
            n: 1,
            breakpoints: vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.5, 1.0]],
        };
        assert!(PhantomSystem::from_table(unordered).is_err());
        let decreasing = PhantomTable {
            id: "bad".into(),
            n: 1,
            breakpoints: vec![
                vec![0.0, 0.0, 0.0],
                vec![0.5, 1.0, 0.5],
                vec![1.0, 1.0, 0.2],
            ],
        };
        assert!(PhantomSystem::from_table(decreasing).is_err());
        let text = r#"{"id":"x","n":1,"breakpoints":[[0,0,0],[1,1,1]]}"#;
        assert!(PhantomTable::from_json(text).is_ok());
    }

    #[test]
    fn trace_shape() {
        let lb = crate::simplex::lower_bound_profile(2, 3).unwrap();
        let trace = median_trace(&sys("greedymax", 2), &lb, 2).unwrap();
        assert_eq!(trace.t_grid, vec![0.0, 1.0]);
        let trace = median_trace(&sys("greedymax", 2), &lb, 301).unwrap();
        assert_abs_diff_eq!(trace.sums[100], 1.0, epsilon = 1e-12);
        assert!(trace.sums.windows(2).all(|w| w[0] <= w[1]));
        let csv = trace.to_csv(|v| format!("{v}"));
        assert!(csv.starts_with("t,median_1,median_2,median_3,sum\n"));
        assert!(median_trace(&sys("greedymax", 2), &lb, 1).is_err());
    }
}
