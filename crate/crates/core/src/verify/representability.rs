//! Deciding whether an allocation can be produced by some moving-phantom
//! mechanism on a given profile.
//!
//! For a fixed profile and target `a`, an ordered phantom vector
//! `q_0 >= ... >= q_n` reproduces `a` iff for every alternative at most `n` of
//! the `2n + 1` values (votes and phantoms) lie strictly above `a_j` and at
//! most `n` lie strictly below. These conditions only compare phantoms with
//! the finitely many vote and target values, so it suffices to search
//! phantoms over those values and one point strictly between each pair of
//! neighbours.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::{Allocation, Profile};

/// Values closer than this are treated as the same number.
pub const SNAP_EPS: f64 = 1e-9;
const MAX_FEASIBLE: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentabilityResult {
    pub feasible: bool,
    /// Phantom positions in decreasing order, when feasible.
    pub witness: Option<Vec<f64>>,
    pub candidate_set: Vec<f64>,
    pub blocking_explanation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyConsistency {
    pub consistent: bool,
    /// Comparable phantom vectors for the first and second profile.
    pub witness: Option<(Vec<f64>, Vec<f64>)>,
    pub explanation: String,
    /// Set when the enumeration hit its size cap; a `consistent = false`
    /// verdict is then not conclusive.
    pub truncated: bool,
}

/// Groups nearby values and maps each input to its group's representative.
#[derive(Debug, Clone)]
struct ValueTable {
    groups: Vec<(f64, f64, f64)>,
}

impl ValueTable {
    fn new(values: impl IntoIterator<Item = f64>) -> Self {
        let mut sorted: Vec<f64> = values.into_iter().chain([0.0, 1.0]).collect();
        sorted.sort_by(f64::total_cmp);
        let mut groups: Vec<(f64, f64, Vec<f64>)> = Vec::new();
        for v in sorted {
            match groups.last_mut() {
                Some((_, hi, members)) if v - *hi <= SNAP_EPS => {
                    *hi = v;
                    members.push(v);
                }
                _ => groups.push((v, v, vec![v])),
            }
        }
        let groups = groups
            .into_iter()
            .map(|(lo, hi, members)| {
                let rep = if lo <= SNAP_EPS {
                    0.0
                } else if hi >= 1.0 - SNAP_EPS {
                    1.0
                } else {
                    members.iter().sum::<f64>() / members.len() as f64
                };
                (lo, hi, rep)
            })
            .collect();
        ValueTable { groups }
    }

    fn snap(&self, x: f64) -> f64 {
        self.groups
            .iter()
            .find(|(lo, hi, _)| x >= lo - SNAP_EPS && x <= hi + SNAP_EPS)
            .map(|g| g.2)
            .unwrap_or(x)
    }

    /// Representatives plus midpoints, in decreasing order.
    fn candidates(&self) -> Vec<f64> {
        let reps: Vec<f64> = self.groups.iter().map(|g| g.2).collect();
        let mut out = Vec::with_capacity(2 * reps.len());
        for (i, &r) in reps.iter().enumerate() {
            out.push(r);
            if let Some(&next) = reps.get(i + 1) {
                out.push(0.5 * (r + next));
            }
        }
        out.reverse();
        out
    }
}

/// Per-alternative comparison data against a fixed candidate list.
struct Constraints {
    n: usize,
    /// `above[c][j]`: candidate `c` lies strictly above the target on `j`.
    above: Vec<Vec<bool>>,
    below: Vec<Vec<bool>>,
    votes_above: Vec<usize>,
    votes_below: Vec<usize>,
}

impl Constraints {
    fn new(table: &ValueTable, candidates: &[f64], profile: &Profile, a: &Allocation) -> Self {
        let m = profile.m();
        let targets: Vec<f64> = a.values().iter().map(|&x| table.snap(x)).collect();
        let mut votes_above = vec![0; m];
        let mut votes_below = vec![0; m];
        for (j, &target) in targets.iter().enumerate() {
            for v in profile.column(j).map(|x| table.snap(x)) {
                if v > target {
                    votes_above[j] += 1;
                } else if v < target {
                    votes_below[j] += 1;
                }
            }
        }
        let above = candidates
            .iter()
            .map(|&c| targets.iter().map(|&t| c > t).collect())
            .collect();
        let below = candidates
            .iter()
            .map(|&c| targets.iter().map(|&t| c < t).collect())
            .collect();
        Constraints {
            n: profile.n(),
            above,
            below,
            votes_above,
            votes_below,
        }
    }

    fn restricted(mut self, alternatives: &[usize]) -> Self {
        let keep = |row: &Vec<bool>| alternatives.iter().map(|&j| row[j]).collect::<Vec<bool>>();
        self.above = self.above.iter().map(keep).collect();
        self.below = self.below.iter().map(keep).collect();
        self.votes_above = alternatives.iter().map(|&j| self.votes_above[j]).collect();
        self.votes_below = alternatives.iter().map(|&j| self.votes_below[j]).collect();
        self
    }

    /// Visits every feasible phantom vector, as indices into the decreasing
    /// candidate list. Stops early when `visit` returns false.
    fn enumerate(&self, mut visit: impl FnMut(&[usize]) -> bool) {
        let m = self.votes_above.len();
        if self
            .votes_above
            .iter()
            .chain(&self.votes_below)
            .any(|&c| c > self.n)
        {
            return;
        }
        let mut chosen = Vec::with_capacity(self.n + 1);
        let mut above = self.votes_above.clone();
        let mut below = self.votes_below.clone();
        self.descend(0, &mut chosen, &mut above, &mut below, m, &mut visit);
    }

    fn descend(
        &self,
        start: usize,
        chosen: &mut Vec<usize>,
        above: &mut [usize],
        below: &mut [usize],
        m: usize,
        visit: &mut impl FnMut(&[usize]) -> bool,
    ) -> bool {
        if chosen.len() == self.n + 1 {
            return visit(chosen);
        }
        let remaining = self.n + 1 - chosen.len();
        for c in start..self.above.len() {
            // every later phantom is at or below candidate c
            let ok = (0..m).all(|j| {
                let up = above[j] + usize::from(self.above[c][j]);
                let down = below[j] + if self.below[c][j] { remaining } else { 0 };
                up <= self.n && down <= self.n
            });
            if !ok {
                continue;
            }
            for j in 0..m {
                above[j] += usize::from(self.above[c][j]);
                below[j] += usize::from(self.below[c][j]);
            }
            chosen.push(c);
            let keep_going = self.descend(c, chosen, above, below, m, visit);
            chosen.pop();
            for j in 0..m {
                above[j] -= usize::from(self.above[c][j]);
                below[j] -= usize::from(self.below[c][j]);
            }
            if !keep_going {
                return false;
            }
        }
        true
    }

    fn first_feasible(&self) -> Option<Vec<usize>> {
        let mut found = None;
        self.enumerate(|q| {
            found = Some(q.to_vec());
            false
        });
        found
    }
}

fn check_shapes(profile: &Profile, a: &Allocation) -> Result<()> {
    if profile.m() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: profile.m(),
            found: a.dim(),
        });
    }
    Ok(())
}

fn profile_values<'a>(profile: &'a Profile, a: &'a Allocation) -> impl Iterator<Item = f64> + 'a {
    profile
        .votes()
        .iter()
        .flat_map(|v| v.values().iter().copied())
        .chain(a.values().iter().copied())
}

fn explain_block(
    table: &ValueTable,
    candidates: &[f64],
    profile: &Profile,
    a: &Allocation,
) -> String {
    let m = profile.m();
    for j in 0..m {
        let alone = Constraints::new(table, candidates, profile, a).restricted(&[j]);
        if alone.first_feasible().is_none() {
            return format!(
                "no ordered phantom positions give median {:.12} on alternative {}",
                a[j],
                j + 1
            );
        }
    }
    for j in 1..m {
        let prefix: Vec<usize> = (0..=j).collect();
        let joint = Constraints::new(table, candidates, profile, a).restricted(&prefix);
        if joint.first_feasible().is_none() {
            return format!(
                "the phantom positions forced by alternatives 1..{} rule out median {:.12} on alternative {}",
                j,
                a[j],
                j + 1
            );
        }
    }
    "no ordered phantom vector matches all medians".to_string()
}

/// Whether some ordered phantom positions reproduce `a` as the medians on `profile`.
pub fn phantom_representable(profile: &Profile, a: &Allocation) -> Result<RepresentabilityResult> {
    check_shapes(profile, a)?;
    let table = ValueTable::new(profile_values(profile, a));
    let candidates = table.candidates();
    let constraints = Constraints::new(&table, &candidates, profile, a);
    match constraints.first_feasible() {
        Some(q) => Ok(RepresentabilityResult {
            feasible: true,
            witness: Some(q.iter().map(|&c| candidates[c]).collect()),
            candidate_set: candidates,
            blocking_explanation: None,
        }),
        None => Ok(RepresentabilityResult {
            feasible: false,
            witness: None,
            blocking_explanation: Some(explain_block(&table, &candidates, profile, a)),
            candidate_set: candidates,
        }),
    }
}

fn collect_feasible(constraints: &Constraints) -> (Vec<Vec<usize>>, bool) {
    let mut all = Vec::new();
    let mut truncated = false;
    constraints.enumerate(|q| {
        all.push(q.to_vec());
        if all.len() >= MAX_FEASIBLE {
            truncated = true;
            return false;
        }
        true
    });
    (all, truncated)
}

/// Candidate indices run in decreasing value order, so a larger index is a
/// smaller position.
fn dominated(low: &[usize], high: &[usize]) -> bool {
    low.iter().zip(high).all(|(l, h)| l >= h)
}

/// Whether one phantom family could produce `a1` on `p1` and `a2` on `p2`.
///
/// Both outputs must be representable, and some pair of representing vectors
/// must be componentwise comparable, since a single family evaluated at two
/// times yields comparable positions. A `true` answer means the pair does
/// not refute a common family; it does not construct one.
pub fn phantom_family_consistent(
    p1: &Profile,
    a1: &Allocation,
    p2: &Profile,
    a2: &Allocation,
) -> Result<FamilyConsistency> {
    check_shapes(p1, a1)?;
    check_shapes(p2, a2)?;
    if p1.n() != p2.n() {
        return Err(Error::DimensionMismatch {
            expected: p1.n(),
            found: p2.n(),
        });
    }
    let table = ValueTable::new(profile_values(p1, a1).chain(profile_values(p2, a2)));
    let candidates = table.candidates();
    let (first, t1) = collect_feasible(&Constraints::new(&table, &candidates, p1, a1));
    let (second, t2) = collect_feasible(&Constraints::new(&table, &candidates, p2, a2));
    let truncated = t1 || t2;
    let to_values = |q: &[usize]| q.iter().map(|&c| candidates[c]).collect::<Vec<f64>>();
    if first.is_empty() || second.is_empty() {
        let which = match (first.is_empty(), second.is_empty()) {
            (true, true) => "neither output is",
            (true, false) => "the first output is not",
            _ => "the second output is not",
        };
        return Ok(FamilyConsistency {
            consistent: false,
            witness: None,
            explanation: format!("{which} representable by any phantom positions"),
            truncated,
        });
    }
    for q in &first {
        for r in &second {
            if dominated(q, r) || dominated(r, q) {
                return Ok(FamilyConsistency {
                    consistent: true,
                    witness: Some((to_values(q), to_values(r))),
                    explanation: "found componentwise comparable phantom vectors".into(),
                    truncated,
                });
            }
        }
    }
    Ok(FamilyConsistency {
        consistent: false,
        witness: None,
        explanation: format!(
            "{} and {} representing vectors, but no pair is componentwise comparable",
            first.len(),
            second.len()
        ),
        truncated,
    })
}
