//! Points of the standard simplex, voter profiles and the distances between them.
//!
//! An [`Allocation`] is a division of a unit budget over `m >= 2` alternatives.
//! A [`Profile`] is the ordered list of the `n` allocations reported by the voters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerical margins shared by every operation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    /// Slack allowed on simplex membership (entry signs and the unit sum).
    pub eps_simplex: f64,
    /// Stopping width for the bisection drivers.
    pub eps_time: f64,
    /// A manipulation counts only if it improves the disutility by more than this.
    pub eps_gain: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            eps_simplex: 1e-9,
            eps_time: 1e-12,
            eps_gain: 1e-7,
        }
    }
}

impl Tolerance {
    pub fn new(eps_simplex: f64, eps_time: f64, eps_gain: f64) -> Result<Self> {
        let tol = Tolerance {
            eps_simplex,
            eps_time,
            eps_gain,
        };
        tol.validate()?;
        Ok(tol)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("eps_simplex", self.eps_simplex),
            ("eps_time", self.eps_time),
            ("eps_gain", self.eps_gain),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidTolerance(format!(
                    "{name} must be strictly positive, got {value}"
                )));
            }
        }
        if self.eps_time >= self.eps_simplex {
            return Err(Error::InvalidTolerance(format!(
                "eps_time ({}) must be smaller than eps_simplex ({})",
                self.eps_time, self.eps_simplex
            )));
        }
        Ok(())
    }

    pub fn with_eps_gain(mut self, eps_gain: f64) -> Result<Self> {
        self.eps_gain = eps_gain;
        self.validate()?;
        Ok(self)
    }
}

/// A budget division: non-negative shares over `m >= 2` alternatives summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Allocation(Vec<f64>);

impl Allocation {
    /// Validates `values` against the simplex and renormalizes by their sum.
    pub fn new(values: &[f64], tol: &Tolerance) -> Result<Self> {
        make_allocation(values, tol)
    }

    /// The barycenter `(1/m, ..., 1/m)`.
    pub fn center(m: usize) -> Result<Self> {
        check_dimension(m)?;
        Ok(Allocation(vec![1.0 / m as f64; m]))
    }

    /// The vertex putting the whole budget on alternative `j`.
    pub fn vertex(m: usize, j: usize) -> Result<Self> {
        check_dimension(m)?;
        if j >= m {
            return Err(Error::InvalidArgument(format!(
                "vertex index {j} out of range for m = {m}"
            )));
        }
        let mut values = vec![0.0; m];
        values[j] = 1.0;
        Ok(Allocation(values))
    }

    /// Clamps tiny negative noise and divides by the sum.
    ///
    /// Used on outputs whose construction guarantees simplex membership up to
    /// rounding (medians at a normalization time, cutoff images).
    pub(crate) fn renormalized(mut values: Vec<f64>) -> Self {
        for v in values.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let sum: f64 = values.iter().sum();
        if sum > 0.0 {
            for v in values.iter_mut() {
                *v /= sum;
            }
        }
        Allocation(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Index of the largest coordinate (first one on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (j, &v) in self.0.iter().enumerate() {
            if v > self.0[best] {
                best = j;
            }
        }
        best
    }

    pub fn max_value(&self) -> f64 {
        self.0[self.argmax()]
    }
}

impl std::ops::Index<usize> for Allocation {
    type Output = f64;

    fn index(&self, index: usize) -> &f64 {
        &self.0[index]
    }
}

impl TryFrom<Vec<f64>> for Allocation {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        make_allocation(&values, &Tolerance::default())
    }
}

impl From<Allocation> for Vec<f64> {
    fn from(a: Allocation) -> Self {
        a.0
    }
}

fn check_dimension(m: usize) -> Result<()> {
    if m < 2 {
        return Err(Error::TooFewAlternatives { m });
    }
    Ok(())
}

const ROUNDING_SLACK: f64 = 4.0 * f64::EPSILON;

pub fn make_allocation(values: &[f64], tol: &Tolerance) -> Result<Allocation> {
    check_dimension(values.len())?;
    for (index, &value) in values.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite { index });
        }
        if value < -tol.eps_simplex {
            return Err(Error::NegativeEntry { index, value });
        }
    }
    let sum: f64 = values.iter().sum();
    if (sum - 1.0).abs() > tol.eps_simplex {
        return Err(Error::SumOutOfRange { sum });
    }
    let clamped: Vec<f64> = values.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let clamped_sum: f64 = clamped.iter().sum();
    // Leave rounding-level drift alone so that parsing is idempotent.
    if (clamped_sum - 1.0).abs() <= ROUNDING_SLACK * values.len() as f64 {
        return Ok(Allocation(clamped));
    }
    Ok(Allocation(
        clamped.into_iter().map(|v| v / clamped_sum).collect(),
    ))
}

fn check_same_dim(a: &Allocation, b: &Allocation) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

/// The l1 distance, i.e. a voter's disutility for an aggregate.
pub fn l1_distance(a: &Allocation, b: &Allocation) -> Result<f64> {
    check_same_dim(a, b)?;
    Ok(l1_raw(a.values(), b.values()))
}

pub fn linf_distance(a: &Allocation, b: &Allocation) -> Result<f64> {
    check_same_dim(a, b)?;
    Ok(a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

pub(crate) fn l1_raw(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// The vote `(alpha, (1-alpha)/(m-1), ..., (1-alpha)/(m-1))` on the line from
/// the first vertex through the center.
pub fn symmetric_vote(alpha: f64, m: usize) -> Result<Allocation> {
    check_dimension(m)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    let rest = (1.0 - alpha) / (m - 1) as f64;
    let mut values = vec![rest; m];
    values[0] = alpha;
    Ok(Allocation(values))
}

/// `ceil(n/2)` voters at the center and `floor(n/2)` voters at `(1, 0, ..., 0)`.
pub fn lower_bound_profile(n: usize, m: usize) -> Result<Profile> {
    if n == 0 {
        return Err(Error::EmptyProfile);
    }
    let center = Allocation::center(m)?;
    let vertex = Allocation::vertex(m, 0)?;
    let centered = n.div_ceil(2);
    let votes = (0..n)
        .map(|i| {
            if i < centered {
                center.clone()
            } else {
                vertex.clone()
            }
        })
        .collect();
    Profile::new(votes)
}

/// The reports of `n >= 1` voters over a common set of `m` alternatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileFile", into = "ProfileFile")]
pub struct Profile {
    m: usize,
    votes: Vec<Allocation>,
}

/// On-disk profile layout: `{"m": 3, "votes": [[...], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileFile {
    pub m: usize,
    pub votes: Vec<Vec<f64>>,
}

impl TryFrom<ProfileFile> for Profile {
    type Error = Error;

    fn try_from(file: ProfileFile) -> Result<Self> {
        Profile::from_rows(file.m, &file.votes, &Tolerance::default())
    }
}

impl From<Profile> for ProfileFile {
    fn from(p: Profile) -> Self {
        ProfileFile {
            m: p.m,
            votes: p.votes.into_iter().map(Allocation::into_vec).collect(),
        }
    }
}

impl Profile {
    pub fn new(votes: Vec<Allocation>) -> Result<Self> {
        let first = votes.first().ok_or(Error::EmptyProfile)?;
        let m = first.dim();
        for vote in &votes {
            if vote.dim() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: vote.dim(),
                });
            }
        }
        Ok(Profile { m, votes })
    }

    pub fn from_rows(m: usize, rows: &[Vec<f64>], tol: &Tolerance) -> Result<Self> {
        check_dimension(m)?;
        if rows.is_empty() {
            return Err(Error::EmptyProfile);
        }
        let votes = rows
            .iter()
            .map(|row| {
                if row.len() != m {
                    return Err(Error::DimensionMismatch {
                        expected: m,
                        found: row.len(),
                    });
                }
                make_allocation(row, tol)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Profile { m, votes })
    }

    /// `n` copies of the same vote.
    pub fn unanimous(vote: &Allocation, n: usize) -> Result<Self> {
        Profile::new(vec![vote.clone(); n])
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("profile serialization cannot fail")
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.votes.len()
    }

    pub fn votes(&self) -> &[Allocation] {
        &self.votes
    }

    pub fn vote(&self, i: usize) -> &Allocation {
        &self.votes[i]
    }

    /// Returns the profile in which voter `i` reports `vote` instead.
    pub fn with_vote(&self, i: usize, vote: Allocation) -> Result<Self> {
        if vote.dim() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                found: vote.dim(),
            });
        }
        if i >= self.n() {
            return Err(Error::InvalidArgument(format!(
                "voter index {i} out of range for n = {}",
                self.n()
            )));
        }
        let mut votes = self.votes.clone();
        votes[i] = vote;
        Ok(Profile { m: self.m, votes })
    }

    /// All reports on alternative `j`.
    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.votes.iter().map(move |v| v[j])
    }

    pub fn column_max(&self, j: usize) -> f64 {
        self.column(j).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn column_min(&self, j: usize) -> f64 {
        self.column(j).fold(f64::INFINITY, f64::min)
    }

    pub fn is_unanimous(&self) -> bool {
        self.votes.windows(2).all(|w| w[0] == w[1])
    }
}

fn check_permutation(sigma: &[usize], size: usize) -> Result<()> {
    if sigma.len() != size {
        return Err(Error::InvalidPermutation(format!(
            "expected {size} entries, got {}",
            sigma.len()
        )));
    }
    let mut seen = vec![false; size];
    for &s in sigma {
        if s >= size || seen[s] {
            return Err(Error::InvalidPermutation(format!(
                "{sigma:?} is not a bijection of 0..{size}"
            )));
        }
        seen[s] = true;
    }
    Ok(())
}

/// The inverse of a permutation given as `sigma[i] = image of i`.
pub fn invert_permutation(sigma: &[usize]) -> Result<Vec<usize>> {
    check_permutation(sigma, sigma.len())?;
    let mut inverse = vec![0; sigma.len()];
    for (i, &s) in sigma.iter().enumerate() {
        inverse[s] = i;
    }
    Ok(inverse)
}

/// Reorders voters: position `i` of the result holds voter `sigma[i]`.
pub fn permute_voters(profile: &Profile, sigma: &[usize]) -> Result<Profile> {
    check_permutation(sigma, profile.n())?;
    let votes = sigma.iter().map(|&s| profile.votes[s].clone()).collect();
    Ok(Profile {
        m: profile.m,
        votes,
    })
}

/// Coordinate `j` of the result is coordinate `sigma[j]` of the input.
pub fn permute_allocation(a: &Allocation, sigma: &[usize]) -> Result<Allocation> {
    check_permutation(sigma, a.dim())?;
    Ok(Allocation(sigma.iter().map(|&s| a[s]).collect()))
}

/// Applies [`permute_allocation`] with the same `sigma` to every vote.
pub fn permute_alternatives(profile: &Profile, sigma: &[usize]) -> Result<Profile> {
    check_permutation(sigma, profile.m)?;
    let votes = profile
        .votes
        .iter()
        .map(|v| Allocation(sigma.iter().map(|&s| v[s]).collect()))
        .collect();
    Ok(Profile {
        m: profile.m,
        votes,
    })
}

/// Coordinate-wise average of the votes.
pub fn mean(profile: &Profile) -> Allocation {
    let n = profile.n() as f64;
    let values = (0..profile.m())
        .map(|j| profile.column(j).sum::<f64>() / n)
        .collect();
    Allocation::renormalized(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn alloc(values: &[f64]) -> Allocation {
        make_allocation(values, &Tolerance::default()).unwrap()
    }

    #[test]
    fn make_allocation_accepts_simplex_points() {
        assert_eq!(alloc(&[0.5, 0.3, 0.2]).values(), &[0.5, 0.3, 0.2]);
        assert_eq!(alloc(&[1.0, 0.0, 0.0]).values(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn make_allocation_rejects_bad_input() {
        let tol = Tolerance::default();
        assert!(matches!(
            make_allocation(&[0.5, 0.6], &tol),
            Err(Error::SumOutOfRange { .. })
        ));
        assert!(matches!(
            make_allocation(&[1.2, -0.2], &tol),
            Err(Error::NegativeEntry { index: 1, .. })
        ));
        assert!(matches!(
            make_allocation(&[1.0], &tol),
            Err(Error::TooFewAlternatives { m: 1 })
        ));
        assert!(matches!(
            make_allocation(&[f64::NAN, 1.0], &tol),
            Err(Error::NonFinite { index: 0 })
        ));
    }

    #[test]
    fn make_allocation_renormalizes_within_tolerance() {
        let a = alloc(&[0.5 + 4e-10, 0.5, -1e-10]);
        assert_eq!(a.values()[2], 0.0);
        assert_abs_diff_eq!(a.values().iter().sum::<f64>(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn tolerance_validation() {
        assert!(Tolerance::new(1e-9, 1e-12, 1e-7).is_ok());
        assert!(Tolerance::new(1e-9, 1e-8, 1e-7).is_err());
        assert!(Tolerance::new(0.0, 1e-12, 1e-7).is_err());
    }

    #[test]
    fn distances() {
        let vertex = alloc(&[1.0, 0.0, 0.0]);
        let center = Allocation::center(3).unwrap();
        assert_abs_diff_eq!(
            l1_distance(&vertex, &center).unwrap(),
            4.0 / 3.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            linf_distance(&vertex, &center).unwrap(),
            2.0 / 3.0,
            epsilon = 1e-15
        );
        assert_eq!(l1_distance(&vertex, &vertex).unwrap(), 0.0);
        assert_eq!(linf_distance(&center, &center).unwrap(), 0.0);
        let a = alloc(&[2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0]);
        assert_abs_diff_eq!(
            linf_distance(&a, &center).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-15
        );
        assert!(matches!(
            l1_distance(&vertex, &alloc(&[0.5, 0.5])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn symmetric_votes() {
        assert_eq!(symmetric_vote(0.5, 3).unwrap().values(), &[0.5, 0.25, 0.25]);
        assert_eq!(
            symmetric_vote(1.0, 4).unwrap().values(),
            &[1.0, 0.0, 0.0, 0.0]
        );
        let c = symmetric_vote(0.25, 4).unwrap();
        for &v in c.values() {
            assert_abs_diff_eq!(v, 0.25, epsilon = 1e-15);
        }
        assert!(symmetric_vote(1.5, 3).is_err());
        // distance along the line is twice the parameter gap
        let d = l1_distance(
            &symmetric_vote(0.9, 5).unwrap(),
            &symmetric_vote(0.3, 5).unwrap(),
        );
        assert_abs_diff_eq!(d.unwrap(), 1.2, epsilon = 1e-12);
    }

    #[test]
    fn lower_bound_profiles() {
        let third = 1.0 / 3.0;
        let p = lower_bound_profile(2, 3).unwrap();
        assert_eq!(p.vote(0).values(), &[third, third, third]);
        assert_eq!(p.vote(1).values(), &[1.0, 0.0, 0.0]);
        let p = lower_bound_profile(3, 3).unwrap();
        assert_eq!(p.n(), 3);
        assert_eq!(p.vote(1).values(), &[third, third, third]);
        assert_eq!(p.vote(2).values(), &[1.0, 0.0, 0.0]);
        let p = lower_bound_profile(1, 4).unwrap();
        assert_eq!(p.n(), 1);
        assert_eq!(p.vote(0).values(), &[0.25; 4]);
    }

    #[test]
    fn permutations() {
        let p = Profile::new(vec![alloc(&[1.0, 0.0, 0.0]), alloc(&[0.2, 0.3, 0.5])]).unwrap();
        assert_eq!(permute_voters(&p, &[0, 1]).unwrap(), p);
        let swapped = permute_voters(&p, &[1, 0]).unwrap();
        assert_eq!(swapped.vote(0), p.vote(1));
        assert_eq!(swapped.vote(1), p.vote(0));

        // the cycle 1 -> 2 -> 3 -> 1, written 0-based
        let single = Profile::new(vec![alloc(&[1.0, 0.0, 0.0])]).unwrap();
        let cycled = permute_alternatives(&single, &[1, 2, 0]).unwrap();
        assert_eq!(cycled.vote(0).values(), &[0.0, 0.0, 1.0]);

        assert!(matches!(
            permute_voters(&p, &[0, 0]),
            Err(Error::InvalidPermutation(_))
        ));
        assert!(matches!(
            permute_alternatives(&p, &[0, 1]),
            Err(Error::InvalidPermutation(_))
        ));
    }

    #[test]
    fn mean_of_two_voter_profile() {
        let p = Profile::new(vec![alloc(&[1.0, 0.0]), alloc(&[0.5, 0.5])]).unwrap();
        assert_eq!(mean(&p).values(), &[0.75, 0.25]);
        let lb = mean(&lower_bound_profile(2, 3).unwrap());
        assert_abs_diff_eq!(lb[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(lb[1], 1.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn profile_json_round_trip() {
        let text = r#"{"m":3,"votes":[[0.5,0.25,0.25],[1,0,0]]}"#;
        let p = Profile::from_json(text).unwrap();
        assert_eq!(p.n(), 2);
        assert_eq!(Profile::from_json(&p.to_json()).unwrap(), p);
        assert!(Profile::from_json(r#"{"m":3,"votes":[[0.5,0.5]]}"#).is_err());
        assert!(Profile::from_json(r#"{"m":2,"votes":[]}"#).is_err());
    }
}
