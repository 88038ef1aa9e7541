//! Named aggregation rules and the pipeline that evaluates them.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::cutoffs::{
    aggregate_cutoff, slow_threshold, unanimous_vote_cutoff_with, vote_cutoff, CutoffKind,
    ThresholdFn,
};
use crate::error::{Error, Result};
use crate::phantoms::{
    greedy_max_direct, greedy_min_direct, run_moving_phantom, BuiltinSystem, PhantomSystem,
    PhantomTable,
};
use crate::simplex::{self, Allocation, Profile, Tolerance};

pub const FLAG_TRUTHFUL: &str = "truthful";
pub const FLAG_KNOWN_UNTRUTHFUL: &str = "known_untruthful_constant_tau";

/// Anything that maps a profile to an allocation.
pub trait Mechanism: Sync {
    fn name(&self) -> &str;
    fn aggregate(&self, profile: &Profile, tol: &Tolerance) -> Result<Allocation>;
}

/// Wraps a closure as a [`Mechanism`], mostly for tests and experiments.
pub struct FnMechanism<F> {
    name: String,
    f: F,
}

impl<F> FnMechanism<F>
where
    F: Fn(&Profile) -> Result<Allocation> + Sync,
{
    pub fn new(name: impl Into<String>, f: F) -> Self {
        FnMechanism {
            name: name.into(),
            f,
        }
    }
}

impl<F> Mechanism for FnMechanism<F>
where
    F: Fn(&Profile) -> Result<Allocation> + Sync,
{
    fn name(&self) -> &str {
        &self.name
    }

    fn aggregate(&self, profile: &Profile, _tol: &Tolerance) -> Result<Allocation> {
        (self.f)(profile)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreedyDirection {
    Max,
    Min,
}

/// The rule applied after any vote-level cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Base {
    Mean,
    Phantom(BuiltinSystem),
    GreedyDirect(GreedyDirection),
    PhantomTable(PhantomTable),
}

impl Base {
    /// The phantom system behind this base for `n` voters, if any.
    pub fn phantom_system(&self, n: usize) -> Result<Option<PhantomSystem>> {
        match self {
            Base::Mean => Ok(None),
            Base::Phantom(b) => PhantomSystem::builtin(*b, n).map(Some),
            Base::GreedyDirect(GreedyDirection::Max) => {
                PhantomSystem::builtin(BuiltinSystem::GreedyMax, n).map(Some)
            }
            Base::GreedyDirect(GreedyDirection::Min) => {
                PhantomSystem::builtin(BuiltinSystem::GreedyMin, n).map(Some)
            }
            Base::PhantomTable(table) => {
                if table.n != n {
                    return Err(Error::DimensionConstraint(format!(
                        "phantom table `{}` is defined for n = {}, profile has n = {n}",
                        table.id, table.n
                    )));
                }
                PhantomSystem::from_table(table.clone()).map(Some)
            }
        }
    }

    fn run(&self, profile: &Profile, tol: &Tolerance) -> Result<Allocation> {
        match self {
            Base::Mean => Ok(simplex::mean(profile)),
            Base::GreedyDirect(GreedyDirection::Max) => Ok(greedy_max_direct(profile)),
            Base::GreedyDirect(GreedyDirection::Min) => Ok(greedy_min_direct(profile)),
            Base::Phantom(_) | Base::PhantomTable(_) => {
                let system = self
                    .phantom_system(profile.n())?
                    .expect("phantom bases always carry a system");
                run_moving_phantom(&system, profile, tol)
            }
        }
    }
}

/// Restrictions on the profile shape a mechanism is defined for.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionConstraints {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    /// Outside this `m` the rule still runs but carries a warning.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proven_m: Option<usize>,
}

impl DimensionConstraints {
    fn is_empty(&self) -> bool {
        *self == DimensionConstraints::default()
    }
}

/// A fully specified aggregation rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismSpec {
    pub id: String,
    pub base: Base,
    #[serde(default)]
    pub cutoff: CutoffKind,
    #[serde(default, skip_serializing_if = "DimensionConstraints::is_empty")]
    pub dimension_constraints: DimensionConstraints,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

type ThresholdKey = (BuiltinSystem, usize, usize);

fn slow_threshold_cache() -> &'static Mutex<HashMap<ThresholdKey, f64>> {
    static CACHE: OnceLock<Mutex<HashMap<ThresholdKey, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn resolve_threshold(threshold: &ThresholdFn, base: &Base, n: usize, m: usize) -> Result<f64> {
    if let ThresholdFn::Constant { .. } = threshold {
        return threshold.evaluate(None, m);
    }
    let system = base.phantom_system(n)?;
    let Some(kind) = system.as_ref().and_then(PhantomSystem::builtin_kind) else {
        return threshold.evaluate(system.as_ref(), m);
    };
    let key = (kind, n, m);
    if let Some(&tau) = slow_threshold_cache()
        .lock()
        .expect("cache poisoned")
        .get(&key)
    {
        return Ok(tau);
    }
    let tau = slow_threshold(system.as_ref().expect("checked above"), m)?;
    slow_threshold_cache()
        .lock()
        .expect("cache poisoned")
        .insert(key, tau);
    Ok(tau)
}

impl MechanismSpec {
    pub fn new(id: impl Into<String>, base: Base) -> Self {
        MechanismSpec {
            id: id.into(),
            base,
            cutoff: CutoffKind::None,
            dimension_constraints: DimensionConstraints::default(),
            flags: Vec::new(),
        }
    }

    pub fn phantom(id: impl Into<String>, system: BuiltinSystem) -> Self {
        Self::new(id, Base::Phantom(system))
    }

    pub fn with_cutoff(mut self, cutoff: CutoffKind) -> Self {
        self.cutoff = cutoff;
        self
    }

    pub fn with_flag(mut self, flag: &str) -> Self {
        self.flags.push(flag.to_string());
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: MechanismSpec = serde_json::from_str(text)?;
        if let Base::PhantomTable(table) = &spec.base {
            table.validate()?;
        }
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("mechanism serialization cannot fail")
    }

    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.iter().any(|f| f == flag)
    }

    pub fn is_phantom_based(&self) -> bool {
        !matches!(self.base, Base::Mean)
    }

    /// Whether the rule accepts profiles with `n` voters and `m` alternatives.
    pub fn supports(&self, n: usize, m: usize) -> bool {
        self.check_dimensions(n, m).is_ok()
    }

    pub fn check_dimensions(&self, n: usize, m: usize) -> Result<()> {
        let c = &self.dimension_constraints;
        if c.n.is_some_and(|req| req != n) {
            return Err(Error::DimensionConstraint(format!(
                "{} requires n = {}, got n = {n}",
                self.id,
                c.n.unwrap()
            )));
        }
        if c.m.is_some_and(|req| req != m) {
            return Err(Error::DimensionConstraint(format!(
                "{} requires m = {}, got m = {m}",
                self.id,
                c.m.unwrap()
            )));
        }
        if matches!(self.cutoff, CutoffKind::UnanimousPair { .. }) && (n != 2 || m != 3) {
            return Err(Error::DimensionConstraint(format!(
                "{}: the pairwise cutoff is only defined for n = 2, m = 3",
                self.id
            )));
        }
        Ok(())
    }

    /// Notes about the shape `(n, m)` that do not prevent evaluation.
    pub fn warnings(&self, _n: usize, m: usize) -> Vec<String> {
        match self.dimension_constraints.proven_m {
            Some(proven) if proven != m => vec![format!(
                "{} is only known to be truthful for m = {proven}; running with m = {m}",
                self.id
            )],
            _ => Vec::new(),
        }
    }

    /// The aggregate-cutoff threshold for `(n, m)`, if the rule has one.
    pub fn aggregate_threshold(&self, n: usize, m: usize) -> Result<Option<f64>> {
        match &self.cutoff {
            CutoffKind::Aggregate { threshold } => {
                resolve_threshold(threshold, &self.base, n, m).map(Some)
            }
            _ => Ok(None),
        }
    }

    /// The profile actually handed to the base rule.
    pub fn preprocess(&self, profile: &Profile) -> Result<Profile> {
        match &self.cutoff {
            CutoffKind::PerVote { threshold } => {
                let tau = resolve_threshold(threshold, &self.base, profile.n(), profile.m())?;
                vote_cutoff(profile, tau)
            }
            CutoffKind::UnanimousPair { params } => {
                let (v, w) = (profile.vote(0), profile.vote(1));
                Profile::new(vec![
                    unanimous_vote_cutoff_with(v, w, params)?,
                    unanimous_vote_cutoff_with(w, v, params)?,
                ])
            }
            CutoffKind::None | CutoffKind::Aggregate { .. } => Ok(profile.clone()),
        }
    }

    pub fn apply(&self, profile: &Profile, tol: &Tolerance) -> Result<Allocation> {
        let (n, m) = (profile.n(), profile.m());
        self.check_dimensions(n, m)?;
        let input = self.preprocess(profile)?;
        let out = self.base.run(&input, tol)?;
        match self.aggregate_threshold(n, m)? {
            Some(tau) => aggregate_cutoff(&out, tau),
            None => Ok(out),
        }
    }
}

impl Mechanism for MechanismSpec {
    fn name(&self) -> &str {
        &self.id
    }

    fn aggregate(&self, profile: &Profile, tol: &Tolerance) -> Result<Allocation> {
        self.apply(profile, tol)
    }
}

pub fn mean(profile: &Profile) -> Allocation {
    simplex::mean(profile)
}

pub fn apply(spec: &MechanismSpec, profile: &Profile, tol: &Tolerance) -> Result<Allocation> {
    spec.apply(profile, tol)
}

fn constant(tau: f64) -> ThresholdFn {
    ThresholdFn::Constant { tau }
}

/// Cuts the aggregate of a phantom rule at `threshold`.
pub fn cutoff_phantom(id: &str, system: BuiltinSystem, threshold: ThresholdFn) -> MechanismSpec {
    MechanismSpec::phantom(id, system).with_cutoff(CutoffKind::Aggregate { threshold })
}

pub const DEFAULT_CUTOFF_TAU: f64 = 0.5;
pub const VOTE_CUTOFF_TAU: f64 = 0.8;

/// Every built-in rule, in a fixed order.
pub fn registry_list() -> Vec<MechanismSpec> {
    use BuiltinSystem::*;
    let pure = |id: &str, system| MechanismSpec::phantom(id, system).with_flag(FLAG_TRUTHFUL);
    let mut vote_cut = MechanismSpec::phantom("vote_cut_greedymin", GreedyMin)
        .with_cutoff(CutoffKind::PerVote {
            threshold: constant(VOTE_CUTOFF_TAU),
        })
        .with_flag(FLAG_TRUTHFUL);
    vote_cut.dimension_constraints.proven_m = Some(3);
    let mut pair_cut = MechanismSpec::phantom("unanimous_vote_cut_greedymin", GreedyMin)
        .with_cutoff(CutoffKind::UnanimousPair {
            params: Default::default(),
        })
        .with_flag(FLAG_TRUTHFUL);
    pair_cut.dimension_constraints.n = Some(2);
    pair_cut.dimension_constraints.m = Some(3);
    vec![
        MechanismSpec::new("mean", Base::Mean),
        pure("greedymax", GreedyMax),
        pure("greedymin", GreedyMin),
        pure("max_utilitarian_welfare", MaxUtilitarianWelfare),
        pure("independent_markets", IndependentMarkets),
        pure("ladder", Ladder),
        pure("piecewise_uniform", PiecewiseUniform),
        cutoff_phantom("cutoff_greedymax", GreedyMax, constant(DEFAULT_CUTOFF_TAU))
            .with_flag(FLAG_TRUTHFUL),
        cutoff_phantom("cutoff_im", IndependentMarkets, ThresholdFn::SlowDerived)
            .with_flag(FLAG_TRUTHFUL),
        cutoff_phantom("cutoff_ladder", Ladder, ThresholdFn::SlowDerived).with_flag(FLAG_TRUTHFUL),
        cutoff_phantom(
            "cutoff_muw",
            MaxUtilitarianWelfare,
            constant(DEFAULT_CUTOFF_TAU),
        )
        .with_flag(FLAG_KNOWN_UNTRUTHFUL),
        cutoff_phantom(
            "cutoff_piecewise",
            PiecewiseUniform,
            constant(DEFAULT_CUTOFF_TAU),
        )
        .with_flag(FLAG_KNOWN_UNTRUTHFUL),
        vote_cut,
        pair_cut,
    ]
}

fn canonical_id(name: &str) -> String {
    let key = name.trim().to_ascii_lowercase().replace('-', "_");
    let canonical = match key.as_str() {
        "muw" | "maxutilitarianwelfare" => "max_utilitarian_welfare",
        "im" | "independentmarkets" => "independent_markets",
        "piecewise" | "piecewiseuniform" => "piecewise_uniform",
        "greedy_max" => "greedymax",
        "greedy_min" => "greedymin",
        "cutoffgreedymax" | "cutoff_greedy_max" => "cutoff_greedymax",
        "cutoff_independent_markets" | "cutoffim" => "cutoff_im",
        "cutoffladder" => "cutoff_ladder",
        "cutoff_max_utilitarian_welfare" | "cutoffmuw" => "cutoff_muw",
        "cutoff_piecewise_uniform" | "cutoffpiecewise" => "cutoff_piecewise",
        "vcgm" | "votecut_greedymin" | "votecutgreedymin" => "vote_cut_greedymin",
        "uvcgm" | "unanimousvotecutgreedymin" => "unanimous_vote_cut_greedymin",
        _ => return key,
    };
    canonical.to_string()
}

/// Looks up a registry entry by id or alias (`im`, `muw`, `uvcgm`, ...).
pub fn registry_get(name: &str) -> Result<MechanismSpec> {
    let id = canonical_id(name);
    registry_list()
        .into_iter()
        .find(|spec| spec.id == id)
        .ok_or_else(|| Error::UnknownMechanism(name.to_string()))
}

/// Accepts either a registry id or an inline JSON specification.
pub fn resolve_mechanism(text: &str) -> Result<MechanismSpec> {
    if text.trim_start().starts_with('{') {
        MechanismSpec::from_json(text)
    } else {
        registry_get(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn profile(m: usize, rows: &[&[f64]]) -> Profile {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        Profile::from_rows(m, &rows, &Tolerance::default()).unwrap()
    }

    fn assert_close(a: &Allocation, expected: &[f64], eps: f64) {
        assert_eq!(a.dim(), expected.len());
        for (x, y) in a.values().iter().zip(expected) {
            assert_abs_diff_eq!(*x, *y, epsilon = eps);
        }
    }

    #[test]
    fn registry_shape() {
        let list = registry_list();
        assert_eq!(list.len(), 14);
        for spec in &list {
            if let Base::Phantom(system) = &spec.base {
                assert!(crate::phantoms::builtin_system(system.id(), 2).is_ok());
            }
        }
        assert!(registry_get("cutoff_muw")
            .unwrap()
            .has_flag(FLAG_KNOWN_UNTRUTHFUL));
        assert_eq!(
            registry_get("uvcgm").unwrap().id,
            "unanimous_vote_cut_greedymin"
        );
        assert!(matches!(
            registry_get("nosuch"),
            Err(Error::UnknownMechanism(_))
        ));
    }

    #[test]
    fn mean_examples() {
        let p = profile(2, &[&[1.0, 0.0], &[0.5, 0.5]]);
        assert_eq!(mean(&p).values(), &[0.75, 0.25]);
    }

    #[test]
    fn pipeline_examples() {
        let tol = Tolerance::default();
        let p = profile(3, &[&[1.0, 0.0, 0.0], &[0.75, 0.25, 0.0]]);
        let out = registry_get("cutoff_greedymax")
            .unwrap()
            .apply(&p, &tol)
            .unwrap();
        assert_close(&out, &[0.5, 0.375, 0.125], 1e-9);

        let p1 = profile(3, &[&[0.84, 0.16, 0.0], &[0.7, 0.3, 0.0]]);
        let out = registry_get("uvcgm").unwrap().apply(&p1, &tol).unwrap();
        assert_close(&out, &[0.7, 0.18, 0.12], 1e-9);

        let mild = profile(3, &[&[0.4, 0.3, 0.3], &[0.3, 0.4, 0.3]]);
        let im = registry_get("im").unwrap().apply(&mild, &tol).unwrap();
        let cut = registry_get("cutoff_im")
            .unwrap()
            .apply(&mild, &tol)
            .unwrap();
        assert_eq!(im, cut);
    }

    #[test]
    fn dimension_constraints_are_enforced() {
        let tol = Tolerance::default();
        let three = profile(3, &[&[0.5, 0.5, 0.0][..]; 3]);
        assert!(matches!(
            registry_get("uvcgm").unwrap().apply(&three, &tol),
            Err(Error::DimensionConstraint(_))
        ));
        let vc = registry_get("vote_cut_greedymin").unwrap();
        let four = profile(4, &[&[0.25; 4]]);
        assert!(vc.apply(&four, &tol).is_ok());
        assert_eq!(vc.warnings(1, 4).len(), 1);
        assert!(vc.warnings(1, 3).is_empty());
    }

    #[test]
    fn spec_json_round_trip() {
        let text = r#"{"id":"cutoff_greedymax","base":{"phantom":"greedymax"},"cutoff":{"kind":"aggregate","threshold":{"kind":"constant","tau":0.5}}}"#;
        let spec = MechanismSpec::from_json(text).unwrap();
        assert_eq!(spec.base, Base::Phantom(BuiltinSystem::GreedyMax));
        assert_eq!(spec.to_json(), text);
        let mean: MechanismSpec = serde_json::from_str(r#"{"id":"m","base":"mean"}"#).unwrap();
        assert_eq!(mean.base, Base::Mean);
        assert_eq!(mean.cutoff, CutoffKind::None);
        let direct = resolve_mechanism(r#"{"id":"d","base":{"greedy_direct":"min"}}"#).unwrap();
        assert_eq!(direct.base, Base::GreedyDirect(GreedyDirection::Min));
        for spec in registry_list() {
            assert_eq!(MechanismSpec::from_json(&spec.to_json()).unwrap(), spec);
        }
    }

    #[test]
    fn slow_threshold_is_resolved_per_shape() {
        let spec = registry_get("cutoff_ladder").unwrap();
        assert_abs_diff_eq!(
            spec.aggregate_threshold(2, 3).unwrap().unwrap(),
            5.0 / 6.0,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            spec.aggregate_threshold(3, 4).unwrap().unwrap(),
            11.0 / 12.0,
            epsilon = 1e-9
        );
    }
}
