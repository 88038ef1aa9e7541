//! Named, reproducible experiments. Each returns a pass/fail verdict and a
//! list of human-readable findings.

use serde::{Deserialize, Serialize};

use crate::cutoffs::{slow_threshold, ThresholdFn};
use crate::error::{Error, Result};
use crate::mechanisms::{cutoff_phantom, registry_get, registry_list, MechanismSpec};
use crate::phantoms::{BuiltinSystem, PhantomSystem};
use crate::simplex::{lower_bound_profile, Allocation, Profile, Tolerance};

use super::fairness::fairness;
use super::manipulation::{best_manipulation, manipulation_search, SearchConfig};
use super::representability::{phantom_family_consistent, phantom_representable};
use super::sampling::{random_profile, rng_from_seed};

pub const SCENARIO_NAMES: [&str; 11] = [
    "prop2_cutoffgreedymax_nonphantom",
    "prop3_truthfulness_fuzz",
    "prop4_cutoff_muw",
    "prop4_cutoff_im",
    "prop4_cutoff_ladder",
    "prop4_cutoff_piecewise",
    "thm_slow_cutoff_truthfulness",
    "thm2_lower_bound_grid",
    "appB_uvcgm_nonphantom",
    "appB_votecut_nonphantom",
    "mean_not_truthful",
];

pub const FIXTURE_LOWER_BOUND: &str = include_str!("../../fixtures/lb_2_3.json");
pub const FIXTURE_MEAN: &str = include_str!("../../fixtures/mean_two_voters.json");
pub const FIXTURE_CUTOFF_WITNESS: &str =
    include_str!("../../fixtures/cutoff_greedymax_witness.json");
pub const FIXTURE_MUW_MANIPULATION: &str =
    include_str!("../../fixtures/cutoff_muw_manipulation.json");
pub const FIXTURE_PAIR_FIRST: &str = include_str!("../../fixtures/pair_cut_first.json");
pub const FIXTURE_PAIR_SECOND: &str = include_str!("../../fixtures/pair_cut_second.json");
pub const FIXTURE_UNANIMOUS_EXTREME: &str = include_str!("../../fixtures/unanimous_extreme.json");

const VALUE_EPS: f64 = 1e-9;
/// Smallest gain that counts as an observed manipulation in the constant-cutoff scenarios.
pub const MIN_OBSERVED_GAIN: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub tol: Tolerance,
    /// Random profiles per mechanism in the truthfulness fuzz scenarios.
    pub fuzz_profiles: usize,
}

impl ScenarioConfig {
    pub fn new(seed: u64, tol: Tolerance) -> Self {
        ScenarioConfig {
            seed,
            tol,
            fuzz_profiles: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub name: String,
    pub passed: bool,
    pub findings: Vec<String>,
}

struct Log {
    passed: bool,
    findings: Vec<String>,
}

impl Log {
    fn new() -> Self {
        Log {
            passed: true,
            findings: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, message: String) {
        let mark = if ok { "ok" } else { "FAILED" };
        self.findings.push(format!("{mark}: {message}"));
        self.passed &= ok;
    }

    fn finish(self, name: &str) -> ScenarioOutcome {
        ScenarioOutcome {
            name: name.to_string(),
            passed: self.passed,
            findings: self.findings,
        }
    }
}

fn fixture(text: &str) -> Result<Profile> {
    Profile::from_json(text)
}

fn max_abs_diff(a: &Allocation, expected: &[f64]) -> f64 {
    a.values()
        .iter()
        .zip(expected)
        .map(|(x, y)| (x - y).abs())
        .fold(
            if a.dim() == expected.len() {
                0.0
            } else {
                f64::INFINITY
            },
            f64::max,
        )
}

fn fmt(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.6}")).collect();
    format!("({})", parts.join(", "))
}

pub fn run_scenario(name: &str, cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let log = match name {
        "prop2_cutoffgreedymax_nonphantom" => cutoff_greedymax_nonphantom(cfg)?,
        "prop3_truthfulness_fuzz" => cutoff_greedymax_fuzz(cfg)?,
        "prop4_cutoff_muw" => cutoff_muw_manipulation(cfg)?,
        "prop4_cutoff_im" => constant_cutoff_manipulation(BuiltinSystem::IndependentMarkets, cfg)?,
        "prop4_cutoff_ladder" => constant_cutoff_manipulation(BuiltinSystem::Ladder, cfg)?,
        "prop4_cutoff_piecewise" => {
            constant_cutoff_manipulation(BuiltinSystem::PiecewiseUniform, cfg)?
        }
        "thm_slow_cutoff_truthfulness" => slow_cutoff_truthfulness(cfg)?,
        "thm2_lower_bound_grid" => lower_bound_grid(cfg)?,
        "appB_uvcgm_nonphantom" => pair_cut_nonphantom(cfg)?,
        "appB_votecut_nonphantom" => vote_cut_nonphantom(cfg)?,
        "mean_not_truthful" => mean_not_truthful(cfg)?,
        _ => return Err(Error::UnknownScenario(name.to_string())),
    };
    Ok(log.finish(name))
}

/// `n - 1` votes at the first vertex and one at `((1 + tau) / 2, (1 - tau) / 2, 0, ...)`.
pub fn cutoff_witness_profile(n: usize, m: usize, tau: f64) -> Result<Profile> {
    let mut rows = vec![Allocation::vertex(m, 0)?.into_vec(); n - 1];
    let mut last = vec![0.0; m];
    last[0] = (1.0 + tau) / 2.0;
    last[1] = (1.0 - tau) / 2.0;
    rows.push(last);
    Profile::from_rows(m, &rows, &Tolerance::default())
}

/// Closed form of the greedy-max cutoff output on [`cutoff_witness_profile`].
pub fn cutoff_witness_output(m: usize, tau: f64) -> Vec<f64> {
    let spread = (1.0 - tau) / (2.0 * (m - 1) as f64);
    let mut out = vec![spread; m];
    out[0] = tau;
    out[1] += (1.0 - tau) / 2.0;
    out
}

fn cutoff_greedymax_nonphantom(cfg: &ScenarioConfig) -> Result<Log> {
    let mut log = Log::new();
    let spec = registry_get("cutoff_greedymax")?;
    let profile = fixture(FIXTURE_CUTOFF_WITNESS)?;
    let out = spec.apply(&profile, &cfg.tol)?;
    let expected = [0.5, 0.375, 0.125];
    log.check(
        max_abs_diff(&out, &expected) <= VALUE_EPS,
        format!("fixture output {} vs {}", fmt(out.values()), fmt(&expected)),
    );
    let rep = phantom_representable(&profile, &out)?;
    log.check(
        !rep.feasible,
        "fixture output has no phantom representation".into(),
    );

    for (n, m) in [(2, 3), (3, 3), (4, 3), (2, 4), (3, 4)] {
        for tau in [0.5, 0.6] {
            let spec = cutoff_phantom(
                "cutoff_greedymax",
                BuiltinSystem::GreedyMax,
                ThresholdFn::constant(tau)?,
            );
            let profile = cutoff_witness_profile(n, m, tau)?;
            let out = spec.apply(&profile, &cfg.tol)?;
            let expected = cutoff_witness_output(m, tau);
            let rep = phantom_representable(&profile, &out)?;
            log.check(
                max_abs_diff(&out, &expected) <= VALUE_EPS && !rep.feasible,
                format!(
                    "n={n} m={m} tau={tau}: output {} non-representable={}",
                    fmt(out.values()),
                    !rep.feasible
                ),
            );
        }
    }
    Ok(log)
}

fn fuzz_no_violation(
    log: &mut Log,
    spec: &MechanismSpec,
    shapes: &[(usize, usize)],
    cfg: &ScenarioConfig,
    salt: u64,
) -> Result<()> {
    let mut rng = rng_from_seed(cfg.seed ^ salt);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for &(n, m) in shapes {
        let search = SearchConfig::for_dimension(m).with_seed(cfg.seed);
        for _ in 0..cfg.fuzz_profiles {
            let profile = random_profile(&mut rng, n, m);
            let result = best_manipulation(spec, &profile, &search, &cfg.tol)?;
            worst = worst.max(result.gain);
            checked += 1;
            if result.is_violation(&cfg.tol) {
                log.check(
                    false,
                    format!(
                        "{}: voter {} gains {:.3e} on {}",
                        spec.id,
                        result.voter,
                        result.gain,
                        profile.to_json()
                    ),
                );
                return Ok(());
            }
        }
    }
    log.check(
        true,
        format!(
            "{}: {checked} random profiles, largest gain {worst:.3e}",
            spec.id
        ),
    );
    Ok(())
}

fn cutoff_greedymax_fuzz(cfg: &ScenarioConfig) -> Result<Log> {
    let mut log = Log::new();
    for (i, tau) in [0.5, 0.6, 0.8].into_iter().enumerate() {
        let mut spec = cutoff_phantom(
            "cutoff_greedymax",
            BuiltinSystem::GreedyMax,
            ThresholdFn::constant(tau)?,
        );
        spec.id = format!("cutoff_greedymax@{tau}");
        fuzz_no_violation(&mut log, &spec, &[(2, 3), (3, 3)], cfg, i as u64 + 1)?;
    }
    Ok(log)
}

fn cutoff_muw_manipulation(cfg: &ScenarioConfig) -> Result<Log> {
    let mut log = Log::new();
    let spec = registry_get("cutoff_muw")?;
    let profile = fixture(FIXTURE_MUW_MANIPULATION)?;
    let out = spec.apply(&profile, &cfg.tol)?;
    log.check(true, format!("truthful output {}", fmt(out.values())));

    let misreport = Allocation::new(&[0.5, 0.5, 0.0], &cfg.tol)?;
    let truth = profile.vote(0).values().to_vec();
    let deviated = spec.apply(&profile.with_vote(0, misreport)?, &cfg.tol)?;
    let hand_gain = l1(&truth, out.values()) - l1(&truth, deviated.values());
    log.check(
        hand_gain >= 1.0 / 16.0 - VALUE_EPS,
        format!(
            "reporting (0.5, 0.5, 0) moves the output to {} for a gain of {hand_gain:.6}",
            fmt(deviated.values())
        ),
    );

    let search = SearchConfig::for_dimension(3).with_seed(cfg.seed);
    let found = manipulation_search(&spec, &profile, 0, &search, &cfg.tol)?;
    log.check(
        found.gain >= 1.0 / 16.0 - VALUE_EPS,
        format!(
            "search finds gain {:.6} with report {}",
            found.gain,
            fmt(found.best_misreport.values())
        ),
    );
    Ok(log)
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// The perturbation size that makes the constant cutoff manipulable for
/// `system` with `n` voters, three alternatives and threshold `tau`.
pub fn manipulation_epsilon(system: BuiltinSystem, n: usize, tau: f64) -> Result<f64> {
    let nf = n as f64;
    let eps = match system {
        BuiltinSystem::IndependentMarkets => ((1.0 - tau) * nf - 1.0) / (3.0 * nf - 1.0),
        BuiltinSystem::Ladder | BuiltinSystem::PiecewiseUniform => {
            2.0 * ((1.0 - tau) * nf - 1.0) / (5.0 * nf)
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "no closed-form perturbation for {}",
                other.id()
            )))
        }
    };
    if eps <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "perturbation is empty for n = {n}, tau = {tau}"
        )));
    }
    Ok(eps)
}

/// First voter at `(0, 1 - eps, eps)`, everyone else at the first vertex.
pub fn manipulation_profile(n: usize, eps: f64) -> Result<Profile> {
    let mut rows = vec![vec![1.0, 0.0, 0.0]; n];
    rows[0] = vec![0.0, 1.0 - eps, eps];
    Profile::from_rows(3, &rows, &Tolerance::default())
}

/// Gain of the first voter from reporting `(0, 1, 0)` on [`manipulation_profile`].
pub fn manipulation_gain(n: usize, tau: f64, eps: f64) -> f64 {
    let delta = ((n as f64 - 1.0) / n as f64 - tau) / 2.0;
    if delta >= eps {
        4.0 * eps - 2.0 * delta
    } else {
        2.0 * eps
    }
}

fn constant_cutoff_manipulation(system: BuiltinSystem, cfg: &ScenarioConfig) -> Result<Log> {
    let mut log = Log::new();
    let tau = 0.5;
    let spec = cutoff_phantom(
        &format!("cutoff_{}", system.id()),
        system,
        ThresholdFn::constant(tau)?,
    );
    for n in [3, 4] {
        let eps = manipulation_epsilon(system, n, tau)?;
        let profile = manipulation_profile(n, eps)?;
        let analytic = manipulation_gain(n, tau, eps);
        let truth = profile.vote(0).values().to_vec();
        let honest = spec.apply(&profile, &cfg.tol)?;
        let report = Allocation::vertex(3, 1)?;
        let deviated = spec.apply(&profile.with_vote(0, report)?, &cfg.tol)?;
        let direct = l1(&truth, honest.values()) - l1(&truth, deviated.values());
        log.check(
            (direct - analytic).abs() <= 1e-6,
            format!(
                "n={n} eps={eps:.6}: reporting (0, 1, 0) gains {direct:.6}, closed form {analytic:.6}"
            ),
        );
        let search = SearchConfig::for_dimension(3).with_seed(cfg.seed);
        let found = manipulation_search(&spec, &profile, 0, &search, &cfg.tol)?;
        log.check(
            found.gain >= MIN_OBSERVED_GAIN && found.gain >= analytic - cfg.tol.eps_gain,
            format!(
                "n={n}: search gain {:.6} with report {}",
                found.gain,
                fmt(found.best_misreport.values())
            ),
        );
    }
    Ok(log)
}

fn slow_cutoff_truthfulness(cfg: &ScenarioConfig) -> Result<Log> {
    let mut log = Log::new();
    for (i, id) in ["cutoff_im", "cutoff_ladder"].into_iter().enumerate() {
        let spec = registry_get(id)?;
        fuzz_no_violation(&mut log, &spec, &[(2, 3), (3, 3)], cfg, 100 + i as u64)?;
    }

    // The slow cutoff is not a phantom mechanism.
    let spec = registry_get("cutoff_im")?;
    let system = PhantomSystem::builtin(BuiltinSystem::IndependentMarkets, 2)?;
    let tau = slow_threshold(&system, 3)?;
    log.check(
        (tau - 0.75).abs() <= 1e-9,
        format!("independent markets, n=2, m=3: slow threshold {tau:.9}"),
    );
    let profile = cutoff_witness_profile(2, 3, tau)?;
    let out = spec.apply(&profile, &cfg.tol)?;
    let rep = phantom_representable(&profile, &out)?;
    log.check(
        max_abs_diff(&out, &[0.75, 0.1875, 0.0625]) <= VALUE_EPS && !rep.feasible,
        format!(
            "output {} on {} is not representable",
            fmt(out.values()),
            profile.to_json()
        ),
    );
    Ok(log)
}

/// Closed-form distance of the center from the mean on the lower-bound profile.
pub fn lower_bound_l1(n: usize, m: usize) -> f64 {
    let base = (m as f64 - 1.0) / m as f64;
    if n % 2 == 0 {
        base
    } else {
        base * (n as f64 - 1.0) / n as f64
    }
}

fn lower_bound_grid(cfg: &ScenarioConfig) -> Result<Log> {
    let mut log = Log::new();
    let fixture_profile = fixture(FIXTURE_LOWER_BOUND)?;
    log.check(
        fixture_profile == lower_bound_profile(2, 3)?,
        "fixture matches the generated n=2, m=3 profile".into(),
    );
    let specs: Vec<MechanismSpec> = registry_list()
        .into_iter()
        .filter(|s| s.id != "mean")
        .collect();
    let mut evaluated = 0;
    for n in 2..=7 {
        for m in 2..=6 {
            let profile = lower_bound_profile(n, m)?;
            let center = vec![1.0 / m as f64; m];
            for spec in specs.iter().filter(|s| s.supports(n, m)) {
                let out = spec.apply(&profile, &cfg.tol)?;
                let f = fairness(spec, &profile, &cfg.tol)?;
                let expected = lower_bound_l1(n, m);
                let ok = max_abs_diff(&out, &center) <= VALUE_EPS
                    && (f.l1 - expected).abs() <= VALUE_EPS
                    && (f.linf - expected / 2.0).abs() <= VALUE_EPS;
                evaluated += 1;
                if !ok {
                    log.check(
                        false,
                        format!(
                            "{} n={n} m={m}: output {}, l1 {:.9} expected {expected:.9}",
                            spec.id,
                            fmt(out.values()),
                            f.l1
                        ),
                    );
                }
            }
        }
    }
    log.check(
        true,
        format!("{evaluated} mechanism/shape pairs checked on the lower-bound profiles"),
    );
    Ok(log)
}

fn pair_cut_nonphantom(cfg: &ScenarioConfig) -> Result<Log> {
    let mut log = Log::new();
    let spec = registry_get("unanimous_vote_cut_greedymin")?;
    let p1 = fixture(FIXTURE_PAIR_FIRST)?;
    let p2 = fixture(FIXTURE_PAIR_SECOND)?;
    let a1 = spec.apply(&p1, &cfg.tol)?;
    let a2 = spec.apply(&p2, &cfg.tol)?;
    log.check(
        max_abs_diff(&a1, &[0.7, 0.18, 0.12]) <= VALUE_EPS,
        format!("first output {}", fmt(a1.values())),
    );
    log.check(
        max_abs_diff(&a2, &[0.7, 0.19, 0.11]) <= VALUE_EPS,
        format!("second output {}", fmt(a2.values())),
    );
    let family = phantom_family_consistent(&p1, &a1, &p2, &a2)?;
    log.check(
        !family.consistent && !family.truncated,
        format!("no common phantom family: {}", family.explanation),
    );
    Ok(log)
}

fn vote_cut_nonphantom(cfg: &ScenarioConfig) -> Result<Log> {
    let mut log = Log::new();
    let spec = registry_get("vote_cut_greedymin")?;
    let profile = fixture(FIXTURE_UNANIMOUS_EXTREME)?;
    let out = spec.apply(&profile, &cfg.tol)?;
    log.check(
        max_abs_diff(&out, &[0.8, 0.15, 0.05]) <= VALUE_EPS,
        format!("output {}", fmt(out.values())),
    );
    let rep = phantom_representable(&profile, &out)?;
    log.check(
        !rep.feasible,
        format!(
            "not representable: {}",
            rep.blocking_explanation.unwrap_or_default()
        ),
    );
    Ok(log)
}

fn mean_not_truthful(cfg: &ScenarioConfig) -> Result<Log> {
    let mut log = Log::new();
    let spec = registry_get("mean")?;
    let profile = fixture(FIXTURE_MEAN)?;
    let search = SearchConfig::for_dimension(2).with_seed(cfg.seed);
    let found = manipulation_search(&spec, &profile, 1, &search, &cfg.tol)?;
    log.check(
        (found.gain - 0.5).abs() <= VALUE_EPS,
        format!(
            "second voter gains {:.9} by reporting {}",
            found.gain,
            fmt(found.best_misreport.values())
        ),
    );
    Ok(log)
}
