//! Empirical and exact checks of mechanism properties.

pub mod axioms;
pub mod fairness;
pub mod manipulation;
pub mod report;
pub mod representability;
pub mod sampling;
pub mod scenarios;

pub use axioms::{
    check_anonymity, check_neutrality, check_unanimity, continuity_probe, AxiomOutcome,
    ContinuityReport, ScaleRatio, UnanimityOutcome,
};
pub use fairness::{
    fairness, profile_digest, worst_case_fairness, FairnessResult, WorstCase, WorstCaseFairness,
};
pub use manipulation::{
    best_manipulation, manipulation_search, ManipulationResult, SearchConfig, SearchStats,
};
pub use report::VerificationReport;
pub use representability::{
    phantom_family_consistent, phantom_representable, FamilyConsistency, RepresentabilityResult,
};
pub use sampling::{rng_from_seed, seed_from_env, VerifyRng, DEFAULT_SEED, SEED_ENV};
pub use scenarios::{run_scenario, ScenarioConfig, ScenarioOutcome, SCENARIO_NAMES};
