//! Budget aggregation with moving-phantom mechanisms, cutoff variants and
//! tooling to check them for truthfulness, the classic axioms, fairness
//! against the mean and representability as a phantom mechanism.

pub mod cutoffs;
pub mod error;
pub mod mechanisms;
pub mod phantoms;
pub mod simplex;
pub mod verify;

pub use cutoffs::{
    aggregate_cutoff, is_slow, slow_threshold, unanimous_vote_cutoff, vote_cutoff, CutoffKind,
    PairCutoffParams, ThresholdFn,
};
pub use error::{Error, Result};
pub use mechanisms::{
    apply, registry_get, registry_list, resolve_mechanism, Base, FnMechanism, Mechanism,
    MechanismSpec,
};
pub use phantoms::{
    builtin_system, greedy_max_direct, greedy_min_direct, median_trace, medians_at,
    normalization_time, run_moving_phantom, BuiltinSystem, MedianTrace, PhantomSystem,
    PhantomTable,
};
pub use simplex::{
    l1_distance, linf_distance, lower_bound_profile, make_allocation, mean, permute_alternatives,
    permute_voters, symmetric_vote, Allocation, Profile, Tolerance,
};
