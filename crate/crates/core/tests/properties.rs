mod common;

use common::*;
use phantom_forge::verify::{phantom_representable, worst_case_fairness};
use phantom_forge::{
    aggregate_cutoff, greedy_max_direct, greedy_min_direct, medians_at, permute_alternatives,
    permute_voters, registry_get, registry_list, slow_threshold, BuiltinSystem, PhantomSystem,
    Profile,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Rows of non-negative weights; small draws become exact zeros so that
/// boundary votes are common.
fn rows(
    n: std::ops::RangeInclusive<usize>,
    m: std::ops::RangeInclusive<usize>,
) -> impl Strategy<Value = Profile> {
    (n, m).prop_flat_map(|(n, m)| {
        prop::collection::vec(prop::collection::vec(0.0f64..1.0, m), n).prop_map(|raw| {
            let rows: Vec<Vec<f64>> = raw
                .into_iter()
                .map(|r| {
                    let mut r: Vec<f64> = r
                        .into_iter()
                        .map(|x| if x < 0.2 { 0.0 } else { x })
                        .collect();
                    if r.iter().all(|&x| x == 0.0) {
                        r[0] = 1.0;
                    }
                    r
                })
                .collect();
            profile(&rows)
        })
    })
}

fn on_simplex(values: &[f64]) -> bool {
    values.iter().all(|&v| v >= 0.0) && (values.iter().sum::<f64>() - 1.0).abs() <= EPS
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn greedymax_medians_follow_column_maxima(p in rows(1..=5, 2..=5), t in 0.0f64..=1.0) {
        prop_assert!(check_greedymax_medians(&p, t).is_ok());
    }

    #[test]
    fn every_mechanism_lands_on_the_simplex(p in rows(1..=4, 2..=4)) {
        for spec in registry_list().iter().filter(|s| s.supports(p.n(), p.m())) {
            let out = spec.apply(&p, &tol()).unwrap();
            prop_assert!(on_simplex(out.values()), "{}: {:?}", spec.id, out.values());
        }
    }

    #[test]
    fn voter_order_does_not_matter(p in rows(2..=4, 2..=4), rot in 1usize..4) {
        let n = p.n();
        let sigma: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
        let q = permute_voters(&p, &sigma).unwrap();
        for spec in registry_list().iter().filter(|s| s.supports(n, p.m())) {
            let a = spec.apply(&p, &tol()).unwrap();
            let b = spec.apply(&q, &tol()).unwrap();
            prop_assert!(max_diff(a.values(), b.values()) <= EPS, "{}", spec.id);
        }
    }

    #[test]
    fn relabelling_alternatives_relabels_the_output(p in rows(1..=4, 2..=4), rot in 1usize..4) {
        let m = p.m();
        let sigma: Vec<usize> = (0..m).map(|j| (j + rot) % m).collect();
        let q = permute_alternatives(&p, &sigma).unwrap();
        for spec in registry_list().iter().filter(|s| s.supports(p.n(), m)) {
            let a = spec.apply(&p, &tol()).unwrap();
            let b = spec.apply(&q, &tol()).unwrap();
            let relabelled: Vec<f64> = (0..m).map(|j| a.values()[sigma[j]]).collect();
            prop_assert!(max_diff(b.values(), &relabelled) <= EPS, "{}", spec.id);
        }
    }

    #[test]
    fn greedy_rules_match_their_direct_forms(p in rows(1..=5, 2..=5)) {
        let tol = tol();
        let by_phantom = registry_get("greedymax").unwrap().apply(&p, &tol).unwrap();
        prop_assert!(max_diff(by_phantom.values(), greedy_max_direct(&p).values()) <= EPS);
        let by_phantom = registry_get("greedymin").unwrap().apply(&p, &tol).unwrap();
        prop_assert!(max_diff(by_phantom.values(), greedy_min_direct(&p).values()) <= EPS);
    }

    #[test]
    fn greedymin_bounds(p in rows(1..=5, 2..=5)) {
        let r = check_greedymin_bounds(&p);
        prop_assert!(r.is_ok(), "{:?}", r);
    }

    #[test]
    fn piecewise_uniform_matches_the_literal_definition(n in 1usize..9, t in 0.0f64..=1.0) {
        let system = PhantomSystem::builtin(BuiltinSystem::PiecewiseUniform, n).unwrap();
        for k in 0..=n {
            let literal = piecewise_uniform_literal(n, k, t).clamp(0.0, 1.0);
            prop_assert!((system.position(k, t) - literal).abs() <= 1e-12, "k={k}");
        }
    }

    #[test]
    fn medians_sum_is_monotone(p in rows(1..=4, 2..=4), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        for system in BuiltinSystem::ALL {
            let sys = PhantomSystem::builtin(system, p.n()).unwrap();
            let s_lo: f64 = medians_at(&sys, &p, lo).unwrap().iter().sum();
            let s_hi: f64 = medians_at(&sys, &p, hi).unwrap().iter().sum();
            prop_assert!(s_lo <= s_hi + 1e-12, "{}", system.id());
        }
    }

    #[test]
    fn cutoff_caps_and_preserves_mass(p in rows(1..=1, 2..=5), tau in 0.5f64..0.99) {
        let a = p.vote(0);
        let cut = aggregate_cutoff(a, tau).unwrap();
        prop_assert!(on_simplex(cut.values()));
        prop_assert!(cut.values().iter().all(|&v| v <= tau + 1e-12));
        if a.values().iter().all(|&v| v <= tau) {
            prop_assert_eq!(cut.values(), a.values());
        }
    }

    #[test]
    fn phantom_outputs_are_representable(p in rows(1..=3, 2..=3)) {
        for system in BuiltinSystem::ALL {
            let spec = registry_get(system.id()).unwrap();
            let out = spec.apply(&p, &tol()).unwrap();
            let rep = phantom_representable(&p, &out).unwrap();
            prop_assert!(rep.feasible, "{} on {}", system.id(), p.to_json());
        }
    }

    #[test]
    fn profile_json_round_trip(p in rows(1..=4, 2..=5)) {
        let again = Profile::from_json(&p.to_json()).unwrap();
        prop_assert_eq!(&again, &p);
        prop_assert_eq!(again.to_json(), p.to_json());
    }
}

#[test]
fn dominant_column_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for tau in [0.5, 0.6, 0.8] {
        for trial in 0..200 {
            let (n, m) = (1 + trial % 4, 2 + trial % 4);
            let j = trial % m;
            let p = dominant_column_profile(&mut rng, n, m, j, tau);
            check_dominant_column(&p, j).unwrap();
        }
    }
}

#[test]
fn extreme_output_characterization() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for tau in [0.5, 0.6, 0.8] {
        let (mut yes, mut no) = (0, 0);
        for trial in 0..300 {
            let (n, m) = (1 + trial % 4, 2 + trial % 3);
            let p = near_threshold_profile(&mut rng, n, m, 0, tau);
            match check_extreme_characterization(&p, 0, tau).unwrap() {
                Characterization::Holds { extreme: true } => yes += 1,
                Characterization::Holds { extreme: false } => no += 1,
                Characterization::Skipped => {}
            }
        }
        assert!(yes > 20 && no > 20, "tau {tau}: {yes} extreme, {no} not");
    }
}

#[test]
fn slow_thresholds_have_closed_forms() {
    for n in 2..=6 {
        for m in 3..=6 {
            let (nf, mf) = (n as f64, m as f64);
            let im = PhantomSystem::builtin(BuiltinSystem::IndependentMarkets, n).unwrap();
            let want = (nf + mf - 2.0) / (nf + mf - 1.0);
            assert!((slow_threshold(&im, m).unwrap() - want).abs() <= EPS);
            let ladder = PhantomSystem::builtin(BuiltinSystem::Ladder, n).unwrap();
            let want = (mf * nf - 1.0) / (mf * nf);
            assert!((slow_threshold(&ladder, m).unwrap() - want).abs() <= EPS);
        }
    }
}

#[test]
fn ladder_worst_case_max_deviation() {
    let spec = registry_get("ladder").unwrap();
    let w = worst_case_fairness(&spec, 2, 3, 200, true, 1729, &tol()).unwrap();
    assert!(w.worst_linf.result.linf >= 1.0 / 3.0 - EPS);
    assert!(w.worst_linf.result.linf <= 1.0 / 3.0 + EPS);
    assert!(w.worst_l1.result.l1 >= 2.0 / 3.0 - EPS);
}

#[test]
fn unanimity_table() {
    let extreme = alloc(&[0.9, 0.1, 0.0]);
    let mild = alloc(&[0.5, 0.3, 0.2]);
    for spec in registry_list() {
        let n = spec.dimension_constraints.n.unwrap_or(3);
        let p = Profile::unanimous(&extreme, n).unwrap();
        let out = spec.apply(&p, &tol()).unwrap();
        let fails = [
            "cutoff_greedymax",
            "cutoff_im",
            "cutoff_ladder",
            "cutoff_muw",
            "cutoff_piecewise",
            "vote_cut_greedymin",
        ];
        let holds = max_diff(out.values(), extreme.values()) <= EPS;
        assert_eq!(holds, !fails.contains(&spec.id.as_str()), "{}", spec.id);
        // below every threshold all rules are unanimous
        let p = Profile::unanimous(&mild, n).unwrap();
        let out = spec.apply(&p, &tol()).unwrap();
        assert!(max_diff(out.values(), mild.values()) <= EPS, "{}", spec.id);
    }
}
