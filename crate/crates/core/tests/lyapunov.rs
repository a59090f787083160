mod common;

use fragsim::crn::{birth_death, enzyme_autocatalysis, explosive_enzyme, Complex};
use fragsim::lyapunov::region::sample_states;
use fragsim::lyapunov::{
    check_crn_linear_bound, choose_lambda, classify_regime, closed_form_drift_model4,
    scan_drift_tail, scan_linear_diagonal, CandidateFunction, PrCondition, Regime, RegionSpec,
};
use fragsim::model::apply_population_generator;
use fragsim::sim::one_enzyme_transitions;
use fragsim::{Model4Params, PopulationState};
use proptest::prelude::*;

#[test]
fn all_ones_is_positive_recurrent_by_the_first_condition() {
    let c = classify_regime(&Model4Params::uniform(1.0)).unwrap();
    assert_eq!(
        c.regime,
        Regime::PositiveRecurrent {
            condition: PrCondition::A
        }
    );
    assert_eq!(c.conditions_met, vec![PrCondition::A, PrCondition::B]);
    assert!(c.non_explosive);
}

#[test]
fn no_coagulation_above_threshold_is_an_unknown_gap() {
    // κ_F = 2.1 exceeds the threshold but misses the transience condition
    // (κ_F − κ_E) κ_b > (κ_E + κ_d) κ_E.
    let p = Model4Params {
        kappa_c: 0.0,
        kappa_f: 2.1,
        ..Model4Params::uniform(1.0)
    };
    let c = classify_regime(&p).unwrap();
    assert_eq!(
        c.regime,
        Regime::UnknownGap {
            conjectured_transient: true
        }
    );
    assert!(c.certificate.is_none());
}

#[test]
fn strong_fragmentation_without_coagulation_is_transient() {
    let p = Model4Params {
        kappa_c: 0.0,
        kappa_f: 4.0,
        ..Model4Params::uniform(1.0)
    };
    let c = classify_regime(&p).unwrap();
    assert_eq!(c.regime, Regime::Transient);
    let cert = c.certificate.unwrap();
    let report = cert
        .check(&p.build_default().unwrap(), &RegionSpec::default_for(1))
        .unwrap();
    assert!(report.passed(), "{report:?}");
}

#[test]
fn no_inflow_names_the_absorbing_state() {
    let p = Model4Params {
        kappa_i: 0.0,
        ..Model4Params::uniform(1.0)
    };
    let c = classify_regime(&p).unwrap();
    assert!(c
        .bullets
        .iter()
        .any(|b| b.contains("absorbed by the state with zero compartments")));
}

#[test]
fn certificates_hold_on_default_regions() {
    for p in common::regime_params(3, 12, 4) {
        let c = classify_regime(&p).unwrap();
        let cert = c.certificate.expect("classified sets carry a certificate");
        let report = cert
            .check(&p.build_default().unwrap(), &RegionSpec::default_for(1))
            .unwrap();
        assert!(report.passed(), "{p:?}: {report:?}");
        assert!(report.states_checked > 0);
    }
}

#[test]
fn enzyme_autocatalysis_has_no_linear_bound_on_the_diagonal() {
    let net = enzyme_autocatalysis().unwrap();
    let s = scan_linear_diagonal(&net, &[1.0, 1.0], 1.0, 1.0, 1 << 20).unwrap();
    let s = s.expect("the quadratic term wins somewhere");
    // At (s, s) the drift of E + S is s + s², above 2s + 1 once s ≥ 2.
    assert_eq!(s, 2);
    let af = apply_crn(&net, s);
    assert_eq!(af, 6.0);
    let box_report = check_crn_linear_bound(&net, &[1.0, 1.0], 1.0, 1.0, 50).unwrap();
    assert!(!box_report.passed());
}

fn apply_crn(net: &fragsim::ReactionNetwork, s: u64) -> f64 {
    fragsim::crn::apply_crn_generator(net, |x| x.mass() as f64, &Complex(vec![s, s])).unwrap()
}

#[test]
fn birth_death_has_a_linear_bound() {
    let net = birth_death(2.0, 1.0).unwrap();
    let r = check_crn_linear_bound(&net, &[1.0], 0.0, 2.0, 5_000).unwrap();
    assert!(r.passed());
}

#[test]
fn reciprocal_log_drift_is_eventually_below_minus_one() {
    let scan = scan_drift_tail(1.0, 0.5, &CandidateFunction::RecipLog, 100_000).unwrap();
    let x_star = scan.x_star.expect("tail exists");
    assert!(x_star <= 10_000, "{scan:?}");
    assert!(scan.max_drift_on_tail.unwrap() <= -1.0);
}

#[test]
fn power_function_drift_for_small_retention() {
    let lambda = choose_lambda(1.0, 0.2).expect("an exponent exists");
    assert!(lambda > 0.0 && lambda < 1.0);
    let f = CandidateFunction::Power { lambda };
    let scan = scan_drift_tail(1.0, 0.2, &f, 100_000).unwrap();
    assert!(scan.x_star.is_some(), "{scan:?}");
    // Oracle: sum the chain transitions directly at a few points.
    for x in [10u64, 1_000, 90_000] {
        let drift: f64 = one_enzyme_transitions(1.0, 0.2, x)
            .iter()
            .map(|&(y, r)| r * ((y as f64).powf(lambda) - (x as f64).powf(lambda)))
            .sum();
        if x >= scan.x_star.unwrap() {
            assert!(drift <= -1.0, "x={x}: {drift}");
        }
    }
}

#[test]
fn explosive_chemistry_has_super_linear_drift() {
    let net = explosive_enzyme(1.0).unwrap();
    let at = |s: u64| {
        fragsim::crn::apply_crn_generator(&net, |x| x.get(1) as f64, &Complex(vec![1, s])).unwrap()
    };
    assert!(at(200) / at(100) > 3.5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closed_form_matches_generator_on_sampled_states(
        seed in any::<u64>(),
        alpha in 0.1..3.0f64,
        kf in 0.0..3.0f64,
        kc in 0.0..3.0f64,
    ) {
        let p = Model4Params { kappa_f: kf, kappa_c: kc, ..Model4Params::uniform(1.0) };
        let m = p.build_default().unwrap();
        for n in sample_states(1, 10, 8, 16, seed) {
            let want = closed_form_drift_model4(&p, alpha, &n).unwrap();
            let v = |n: &PopulationState| alpha * n.total_mass() as f64 + n.total_compartments() as f64;
            let got = apply_population_generator(&m, v, &n, None).unwrap().value;
            prop_assert!((got - want).abs() <= 1e-9 * (1.0 + want.abs()));
        }
    }
}
