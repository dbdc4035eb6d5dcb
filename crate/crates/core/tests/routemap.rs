mod common;

use common::{bump, constant, spec, toy};
use gwr_route::routemap::{select_rule, surface_disagreement, Rule, TermLabel};
use gwr_route::synth::{generate_svc, Layout};
use gwr_route::{run_routemap, Config, Recommendation, Report};
use proptest::prelude::*;

fn check_soundness(r: &Report) {
    let cls = &r.classification;
    let cfg = &r.config;
    for (k, &ratio) in cls.ratios.iter().enumerate() {
        assert_eq!(
            cls.labels[k] == TermLabel::Global,
            ratio >= cfg.global_threshold
        );
    }
    assert_eq!(select_rule(cls), r.decision.rule);
    match r.decision.recommendation {
        Recommendation::Linear => {
            assert!(cls.ratios.iter().all(|&v| v >= cfg.global_threshold));
            assert!(r.step1.moran.p_value >= cfg.alpha);
        }
        Recommendation::Sam => {
            assert!(matches!(
                r.decision.rule,
                Rule::AllGlobal | Rule::LocalInterceptOnly
            ));
            assert!(r.candidates.sam.is_some());
        }
        Recommendation::Gwr => {
            assert_eq!(r.decision.rule, Rule::AllLocalSimilar);
            assert!(r.candidates.comparison.as_ref().unwrap().kept);
        }
        Recommendation::MxGwr => {
            assert_eq!(r.decision.rule, Rule::MixedSimilar);
            assert!(r.candidates.comparison.as_ref().unwrap().kept);
        }
        Recommendation::MsGwr => {}
    }
    let models: Vec<&str> = r
        .comparison
        .rows
        .iter()
        .map(|row| row.model.as_str())
        .collect();
    assert!(models.contains(&"LINEAR") && models.contains(&"MS-GWR"));
    assert!(models.contains(&r.decision.recommendation.label()));
    assert_eq!(r.comparison.ols_aicc, r.step1.ols.aicc);
    assert_eq!(r.comparison.msgwr_aicc, r.step2.msgwr.aicc);
}

#[test]
fn global_data_recommends_linear() {
    let (ds, f) = toy(150, 31);
    let r = run_routemap(&ds, &f, &Config::default()).unwrap();
    let fixed = r.recommendation() == Recommendation::Linear
        || (r.recommendation() == Recommendation::Sam && r.decision.linear_fallback);
    assert!(fixed, "{}", r.narrative());
    let ratios = &r.classification.ratios;
    assert!(ratios[1] >= 0.8 && ratios[2] >= 0.8);
    check_soundness(&r);
}

#[test]
fn noise_warns_of_no_relationships() {
    let s = spec(
        120,
        Layout::UniformRandom,
        &[
            ("Intercept", constant(2.0)),
            ("x1", constant(0.0)),
            ("x2", constant(0.0)),
        ],
        1.0,
        8,
    );
    let (ds, _) = generate_svc(&s).unwrap();
    let r = run_routemap(&ds, &s.formula(), &Config::default()).unwrap();
    assert!(
        r.warnings
            .iter()
            .any(|w| w.contains("no worthwhile relationships")),
        "{:?}",
        r.warnings
    );
    check_soundness(&r);
}

#[test]
fn one_local_slope_selects_a_local_model() {
    let s = spec(
        196,
        Layout::Grid,
        &[
            ("Intercept", constant(1.0)),
            ("x1", bump(1000.0, 3.0)),
            ("x2", constant(0.5)),
        ],
        0.5,
        4,
    );
    let (ds, _) = generate_svc(&s).unwrap();
    let r = run_routemap(&ds, &s.formula(), &Config::default()).unwrap();
    assert!(
        matches!(
            r.recommendation(),
            Recommendation::MxGwr | Recommendation::MsGwr
        ),
        "{}",
        r.narrative()
    );
    let k = r
        .classification
        .terms
        .iter()
        .position(|t| t == "x1")
        .unwrap();
    assert_eq!(r.classification.labels[k], TermLabel::Local);
    check_soundness(&r);
}

#[test]
fn report_json_is_deterministic() {
    let (ds, f) = toy(80, 2);
    let a = serde_json::to_string(&run_routemap(&ds, &f, &Config::default()).unwrap()).unwrap();
    let b = serde_json::to_string(&run_routemap(&ds, &f, &Config::default()).unwrap()).unwrap();
    assert_eq!(a, b);
    assert!(a.contains("\"ols_aicc\"") && a.contains("\"chosen_model\""));
}

#[test]
fn invalid_config_is_rejected() {
    let (ds, f) = toy(40, 2);
    let cfg = Config {
        global_threshold: 1.5,
        ..Default::default()
    };
    assert!(run_routemap(&ds, &f, &cfg).is_err());
}

#[test]
fn surfaces_agree_with_themselves() {
    let (ds, f) = toy(60, 6);
    let r = run_routemap(&ds, &f, &Config::default()).unwrap();
    let s = &r.step2.msgwr.surfaces;
    let d = surface_disagreement(s, s, 0.05).unwrap();
    assert_eq!(d.max, 0.0);
    assert!(surface_disagreement(s, &s[..1], 0.05).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]
    #[test]
    fn rules_are_sound_on_random_designs(seed in 0u64..10_000, amp in 0.0f64..3.0) {
        let s = spec(
            100,
            Layout::UniformRandom,
            &[("Intercept", constant(1.0)), ("x1", bump(1000.0, amp)), ("x2", constant(-0.5))],
            0.5,
            seed,
        );
        let (ds, _) = generate_svc(&s).unwrap();
        let r = run_routemap(&ds, &s.formula(), &Config::default()).unwrap();
        check_soundness(&r);
        for w in r.sensitivity.windows(2) {
            for t in &w[1].global_terms {
                prop_assert!(w[0].global_terms.contains(t));
            }
        }
    }
}

#[test]
fn failing_fit_aborts_with_partial_report() {
    // too few points for any local regression
    let (ds, f) = toy(30, 9);
    let ds = common::head(&ds, &f, 6);
    let cfg = Config {
        weights: gwr_route::diagnostics::WeightScheme::Knn(2),
        ..Default::default()
    };
    match run_routemap(&ds, &f, &cfg) {
        Err(gwr_route::Error::RouteMap { stage, partial, .. }) => {
            assert!(stage.contains("step 2"), "{stage}");
            assert!(partial[0].starts_with("Step 1"));
        }
        other => panic!(
            "expected an aborted route map, got {:?}",
            other.map(|r| r.recommendation())
        ),
    }
}
