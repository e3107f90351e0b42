use hyb_core::corpus;
use hyb_core::harness::{run_determinism, run_equivalence, run_time_shift, GenConfig, HARNESS_FUEL};
use hyb_core::laws::{check_one, run_law_suites};
use hyb_core::wire::{handle_eval, handle_trace, to_json, Common, EvalRequest, Semantics, TraceRequest};

#[test]
fn equivalence_suite_is_clean_on_a_small_sample() {
    let cfg = GenConfig {
        seed: 7,
        ..GenConfig::default()
    };
    let r = run_equivalence(&cfg, 400, HARNESS_FUEL);
    assert!(r.clean(), "{}", r.jsonl());
    assert_eq!(r.cases, 400);
    assert!(r.values > 0 && r.terminated > 0);
}

#[test]
fn determinism_and_time_shift_hold() {
    let d = run_determinism(3, 100);
    assert!(d.configs > 0);
    assert_eq!((d.ambiguous, d.step_mismatch, d.unstable_runs), (0, 0, 0), "{d:?}");
    let s = run_time_shift(3, 100);
    assert_eq!(s.failures, 0, "{s:?}");
    assert!(s.pairs > 0);
}

#[test]
fn law_suites_pass_and_controls_fail() {
    let r = run_law_suites(11, 100);
    assert!(r.all_pass(), "{:?}", r.failing());
    assert!(r.controls.iter().all(|c| c.failures > 0), "{:?}", r.controls);
    assert_eq!(check_one("elgot", "fixpoint", 5), Some(true));
    assert_eq!(check_one("elgot", "nonsense", 5), None);
}

#[test]
fn corpus_traces_are_consistent_with_point_evaluation() {
    for ex in corpus::ALL {
        let tr = handle_trace(
            &TraceRequest {
                source: ex.source.into(),
                t_max: 3.0,
                samples: 7,
                common: Common {
                    fuel: Some(20_000.0),
                    ..Common::default()
                },
            },
            None,
        )
        .unwrap();
        for (i, t) in [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0].into_iter().enumerate() {
            let r = handle_eval(
                &EvalRequest {
                    source: ex.source.into(),
                    t,
                    semantics: Semantics::Den,
                    common: Common {
                        fuel: Some(20_000.0),
                        ..Common::default()
                    },
                },
                None,
            )
            .unwrap();
            let point = to_json(&tr.points[i]);
            match r.env {
                Some(env) if r.status == "value" => {
                    assert_eq!(point, format!("{{\"t\":{},\"env\":{}}}", to_json(&t), to_json(&env)), "{}", ex.name)
                }
                _ => assert!(point.contains("marker"), "{} at {t}: {point}", ex.name),
            }
        }
    }
}
