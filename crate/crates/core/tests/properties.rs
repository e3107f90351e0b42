use std::sync::Arc;

use hyb_core::bigstep::{evaluate, BigResult};
use hyb_core::harness::{check_case, gen_case, gen_program, GenConfig, AGREEMENT_TOL};
use hyb_core::limits::Limits;
use hyb_core::trajectory::{Seg, Trj};
use hyb_core::{parse, pretty, Env};
use proptest::prelude::*;

fn cfg(seed: u64) -> GenConfig {
    GenConfig {
        seed,
        ..GenConfig::default()
    }
}

fn terminated(src: &str, t: f64) -> Env {
    let (p, vars) = parse(src).unwrap();
    let env = Env::zeros(Arc::new(vars));
    match evaluate(&p, &env, t, &Limits::default()).unwrap() {
        BigResult::SkipAt { env, .. } => env,
        other => panic!("{src}: {other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn pretty_is_a_fixpoint_of_parse(seed in any::<u64>()) {
        let (p, _) = gen_program(&cfg(seed));
        let text = pretty(&p);
        let (q, _) = parse(&text).map_err(|e| TestCaseError::fail(format!("{text}\n{e}")))?;
        prop_assert_eq!(pretty(&q), text);
    }

    #[test]
    fn evaluators_agree_on_random_cases(seed in any::<u64>()) {
        let c = gen_case(&cfg(seed));
        let r = check_case(&c.prog, &c.env, c.t, 20_000, AGREEMENT_TOL);
        prop_assert!(r.small_big.is_none(), "{:?}", r.small_big);
        prop_assert!(r.small_den.is_none(), "{:?}", r.small_den);
        prop_assert!(r.big_den.is_none(), "{:?}", r.big_den);
    }

    #[test]
    fn evaluation_is_deterministic(seed in any::<u64>()) {
        let c = gen_case(&cfg(seed));
        let a = check_case(&c.prog, &c.env, c.t, 5_000, AGREEMENT_TOL);
        let b = check_case(&c.prog, &c.env, c.t, 5_000, AGREEMENT_TOL);
        prop_assert_eq!(format!("{:?}", (a.small, a.big, a.den)), format!("{:?}", (b.small, b.big, b.den)));
    }

    #[test]
    fn flows_compose(a in -2i32..=2, b in -2i32..=2, c in -3i32..=3, s in 1u32..=8, u in 1u32..=8) {
        let (s, u) = (s as f64 / 4.0, u as f64 / 4.0);
        let rhs = format!("x' = {a}*x + {b}*y + {c}, y' = {b}*x + -1*y");
        let split = terminated(&format!("x := 1 ; y := 0.5 ; {rhs} for {s} ; {rhs} for {u}"), 10.0);
        let whole = terminated(&format!("x := 1 ; y := 0.5 ; {rhs} for {}", s + u), 10.0);
        prop_assert!(split.approx_eq(&whole, 1e-9), "{split} vs {whole}");
    }

    #[test]
    fn concat_and_truncate_respect_durations(
        durs in prop::collection::vec(1u32..8, 1..6),
        cut in 0.0f64..1.0,
    ) {
        let segs: Vec<Seg<f64>> = durs.iter().enumerate().map(|(i, d)| Seg::constant(*d as f64 / 4.0, i as f64)).collect();
        let (left, right) = segs.split_at(segs.len() / 2);
        let l = Trj::from_segs(left.to_vec());
        let r = Trj::from_segs(right.to_vec());
        let whole = l.concat(&r);
        prop_assert!((whole.total() - l.total() - r.total()).abs() < 1e-12);
        let d = cut * whole.total();
        let cut_trj = whole.truncate(d).unwrap();
        prop_assert!((cut_trj.total() - d).abs() < 1e-12);
        if d > 0.0 {
            let probe = d * 0.5;
            prop_assert_eq!(cut_trj.at(probe).unwrap(), whole.at(probe).unwrap());
        }
    }
}
