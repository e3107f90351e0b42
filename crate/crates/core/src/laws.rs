//! Sampled law suites for trajectories and the hybrid monad.
//!
//! Elements are built from piecewise-constant trajectories with breakpoints on
//! a quarter grid over the state space `(f64, f64)`, so probe equality
//! coincides with equality. Random functions are deterministic: their output
//! is drawn from a generator seeded by a hash of the argument.
//!
//! Every suite also runs one deliberately broken operation that must fail
//! at least once, to show the checks have teeth.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::harness::case_seed;
use crate::limits::Fuel;
use crate::monad::{
    act, classic_eq, classic_kleisli, elgot, elgot_within, helem_eq, iota, iota_prime, kleisli,
    kleisli_within, map_states, observed_eq, state_kleisli, tau, theta, theta_inv, unit, Closure,
    Coprod, HClassic, HElem, IotaResult, MonadError, Val,
};
use crate::trajectory::{prefix_le, probe_eq, ProbeSet, Seg, Trj};

type R = ChaCha8Rng;
/// Two-variable state.
pub type St = (f64, f64);
type H<X> = HElem<X, St>;
/// States of `H_{S ⊎ Y}` with `Y = f64`.
type Sy = Coprod<St, f64>;

/// Far enough to force every generated element to completion.
const FAR: f64 = 1e3;
const ELGOT_FUEL: u64 = 10_000;

fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn int(r: &mut R, lo: i32, hi: i32) -> f64 {
    r.random_range(lo..=hi) as f64
}

fn dur(r: &mut R) -> f64 {
    r.random_range(1..=8) as f64 / 4.0
}

fn st(r: &mut R) -> St {
    (int(r, -3, 3), int(r, -3, 3))
}

fn sy(r: &mut R) -> Sy {
    if r.random_bool(0.2) {
        Coprod::Inr(int(r, -3, 3))
    } else {
        Coprod::Inl(st(r))
    }
}

fn num(r: &mut R) -> f64 {
    int(r, -5, 5)
}

fn trj<S: Val>(r: &mut R, state: fn(&mut R) -> S) -> Trj<S> {
    let n = r.random_range(0..=3);
    Trj::from_segs((0..n).map(|_| Seg::constant(dur(r), state(r))).collect())
}

fn nonempty<S: Val>(r: &mut R, state: fn(&mut R) -> S) -> Trj<S> {
    let mut t = trj(r, state);
    if t.is_empty() {
        t.push(Seg::constant(dur(r), state(r)));
    }
    t
}

/// Convergent, open or closed divergent, instantly divergent, and, when
/// `lazy` holds, not-yet-known elements that complete once forced.
fn helem<X: Val, S: Val>(r: &mut R, lazy: bool, state: fn(&mut R) -> S, val: fn(&mut R) -> X) -> HElem<X, S> {
    let k: f64 = r.random();
    if k < 0.5 {
        HElem::Conv {
            tr: trj(r, state),
            val: val(r),
        }
    } else if k < 0.65 {
        HElem::div(trj(r, state), Closure::Open)
    } else if k < 0.8 {
        let b = state(r);
        HElem::div(trj(r, state), Closure::Closed(b))
    } else if k < 0.88 || !lazy {
        HElem::instant_divergence()
    } else {
        let prefix = nonempty(r, state);
        let full = prefix.concat(&nonempty(r, state));
        let x = val(r);
        HElem::Lazy(crate::monad::Deferred::new(prefix, move |_| HElem::Conv {
            tr: full.clone(),
            val: x.clone(),
        }))
    }
}

/// A deterministic random function of its argument's bit pattern.
#[derive(Clone, Copy)]
struct RandFn(u64);

impl RandFn {
    fn rng(self, key: u64) -> R {
        R::seed_from_u64(mix(self.0, key))
    }

    fn num(self, x: f64) -> H<f64> {
        helem(&mut self.rng(x.to_bits()), true, st, num)
    }

    fn sy(self, x: f64) -> HElem<f64, Sy> {
        helem(&mut self.rng(x.to_bits()), false, sy, num)
    }

    fn state(self, s: St) -> H<St> {
        let mut r = self.rng(mix(s.0.to_bits(), s.1.to_bits()));
        if r.random_bool(0.2) {
            return HElem::instant_divergence();
        }
        helem(&mut r, false, st, st)
    }
}

/// Result of one law instance: whether it held and which case branch it
/// exercised.
struct Check {
    ok: bool,
    branch: &'static str,
}

fn pass(ok: bool) -> Check {
    Check { ok, branch: "" }
}

type CheckFn = fn(u64, bool) -> Check;

struct LawDef {
    suite: &'static str,
    name: &'static str,
    check: CheckFn,
}

/// Per-law counts.
#[derive(Debug, Clone, Serialize)]
pub struct LawOutcome {
    pub suite: &'static str,
    pub law: &'static str,
    pub cases: usize,
    pub failures: usize,
    /// Seed of the first failing case.
    pub first_failure: Option<u64>,
    /// Cases per exercised branch, for laws that split on the input's shape.
    pub branches: BTreeMap<&'static str, usize>,
}

/// A broken operation run against one law of its suite.
#[derive(Debug, Clone, Serialize)]
pub struct ControlOutcome {
    pub suite: &'static str,
    pub mutation: &'static str,
    pub law: &'static str,
    pub cases: usize,
    /// Must be positive.
    pub failures: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct LawReport {
    pub seed: u64,
    pub laws: Vec<LawOutcome>,
    pub controls: Vec<ControlOutcome>,
}

impl LawReport {
    /// Every law held on every case and every broken operation was caught.
    pub fn all_pass(&self) -> bool {
        self.laws.iter().all(|l| l.failures == 0 && l.cases > 0)
            && self.controls.iter().all(|c| c.failures > 0)
    }

    pub fn failing(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .laws
            .iter()
            .filter(|l| l.failures > 0)
            .map(|l| format!("{}/{}: {} of {} failed", l.suite, l.law, l.failures, l.cases))
            .collect();
        out.extend(
            self.controls
                .iter()
                .filter(|c| c.failures == 0)
                .map(|c| format!("{}/{}: mutation `{}` was not caught", c.suite, c.law, c.mutation)),
        );
        out
    }
}

// Operations with an optional injected fault.

/// Kleisli extension; the mutant forgets the input's trajectory.
fn kl<X: Val, Y: Val, F>(mutant: bool, f: F, m: H<X>) -> H<Y>
where
    F: Fn(X) -> H<Y> + Send + Sync + 'static,
{
    if mutant {
        if let HElem::Conv { val, .. } = m {
            return f(val);
        }
    }
    kleisli(f, m)
}

/// The mutant reads the last state instead of the first.
fn io<X: Val>(mutant: bool, m: &H<X>) -> IotaResult<X, St> {
    if mutant {
        if let Some(b) = m.trajectory().boundary() {
            return IotaResult::InrState(b);
        }
    }
    iota(m)
}

/// The mutant keeps a convergent value after cutting the trajectory.
fn tau_m<X: Val>(mutant: bool, m: &HElem<X, Sy>) -> Result<H<X>, MonadError> {
    let r = tau(m)?;
    Ok(match (mutant, m, r) {
        (true, HElem::Conv { val, .. }, HElem::Div { tr, .. }) => HElem::Conv { tr, val: val.clone() },
        (_, _, r) => r,
    })
}

/// The mutant always opens divergent closures.
fn tau_open<X: Val>(mutant: bool, m: &HElem<X, Sy>) -> Result<H<X>, MonadError> {
    let r = tau(m)?;
    Ok(match (mutant, r) {
        (true, HElem::Div { tr, fuel_exhausted, .. }) => HElem::Div {
            tr,
            closure: Closure::Open,
            fuel_exhausted,
        },
        (_, r) => r,
    })
}

/// The mutant reports the first state as the end point.
fn theta_m(mutant: bool, m: &H<St>) -> Result<HClassic<St>, MonadError> {
    let r = theta(m)?;
    Ok(match (mutant, r) {
        (true, HClassic::Conv { tr, end }) => {
            let end = tr.initial().unwrap_or(end);
            HClassic::Conv { tr, end }
        }
        (_, r) => r,
    })
}

/// The mutant repeats the left operand's last segment.
fn cat(mutant: bool, a: &Trj<St>, b: &Trj<St>) -> Trj<St> {
    let mut out = a.clone();
    if mutant {
        if let Some(last) = a.segs().last() {
            out.push(last.clone());
        }
    }
    out.append(b);
    out
}

fn eq<X: Val + crate::trajectory::Approx>(a: H<X>, b: H<X>, seed: u64) -> bool {
    observed_eq(a, b, FAR, seed)
}

// Trajectory monoid and orders.

fn trj_left_unit(seed: u64, mutant: bool) -> Check {
    let r = &mut R::seed_from_u64(seed);
    let a = trj(r, st);
    let c = cat(mutant, &Trj::empty(), &a);
    pass(c.total() == a.total() && c.segs().len() == a.segs().len() && probe_eq(&c, &a, seed))
}

fn trj_right_unit(seed: u64, mutant: bool) -> Check {
    let r = &mut R::seed_from_u64(seed);
    let a = trj(r, st);
    let c = cat(mutant, &a, &Trj::empty());
    pass(c.total() == a.total() && c.segs().len() == a.segs().len() && probe_eq(&c, &a, seed))
}

fn trj_assoc(seed: u64, mutant: bool) -> Check {
    let r = &mut R::seed_from_u64(seed);
    let (a, b, c) = (trj(r, st), trj(r, st), trj(r, st));
    let l = cat(mutant, &cat(mutant, &a, &b), &c);
    let rr = cat(mutant, &a, &cat(mutant, &b, &c));
    pass(l.total() == rr.total() && probe_eq(&l, &rr, seed))
}

fn trj_additive(seed: u64, mutant: bool) -> Check {
    let r = &mut R::seed_from_u64(seed);
    let (a, b) = (trj(r, st), trj(r, st));
    let c = cat(mutant, &a, &b);
    pass((c.total() - (a.total() + b.total())).abs() <= 1e-12)
}

fn prefix_preorder(seed: u64, _: bool) -> Check {
    let r = &mut R::seed_from_u64(seed);
    let c = nonempty(r, st).concat(&trj(r, st));
    let mut cuts = [r.random_range(0.0..=c.total()), r.random_range(0.0..=c.total())];
    cuts.sort_by(f64::total_cmp);
    let a = c.truncate(cuts[0]).expect("in range");
    let b = c.truncate(cuts[1]).expect("in range");
    let probes = ProbeSet::for_pair(&c, &c, c.total(), seed);
    let refl = prefix_le(&c, &c, &probes) && prefix_le(&Trj::empty(), &c, &probes);
    let trans = prefix_le(&a, &b, &probes) && prefix_le(&b, &c, &probes) && prefix_le(&a, &c, &probes);
    let ext = prefix_le(&a, &a.concat(&b), &probes);
    pass(refl && trans && ext)
}

fn truncate_at(seed: u64, _: bool) -> Check {
    let r = &mut R::seed_from_u64(seed);
    let c = nonempty(r, st).concat(&trj(r, st));
    let d = r.random_range(0.0..=c.total());
    let t = c.truncate(d).expect("in range");
    let probes = ProbeSet::for_pair(&c, &c, d, seed);
    let full = c.truncate(c.total()).expect("in range");
    pass(
        t.total() == d
            && probes.times().iter().all(|x| t.at(*x).ok() == c.at(*x).ok())
            && probe_eq(&full, &c, seed),
    )
}

// Monad laws.

fn monad_left_unit(seed: u64, mutant: bool) -> Check {
    let r = &mut R::seed_from_u64(seed);
    let f = RandFn(r.random());
    let x = num(r);
    pass(eq(kl(mutant, move |y| f.num(y), unit(x)), f.num(x), seed))
}

fn monad_right_unit(seed: u64, mutant: bool) -> Check {
    let r = &mut R::seed_from_u64(seed);
    let m: H<f64> = helem(r, true, st, num);
    pass(eq(kl(mutant, unit, m.clone()), m, seed))
}

fn monad_assoc(seed: u64, mutant: bool) -> Check {
    let r = &mut R::seed_from_u64(seed);
    let (f, g) = (RandFn(r.random()), RandFn(r.random()));
    let m: H<f64> = helem(r, true, st, num);
    let left = kl(mutant, move |y| f.num(y), kl(mutant, move |x| g.num(x), m.clone()));
    let right = kl(mutant, move |x| kl(mutant, move |y| f.num(y), g.num(x)), m);
    pass(eq(left, right, seed))
}

// Monoid module.

fn module_unit(seed: u64, _: bool) -> Check {
    let r = &mut R::seed_from_u64(seed);
    let e: H<f64> = helem(r, true, st, num);
    pass(eq(act(&Trj::empty(), e.clone()), e, seed))
}

fn module_action(seed: u64, _: bool) -> Check {
    let r = &mut R::seed_from_u64(seed);
    let (m, n) = (trj(r, st), trj(r, st));
    let e: H<f64> = helem(r, true, st, num);
    pass(eq(act(&m.concat(&n), e.clone()), act(&m, act(&n, e)), seed))
}

fn kleisli_action(seed: u64, mutant: bool) -> Check {
    let r = &mut R::seed_from_u64(seed);
    let f = RandFn(r.random());
    let tr = trj(r, st);
    let x = num(r);
    let lhs = kl(mutant, move |y| f.num(y), HElem::Conv { tr: tr.clone(), val: x });
    pass(eq(lhs, act(&tr, f.num(x)), seed))
}

// ι

fn iota_unit(seed: u64, mutant: bool) -> Check {
    let r = &mut R::seed_from_u64(seed);
    let x = num(r);
    pass(io(mutant, &unit::<f64, St>(x)) == IotaResult::InlVal(x))
}

fn iota_kleisli(seed: u64, mutant: bool) -> Check {
    let r = &mut R::seed_from_u64(seed);
    let f = RandFn(r.random());
    let m: H<f64> = helem(r, false, st, num);
    let lhs = io(mutant, &kleisli(move |y| f.num(y), m.clone()));
    let (rhs, branch) = match io(mutant, &m) {
        IotaResult::InlVal(x) => (io(mutant, &f.num(x)), "instant"),
        IotaResult::InrState(s) => (IotaResult::InrState(s), "state"),
        IotaResult::Bottom => (IotaResult::Bottom, "bottom"),
    };
    Check { ok: lhs == rhs, branch }
}

// τ

fn tau_unit(seed: u64, mutant: bool) -> Check {
    let r = &mut R::seed_from_u64(seed);
    let x = num(r);
    let m: HElem<f64, Sy> = unit(x);
    pass(matches!(tau_m(mutant, &m), Ok(t) if helem_eq(&t, &unit(x), seed)))
}

fn tau_branch(m: &HElem<f64, Sy>, f: RandFn) -> &'static str {
    let hits_right = |tr: &Trj<Sy>| tr.segs().iter().any(|s| matches!(s.law.at(0.0), Coprod::Inr(_)));
    match m {
        HElem::Conv { tr, val } => {
            if hits_right(tr) {
                "right-hit"
            } else if tr.is_empty() {
                "empty"
            } else if !matches!(f.sy(*val), HElem::Conv { .. }) {
                "divergent-image"
            } else {
                "all-left"
            }
        }
        _ => "divergent-input",
    }
}

fn tau_kleisli(seed: u64, mutant: bool) -> Check {
    let r = &mut R::seed_from_u64(seed);
    let f = RandFn(r.random());
    let m: HElem<f64, Sy> = helem(r, false, sy, num);
    let branch = tau_branch(&m, f);
    let lhs = kleisli(move |y| f.sy(y), m.clone());
    let (Ok(lhs), Ok(tm)) = (tau_m(mutant, &lhs), tau_m(mutant, &m)) else {
        return Check { ok: false, branch };
    };
    let rhs = kleisli(
        move |y| tau_m(mutant, &f.sy(y)).expect("piecewise-constant input"),
        tm,
    );
    Check {
        ok: helem_eq(&lhs, &rhs, seed),
        branch,
    }
}

// Joint laws of ι and τ.

fn iota_tau(seed: u64, mutant: bool) -> Check {
    let r = &mut R::seed_from_u64(seed);
    let m: HElem<f64, Sy> = helem(r, false, sy, num);
    let Ok(t) = tau_open(mutant, &m) else {
        return pass(false);
    };
    let lhs = iota(&t);
    let rhs = match iota(&m) {
        IotaResult::InlVal(x) => IotaResult::InlVal(x),
        IotaResult::InrState(Coprod::Inl(s)) => IotaResult::InrState(s),
        IotaResult::InrState(Coprod::Inr(_)) | IotaResult::Bottom => IotaResult::Bottom,
    };
    pass(lhs == rhs)
}

fn tau_tau(seed: u64, mutant: bool) -> Check {
    let r = &mut R::seed_from_u64(seed);
    let k = int(r, -3, 3);
    let m: HElem<f64, Sy> = helem(r, false, sy, num);
    let f = move |s: St| -> Sy {
        if s.0 <= k {
            Coprod::Inl(s)
        } else {
            Coprod::Inr(s.1)
        }
    };
    let lifted = move |c: Sy| match c {
        Coprod::Inl(s) => f(s),
        Coprod::Inr(y) => Coprod::Inr(y),
    };
    let lhs = tau_open(mutant, &map_states(m.clone(), Arc::new(lifted)));
    let rhs = tau_open(mutant, &m).and_then(|t| tau_open(mutant, &map_states(t, Arc::new(f))));
    pass(matches!((lhs, rhs), (Ok(a), Ok(b)) if helem_eq(&a, &b, seed)))
}

// θ

fn theta_roundtrip(seed: u64, mutant: bool) -> Check {
    let r = &mut R::seed_from_u64(seed);
    let m: H<St> = helem(r, false, st, st);
    let Ok(c) = theta_m(mutant, &m) else {
        return pass(false);
    };
    let back = theta_inv(&c);
    let again = theta_m(mutant, &back);
    pass(helem_eq(&back, &m, seed) && matches!(again, Ok(c2) if classic_eq(&c2, &c, seed)))
}

fn theta_unit(seed: u64, mutant: bool) -> Check {
    let r = &mut R::seed_from_u64(seed);
    let s = st(r);
    pass(matches!(theta_m(mutant, &unit(s)), Ok(c) if classic_eq(&c, &HClassic::unit(s), seed)))
}

fn theta_kleisli(seed: u64, mutant: bool) -> Check {
    let r = &mut R::seed_from_u64(seed);
    let f = RandFn(r.random());
    let m: H<St> = helem(r, false, st, st);
    let cut = m
        .trajectory()
        .segs()
        .iter()
        .any(|s| iota_prime(&f.state(s.law.at(0.0))) == Coprod::Inr(crate::monad::Bottom));
    let branch = if cut { "cut" } else { "whole" };
    let lhs = state_kleisli(move |s| f.state(s), &m).and_then(|k| theta_m(mutant, &k));
    let rhs = theta_m(mutant, &m).and_then(|c| {
        classic_kleisli(
            move |s| theta_m(mutant, &f.state(s)).expect("complete element"),
            &c,
        )
    });
    let ok = matches!((lhs, rhs), (Ok(a), Ok(b)) if classic_eq(&a, &b, seed));
    Check { ok, branch }
}

// Elgot iteration.

/// A loop body over a counter: exits once the counter reaches a bound, or
/// never when `endless`; passes time on most iterations and occasionally
/// diverges.
#[derive(Clone, Copy)]
struct Body {
    f: RandFn,
    bound: f64,
    endless: bool,
}

impl Body {
    fn gen(r: &mut R) -> Body {
        Body {
            f: RandFn(r.random()),
            bound: int(r, 0, 6),
            endless: r.random_bool(0.3),
        }
    }

    fn call(self, x: f64) -> H<Coprod<f64, f64>> {
        let r = &mut self.f.rng(x.to_bits());
        if !self.endless && x >= self.bound {
            return if r.random_bool(0.75) {
                HElem::Conv {
                    tr: trj(r, st),
                    val: Coprod::Inl(x * 2.0),
                }
            } else {
                helem(r, false, st, |_| Coprod::Inl(0.0))
            };
        }
        let k: f64 = r.random();
        if k < 0.85 {
            HElem::Conv {
                tr: nonempty(r, st),
                val: Coprod::Inr(x + 1.0),
            }
        } else if k < 0.95 || self.endless {
            unit(Coprod::Inr(x + 1.0))
        } else {
            HElem::div(trj(r, st), Closure::Open)
        }
    }
}

fn unfold_once(b: Body, x: f64) -> H<f64> {
    kleisli(
        |c: Coprod<f64, f64>| match c {
            Coprod::Inl(y) => unit(y),
            Coprod::Inr(_) => HElem::instant_divergence(),
        },
        b.call(x),
    )
}

fn elgot_fixpoint(seed: u64, mutant: bool) -> Check {
    let r = &mut R::seed_from_u64(seed);
    let b = Body::gen(r);
    let x0 = int(r, -2, 3);
    let h = r.random_range(0.0..12.0);
    let lhs = if mutant {
        unfold_once(b, x0)
    } else {
        elgot_within(Arc::new(move |x, _| b.call(x)), x0, Some(h), &Fuel::new(ELGOT_FUEL, None))
    };
    let fuel = Fuel::new(ELGOT_FUEL, None);
    let rest = Arc::new(move |c: Coprod<f64, f64>, rem: Option<f64>| match c {
        Coprod::Inl(y) => unit(y),
        Coprod::Inr(x) => elgot_within(Arc::new(move |x, _| b.call(x)), x, rem, &fuel),
    });
    let rhs = kleisli_within(rest, b.call(x0), Some(h));
    let branch = if b.endless { "endless" } else { "exits" };
    Check {
        ok: observed_eq(lhs, rhs, h, seed),
        branch,
    }
}

/// Approximation of `f†(x0)` at horizon `h`, cut at `h`.
fn approx_at(b: Body, x0: f64, h: f64) -> Trj<St> {
    let m = elgot_within(Arc::new(move |x, _| b.call(x)), x0, Some(h), &Fuel::new(ELGOT_FUEL, None));
    let tr = m.trajectory();
    tr.truncate(h.min(tr.total())).expect("in range")
}

fn elgot_horizon_chain(seed: u64, _: bool) -> Check {
    let r = &mut R::seed_from_u64(seed);
    let b = Body::gen(r);
    let x0 = int(r, -2, 3);
    let mut hs = [r.random_range(0.0..12.0), r.random_range(0.0..12.0)];
    hs.sort_by(f64::total_cmp);
    let (a, c) = (approx_at(b, x0, hs[0]), approx_at(b, x0, hs[1]));
    pass(prefix_le(&a, &c, &ProbeSet::for_pair(&a, &c, a.total(), seed)))
}

fn elgot_fuel_chain(seed: u64, _: bool) -> Check {
    let r = &mut R::seed_from_u64(seed);
    let b = Body::gen(r);
    let x0 = int(r, -2, 3);
    let chain: Vec<Trj<St>> = (1..=8)
        .map(|n| elgot(move |x| b.call(x), x0, &Fuel::new(n, None)).trajectory().clone())
        .collect();
    pass(chain.windows(2).all(|w| {
        let probes = ProbeSet::for_pair(&w[0], &w[1], w[0].total(), seed);
        prefix_le(&w[0], &w[1], &probes)
    }))
}

const LAWS: &[LawDef] = &[
    LawDef { suite: "trajectory", name: "left-unit", check: trj_left_unit },
    LawDef { suite: "trajectory", name: "right-unit", check: trj_right_unit },
    LawDef { suite: "trajectory", name: "associativity", check: trj_assoc },
    LawDef { suite: "trajectory", name: "duration-additivity", check: trj_additive },
    LawDef { suite: "trajectory", name: "prefix-preorder", check: prefix_preorder },
    LawDef { suite: "trajectory", name: "truncate-agrees", check: truncate_at },
    LawDef { suite: "monad", name: "left-unit", check: monad_left_unit },
    LawDef { suite: "monad", name: "right-unit", check: monad_right_unit },
    LawDef { suite: "monad", name: "associativity", check: monad_assoc },
    LawDef { suite: "module", name: "unit", check: module_unit },
    LawDef { suite: "module", name: "action", check: module_action },
    LawDef { suite: "module", name: "kleisli-action", check: kleisli_action },
    LawDef { suite: "iota", name: "unit", check: iota_unit },
    LawDef { suite: "iota", name: "kleisli", check: iota_kleisli },
    LawDef { suite: "tau", name: "unit", check: tau_unit },
    LawDef { suite: "tau", name: "kleisli", check: tau_kleisli },
    LawDef { suite: "iota-tau", name: "iota-after-tau", check: iota_tau },
    LawDef { suite: "iota-tau", name: "tau-after-relabel", check: tau_tau },
    LawDef { suite: "theta", name: "round-trip", check: theta_roundtrip },
    LawDef { suite: "theta", name: "unit", check: theta_unit },
    LawDef { suite: "theta", name: "kleisli-transport", check: theta_kleisli },
    LawDef { suite: "elgot", name: "fixpoint", check: elgot_fixpoint },
    LawDef { suite: "elgot", name: "horizon-chain", check: elgot_horizon_chain },
    LawDef { suite: "elgot", name: "fuel-chain", check: elgot_fuel_chain },
];

/// One broken operation per suite, with the law expected to catch it.
const CONTROLS: &[(&str, &str, &str)] = &[
    ("trajectory", "right-unit", "concat repeats the last segment"),
    ("monad", "right-unit", "kleisli drops the input trajectory"),
    ("module", "kleisli-action", "kleisli drops the input trajectory"),
    ("iota", "kleisli", "iota reads the last state"),
    ("tau", "kleisli", "tau keeps the value after a cut"),
    ("iota-tau", "iota-after-tau", "tau opens every closure"),
    ("theta", "round-trip", "theta ends at the first state"),
    ("elgot", "fixpoint", "elgot unfolds once"),
];

fn find(suite: &str, law: &str) -> &'static LawDef {
    LAWS.iter()
        .find(|l| l.suite == suite && l.name == law)
        .expect("control names a law")
}

fn tally(seed: u64, cases: usize, k: usize, check: CheckFn, mutant: bool) -> (usize, Option<u64>, BTreeMap<&'static str, usize>) {
    let rows: Vec<(u64, Check)> = (0..cases)
        .into_par_iter()
        .map(|i| {
            let s = case_seed(mix(seed, k as u64), i);
            (s, check(s, mutant))
        })
        .collect();
    let mut failures = 0;
    let mut first = None;
    let mut branches = BTreeMap::new();
    for (s, c) in rows {
        if !c.ok {
            failures += 1;
            first.get_or_insert(s);
        }
        if !c.branch.is_empty() {
            *branches.entry(c.branch).or_insert(0) += 1;
        }
    }
    (failures, first, branches)
}

/// Runs every law on `cases` generated instances and every broken operation
/// on as many. The report is independent of thread scheduling.
pub fn run_law_suites(seed: u64, cases: usize) -> LawReport {
    let laws = LAWS
        .iter()
        .enumerate()
        .map(|(k, l)| {
            let (failures, first_failure, branches) = tally(seed, cases, k, l.check, false);
            LawOutcome {
                suite: l.suite,
                law: l.name,
                cases,
                failures,
                first_failure,
                branches,
            }
        })
        .collect();
    let controls = CONTROLS
        .iter()
        .map(|(suite, law, mutation)| {
            let l = find(suite, law);
            let k = LAWS.len() + 1;
            let (failures, _, _) = tally(seed, cases, k, l.check, true);
            ControlOutcome {
                suite,
                mutation,
                law,
                cases,
                failures,
            }
        })
        .collect();
    LawReport { seed, laws, controls }
}

/// Looks up one law's check by suite and name and runs it on one seed.
pub fn check_one(suite: &str, law: &str, seed: u64) -> Option<bool> {
    LAWS.iter()
        .find(|l| l.suite == suite && l.name == law)
        .map(|l| (l.check)(seed, false).ok)
}
