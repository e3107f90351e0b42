//! Denotations `⟦p⟧ : S → H_S S`, sampled on demand.
//!
//! A query at time `t` interprets the program with horizon `t`: sequencing
//! stops as soon as the left part's trajectory covers the horizon and loops
//! unfold only as far as needed. The lazily unfolded loop state is guarded
//! by a mutex, so a denotation may be sampled from several threads; results
//! do not depend on the order of the samples.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::Serialize;

use crate::ast::{Atomic, Prog, ProgKind};
use crate::dynamics::{eval_bexpr_with, eval_lterm, flow_of, Env};
use crate::limits::{check_time, EvalError, Fuel, Limits};
use crate::monad::{elgot_within, kleisli_within, map_value, unit, Closure, Coprod, HElem};
use crate::smallstep::duration;
use crate::trajectory::{Locate, Seg, Trj};

/// What a denotation says about one time instant.
#[derive(Debug, Clone, PartialEq)]
pub enum DenResult {
    /// The instant lies inside the trajectory.
    ValueAt(Env),
    /// Convergent with a trajectory ending at or before the instant.
    TerminatedAt { env: Env, duration: f64 },
    /// Divergent with a trajectory ending at or before the instant.
    DivergedBefore { duration: f64 },
    FuelExhausted { timed_out: bool },
}

/// Counters collected while interpreting one query.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DenStats {
    /// Calls of a loop's body-or-exit function.
    pub unfoldings: u64,
    pub fuel_used: u64,
}

struct Ctx {
    fuel: Fuel,
    tol: f64,
    unfoldings: AtomicU64,
    error: Mutex<Option<EvalError>>,
}

impl Ctx {
    fn new(limits: &Limits) -> Arc<Ctx> {
        Arc::new(Ctx {
            fuel: limits.meter(),
            tol: limits.guard_tolerance,
            unfoldings: AtomicU64::new(0),
            error: Mutex::new(None),
        })
    }

    fn out_of_fuel() -> HElem<Env> {
        HElem::Div {
            tr: Trj::empty(),
            closure: Closure::Open,
            fuel_exhausted: true,
        }
    }

    /// Records the first error and stops all further work.
    fn fail(&self, e: EvalError) -> HElem<Env> {
        let mut slot = self.error.lock().expect("error slot");
        if slot.is_none() {
            *slot = Some(e);
        }
        self.fuel.exhaust();
        Ctx::out_of_fuel()
    }

    fn take_error(&self) -> Option<EvalError> {
        self.error.lock().expect("error slot").clone()
    }

    fn stats(&self) -> DenStats {
        DenStats {
            unfoldings: self.unfoldings.load(Ordering::Relaxed),
            fuel_used: self.fuel.used(),
        }
    }
}

/// `⟦p⟧(σ)`, computed far enough to decide the horizon.
fn denote(p: &Arc<Prog>, env: Env, horizon: Option<f64>, ctx: &Arc<Ctx>) -> HElem<Env> {
    match &p.kind {
        ProgKind::At(Atomic::Assign(x, e)) => {
            if !ctx.fuel.tick() {
                return Ctx::out_of_fuel();
            }
            let v = eval_lterm(e, &env);
            unit(env.updated(x, v))
        }
        ProgKind::At(Atomic::DiffFor { eqs, dur }) => {
            if !ctx.fuel.tick() {
                return Ctx::out_of_fuel();
            }
            let d = match duration(dur, &env, p.span) {
                Ok(d) => d,
                Err(e) => return ctx.fail(e),
            };
            if d == 0.0 {
                return unit(env);
            }
            let flow = flow_of(eqs, &env);
            let end = flow.eval(d);
            HElem::Conv {
                tr: Trj::single(Seg::flow(d, flow)),
                val: end,
            }
        }
        ProgKind::Seq(first, rest) => {
            let m = denote(first, env, horizon, ctx);
            let rest = rest.clone();
            let c = ctx.clone();
            kleisli_within(Arc::new(move |s, h| denote(&rest, s, h, &c)), m, horizon)
        }
        ProgKind::Ite(b, q, r) => {
            let branch = if eval_bexpr_with(b, &env, ctx.tol) { q } else { r };
            denote(branch, env, horizon, ctx)
        }
        ProgKind::While(b, body) => {
            let b = b.clone();
            let body = body.clone();
            let c = ctx.clone();
            let inr = Arc::new(|s: Env| Coprod::<Env, Env>::Inr(s));
            let step = move |s: Env, h: Option<f64>| -> HElem<Coprod<Env, Env>> {
                c.unfoldings.fetch_add(1, Ordering::Relaxed);
                if eval_bexpr_with(&b, &s, c.tol) {
                    map_value(denote(&body, s, h, &c), inr.clone())
                } else {
                    unit(Coprod::Inl(s))
                }
            };
            elgot_within(Arc::new(step), env, horizon, &ctx.fuel)
        }
    }
}

/// Reads off the verdict for instant `t` from a denotation computed with
/// horizon at least `t`.
fn classify(m: &HElem<Env>, t: f64, fuel: &Fuel) -> DenResult {
    match m {
        HElem::Conv { tr, val } => match tr.locate(t) {
            Locate::Inside(i, tau) => DenResult::ValueAt(tr.segs()[i].law.at(tau)),
            Locate::Beyond(rem) => DenResult::TerminatedAt {
                env: val.clone(),
                duration: t - rem,
            },
        },
        HElem::Div {
            tr, fuel_exhausted, ..
        } => match tr.locate(t) {
            Locate::Inside(i, tau) => DenResult::ValueAt(tr.segs()[i].law.at(tau)),
            Locate::Beyond(_) if *fuel_exhausted => DenResult::FuelExhausted {
                timed_out: fuel.timed_out(),
            },
            Locate::Beyond(_) => DenResult::DivergedBefore { duration: tr.total() },
        },
        HElem::Lazy(d) => match d.prefix.locate(t) {
            Locate::Inside(i, tau) => DenResult::ValueAt(d.prefix.segs()[i].law.at(tau)),
            Locate::Beyond(_) => classify(&d.force(t), t, fuel),
        },
    }
}

/// The denotation of `p` from `σ`, observed up to `horizon`.
pub fn denotation(p: &Prog, env: &Env, horizon: f64, limits: &Limits) -> Result<HElem<Env>, EvalError> {
    check_time(horizon)?;
    let ctx = Ctx::new(limits);
    let m = denote(&Arc::new(p.clone()), env.clone(), Some(horizon), &ctx);
    match ctx.take_error() {
        Some(e) => Err(e),
        None => Ok(m),
    }
}

/// Samples `⟦p⟧(σ)` at `t`.
pub fn sem_at(p: &Prog, env: &Env, t: f64, limits: &Limits) -> Result<DenResult, EvalError> {
    sem_at_with_stats(p, env, t, limits).map(|(r, _)| r)
}

pub fn sem_at_with_stats(
    p: &Prog,
    env: &Env,
    t: f64,
    limits: &Limits,
) -> Result<(DenResult, DenStats), EvalError> {
    check_time(t)?;
    let ctx = Ctx::new(limits);
    let m = denote(&Arc::new(p.clone()), env.clone(), Some(t), &ctx);
    let r = classify(&m, t, &ctx.fuel);
    match ctx.take_error() {
        Some(e) => Err(e),
        None => Ok((r, ctx.stats())),
    }
}

/// `n` evenly spaced instants from 0 to `t_max`; the last one is `t_max`.
pub fn linspace(t_max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => {
            let step = t_max / (n - 1) as f64;
            let mut v: Vec<f64> = (0..n - 1).map(|i| i as f64 * step).collect();
            v.push(t_max);
            v
        }
    }
}

/// Samples `⟦p⟧(σ)` at `samples` evenly spaced instants in `[0, t_max]`,
/// interpreting the program once with horizon `t_max`.
pub fn sem_trace(
    p: &Prog,
    env: &Env,
    t_max: f64,
    samples: usize,
    limits: &Limits,
) -> Result<Vec<(f64, DenResult)>, EvalError> {
    check_time(t_max)?;
    let ctx = Ctx::new(limits);
    let m = denote(&Arc::new(p.clone()), env.clone(), Some(t_max), &ctx);
    if let Some(e) = ctx.take_error() {
        return Err(e);
    }
    Ok(linspace(t_max, samples)
        .into_iter()
        .map(|t| (t, classify(&m, t, &ctx.fuel)))
        .collect())
}

/// The loop `while true { x := x + 1 ; wait 1 }`.
pub fn counter_loop() -> Prog {
    crate::parser::parse("while true { x := x + 1 ; wait 1 }")
        .expect("built-in program")
        .0
}

/// Evaluates [`counter_loop`] from `σ` at `t`, returning the verdict and the
/// number of loop unfoldings it took.
pub fn unfold_check(env: &Env, t: f64) -> Result<(DenResult, u64), EvalError> {
    let (r, stats) = sem_at_with_stats(&counter_loop(), env, t, &Limits::default())?;
    Ok((r, stats.unfoldings))
}

/// At `t = 1/2` the counter loop yields `σ ▽ [(x+1)σ/x]` after exactly one
/// unfolding.
pub fn example_unfold_check(env: &Env) -> bool {
    let x = crate::ast::Var::new("x").expect("identifier");
    let Some(x0) = env.get(&x) else {
        return false;
    };
    let expected = env.updated(&x, x0 + 1.0);
    matches!(unfold_check(env, 0.5), Ok((DenResult::ValueAt(v), 1)) if v == expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;

    fn setup(src: &str, vals: &[f64]) -> (Prog, Env) {
        let (p, vs) = parse(src).unwrap();
        (p, Env::from_values(Arc::new(vs), vals.to_vec()))
    }

    fn at(src: &str, vals: &[f64], t: f64) -> (DenResult, Env) {
        let (p, env) = setup(src, vals);
        (sem_at(&p, &env, t, &Limits::default()).unwrap(), env)
    }

    #[test]
    fn wait_then_assign() {
        let (r, env) = at("wait 1 ; x := 1", &[0.0], 0.5);
        assert_eq!(r, DenResult::ValueAt(env));
    }

    #[test]
    fn assignment_terminates() {
        let (r, env) = at("x := 5", &[0.0], 3.0);
        assert_eq!(
            r,
            DenResult::TerminatedAt {
                env: env.with_values(vec![5.0]),
                duration: 0.0
            }
        );
    }

    #[test]
    fn cruise() {
        let src = "while true { if v <= 10 then { v' = 1 for 1 } else { v' = -1 for 1 } }";
        let (r, env) = at(src, &[5.0], 1.5);
        assert_eq!(r, DenResult::ValueAt(env.with_values(vec![6.5])));
    }

    #[test]
    fn zeno() {
        let src = "x := 1 ; while true { wait x ; x := 0.5*x }";
        let (r, env) = at(src, &[0.0], 1.9);
        assert_eq!(r, DenResult::ValueAt(env.with_values(vec![0.0625])));
        let (r, _) = at(src, &[0.0], 2.0);
        assert_eq!(r, DenResult::FuelExhausted { timed_out: false });
    }

    #[test]
    fn boundary_instant_is_termination() {
        let (r, env) = at("x' = 1 for 2", &[0.0], 2.0);
        assert_eq!(
            r,
            DenResult::TerminatedAt {
                env: env.with_values(vec![2.0]),
                duration: 2.0
            }
        );
    }

    #[test]
    fn unfold_economy() {
        let vs = Arc::new(crate::ast::VarSet::from_names(["x"]).unwrap());
        let e0 = Env::from_values(vs.clone(), vec![0.0]);
        assert!(example_unfold_check(&e0));
        assert!(example_unfold_check(&Env::from_values(vs, vec![41.0])));
        let (r, n) = unfold_check(&e0, 1.5).unwrap();
        assert_eq!(n, 2);
        assert_eq!(r, DenResult::ValueAt(e0.with_values(vec![2.0])));
    }

    #[test]
    fn later_statements_are_not_evaluated() {
        // The negative duration is never reached before t = 0.5.
        let (r, env) = at("wait 1 ; x' = 1 for -1", &[0.0], 0.5);
        assert_eq!(r, DenResult::ValueAt(env));
        let (p, env) = setup("wait 1 ; x' = 1 for -1", &[0.0]);
        assert!(matches!(
            sem_at(&p, &env, 1.5, &Limits::default()),
            Err(EvalError::NegativeDuration { .. })
        ));
    }

    #[test]
    fn trace_samples() {
        let (p, env) = setup("x := 1", &[0.0]);
        let pts = sem_trace(&p, &env, 1.0, 3, &Limits::default()).unwrap();
        assert_eq!(pts.len(), 3);
        assert_eq!(pts.iter().map(|p| p.0).collect::<Vec<_>>(), vec![0.0, 0.5, 1.0]);
        for (_, r) in pts {
            assert!(matches!(r, DenResult::TerminatedAt { ref env, .. } if env.values() == [1.0]));
        }
    }

    #[test]
    fn trace_matches_pointwise_queries() {
        let src = "while true { if v <= 10 then { v' = 1 for 1 } else { v' = -1 for 1 } }";
        let (p, env) = setup(src, &[5.0]);
        let pts = sem_trace(&p, &env, 12.0, 121, &Limits::default()).unwrap();
        for (t, r) in pts {
            assert_eq!(r, sem_at(&p, &env, t, &Limits::default()).unwrap(), "t = {t}");
        }
    }

    #[test]
    fn linspace_ends_exactly() {
        let v = linspace(10.0, 7);
        assert_eq!(v.len(), 7);
        assert_eq!(v[0], 0.0);
        assert_eq!(*v.last().unwrap(), 10.0);
    }
}
