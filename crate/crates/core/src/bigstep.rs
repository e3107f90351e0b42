//! Big-step evaluation `p, σ, t ⇓ r, σ'`.
//!
//! Sequencing is resolved functionally: the left program runs first and the
//! right one gets whatever time it left over. The evaluator keeps pending
//! right-hand programs on an explicit stack, so deep loop unrollings cost
//! heap rather than native stack.

use std::sync::Arc;

use crate::ast::{Atomic, Prog, ProgKind};
use crate::dynamics::{eval_bexpr_with, eval_lterm, flow_of, Env};
use crate::limits::{check_time, EvalError, Fuel, Limits};
use crate::smallstep::duration;

#[derive(Debug, Clone, PartialEq)]
pub enum BigResult {
    /// `p, σ, t ⇓ stop, σ'`
    StopAt(Env),
    /// `p, σ, consumed ⇓ skip, σ'` with `consumed <= t`.
    SkipAt { env: Env, consumed: f64 },
    FuelExhausted { timed_out: bool },
}

/// Evaluates `p` from `σ` within the time budget `t`.
pub fn evaluate(p: &Prog, env: &Env, t: f64, limits: &Limits) -> Result<BigResult, EvalError> {
    evaluate_with(Arc::new(p.clone()), env.clone(), t, &limits.meter(), limits.guard_tolerance)
}

/// As [`evaluate`], drawing one unit of `fuel` per atomic statement and per
/// loop guard test.
pub fn evaluate_with(
    p: Arc<Prog>,
    mut env: Env,
    t: f64,
    fuel: &Fuel,
    tol: f64,
) -> Result<BigResult, EvalError> {
    check_time(t)?;
    let mut pending: Vec<Arc<Prog>> = Vec::new();
    let mut cur = p;
    let mut left = t;
    loop {
        match &cur.kind {
            ProgKind::Seq(a, b) => {
                pending.push(b.clone());
                cur = a.clone();
                continue;
            }
            ProgKind::Ite(b, x, y) => {
                cur = if eval_bexpr_with(b, &env, tol) {
                    x.clone()
                } else {
                    y.clone()
                };
                continue;
            }
            ProgKind::While(b, body) => {
                if !fuel.tick() {
                    return Ok(exhausted(fuel));
                }
                if eval_bexpr_with(b, &env, tol) {
                    pending.push(cur.clone());
                    cur = body.clone();
                    continue;
                }
            }
            ProgKind::At(Atomic::Assign(x, e)) => {
                if !fuel.tick() {
                    return Ok(exhausted(fuel));
                }
                env = env.updated(x, eval_lterm(e, &env));
            }
            ProgKind::At(Atomic::DiffFor { eqs, dur }) => {
                if !fuel.tick() {
                    return Ok(exhausted(fuel));
                }
                let d = duration(dur, &env, cur.span)?;
                let flow = flow_of(eqs, &env);
                if left < d {
                    return Ok(BigResult::StopAt(flow.eval(left)));
                }
                env = flow.eval(d);
                left -= d;
            }
        }
        // `cur` finished with skip.
        match pending.pop() {
            Some(next) => cur = next,
            None => {
                return Ok(BigResult::SkipAt {
                    env,
                    consumed: t - left,
                })
            }
        }
    }
}

fn exhausted(fuel: &Fuel) -> BigResult {
    BigResult::FuelExhausted {
        timed_out: fuel.timed_out(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;

    fn eval(src: &str, vals: &[f64], t: f64, fuel: u64) -> (BigResult, Env) {
        let (p, vs) = parse(src).unwrap();
        let env = Env::from_values(Arc::new(vs), vals.to_vec());
        (evaluate(&p, &env, t, &Limits::with_fuel(fuel)).unwrap(), env)
    }

    #[test]
    fn diff_stop() {
        let (r, env) = eval("x' = 1 for 2", &[0.0], 0.5, 10);
        assert_eq!(r, BigResult::StopAt(env.with_values(vec![0.5])));
    }

    #[test]
    fn seq_skip_threads_time() {
        let (r, env) = eval("x := 2 ; wait 1", &[0.0], 3.0, 10);
        assert_eq!(
            r,
            BigResult::SkipAt {
                env: env.with_values(vec![2.0]),
                consumed: 1.0
            }
        );
    }

    #[test]
    fn remark_program() {
        let (r, env) = eval("x := 0 ; while true { x := x + 1 ; wait 1 }", &[3.0], 0.5, 100);
        assert_eq!(r, BigResult::StopAt(env.with_values(vec![1.0])));
    }

    #[test]
    fn zeno() {
        let src = "x := 1 ; while true { wait x ; x := 0.5*x }";
        let (r, env) = eval(src, &[0.0], 1.9, 10_000);
        assert_eq!(r, BigResult::StopAt(env.with_values(vec![0.0625])));
        let (r, _) = eval(src, &[0.0], 2.0, 1_000_000);
        assert_eq!(r, BigResult::FuelExhausted { timed_out: false });
    }

    #[test]
    fn counter_loop_terminates() {
        let (r, env) = eval("while x <= 3 { x := x + 1 }", &[0.0], 0.0, 100);
        assert_eq!(
            r,
            BigResult::SkipAt {
                env: env.with_values(vec![4.0]),
                consumed: 0.0
            }
        );
    }

    #[test]
    fn long_unrolling_stays_off_the_stack() {
        let (r, _) = eval("while true { x := x + 1 }", &[0.0], 1.0, 10_000_000);
        assert_eq!(r, BigResult::FuelExhausted { timed_out: false });
    }
}
