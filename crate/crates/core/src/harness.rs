//! Random program generation and differential checks between the three
//! evaluators.
//!
//! Fuel is compared with care. Small-step spends a unit per reduction,
//! big-step and the denotation one per atomic statement or loop test, so a
//! small-step run may run dry where the others finish. Such a case is rerun
//! with a budget scaled by program size before it counts as a mismatch.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::ast::{Atomic, BExpr, LTerm, Prog, ProgKind, Var, VarSet};
use crate::bigstep::{evaluate_with, BigResult};
use crate::denotational::{sem_at, DenResult};
use crate::dynamics::{close, Env};
use crate::limits::{EvalError, Fuel, Limits};
use crate::parser::pretty;
use crate::smallstep::{applicable, run_from, step, Code, Config, Outcome, Rule};

/// Relative tolerance for comparing states and durations across evaluators.
pub const AGREEMENT_TOL: f64 = 1e-9;
/// Default per-evaluator fuel in differential runs.
pub const HARNESS_FUEL: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenConfig {
    pub max_depth: u32,
    /// Number of variables, 1 to 3.
    pub vars: usize,
    pub max_duration: f64,
    pub max_coef: f64,
    /// Weight of loops among compound statements.
    pub loop_prob: f64,
    /// Largest time budget drawn for a case.
    pub max_time: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_depth: 4,
            vars: 3,
            max_duration: 4.0,
            max_coef: 2.0,
            loop_prob: 0.25,
            max_time: 10.0,
            seed: 0,
        }
    }
}

/// One generated test input.
#[derive(Debug, Clone)]
pub struct Case {
    pub prog: Prog,
    pub env: Env,
    pub t: f64,
}

const NAMES: [&str; 3] = ["x", "y", "z"];

struct Gen {
    rng: ChaCha8Rng,
    cfg: GenConfig,
    vars: Vec<Var>,
}

impl Gen {
    fn new(cfg: GenConfig) -> Gen {
        let n = cfg.vars.clamp(1, 3);
        Gen {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            cfg,
            vars: NAMES[..n].iter().map(|s| Var::new(s).expect("identifier")).collect(),
        }
    }

    /// A multiple of 1/4 in `[lo, hi]`.
    fn quarter(&mut self, lo: f64, hi: f64) -> f64 {
        let a = (lo * 4.0).ceil() as i64;
        let b = (hi * 4.0).floor() as i64;
        self.rng.random_range(a..=b) as f64 / 4.0
    }

    fn var(&mut self) -> Var {
        let i = self.rng.random_range(0..self.vars.len());
        self.vars[i].clone()
    }

    fn coef(&mut self) -> f64 {
        let c = self.cfg.max_coef;
        self.quarter(-c, c)
    }

    fn term(&mut self) -> LTerm {
        let first = if self.rng.random_bool(0.7) {
            LTerm::Scaled(self.coef(), self.var())
        } else {
            LTerm::Const(self.quarter(-3.0, 3.0))
        };
        if self.rng.random_bool(0.4) {
            let c = self.quarter(-3.0, 3.0);
            LTerm::sum(first, LTerm::Const(c))
        } else {
            first
        }
    }

    fn duration(&mut self) -> LTerm {
        if self.rng.random_bool(0.1) {
            return LTerm::Const(0.0);
        }
        let k = self.quarter(0.0, self.cfg.max_duration);
        if self.rng.random_bool(0.12) {
            let c = self.quarter(-1.0, 1.0);
            let x = self.var();
            LTerm::sum(LTerm::Scaled(c, x), LTerm::Const(k))
        } else {
            LTerm::Const(k)
        }
    }

    fn guard(&mut self, depth: u32) -> BExpr {
        if depth > 0 && self.rng.random_bool(0.25) {
            let a = self.guard(depth - 1);
            return match self.rng.random_range(0..3) {
                0 => BExpr::and(a, self.guard(depth - 1)),
                1 => BExpr::or(a, self.guard(depth - 1)),
                _ => BExpr::negate(a),
            };
        }
        if self.rng.random_bool(0.05) {
            return BExpr::True;
        }
        let lhs = LTerm::var(self.var());
        let k = LTerm::Const(self.rng.random_range(-4..=6) as f64);
        if self.rng.random_bool(0.5) {
            BExpr::Leq(lhs, k)
        } else {
            BExpr::Geq(lhs, k)
        }
    }

    fn atomic(&mut self) -> Prog {
        let r: f64 = self.rng.random();
        if r < 0.45 {
            let x = self.var();
            Prog::assign(x, self.term())
        } else if r < 0.8 {
            let eqs = self
                .vars
                .clone()
                .into_iter()
                .map(|v| {
                    let rhs = if self.rng.random_bool(0.3) {
                        LTerm::Const(0.0)
                    } else {
                        self.term()
                    };
                    (v, rhs)
                })
                .collect();
            Prog::atomic(Atomic::DiffFor {
                eqs,
                dur: self.duration(),
            })
        } else {
            let d = self.duration();
            self.wait(d)
        }
    }

    fn wait(&self, dur: LTerm) -> Prog {
        Prog::atomic(Atomic::DiffFor {
            eqs: self.vars.iter().map(|v| (v.clone(), LTerm::Const(0.0))).collect(),
            dur,
        })
    }

    fn prog(&mut self, depth: u32) -> Prog {
        if depth == 0 {
            return self.atomic();
        }
        let lp = self.cfg.loop_prob.clamp(0.0, 0.9);
        let r: f64 = self.rng.random();
        if r < lp {
            self.looping(depth)
        } else if r < lp + (1.0 - lp) * 0.3 {
            self.atomic()
        } else if r < lp + (1.0 - lp) * 0.75 {
            Prog::seq(self.prog(depth - 1), self.prog(depth - 1))
        } else {
            let g = self.guard(1);
            Prog::ite(g, self.prog(depth - 1), self.prog(depth - 1))
        }
    }

    /// Loops either burn a positive wait per iteration or count a variable up
    /// to an integer bound.
    fn looping(&mut self, depth: u32) -> Prog {
        let body = self.prog(depth - 1);
        if self.rng.random_bool(0.6) {
            let d = self.quarter(0.25, 2.0);
            let g = self.guard(1);
            Prog::while_loop(g, Prog::seq(body, self.wait(LTerm::Const(d))))
        } else {
            let x = self.var();
            let k = self.rng.random_range(-3..=5) as f64;
            let inc = Prog::assign(x.clone(), LTerm::sum(LTerm::var(x.clone()), LTerm::Const(1.0)));
            Prog::while_loop(BExpr::Leq(LTerm::var(x), LTerm::Const(k)), Prog::seq(body, inc))
        }
    }

    fn env(&mut self, vars: &Arc<VarSet>) -> Env {
        let vals = (0..vars.len()).map(|_| self.quarter(-5.0, 5.0)).collect();
        Env::from_values(vars.clone(), vals)
    }
}

fn varset(n: usize) -> Arc<VarSet> {
    Arc::new(VarSet::from_names(NAMES[..n.clamp(1, 3)].iter().copied()).expect("identifiers"))
}

/// A random well-formed program over `x`, `y`, `z` (the first `cfg.vars`).
pub fn gen_program(cfg: &GenConfig) -> (Prog, VarSet) {
    let mut g = Gen::new(*cfg);
    let p = g.prog(cfg.max_depth);
    (p, (*varset(cfg.vars)).clone())
}

/// Cumulative times at which a pilot run finished a differential statement.
fn boundaries(p: &Prog, env: &Env, horizon: f64) -> Vec<f64> {
    let Ok(start) = Config::new(p.clone(), env.clone(), horizon) else {
        return Vec::new();
    };
    match run_from(start, &Fuel::new(5_000, None), 0.0, 2_000) {
        Ok((_, trace)) => trace
            .entries
            .iter()
            .filter(|e| e.derivation.last() == Some(&Rule::DiffSkip))
            .map(|e| horizon - e.after.t)
            .collect(),
        Err(_) => Vec::new(),
    }
}

/// A program, a start state and a time budget. The budget is 0, a segment
/// boundary of a pilot run, or uniform in `[0, max_time]`.
pub fn gen_case(cfg: &GenConfig) -> Case {
    let mut g = Gen::new(*cfg);
    let prog = g.prog(cfg.max_depth);
    let vars = varset(cfg.vars);
    let env = g.env(&vars);
    let r: f64 = g.rng.random();
    let t = if r < 0.15 {
        0.0
    } else if r < 0.5 {
        let bs = boundaries(&prog, &env, cfg.max_time);
        if bs.is_empty() {
            g.rng.random_range(0.0..cfg.max_time)
        } else {
            bs[g.rng.random_range(0..bs.len())]
        }
    } else {
        g.rng.random_range(0.0..cfg.max_time)
    };
    Case { prog, env, t }
}

/// Seed for case `i` of a suite seeded with `seed`.
pub fn case_seed(seed: u64, i: usize) -> u64 {
    seed ^ (i as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Evaluator results brought to a common shape.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verdict {
    Value { env: Env },
    Terminated { env: Env, duration: f64 },
    Diverged { duration: f64 },
    Fuel,
    Error { message: String },
}

impl Verdict {
    fn from_small(r: Result<Outcome, EvalError>) -> Verdict {
        match r {
            Ok(Outcome::AtTime(env)) => Verdict::Value { env },
            Ok(Outcome::Terminated { env, duration }) => Verdict::Terminated { env, duration },
            Ok(Outcome::FuelExhausted { .. }) => Verdict::Fuel,
            Err(e) => Verdict::Error { message: e.to_string() },
        }
    }

    fn from_big(r: Result<BigResult, EvalError>) -> Verdict {
        match r {
            Ok(BigResult::StopAt(env)) => Verdict::Value { env },
            Ok(BigResult::SkipAt { env, consumed }) => Verdict::Terminated {
                env,
                duration: consumed,
            },
            Ok(BigResult::FuelExhausted { .. }) => Verdict::Fuel,
            Err(e) => Verdict::Error { message: e.to_string() },
        }
    }

    fn from_den(r: Result<DenResult, EvalError>) -> Verdict {
        match r {
            Ok(DenResult::ValueAt(env)) => Verdict::Value { env },
            Ok(DenResult::TerminatedAt { env, duration }) => Verdict::Terminated { env, duration },
            Ok(DenResult::DivergedBefore { duration }) => Verdict::Diverged { duration },
            Ok(DenResult::FuelExhausted { .. }) => Verdict::Fuel,
            Err(e) => Verdict::Error { message: e.to_string() },
        }
    }

    pub fn is_fuel(&self) -> bool {
        matches!(self, Verdict::Fuel)
    }
}

/// Compares two verdicts. On mismatch, names the first differing variable
/// when both carry a state.
pub fn agree(a: &Verdict, b: &Verdict, tol: f64) -> Result<(), Option<String>> {
    let env_check = |x: &Env, y: &Env| match x.first_difference(y, tol) {
        None if x.len() == y.len() => Ok(()),
        None => Err(None),
        Some(i) => Err(Some(x.vars().get(i).name().to_string())),
    };
    match (a, b) {
        (Verdict::Value { env: x }, Verdict::Value { env: y }) => env_check(x, y),
        (
            Verdict::Terminated { env: x, duration: d },
            Verdict::Terminated { env: y, duration: e },
        ) => {
            env_check(x, y)?;
            if close(*d, *e, tol) {
                Ok(())
            } else {
                Err(None)
            }
        }
        (Verdict::Diverged { duration: d }, Verdict::Diverged { duration: e }) if close(*d, *e, tol) => {
            Ok(())
        }
        (Verdict::Fuel, Verdict::Fuel) => Ok(()),
        (Verdict::Error { message: m }, Verdict::Error { message: n }) if m == n => Ok(()),
        _ => Err(None),
    }
}

/// A disagreement between two evaluators, serialised as one JSON line.
#[derive(Debug, Clone, Serialize)]
pub struct Discrepancy {
    /// Which pair disagreed: `small-big`, `small-den` or `big-den`.
    pub pair: &'static str,
    pub program: String,
    pub env: Env,
    pub t: f64,
    pub left: Verdict,
    pub right: Verdict,
    pub first_difference: Option<String>,
}

impl Discrepancy {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("discrepancies serialise")
    }
}

/// All three verdicts for one case, plus any disagreement.
#[derive(Debug, Clone)]
pub struct CaseReport {
    pub small: Verdict,
    pub big: Verdict,
    pub den: Verdict,
    pub small_big: Option<Discrepancy>,
    pub small_den: Option<Discrepancy>,
    pub big_den: Option<Discrepancy>,
    /// Small-step needed the enlarged budget.
    pub rerun: bool,
}

impl CaseReport {
    pub fn all_fuel(&self) -> bool {
        self.small.is_fuel() && self.big.is_fuel() && self.den.is_fuel()
    }

    pub fn discrepancies(&self) -> impl Iterator<Item = &Discrepancy> {
        [&self.small_big, &self.small_den, &self.big_den]
            .into_iter()
            .flatten()
    }
}

fn run_small(p: &Prog, env: &Env, t: f64, fuel: u64, tol: f64) -> Verdict {
    let r = Config::new(p.clone(), env.clone(), t)
        .and_then(|c| run_from(c, &Fuel::new(fuel, None), tol, 0))
        .map(|(o, _)| o);
    Verdict::from_small(r)
}

/// Runs all three evaluators on `(p, σ, t)` with `fuel` each and compares.
pub fn check_case(p: &Prog, env: &Env, t: f64, fuel: u64, tol: f64) -> CaseReport {
    let mut small = run_small(p, env, t, fuel, tol);
    let big = Verdict::from_big(evaluate_with(
        Arc::new(p.clone()),
        env.clone(),
        t,
        &Fuel::new(fuel, None),
        tol,
    ));
    let den = Verdict::from_den(sem_at(p, env, t, &Limits::with_fuel(fuel).tolerance(tol)));
    let mut rerun = false;
    if small.is_fuel() && !big.is_fuel() {
        // Every big-step unit costs at most one step plus one per
        // enclosing conditional, so this budget is always enough.
        let scaled = fuel.saturating_mul(p.size() as u64 + 1);
        small = run_small(p, env, t, scaled, tol);
        rerun = true;
    }
    let mk = |pair: &'static str, a: &Verdict, b: &Verdict| {
        agree(a, b, AGREEMENT_TOL).err().map(|first_difference| Discrepancy {
            pair,
            program: pretty(p),
            env: env.clone(),
            t,
            left: a.clone(),
            right: b.clone(),
            first_difference,
        })
    };
    CaseReport {
        small_big: mk("small-big", &small, &big),
        small_den: mk("small-den", &small, &den),
        big_den: mk("big-den", &big, &den),
        small,
        big,
        den,
        rerun,
    }
}

/// Outcome of a differential suite.
#[derive(Debug, Clone, Default, Serialize)]
pub struct SuiteReport {
    pub cases: usize,
    pub small_big: usize,
    pub small_den: usize,
    pub big_den: usize,
    pub all_fuel: usize,
    pub reruns: usize,
    pub errors: usize,
    /// Verdict kinds seen, for coverage: value, terminated, error.
    pub values: usize,
    pub terminated: usize,
    pub discrepancies: Vec<Discrepancy>,
}

impl SuiteReport {
    pub fn clean(&self) -> bool {
        self.small_big == 0 && self.small_den == 0 && self.big_den == 0
    }

    /// Discrepancies as JSON lines.
    pub fn jsonl(&self) -> String {
        let mut s = String::new();
        for d in &self.discrepancies {
            s.push_str(&d.to_json_line());
            s.push('\n');
        }
        s
    }
}

/// Generates `cases` inputs from `cfg.seed` and checks each in parallel.
/// The report does not depend on thread scheduling.
pub fn run_equivalence(cfg: &GenConfig, cases: usize, fuel: u64) -> SuiteReport {
    let reports: Vec<CaseReport> = (0..cases)
        .into_par_iter()
        .map(|i| {
            let c = gen_case(&GenConfig {
                seed: case_seed(cfg.seed, i),
                ..*cfg
            });
            check_case(&c.prog, &c.env, c.t, fuel, 0.0)
        })
        .collect();
    let mut out = SuiteReport {
        cases,
        ..SuiteReport::default()
    };
    for r in reports {
        out.small_big += r.small_big.is_some() as usize;
        out.small_den += r.small_den.is_some() as usize;
        out.big_den += r.big_den.is_some() as usize;
        out.all_fuel += r.all_fuel() as usize;
        out.reruns += r.rerun as usize;
        match r.small {
            Verdict::Error { .. } => out.errors += 1,
            Verdict::Value { .. } => out.values += 1,
            Verdict::Terminated { .. } => out.terminated += 1,
            _ => {}
        }
        out.discrepancies.extend(r.discrepancies().cloned());
    }
    out
}

/// Programs obtained by replacing one node of `p` by a smaller one.
fn shrink_candidates(p: &Prog) -> Vec<Prog> {
    let mut out = Vec::new();
    match &p.kind {
        ProgKind::At(_) => {}
        ProgKind::Seq(a, b) => {
            out.push((**a).clone());
            out.push((**b).clone());
            for a2 in shrink_candidates(a) {
                out.push(Prog::seq(a2, (**b).clone()));
            }
            for b2 in shrink_candidates(b) {
                out.push(Prog::seq((**a).clone(), b2));
            }
        }
        ProgKind::Ite(g, a, b) => {
            out.push((**a).clone());
            out.push((**b).clone());
            for a2 in shrink_candidates(a) {
                out.push(Prog::ite(g.clone(), a2, (**b).clone()));
            }
            for b2 in shrink_candidates(b) {
                out.push(Prog::ite(g.clone(), (**a).clone(), b2));
            }
        }
        ProgKind::While(g, body) => {
            out.push((**body).clone());
            for b2 in shrink_candidates(body) {
                out.push(Prog::while_loop(g.clone(), b2));
            }
        }
    }
    out
}

/// Greedily shrinks `p` while `fails` keeps holding. The result still fails.
pub fn shrink<F: Fn(&Prog) -> bool>(p: &Prog, fails: F) -> Prog {
    let mut cur = p.clone();
    'outer: loop {
        for c in shrink_candidates(&cur) {
            if c.size() < cur.size() && fails(&c) {
                cur = c;
                continue 'outer;
            }
        }
        return cur;
    }
}

/// Shrinks a failing differential case to a smaller program with the same
/// start state and time that still disagrees.
pub fn shrink_case(case: &Case, fuel: u64) -> Prog {
    shrink(&case.prog, |q| {
        check_case(q, &case.env, case.t, fuel, 0.0)
            .discrepancies()
            .next()
            .is_some()
    })
}

/// Configurations reached by running a random case a random number of steps.
fn reachable_config(seed: u64) -> Option<Config> {
    let case = gen_case(&GenConfig {
        seed,
        ..GenConfig::default()
    });
    let mut rng = ChaCha8Rng::seed_from_u64(seed.rotate_left(17));
    let mut c = Config::new(case.prog, case.env, case.t).ok()?;
    let k = rng.random_range(0..12);
    for _ in 0..k {
        match step(&c, 0.0) {
            Ok(Some(s)) if !s.next.code.is_terminal() => c = s.next,
            _ => break,
        }
    }
    Some(c)
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct DeterminismReport {
    pub configs: usize,
    /// Configurations where more than one reduction applied.
    pub ambiguous: usize,
    /// Configurations where the step function and the rule table differ.
    pub step_mismatch: usize,
    /// Repeated runs that produced different traces.
    pub unstable_runs: usize,
}

/// Checks that every reachable configuration has at most one reduction and
/// that repeated runs agree step for step.
pub fn run_determinism(seed: u64, configs: usize) -> DeterminismReport {
    let rows: Vec<(bool, bool, bool)> = (0..configs)
        .into_par_iter()
        .map(|i| {
            let Some(c) = reachable_config(case_seed(seed, i)) else {
                return (false, false, false);
            };
            let Ok(all) = applicable(&c, 0.0) else {
                return (false, false, false);
            };
            let ambiguous = all.len() > 1;
            let mismatch = match (step(&c, 0.0), all.first()) {
                (Ok(Some(s)), Some((d, n))) => s.derivation != *d || s.next != *n,
                (Ok(None), None) => false,
                _ => true,
            };
            let a = run_from(c.clone(), &Fuel::new(2_000, None), 0.0, 64);
            let b = run_from(c, &Fuel::new(2_000, None), 0.0, 64);
            let unstable = match (a, b) {
                (Ok((oa, ta)), Ok((ob, tb))) => {
                    oa != ob
                        || ta.total_steps != tb.total_steps
                        || ta
                            .entries
                            .iter()
                            .zip(&tb.entries)
                            .any(|(x, y)| x.derivation != y.derivation || x.after != y.after)
                }
                (Err(x), Err(y)) => x != y,
                _ => true,
            };
            (ambiguous, mismatch, unstable)
        })
        .collect();
    let mut r = DeterminismReport {
        configs,
        ..Default::default()
    };
    for (a, m, u) in rows {
        r.ambiguous += a as usize;
        r.step_mismatch += m as usize;
        r.unstable_runs += u as usize;
    }
    r
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct TimeShiftReport {
    /// Pairs whose unshifted step did not stop.
    pub pairs: usize,
    pub failures: usize,
    pub skipped_stop: usize,
}

/// Adding `s` to the budget of a step that does not stop adds exactly `s`
/// to the budget of its successor and changes nothing else.
pub fn run_time_shift(seed: u64, pairs: usize) -> TimeShiftReport {
    let rows: Vec<Option<bool>> = (0..pairs)
        .into_par_iter()
        .map(|i| {
            let cs = case_seed(seed, i);
            let c = reachable_config(cs)?;
            if c.code.is_terminal() {
                return None;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cs.rotate_left(31));
            let s: f64 = rng.random_range(1e-3..5.0);
            let a = step(&c, 0.0).ok()??;
            if a.next.code == Code::Stop {
                return None;
            }
            let shifted = Config { t: c.t + s, ..c };
            let Ok(Some(b)) = step(&shifted, 0.0) else {
                return Some(false);
            };
            let ok = a.derivation == b.derivation
                && a.next.code == b.next.code
                && a.next.env.values() == b.next.env.values()
                && (b.next.t - (a.next.t + s)).abs() <= 1e-12 * (a.next.t + s).abs().max(1.0);
            Some(ok)
        })
        .collect();
    let mut r = TimeShiftReport::default();
    for row in rows {
        match row {
            Some(ok) => {
                r.pairs += 1;
                r.failures += (!ok) as usize;
            }
            None => r.skipped_stop += 1,
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::well_formed;
    use crate::parser::parse;

    #[test]
    fn generated_programs_are_well_formed_and_reparse() {
        for seed in 0..200 {
            let cfg = GenConfig {
                seed,
                ..GenConfig::default()
            };
            let (p, vars) = gen_program(&cfg);
            assert!(well_formed(&p, &vars).is_empty(), "{}", pretty(&p));
            let (q, _) = parse(&pretty(&p)).unwrap();
            assert_eq!(pretty(&q), pretty(&p));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = GenConfig {
            seed: 42,
            ..GenConfig::default()
        };
        let a = gen_case(&cfg);
        let b = gen_case(&cfg);
        assert_eq!(pretty(&a.prog), pretty(&b.prog));
        assert_eq!(a.env, b.env);
        assert_eq!(a.t, b.t);
    }

    #[test]
    fn small_equivalence_run_is_clean() {
        let r = run_equivalence(
            &GenConfig {
                seed: 7,
                ..GenConfig::default()
            },
            300,
            HARNESS_FUEL,
        );
        assert!(r.clean(), "{}", r.jsonl());
        assert!(r.values > 0 && r.terminated > 0);
    }

    #[test]
    fn agree_reports_first_difference() {
        let vars = varset(2);
        let a = Env::from_values(vars.clone(), vec![1.0, 2.0]);
        let b = Env::from_values(vars, vec![1.0, 2.5]);
        let r = agree(
            &Verdict::Value { env: a },
            &Verdict::Value { env: b },
            AGREEMENT_TOL,
        );
        assert_eq!(r, Err(Some("y".to_string())));
        assert_eq!(agree(&Verdict::Fuel, &Verdict::Diverged { duration: 1.0 }, 1e-9), Err(None));
    }

    #[test]
    fn shrink_keeps_failure_and_gets_smaller() {
        let (p, _) = parse("x := 1 ; if x <= 2 then { wait 1 ; y := 3 } else { z := 4 } ; while x <= 3 { x := x + 1 }").unwrap();
        let has_while = |q: &Prog| {
            fn any(q: &Prog) -> bool {
                match &q.kind {
                    ProgKind::While(..) => true,
                    ProgKind::At(_) => false,
                    ProgKind::Seq(a, b) | ProgKind::Ite(_, a, b) => any(a) || any(b),
                }
            }
            any(q)
        };
        let s = shrink(&p, has_while);
        assert!(has_while(&s));
        assert!(s.size() < p.size());
        assert_eq!(s.size(), 2);
    }

    #[test]
    fn discrepancy_json_line() {
        let vars = varset(1);
        let env = Env::from_values(vars, vec![0.5]);
        let d = Discrepancy {
            pair: "small-big",
            program: "x := 1".into(),
            env: env.clone(),
            t: 1.0,
            left: Verdict::Value { env },
            right: Verdict::Fuel,
            first_difference: None,
        };
        let v: serde_json::Value = serde_json::from_str(&d.to_json_line()).unwrap();
        assert_eq!(v["left"]["status"], "value");
        assert_eq!(v["right"]["status"], "fuel");
        assert_eq!(v["env"]["x"], 0.5);
    }

    #[test]
    fn determinism_and_time_shift_small() {
        let d = run_determinism(3, 300);
        assert_eq!((d.ambiguous, d.step_mismatch, d.unstable_runs), (0, 0, 0));
        let t = run_time_shift(3, 300);
        assert_eq!(t.failures, 0);
        assert!(t.pairs > 100);
    }
}
