//! One-step reduction on configurations `⟨p, σ, t⟩` and a fuel-bounded driver.
//!
//! `t` is the remaining time budget. Differential statements consume it;
//! everything else leaves it alone.

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::ast::{Atomic, LTerm, Prog, ProgKind, Span};
use crate::dynamics::{eval_bexpr_with, eval_lterm, flow_of, Env};
use crate::limits::{check_time, EvalError, Fuel, Limits};

/// Rule labels, printed exactly as in the reduction rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Rule {
    #[serde(rename = "asg")]
    Asg,
    #[serde(rename = "diff-stop")]
    DiffStop,
    #[serde(rename = "diff-skip")]
    DiffSkip,
    #[serde(rename = "if-true")]
    IfTrue,
    #[serde(rename = "if-false")]
    IfFalse,
    #[serde(rename = "wh-true")]
    WhTrue,
    #[serde(rename = "wh-false")]
    WhFalse,
    #[serde(rename = "seq-stop")]
    SeqStop,
    #[serde(rename = "seq-skip")]
    SeqSkip,
    #[serde(rename = "seq")]
    Seq,
}

impl Rule {
    pub const ALL: [Rule; 10] = [
        Rule::Asg,
        Rule::DiffStop,
        Rule::DiffSkip,
        Rule::IfTrue,
        Rule::IfFalse,
        Rule::WhTrue,
        Rule::WhFalse,
        Rule::SeqStop,
        Rule::SeqSkip,
        Rule::Seq,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Rule::Asg => "asg",
            Rule::DiffStop => "diff-stop",
            Rule::DiffSkip => "diff-skip",
            Rule::IfTrue => "if-true",
            Rule::IfFalse => "if-false",
            Rule::WhTrue => "wh-true",
            Rule::WhFalse => "wh-false",
            Rule::SeqStop => "seq-stop",
            Rule::SeqSkip => "seq-skip",
            Rule::Seq => "seq",
        }
    }

    fn index(self) -> usize {
        Rule::ALL.iter().position(|r| *r == self).unwrap()
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Code {
    Prog(Arc<Prog>),
    Skip,
    Stop,
}

impl Code {
    pub fn is_terminal(&self) -> bool {
        !matches!(self, Code::Prog(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub code: Code,
    pub env: Env,
    pub t: f64,
}

impl Config {
    /// Initial configuration; `t` must be finite and non-negative.
    pub fn new(p: Prog, env: Env, t: f64) -> Result<Config, EvalError> {
        check_time(t)?;
        Ok(Config {
            code: Code::Prog(Arc::new(p)),
            env,
            t,
        })
    }

    /// Any configuration; rejects negative time and `stop` with time left.
    pub fn from_parts(code: Code, env: Env, t: f64) -> Result<Config, EvalError> {
        check_time(t)?;
        if code == Code::Stop && t != 0.0 {
            return Err(EvalError::StopWithTime(t));
        }
        Ok(Config { code, env, t })
    }
}

/// One reduction `c → c'`.
#[derive(Debug, Clone)]
pub struct Step {
    /// Rules of the derivation, conclusion first; the last one fires on the redex.
    pub derivation: Vec<Rule>,
    /// Location of the redex.
    pub span: Span,
    pub next: Config,
}

impl Step {
    /// The rule concluding the derivation.
    pub fn rule(&self) -> Rule {
        self.derivation[0]
    }
}

/// Duration `tσ` of a differential statement, rejecting negative values.
pub(crate) fn duration(dur: &LTerm, env: &Env, span: Span) -> Result<f64, EvalError> {
    let d = eval_lterm(dur, env);
    if d >= 0.0 {
        Ok(d)
    } else {
        Err(EvalError::NegativeDuration { value: d, span })
    }
}

/// Reduces a configuration by one step. Returns `None` on `skip`/`stop`.
pub fn step(c: &Config, guard_tolerance: f64) -> Result<Option<Step>, EvalError> {
    let Code::Prog(p) = &c.code else {
        return Ok(None);
    };
    let mut derivation = Vec::new();
    let (span, next) = reduce(p, &c.env, c.t, guard_tolerance, &mut derivation)?;
    debug_assert!(next.t >= 0.0);
    Ok(Some(Step {
        derivation,
        span,
        next,
    }))
}

fn reduce(
    p: &Arc<Prog>,
    env: &Env,
    t: f64,
    tol: f64,
    rules: &mut Vec<Rule>,
) -> Result<(Span, Config), EvalError> {
    let cfg = |code, env, t| Config { code, env, t };
    match &p.kind {
        ProgKind::At(Atomic::Assign(x, e)) => {
            rules.push(Rule::Asg);
            let env = env.updated(x, eval_lterm(e, env));
            Ok((p.span, cfg(Code::Skip, env, t)))
        }
        ProgKind::At(Atomic::DiffFor { eqs, dur }) => {
            let d = duration(dur, env, p.span)?;
            let flow = flow_of(eqs, env);
            if t < d {
                rules.push(Rule::DiffStop);
                Ok((p.span, cfg(Code::Stop, flow.eval(t), 0.0)))
            } else {
                rules.push(Rule::DiffSkip);
                Ok((p.span, cfg(Code::Skip, flow.eval(d), t - d)))
            }
        }
        ProgKind::Ite(b, q, r) => {
            let (rule, next) = if eval_bexpr_with(b, env, tol) {
                (Rule::IfTrue, q)
            } else {
                (Rule::IfFalse, r)
            };
            rules.push(rule);
            Ok((p.span, cfg(Code::Prog(next.clone()), env.clone(), t)))
        }
        ProgKind::While(b, body) => {
            if eval_bexpr_with(b, env, tol) {
                rules.push(Rule::WhTrue);
                let unrolled = Prog::new(ProgKind::Seq(body.clone(), p.clone()), p.span);
                Ok((p.span, cfg(Code::Prog(Arc::new(unrolled)), env.clone(), t)))
            } else {
                rules.push(Rule::WhFalse);
                Ok((p.span, cfg(Code::Skip, env.clone(), t)))
            }
        }
        ProgKind::Seq(first, rest) => {
            let at = rules.len();
            rules.push(Rule::Seq);
            let (span, inner) = reduce(first, env, t, tol, rules)?;
            let next = match inner.code {
                Code::Stop => {
                    rules[at] = Rule::SeqStop;
                    cfg(Code::Stop, inner.env, inner.t)
                }
                Code::Skip => {
                    rules[at] = Rule::SeqSkip;
                    cfg(Code::Prog(rest.clone()), inner.env, inner.t)
                }
                Code::Prog(q) => {
                    let joined = Prog::new(ProgKind::Seq(q, rest.clone()), p.span);
                    cfg(Code::Prog(Arc::new(joined)), inner.env, inner.t)
                }
            };
            Ok((span, next))
        }
    }
}

/// Every derivation whose premises hold, found by trying each rule
/// independently. Determinism means this never has more than one element.
pub fn applicable(c: &Config, guard_tolerance: f64) -> Result<Vec<(Vec<Rule>, Config)>, EvalError> {
    match &c.code {
        Code::Prog(p) => candidates(p, &c.env, c.t, guard_tolerance),
        _ => Ok(Vec::new()),
    }
}

fn candidates(
    p: &Arc<Prog>,
    env: &Env,
    t: f64,
    tol: f64,
) -> Result<Vec<(Vec<Rule>, Config)>, EvalError> {
    let mut out = Vec::new();
    match &p.kind {
        ProgKind::At(Atomic::Assign(x, e)) => {
            let env = env.updated(x, eval_lterm(e, env));
            out.push((vec![Rule::Asg], Config { code: Code::Skip, env, t }));
        }
        ProgKind::At(Atomic::DiffFor { eqs, dur }) => {
            let d = duration(dur, env, p.span)?;
            let flow = flow_of(eqs, env);
            if t < d {
                let next = Config { code: Code::Stop, env: flow.eval(t), t: 0.0 };
                out.push((vec![Rule::DiffStop], next));
            }
            if t >= d {
                let next = Config { code: Code::Skip, env: flow.eval(d), t: t - d };
                out.push((vec![Rule::DiffSkip], next));
            }
        }
        ProgKind::Ite(b, q, r) => {
            let holds = eval_bexpr_with(b, env, tol);
            if holds {
                let next = Config { code: Code::Prog(q.clone()), env: env.clone(), t };
                out.push((vec![Rule::IfTrue], next));
            }
            if !holds {
                let next = Config { code: Code::Prog(r.clone()), env: env.clone(), t };
                out.push((vec![Rule::IfFalse], next));
            }
        }
        ProgKind::While(b, body) => {
            let holds = eval_bexpr_with(b, env, tol);
            if holds {
                let unrolled = Prog::new(ProgKind::Seq(body.clone(), p.clone()), p.span);
                let next = Config { code: Code::Prog(Arc::new(unrolled)), env: env.clone(), t };
                out.push((vec![Rule::WhTrue], next));
            }
            if !holds {
                let next = Config { code: Code::Skip, env: env.clone(), t };
                out.push((vec![Rule::WhFalse], next));
            }
        }
        ProgKind::Seq(first, rest) => {
            for (premise, inner) in candidates(first, env, t, tol)? {
                let (rule, code) = match inner.code {
                    Code::Stop => (Rule::SeqStop, Code::Stop),
                    Code::Skip => (Rule::SeqSkip, Code::Prog(rest.clone())),
                    Code::Prog(q) => (
                        Rule::Seq,
                        Code::Prog(Arc::new(Prog::new(ProgKind::Seq(q, rest.clone()), p.span))),
                    ),
                };
                let mut derivation = vec![rule];
                derivation.extend(premise);
                out.push((derivation, Config { code, env: inner.env, t: inner.t }));
            }
        }
    }
    Ok(out)
}

/// Result of a multi-step run.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    /// Reached `⟨stop, σ, 0⟩`.
    AtTime(Env),
    /// Reached `⟨skip, σ, t'⟩`; `duration = t - t'`.
    Terminated { env: Env, duration: f64 },
    /// The step budget or deadline ran out; `last` is the final configuration.
    FuelExhausted { last: Box<Config>, timed_out: bool },
}

#[derive(Debug, Clone)]
pub struct TraceEntry {
    pub derivation: Vec<Rule>,
    pub span: Span,
    pub before: Config,
    pub after: Config,
}

impl TraceEntry {
    pub fn rule(&self) -> Rule {
        self.derivation[0]
    }
}

pub const DEFAULT_RETENTION: usize = 10_000;

/// The most recent steps of a run plus per-rule counts over the whole run.
#[derive(Debug, Clone)]
pub struct StepTrace {
    pub entries: VecDeque<TraceEntry>,
    pub retention: usize,
    pub total_steps: u64,
    counts: [u64; 10],
}

impl StepTrace {
    pub fn new(retention: usize) -> StepTrace {
        StepTrace {
            entries: VecDeque::new(),
            retention,
            total_steps: 0,
            counts: [0; 10],
        }
    }

    fn record(&mut self, before: &Config, s: &Step) {
        self.total_steps += 1;
        for r in &s.derivation {
            self.counts[r.index()] += 1;
        }
        if self.retention == 0 {
            return;
        }
        if self.entries.len() == self.retention {
            self.entries.pop_front();
        }
        self.entries.push_back(TraceEntry {
            derivation: s.derivation.clone(),
            span: s.span,
            before: before.clone(),
            after: s.next.clone(),
        });
    }

    /// How many times `r` occurred in any derivation of the run.
    pub fn count(&self, r: Rule) -> u64 {
        self.counts[r.index()]
    }

    /// Sum of `t` drops over the retained `diff-skip` steps.
    pub fn consumed(&self) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.derivation.last() == Some(&Rule::DiffSkip))
            .map(|e| e.before.t - e.after.t)
            .sum()
    }
}

/// Runs `p` from `σ` with budget `t` for at most `limits.fuel` steps,
/// keeping the last `DEFAULT_RETENTION` steps.
pub fn run(p: &Prog, env: &Env, t: f64, limits: &Limits) -> Result<(Outcome, StepTrace), EvalError> {
    run_with(p, env, t, limits, DEFAULT_RETENTION)
}

pub fn run_with(
    p: &Prog,
    env: &Env,
    t: f64,
    limits: &Limits,
    retention: usize,
) -> Result<(Outcome, StepTrace), EvalError> {
    let fuel = limits.meter();
    let start = Config::new(p.clone(), env.clone(), t)?;
    run_from(start, &fuel, limits.guard_tolerance, retention)
}

/// Drives `c` to a terminal configuration, drawing one unit of `fuel` per step.
pub fn run_from(
    mut c: Config,
    fuel: &Fuel,
    guard_tolerance: f64,
    retention: usize,
) -> Result<(Outcome, StepTrace), EvalError> {
    let t0 = c.t;
    let mut trace = StepTrace::new(retention);
    loop {
        match c.code {
            Code::Stop => return Ok((Outcome::AtTime(c.env), trace)),
            Code::Skip => {
                let duration = t0 - c.t;
                return Ok((Outcome::Terminated { env: c.env, duration }, trace));
            }
            Code::Prog(_) => {}
        }
        if !fuel.tick() {
            let timed_out = fuel.timed_out();
            return Ok((
                Outcome::FuelExhausted {
                    last: Box::new(c),
                    timed_out,
                },
                trace,
            ));
        }
        let s = step(&c, guard_tolerance)?.expect("non-terminal configuration");
        trace.record(&c, &s);
        c = s.next;
    }
}
