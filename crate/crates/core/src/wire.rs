//! JSON request and response shapes shared by the HTTP service and the CLI.
//!
//! Handlers here are pure: the same request always gives byte-identical
//! output from [`to_json`], whoever calls them.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::ast::{Diagnostic, Prog, Span, VarSet};
use crate::bigstep::{evaluate, BigResult};
use crate::denotational::{sem_at, sem_trace, DenResult};
use crate::dynamics::Env;
use crate::limits::{Limits, DEFAULT_FUEL};
use crate::parser::parse;
use crate::smallstep::{run_from, Code, Config, Outcome, Rule};

pub const MAX_SAMPLES: usize = 100_000;
pub const MAX_STEPS: usize = 10_000;
pub const DEFAULT_STEPS: usize = 1_000;

/// Which evaluator answers an `/eval` request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Semantics {
    #[default]
    Small,
    Big,
    Den,
}

impl std::str::FromStr for Semantics {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "small" => Ok(Semantics::Small),
            "big" => Ok(Semantics::Big),
            "den" => Ok(Semantics::Den),
            _ => Err(format!("unknown semantics `{s}`, expected small, big or den")),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct ParseRequest {
    pub source: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParseResponse {
    pub ok: bool,
    pub variables: Vec<String>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Knobs shared by the evaluating requests. `fuel` is a JSON number so that
/// `1e6` is accepted.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct Common {
    #[serde(default)]
    pub fuel: Option<f64>,
    #[serde(default)]
    pub guard_tolerance: Option<f64>,
    /// Initial values by name; unlisted variables start at 0.
    #[serde(default)]
    pub env: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct EvalRequest {
    pub source: String,
    pub t: f64,
    #[serde(default)]
    pub semantics: Semantics,
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct EvalResponse {
    /// `value`, `terminated`, `diverged` or `fuel`.
    pub status: &'static str,
    pub env: Option<Env>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    pub timed_out: bool,
}

#[derive(Debug, Clone, Deserialize)]
pub struct TraceRequest {
    pub source: String,
    pub t_max: f64,
    pub samples: usize,
    #[serde(flatten)]
    pub common: Common,
}

/// One sample: a state, or a marker once the run has ended.
#[derive(Debug, Clone, Serialize, PartialEq)]
#[serde(untagged)]
pub enum Point {
    State { t: f64, env: Env },
    Marker { t: f64, marker: &'static str },
}

/// Where the trajectory ends and why.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Marker {
    /// `terminated`, `diverged` or `fuel`.
    pub kind: &'static str,
    pub t: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub env: Option<Env>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct TraceResponse {
    pub variables: Vec<String>,
    pub points: Vec<Point>,
    pub markers: Vec<Marker>,
    pub timed_out: bool,
}

#[derive(Debug, Clone, Deserialize)]
pub struct StepRequest {
    pub source: String,
    pub t: f64,
    #[serde(default)]
    pub max_steps: Option<usize>,
    #[serde(flatten)]
    pub common: Common,
}

/// One reduction, with the state after it.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct StepView {
    /// The concluding rule.
    pub rule: Rule,
    /// All rules of the derivation, conclusion first.
    pub derivation: Vec<Rule>,
    /// Source location of the redex.
    pub code_span: Span,
    pub code: &'static str,
    pub env: Env,
    pub t: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct StepResponse {
    pub steps: Vec<StepView>,
    /// The last configuration is `stop` or `skip`.
    pub terminal: bool,
}

/// A request the evaluators cannot serve, with its HTTP status.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub error: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<Diagnostic>,
}

impl ApiError {
    pub fn unprocessable(msg: impl Into<String>) -> ApiError {
        ApiError {
            status: 422,
            error: msg.into(),
            diagnostics: Vec::new(),
        }
    }

    pub fn bad_request(msg: impl Into<String>) -> ApiError {
        ApiError {
            status: 400,
            error: msg.into(),
            diagnostics: Vec::new(),
        }
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.error)?;
        for d in &self.diagnostics {
            write!(f, "\n  {d}")?;
        }
        Ok(())
    }
}

/// Canonical serialisation; doubles print as shortest round-trip decimals.
pub fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("wire types serialise")
}

pub fn handle_parse(req: &ParseRequest) -> ParseResponse {
    match parse(&req.source) {
        Ok((_, vars)) => ParseResponse {
            ok: true,
            variables: vars.names(),
            diagnostics: Vec::new(),
        },
        Err(e) => ParseResponse {
            ok: false,
            variables: Vec::new(),
            diagnostics: e.diagnostics(),
        },
    }
}

/// A parsed program with its start state and limits.
pub struct Prepared {
    pub prog: Prog,
    pub env: Env,
    pub limits: Limits,
}

fn check_time(name: &str, t: f64) -> Result<(), ApiError> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(ApiError::unprocessable(format!("{name} must be a finite non-negative number")))
    }
}

/// Parses the source and builds the start state and limits.
pub fn prepare(source: &str, c: &Common, timeout: Option<Duration>) -> Result<Prepared, ApiError> {
    let (prog, vars) = parse(source).map_err(|e| ApiError {
        status: 422,
        error: "program does not parse".into(),
        diagnostics: e.diagnostics(),
    })?;
    let vars = Arc::new(vars);
    let env = initial_env(&vars, c.env.as_ref())?;
    let fuel = match c.fuel {
        None => DEFAULT_FUEL,
        Some(f) if f.is_finite() && f >= 0.0 && f.fract() == 0.0 && f <= 9.007_199_254_740_992e15 => f as u64,
        Some(_) => return Err(ApiError::unprocessable("fuel must be a non-negative integer")),
    };
    let tol = c.guard_tolerance.unwrap_or(0.0);
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(ApiError::unprocessable("guard_tolerance must be a finite non-negative number"));
    }
    let mut limits = Limits::with_fuel(fuel).tolerance(tol);
    limits.timeout = timeout;
    Ok(Prepared { prog, env, limits })
}

/// All variables at 0 except those given by name.
pub fn initial_env(vars: &Arc<VarSet>, given: Option<&BTreeMap<String, f64>>) -> Result<Env, ApiError> {
    let mut env = Env::zeros(vars.clone());
    for (name, v) in given.into_iter().flatten() {
        let Some(x) = vars.iter().find(|x| x.name() == name) else {
            return Err(ApiError::unprocessable(format!("unknown variable `{name}`")));
        };
        if !v.is_finite() {
            return Err(ApiError::unprocessable(format!("initial value of `{name}` must be finite")));
        }
        env = env.updated(&x.clone(), *v);
    }
    Ok(env)
}

fn fuel_response(timed_out: bool) -> EvalResponse {
    EvalResponse {
        status: "fuel",
        env: None,
        duration: None,
        timed_out,
    }
}

pub fn handle_eval(req: &EvalRequest, timeout: Option<Duration>) -> Result<EvalResponse, ApiError> {
    check_time("t", req.t)?;
    let p = prepare(&req.source, &req.common, timeout)?;
    let runtime = |e: crate::limits::EvalError| ApiError::unprocessable(e.to_string());
    let value = |env| EvalResponse {
        status: "value",
        env: Some(env),
        duration: None,
        timed_out: false,
    };
    let terminated = |env, d| EvalResponse {
        status: "terminated",
        env: Some(env),
        duration: Some(d),
        timed_out: false,
    };
    Ok(match req.semantics {
        Semantics::Small => {
            let start = Config::new(p.prog, p.env, req.t).map_err(runtime)?;
            let (o, _) = run_from(start, &p.limits.meter(), p.limits.guard_tolerance, 0).map_err(runtime)?;
            match o {
                Outcome::AtTime(env) => value(env),
                Outcome::Terminated { env, duration } => terminated(env, duration),
                Outcome::FuelExhausted { timed_out, .. } => fuel_response(timed_out),
            }
        }
        Semantics::Big => match evaluate(&p.prog, &p.env, req.t, &p.limits).map_err(runtime)? {
            BigResult::StopAt(env) => value(env),
            BigResult::SkipAt { env, consumed } => terminated(env, consumed),
            BigResult::FuelExhausted { timed_out } => fuel_response(timed_out),
        },
        Semantics::Den => match sem_at(&p.prog, &p.env, req.t, &p.limits).map_err(runtime)? {
            DenResult::ValueAt(env) => value(env),
            DenResult::TerminatedAt { env, duration } => terminated(env, duration),
            DenResult::DivergedBefore { duration } => EvalResponse {
                status: "diverged",
                env: None,
                duration: Some(duration),
                timed_out: false,
            },
            DenResult::FuelExhausted { timed_out } => fuel_response(timed_out),
        },
    })
}

pub fn handle_trace(req: &TraceRequest, timeout: Option<Duration>) -> Result<TraceResponse, ApiError> {
    if !(req.t_max.is_finite() && req.t_max > 0.0) {
        return Err(ApiError::unprocessable("t_max must be a finite positive number"));
    }
    if !(2..=MAX_SAMPLES).contains(&req.samples) {
        return Err(ApiError::unprocessable(format!(
            "samples must be between 2 and {MAX_SAMPLES}"
        )));
    }
    let p = prepare(&req.source, &req.common, timeout)?;
    let rows = sem_trace(&p.prog, &p.env, req.t_max, req.samples, &p.limits)
        .map_err(|e| ApiError::unprocessable(e.to_string()))?;
    let mut points = Vec::with_capacity(rows.len());
    let mut markers = Vec::new();
    let mut timed_out = false;
    for (t, r) in rows {
        let (kind, marker) = match r {
            DenResult::ValueAt(env) => {
                points.push(Point::State { t, env });
                continue;
            }
            DenResult::TerminatedAt { env, duration } => (
                "terminated",
                Marker {
                    kind: "terminated",
                    t: duration,
                    env: Some(env),
                },
            ),
            DenResult::DivergedBefore { duration } => (
                "diverged",
                Marker {
                    kind: "diverged",
                    t: duration,
                    env: None,
                },
            ),
            DenResult::FuelExhausted { timed_out: to } => {
                timed_out |= to;
                ("fuel", Marker { kind: "fuel", t, env: None })
            }
        };
        points.push(Point::Marker { t, marker: kind });
        if markers.is_empty() {
            markers.push(marker);
        }
    }
    Ok(TraceResponse {
        variables: p.env.vars().names(),
        points,
        markers,
        timed_out,
    })
}

fn code_label(c: &Code) -> &'static str {
    match c {
        Code::Prog(_) => "running",
        Code::Skip => "skip",
        Code::Stop => "stop",
    }
}

pub fn handle_step(req: &StepRequest, timeout: Option<Duration>) -> Result<StepResponse, ApiError> {
    check_time("t", req.t)?;
    let max = req.max_steps.unwrap_or(DEFAULT_STEPS);
    if !(1..=MAX_STEPS).contains(&max) {
        return Err(ApiError::unprocessable(format!(
            "max_steps must be between 1 and {MAX_STEPS}"
        )));
    }
    let p = prepare(&req.source, &req.common, timeout)?;
    let start = Config::new(p.prog, p.env, req.t).map_err(|e| ApiError::unprocessable(e.to_string()))?;
    let fuel = crate::limits::Fuel::new(max as u64, timeout.map(|d| std::time::Instant::now() + d));
    let (outcome, trace) = run_from(start, &fuel, p.limits.guard_tolerance, max)
        .map_err(|e| ApiError::unprocessable(e.to_string()))?;
    let steps = trace
        .entries
        .iter()
        .map(|e| StepView {
            rule: e.rule(),
            derivation: e.derivation.clone(),
            code_span: e.span,
            code: code_label(&e.after.code),
            env: e.after.env.clone(),
            t: e.after.t,
        })
        .collect();
    Ok(StepResponse {
        steps,
        terminal: !matches!(outcome, Outcome::FuelExhausted { .. }),
    })
}
