//! Environments, term evaluation and closed-form solutions of the linear
//! systems carried by differential statements.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::ser::{Serialize, SerializeMap, Serializer};
use thiserror::Error;

use crate::ast::{BExpr, LTerm, Var, VarSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("flow queried at negative time {0}")]
    NegativeTime(f64),
}

/// Total valuation of the program variables, stored in variable order.
#[derive(Clone, PartialEq)]
pub struct Env {
    vars: Arc<VarSet>,
    vals: Vec<f64>,
}

impl Env {
    /// The environment constant on zero.
    pub fn zeros(vars: Arc<VarSet>) -> Env {
        let vals = vec![0.0; vars.len()];
        Env { vars, vals }
    }

    pub fn from_values(vars: Arc<VarSet>, vals: Vec<f64>) -> Env {
        assert_eq!(vars.len(), vals.len(), "environment arity mismatch");
        Env { vars, vals }
    }

    pub fn vars(&self) -> &Arc<VarSet> {
        &self.vars
    }

    pub fn values(&self) -> &[f64] {
        &self.vals
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    pub fn get(&self, x: &Var) -> Option<f64> {
        self.vars.index_of(x).map(|i| self.vals[i])
    }

    /// Value of a variable by name; panics on unknown names.
    pub fn value(&self, name: &str) -> f64 {
        let x = Var::new(name).expect("identifier");
        self.get(&x)
            .unwrap_or_else(|| panic!("unknown variable {name}"))
    }

    /// `σ ▽ [v/x]`
    pub fn updated(&self, x: &Var, v: f64) -> Env {
        let i = self
            .vars
            .index_of(x)
            .unwrap_or_else(|| panic!("variable {x} outside the environment"));
        let mut vals = self.vals.clone();
        vals[i] = v;
        Env {
            vars: self.vars.clone(),
            vals,
        }
    }

    pub fn with_values(&self, vals: Vec<f64>) -> Env {
        Env::from_values(self.vars.clone(), vals)
    }

    /// Componentwise `|a - b| <= tol * max(1, |a|, |b|)`.
    pub fn approx_eq(&self, other: &Env, tol: f64) -> bool {
        self.vals.len() == other.vals.len()
            && self
                .vals
                .iter()
                .zip(&other.vals)
                .all(|(a, b)| close(*a, *b, tol))
    }

    /// Index of the first component violating `approx_eq`.
    pub fn first_difference(&self, other: &Env, tol: f64) -> Option<usize> {
        self.vals
            .iter()
            .zip(&other.vals)
            .position(|(a, b)| !close(*a, *b, tol))
    }
}

/// Relative closeness with an absolute floor of `tol` around zero.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    if a == b || (a.is_nan() && b.is_nan()) {
        return true;
    }
    if !a.is_finite() || !b.is_finite() {
        return false;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

impl fmt::Debug for Env {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map()
            .entries(self.vars.iter().map(|v| v.name()).zip(&self.vals))
            .finish()
    }
}

impl fmt::Display for Env {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (v, x)) in self.vars.iter().zip(&self.vals).enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{v}={x}")?;
        }
        Ok(())
    }
}

impl Serialize for Env {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.vals.len()))?;
        for (v, x) in self.vars.iter().zip(&self.vals) {
            map.serialize_entry(v.name(), x)?;
        }
        map.end()
    }
}

/// `tσ`
pub fn eval_lterm(t: &LTerm, env: &Env) -> f64 {
    match t {
        LTerm::Const(r) => *r,
        LTerm::Scaled(r, x) => {
            r * env
                .get(x)
                .unwrap_or_else(|| panic!("variable {x} outside the environment"))
        }
        LTerm::Sum(a, b) => eval_lterm(a, env) + eval_lterm(b, env),
    }
}

/// `bσ` with exact comparisons.
pub fn eval_bexpr(b: &BExpr, env: &Env) -> bool {
    eval_bexpr_with(b, env, 0.0)
}

/// `bσ` where `|lhs - rhs| <= tolerance` counts as equality. A tolerance of
/// zero gives plain `<=`/`>=` on doubles.
pub fn eval_bexpr_with(b: &BExpr, env: &Env, tolerance: f64) -> bool {
    match b {
        BExpr::True => true,
        BExpr::False => false,
        BExpr::Leq(l, r) => {
            let (l, r) = (eval_lterm(l, env), eval_lterm(r, env));
            l <= r || (tolerance > 0.0 && (l - r).abs() <= tolerance)
        }
        BExpr::Geq(l, r) => {
            let (l, r) = (eval_lterm(l, env), eval_lterm(r, env));
            l >= r || (tolerance > 0.0 && (l - r).abs() <= tolerance)
        }
        BExpr::And(a, c) => eval_bexpr_with(a, env, tolerance) && eval_bexpr_with(c, env, tolerance),
        BExpr::Or(a, c) => eval_bexpr_with(a, env, tolerance) || eval_bexpr_with(c, env, tolerance),
        BExpr::Not(a) => !eval_bexpr_with(a, env, tolerance),
    }
}

/// `ẋ = A x + b` over a fixed variable order.
#[derive(Debug, Clone, PartialEq)]
pub struct LinSys {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub vars: Arc<VarSet>,
}

impl LinSys {
    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// True when every derivative is identically zero (`wait`).
    pub fn is_still(&self) -> bool {
        self.a.iter().all(|c| *c == 0.0) && self.b.iter().all(|c| *c == 0.0)
    }

    /// The `(n+1) x (n+1)` matrix `[[A, b], [0, 0]]`.
    fn augmented(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n + 1, n + 1);
        m.view_mut((0, 0), (n, n)).copy_from(&self.a);
        m.view_mut((0, n), (n, 1)).copy_from(&self.b);
        m
    }
}

fn accumulate(t: &LTerm, vars: &VarSet, row: &mut [f64], constant: &mut f64) {
    match t {
        LTerm::Const(r) => *constant += r,
        LTerm::Scaled(r, x) => {
            let j = vars
                .index_of(x)
                .unwrap_or_else(|| panic!("variable {x} outside the system"));
            row[j] += r;
        }
        LTerm::Sum(a, b) => {
            accumulate(a, vars, row, constant);
            accumulate(b, vars, row, constant);
        }
    }
}

/// `A[i][j]` is the coefficient of `x_j` in the right-hand side for `x_i`;
/// `b[i]` its constant part. Variables without an equation get a zero row.
pub fn compile_system(eqs: &[(Var, LTerm)], vars: Arc<VarSet>) -> LinSys {
    let n = vars.len();
    let mut a = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    for (x, t) in eqs {
        let i = vars
            .index_of(x)
            .unwrap_or_else(|| panic!("variable {x} outside the system"));
        let mut row = vec![0.0; n];
        let mut c = 0.0;
        accumulate(t, &vars, &mut row, &mut c);
        for (j, r) in row.into_iter().enumerate() {
            a[(i, j)] = r;
        }
        b[i] = c;
    }
    LinSys { a, b, vars }
}

/// Solution `φ_σ` of a linear system from an initial environment.
#[derive(Debug, Clone)]
pub struct FlowFn {
    sys: Arc<LinSys>,
    init: Env,
    nilpotent: Option<usize>,
}

impl FlowFn {
    pub fn new(sys: Arc<LinSys>, init: Env) -> FlowFn {
        assert_eq!(sys.dim(), init.len(), "system and environment arity differ");
        let nilpotent = nilpotency_index(&sys.augmented());
        FlowFn {
            sys,
            init,
            nilpotent,
        }
    }

    pub fn system(&self) -> &LinSys {
        &self.sys
    }

    pub fn initial(&self) -> &Env {
        &self.init
    }

    /// `φ_σ(t)`; `t` must be non-negative.
    pub fn at(&self, t: f64) -> Result<Env, DynamicsError> {
        if t < 0.0 || t.is_nan() {
            return Err(DynamicsError::NegativeTime(t));
        }
        Ok(self.eval(t))
    }

    /// `φ_σ(t)` for `t >= 0`, unchecked.
    pub(crate) fn eval(&self, t: f64) -> Env {
        if t == 0.0 || self.sys.is_still() {
            return self.init.clone();
        }
        let n = self.sys.dim();
        let x0 = self.init.values();
        if self.sys.a.iter().all(|c| *c == 0.0) {
            // Constant derivatives integrate exactly.
            let vals = (0..n).map(|i| x0[i] + self.sys.b[i] * t).collect();
            return self.init.with_values(vals);
        }
        let m = self.sys.augmented() * t;
        let e = match self.nilpotent {
            Some(k) => truncated_exp(&m, k),
            None => m.exp(),
        };
        let mut z = DVector::zeros(n + 1);
        z.rows_mut(0, n).copy_from_slice(x0);
        z[n] = 1.0;
        let y = e * z;
        self.init.with_values(y.rows(0, n).iter().copied().collect())
    }
}

/// Smallest `k` with `m^k = 0` exactly, if any.
fn nilpotency_index(m: &DMatrix<f64>) -> Option<usize> {
    let n = m.nrows();
    let mut p = m.clone();
    for k in 1..=n {
        if p.iter().all(|c| *c == 0.0) {
            return Some(k);
        }
        p = &p * m;
    }
    None
}

/// `Σ_{j<k} m^j / j!` for `m^k = 0`, which is `exp(m)` without truncation error.
fn truncated_exp(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let n = m.nrows();
    let mut sum = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for j in 1..k {
        term = &term * m / j as f64;
        sum += &term;
    }
    sum
}

/// Flow of a compiled system, evaluated at `t`.
pub fn flow_at(flow: &FlowFn, t: f64) -> Result<Env, DynamicsError> {
    flow.at(t)
}

/// The flow of the differential statement `eqs` started in `env`.
pub fn flow_of(eqs: &[(Var, LTerm)], env: &Env) -> FlowFn {
    let sys = compile_system(eqs, env.vars().clone());
    FlowFn::new(Arc::new(sys), env.clone())
}
