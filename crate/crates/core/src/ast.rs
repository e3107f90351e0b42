//! Abstract syntax of the hybrid while-language.
//!
//! Programs are built from atomic statements (assignments and differential
//! statements) with sequencing, conditionals and while-loops. Linear terms and
//! Boolean guards are the only expression forms.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

/// Byte range plus 1-based line/column of the start position.
///
/// Spans never take part in equality: two nodes that differ only in where
/// they were parsed from compare equal.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub line: usize,
    pub column: usize,
}

impl PartialEq for Span {
    fn eq(&self, _other: &Self) -> bool {
        true
    }
}

impl Span {
    pub fn new(start: usize, end: usize, line: usize, column: usize) -> Self {
        Span {
            start,
            end,
            line,
            column,
        }
    }

    /// Smallest span covering both.
    pub fn join(self, other: Span) -> Span {
        if self.end == 0 && self.start == 0 {
            return other;
        }
        let (first, _) = if self.start <= other.start {
            (self, other)
        } else {
            (other, self)
        };
        Span {
            start: self.start.min(other.start),
            end: self.end.max(other.end),
            line: first.line,
            column: first.column,
        }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

/// A program variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(Arc<str>);

impl Serialize for Var {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl Var {
    /// Builds a variable, checking the identifier shape `[a-zA-Z][a-zA-Z0-9_]*`.
    pub fn new(name: &str) -> Result<Var, AstError> {
        let mut chars = name.chars();
        let ok = matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
            && chars.all(|c| c.is_ascii_alphanumeric() || c == '_');
        if ok {
            Ok(Var(Arc::from(name)))
        } else {
            Err(AstError::BadIdentifier(name.to_string()))
        }
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AstError {
    #[error("`{0}` is not a valid identifier")]
    BadIdentifier(String),
    #[error("until step must be positive, got {0}")]
    NonPositiveEpsilon(f64),
}

/// Ordered set of program variables. The order fixes the coordinates of
/// environments and of compiled linear systems.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VarSet {
    vars: Vec<Var>,
}

impl VarSet {
    pub fn new() -> Self {
        VarSet::default()
    }

    /// Builds a set from names, keeping first occurrences in order.
    pub fn from_names<I, S>(names: I) -> Result<VarSet, AstError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut set = VarSet::new();
        for n in names {
            set.insert(Var::new(n.as_ref())?);
        }
        Ok(set)
    }

    /// Inserts if absent; returns the index of the variable.
    pub fn insert(&mut self, v: Var) -> usize {
        match self.index_of(&v) {
            Some(i) => i,
            None => {
                self.vars.push(v);
                self.vars.len() - 1
            }
        }
    }

    pub fn index_of(&self, v: &Var) -> Option<usize> {
        self.vars.iter().position(|x| x == v)
    }

    pub fn contains(&self, v: &Var) -> bool {
        self.index_of(v).is_some()
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Var> {
        self.vars.iter()
    }

    pub fn get(&self, i: usize) -> &Var {
        &self.vars[i]
    }

    pub fn names(&self) -> Vec<String> {
        self.vars.iter().map(|v| v.name().to_string()).collect()
    }
}

/// Linear terms: `r`, `r * x`, `t + s`.
#[derive(Debug, Clone, PartialEq)]
pub enum LTerm {
    Const(f64),
    Scaled(f64, Var),
    Sum(Box<LTerm>, Box<LTerm>),
}

impl LTerm {
    pub fn var(x: Var) -> LTerm {
        LTerm::Scaled(1.0, x)
    }

    pub fn sum(a: LTerm, b: LTerm) -> LTerm {
        LTerm::Sum(Box::new(a), Box::new(b))
    }

    pub fn vars(&self, out: &mut Vec<Var>) {
        match self {
            LTerm::Const(_) => {}
            LTerm::Scaled(_, x) => out.push(x.clone()),
            LTerm::Sum(a, b) => {
                a.vars(out);
                b.vars(out);
            }
        }
    }
}

/// Guards: the free Boolean algebra over `t <= s` and `t >= s`.
#[derive(Debug, Clone, PartialEq)]
pub enum BExpr {
    True,
    False,
    Leq(LTerm, LTerm),
    Geq(LTerm, LTerm),
    And(Box<BExpr>, Box<BExpr>),
    Or(Box<BExpr>, Box<BExpr>),
    Not(Box<BExpr>),
}

impl BExpr {
    pub fn negate(b: BExpr) -> BExpr {
        BExpr::Not(Box::new(b))
    }

    pub fn and(a: BExpr, b: BExpr) -> BExpr {
        BExpr::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: BExpr, b: BExpr) -> BExpr {
        BExpr::Or(Box::new(a), Box::new(b))
    }

    pub fn vars(&self, out: &mut Vec<Var>) {
        match self {
            BExpr::True | BExpr::False => {}
            BExpr::Leq(a, b) | BExpr::Geq(a, b) => {
                a.vars(out);
                b.vars(out);
            }
            BExpr::And(a, b) | BExpr::Or(a, b) => {
                a.vars(out);
                b.vars(out);
            }
            BExpr::Not(a) => a.vars(out),
        }
    }
}

/// Atomic statements.
#[derive(Debug, Clone, PartialEq)]
pub enum Atomic {
    Assign(Var, LTerm),
    /// `x1' = t1, ..., xn' = tn for dur`
    DiffFor { eqs: Vec<(Var, LTerm)>, dur: LTerm },
}

/// Program node: shape plus source span.
#[derive(Debug, Clone, PartialEq)]
pub struct Prog {
    pub kind: ProgKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProgKind {
    At(Atomic),
    Seq(Arc<Prog>, Arc<Prog>),
    Ite(BExpr, Arc<Prog>, Arc<Prog>),
    While(BExpr, Arc<Prog>),
}

impl Prog {
    pub fn new(kind: ProgKind, span: Span) -> Prog {
        Prog { kind, span }
    }

    pub fn atomic(a: Atomic) -> Prog {
        Prog::new(ProgKind::At(a), Span::default())
    }

    pub fn assign(x: Var, t: LTerm) -> Prog {
        Prog::atomic(Atomic::Assign(x, t))
    }

    pub fn seq(p: Prog, q: Prog) -> Prog {
        let span = p.span.join(q.span);
        Prog::new(ProgKind::Seq(Arc::new(p), Arc::new(q)), span)
    }

    pub fn ite(b: BExpr, p: Prog, q: Prog) -> Prog {
        Prog::new(ProgKind::Ite(b, Arc::new(p), Arc::new(q)), Span::default())
    }

    pub fn while_loop(b: BExpr, body: Prog) -> Prog {
        Prog::new(ProgKind::While(b, Arc::new(body)), Span::default())
    }

    /// Right-associated sequence of the given statements.
    pub fn seq_all(mut parts: Vec<Prog>) -> Option<Prog> {
        let mut acc = parts.pop()?;
        while let Some(p) = parts.pop() {
            acc = Prog::seq(p, acc);
        }
        Some(acc)
    }

    /// Number of nodes, used by generators and shrinking.
    pub fn size(&self) -> usize {
        match &self.kind {
            ProgKind::At(_) => 1,
            ProgKind::Seq(p, q) | ProgKind::Ite(_, p, q) => 1 + p.size() + q.size(),
            ProgKind::While(_, p) => 1 + p.size(),
        }
    }
}

/// A well-formedness problem, located in the source.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub message: String,
    pub span: Span,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.span, self.message)
    }
}

/// Checks variable membership and that every differential statement lists
/// each variable of `vars` exactly once.
pub fn well_formed(p: &Prog, vars: &VarSet) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    check_prog(p, vars, &mut out);
    out
}

fn check_terms(used: Vec<Var>, vars: &VarSet, span: Span, out: &mut Vec<Diagnostic>) {
    for v in used {
        if !vars.contains(&v) {
            out.push(Diagnostic {
                message: format!("unknown variable {v}"),
                span,
            });
        }
    }
}

fn check_prog(p: &Prog, vars: &VarSet, out: &mut Vec<Diagnostic>) {
    match &p.kind {
        ProgKind::At(Atomic::Assign(x, t)) => {
            let mut used = vec![x.clone()];
            t.vars(&mut used);
            check_terms(used, vars, p.span, out);
        }
        ProgKind::At(Atomic::DiffFor { eqs, dur }) => {
            let mut seen = HashSet::new();
            let mut used = Vec::new();
            for (x, t) in eqs {
                if !seen.insert(x.clone()) {
                    out.push(Diagnostic {
                        message: format!("duplicate equation for {x}'"),
                        span: p.span,
                    });
                }
                used.push(x.clone());
                t.vars(&mut used);
            }
            dur.vars(&mut used);
            check_terms(used, vars, p.span, out);
            let missing: Vec<String> = vars
                .iter()
                .filter(|v| !seen.contains(*v))
                .map(|v| v.to_string())
                .collect();
            if !missing.is_empty() {
                out.push(Diagnostic {
                    message: format!(
                        "incomplete system: missing equations for {}",
                        missing.join(", ")
                    ),
                    span: p.span,
                });
            }
        }
        ProgKind::Seq(a, b) => {
            check_prog(a, vars, out);
            check_prog(b, vars, out);
        }
        ProgKind::Ite(g, a, b) => {
            let mut used = Vec::new();
            g.vars(&mut used);
            check_terms(used, vars, p.span, out);
            check_prog(a, vars, out);
            check_prog(b, vars, out);
        }
        ProgKind::While(g, body) => {
            let mut used = Vec::new();
            g.vars(&mut used);
            check_terms(used, vars, p.span, out);
            check_prog(body, vars, out);
        }
    }
}

/// `wait dur` is the differential statement with every derivative zero.
pub fn desugar_wait(dur: LTerm, vars: &VarSet) -> Atomic {
    Atomic::DiffFor {
        eqs: vars.iter().map(|v| (v.clone(), LTerm::Const(0.0))).collect(),
        dur,
    }
}

/// `eqs until_eps psi` abbreviates `while !psi { eqs for eps }`.
pub fn desugar_until(eqs: Vec<(Var, LTerm)>, eps: f64, psi: BExpr) -> Result<Prog, AstError> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(AstError::NonPositiveEpsilon(eps));
    }
    let body = Prog::atomic(Atomic::DiffFor {
        eqs,
        dur: LTerm::Const(eps),
    });
    Ok(Prog::while_loop(BExpr::negate(psi), body))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: &str) -> Var {
        Var::new(n).unwrap()
    }

    fn cruise() -> Prog {
        let guard = BExpr::Leq(LTerm::var(v("v")), LTerm::Const(10.0));
        let up = Prog::atomic(Atomic::DiffFor {
            eqs: vec![(v("v"), LTerm::Const(1.0))],
            dur: LTerm::Const(1.0),
        });
        let down = Prog::atomic(Atomic::DiffFor {
            eqs: vec![(v("v"), LTerm::Const(-1.0))],
            dur: LTerm::Const(1.0),
        });
        Prog::while_loop(BExpr::True, Prog::ite(guard, up, down))
    }

    #[test]
    fn identifiers() {
        assert!(Var::new("x_1").is_ok());
        assert!(Var::new("1x").is_err());
        assert!(Var::new("").is_err());
        assert!(Var::new("a-b").is_err());
    }

    #[test]
    fn cruise_is_well_formed() {
        let vars = VarSet::from_names(["v"]).unwrap();
        assert!(well_formed(&cruise(), &vars).is_empty());
    }

    #[test]
    fn unknown_variable() {
        let vars = VarSet::from_names(["x"]).unwrap();
        let p = Prog::assign(v("y"), LTerm::Const(1.0));
        let d = well_formed(&p, &vars);
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("unknown variable y"));
    }

    #[test]
    fn incomplete_system() {
        let vars = VarSet::from_names(["x", "y"]).unwrap();
        let p = Prog::atomic(Atomic::DiffFor {
            eqs: vec![(v("x"), LTerm::Const(1.0))],
            dur: LTerm::Const(1.0),
        });
        let d = well_formed(&p, &vars);
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("incomplete system"));
    }

    #[test]
    fn duplicate_equation_rejected() {
        let vars = VarSet::from_names(["x"]).unwrap();
        let p = Prog::atomic(Atomic::DiffFor {
            eqs: vec![(v("x"), LTerm::Const(1.0)), (v("x"), LTerm::Const(2.0))],
            dur: LTerm::Const(1.0),
        });
        assert!(well_formed(&p, &vars)
            .iter()
            .any(|d| d.message.contains("duplicate")));
    }

    #[test]
    fn wait_encodings() {
        let x = VarSet::from_names(["x"]).unwrap();
        assert_eq!(
            desugar_wait(LTerm::Const(1.0), &x),
            Atomic::DiffFor {
                eqs: vec![(v("x"), LTerm::Const(0.0))],
                dur: LTerm::Const(1.0)
            }
        );
        assert_eq!(
            desugar_wait(LTerm::Const(0.0), &x),
            Atomic::DiffFor {
                eqs: vec![(v("x"), LTerm::Const(0.0))],
                dur: LTerm::Const(0.0)
            }
        );
        let xy = VarSet::from_names(["x", "y"]).unwrap();
        let t = LTerm::var(v("t"));
        assert_eq!(
            desugar_wait(t.clone(), &xy),
            Atomic::DiffFor {
                eqs: vec![(v("x"), LTerm::Const(0.0)), (v("y"), LTerm::Const(0.0))],
                dur: t
            }
        );
    }

    #[test]
    fn until_encodings() {
        let eqs = vec![
            (v("p"), LTerm::var(v("v"))),
            (v("v"), LTerm::Const(-9.8)),
        ];
        let psi = BExpr::and(
            BExpr::Leq(LTerm::var(v("p")), LTerm::Const(0.0)),
            BExpr::Leq(LTerm::var(v("v")), LTerm::Const(0.0)),
        );
        let got = desugar_until(eqs.clone(), 0.01, psi.clone()).unwrap();
        let want = Prog::while_loop(
            BExpr::negate(psi),
            Prog::atomic(Atomic::DiffFor {
                eqs: eqs.clone(),
                dur: LTerm::Const(0.01),
            }),
        );
        assert_eq!(got, want);
        assert_eq!(
            desugar_until(eqs.clone(), 0.0, BExpr::True),
            Err(AstError::NonPositiveEpsilon(0.0))
        );
        let never = desugar_until(eqs, 0.5, BExpr::True).unwrap();
        match never.kind {
            ProgKind::While(BExpr::Not(g), _) => assert_eq!(*g, BExpr::True),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn well_formed_is_pure() {
        let vars = VarSet::from_names(["x"]).unwrap();
        let p = Prog::assign(v("q"), LTerm::Const(1.0));
        assert_eq!(well_formed(&p, &vars), well_formed(&p, &vars));
    }
}
