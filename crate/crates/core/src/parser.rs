//! Concrete syntax.
//!
//! ```text
//! program  := stmt { ";" stmt }
//! stmt     := ident ":=" lterm
//!           | odes "for" lterm
//!           | odes "until" "[" number "]" bexpr
//!           | "wait" lterm
//!           | "if" bexpr "then" "{" program "}" "else" "{" program "}"
//!           | "while" bexpr "{" program "}"
//! odes     := ident "'" "=" lterm { "," ident "'" "=" lterm }
//! lterm    := term { "+" term }
//! term     := number [ "*" ident ] | ident
//! bexpr    := disj ;  disj := conj { "||" conj } ;  conj := neg { "&&" neg }
//! neg      := "!" neg | "true" | "false" | "(" bexpr ")" | lterm ("<=" | ">=") lterm
//! ```
//!
//! `#` starts a line comment. Sequencing associates to the right. The
//! variable set of a program is every identifier it mentions, in order of
//! first appearance.

use std::fmt::Write as _;

use thiserror::Error;

use crate::ast::{
    desugar_until, desugar_wait, well_formed, Atomic, BExpr, Diagnostic, LTerm, Prog, ProgKind,
    Span, Var, VarSet,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("{span}: expected {}, found {found}", expected.join(" or "))]
    Unexpected {
        span: Span,
        expected: Vec<String>,
        found: String,
    },
    #[error("{span}: {message}")]
    Invalid { span: Span, message: String },
    #[error("{}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    IllFormed(Vec<Diagnostic>),
}

impl ParseError {
    /// The error as located diagnostics.
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        match self {
            ParseError::IllFormed(d) => d.clone(),
            ParseError::Unexpected { span, .. } | ParseError::Invalid { span, .. } => {
                vec![Diagnostic {
                    message: self.to_string(),
                    span: *span,
                }]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Kw(&'static str),
    Sym(&'static str),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Number(n) => format!("number `{n}`"),
            Tok::Kw(k) => format!("`{k}`"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

const KEYWORDS: [&str; 9] = [
    "wait", "for", "until", "if", "then", "else", "while", "true", "false",
];

// Longest first so that `:=` wins over `:` and `<=` over `<`.
const SYMBOLS: [&str; 19] = [
    ":=", "<=", ">=", "&&", "||", "==", "'", "=", ",", ";", "+", "*", "!", "(", ")", "{", "}",
    "[", "]",
];

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    span: Span,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src,
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn peek_char(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek_char()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn here(&self) -> Span {
        Span::new(self.pos, self.pos, self.line, self.col)
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek_char() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                while let Some(c) = self.peek_char() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    fn number(&mut self, start: Span) -> Result<Token, ParseError> {
        if self.peek_char() == Some('-') {
            self.bump();
        }
        let digits = |lx: &mut Lexer| {
            let mut n = 0;
            while matches!(lx.peek_char(), Some(c) if c.is_ascii_digit()) {
                lx.bump();
                n += 1;
            }
            n
        };
        if digits(self) == 0 {
            return Err(ParseError::Invalid {
                span: start,
                message: "malformed number".to_string(),
            });
        }
        if self.peek_char() == Some('.') {
            self.bump();
            if digits(self) == 0 {
                return Err(ParseError::Invalid {
                    span: start,
                    message: "malformed number: digits expected after `.`".to_string(),
                });
            }
        }
        let text = &self.src[start.start..self.pos];
        let value: f64 = text.parse().map_err(|_| ParseError::Invalid {
            span: start,
            message: format!("malformed number `{text}`"),
        })?;
        Ok(Token {
            tok: Tok::Number(value),
            span: Span::new(start.start, self.pos, start.line, start.column),
        })
    }

    fn tokens(mut self) -> Result<Vec<Token>, ParseError> {
        let mut out = Vec::new();
        loop {
            self.skip_trivia();
            let start = self.here();
            let Some(c) = self.peek_char() else {
                out.push(Token {
                    tok: Tok::Eof,
                    span: start,
                });
                return Ok(out);
            };
            let rest = &self.src[self.pos..];
            let next_is_digit = rest[c.len_utf8()..].starts_with(|d: char| d.is_ascii_digit());
            if c.is_ascii_digit() || (c == '-' && next_is_digit) {
                out.push(self.number(start)?);
            } else if c.is_ascii_alphabetic() {
                while matches!(self.peek_char(), Some(c) if c.is_ascii_alphanumeric() || c == '_')
                {
                    self.bump();
                }
                let word = &self.src[start.start..self.pos];
                let tok = match KEYWORDS.iter().find(|k| **k == word) {
                    Some(k) => Tok::Kw(k),
                    None => Tok::Ident(word.to_string()),
                };
                out.push(Token {
                    tok,
                    span: Span::new(start.start, self.pos, start.line, start.column),
                });
            } else if let Some(sym) = SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
                for _ in 0..sym.len() {
                    self.bump();
                }
                out.push(Token {
                    tok: Tok::Sym(sym),
                    span: Span::new(start.start, self.pos, start.line, start.column),
                });
            } else if c == '<' || c == '>' {
                return Err(ParseError::Invalid {
                    span: start,
                    message: format!(
                        "strict comparison `{c}` is not supported; guards use `<=` and `>=` only"
                    ),
                });
            } else if c == '-' {
                return Err(ParseError::Invalid {
                    span: start,
                    message: "there is no subtraction; write `t + -r * x` with a negative literal"
                        .to_string(),
                });
            } else {
                return Err(ParseError::Invalid {
                    span: start,
                    message: format!("unexpected character `{c}`"),
                });
            }
        }
    }
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    vars: VarSet,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn prev_end(&self) -> usize {
        if self.pos == 0 {
            0
        } else {
            self.toks[self.pos - 1].span.end
        }
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected<T>(&self, expected: &[&str]) -> PResult<T> {
        Err(ParseError::Unexpected {
            span: self.span(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().describe(),
        })
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if matches!(self.peek(), Tok::Sym(x) if *x == s) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.unexpected(&[&format!("`{s}`")])
        }
    }

    fn eat_kw(&mut self, k: &str) -> bool {
        if matches!(self.peek(), Tok::Kw(x) if *x == k) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, k: &str) -> PResult<()> {
        if self.eat_kw(k) {
            Ok(())
        } else {
            self.unexpected(&[&format!("`{k}`")])
        }
    }

    fn ident(&mut self) -> PResult<Var> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let span = self.span();
                self.advance();
                Var::new(&name).map_err(|e| ParseError::Invalid {
                    span,
                    message: e.to_string(),
                })
            }
            _ => self.unexpected(&["identifier"]),
        }
    }

    fn finish(&self, start: Span) -> Span {
        Span::new(start.start, self.prev_end(), start.line, start.column)
    }

    fn program(&mut self) -> PResult<Prog> {
        let mut stmts = vec![self.stmt()?];
        while self.eat_sym(";") {
            stmts.push(self.stmt()?);
        }
        Ok(Prog::seq_all(stmts).expect("at least one statement"))
    }

    fn block(&mut self) -> PResult<Prog> {
        self.expect_sym("{")?;
        let p = self.program()?;
        self.expect_sym("}")?;
        Ok(p)
    }

    fn stmt(&mut self) -> PResult<Prog> {
        let start = self.span();
        match self.peek().clone() {
            Tok::Kw("wait") => {
                self.advance();
                let dur = self.lterm()?;
                let at = desugar_wait(dur, &self.vars);
                Ok(Prog::new(ProgKind::At(at), self.finish(start)))
            }
            Tok::Kw("if") => {
                self.advance();
                let b = self.bexpr()?;
                self.expect_kw("then")?;
                let p = self.block()?;
                self.expect_kw("else")?;
                let q = self.block()?;
                Ok(Prog::new(
                    ProgKind::Ite(b, p.into(), q.into()),
                    self.finish(start),
                ))
            }
            Tok::Kw("while") => {
                self.advance();
                let b = self.bexpr()?;
                let body = self.block()?;
                Ok(Prog::new(
                    ProgKind::While(b, body.into()),
                    self.finish(start),
                ))
            }
            Tok::Ident(_) => {
                if matches!(self.peek_at(1), Tok::Sym("'")) {
                    self.diff_stmt(start)
                } else {
                    let x = self.ident()?;
                    self.expect_sym(":=")?;
                    let t = self.lterm()?;
                    Ok(Prog::new(
                        ProgKind::At(Atomic::Assign(x, t)),
                        self.finish(start),
                    ))
                }
            }
            _ => self.unexpected(&["statement"]),
        }
    }

    fn diff_stmt(&mut self, start: Span) -> PResult<Prog> {
        let mut eqs = Vec::new();
        loop {
            let x = self.ident()?;
            self.expect_sym("'")?;
            self.expect_sym("=")?;
            let t = self.lterm()?;
            eqs.push((x, t));
            if !self.eat_sym(",") {
                break;
            }
        }
        if self.eat_kw("for") {
            let dur = self.lterm()?;
            Ok(Prog::new(
                ProgKind::At(Atomic::DiffFor { eqs, dur }),
                self.finish(start),
            ))
        } else if self.eat_kw("until") {
            self.expect_sym("[")?;
            let eps_span = self.span();
            let eps = match self.peek() {
                Tok::Number(n) => *n,
                _ => return self.unexpected(&["number"]),
            };
            self.advance();
            self.expect_sym("]")?;
            let psi = self.bexpr()?;
            let mut p = desugar_until(eqs, eps, psi).map_err(|e| ParseError::Invalid {
                span: eps_span,
                message: e.to_string(),
            })?;
            let span = self.finish(start);
            p.span = span;
            if let ProgKind::While(b, body) = p.kind {
                let mut body = (*body).clone();
                body.span = span;
                p.kind = ProgKind::While(b, body.into());
            }
            Ok(p)
        } else {
            self.unexpected(&["`for`", "`until`", "`,`"])
        }
    }

    fn lterm(&mut self) -> PResult<LTerm> {
        let mut t = self.term()?;
        while self.eat_sym("+") {
            let rhs = self.term()?;
            t = LTerm::sum(t, rhs);
        }
        Ok(t)
    }

    fn term(&mut self) -> PResult<LTerm> {
        match self.peek().clone() {
            Tok::Number(r) => {
                self.advance();
                if self.eat_sym("*") {
                    Ok(LTerm::Scaled(r, self.ident()?))
                } else {
                    Ok(LTerm::Const(r))
                }
            }
            Tok::Ident(_) => Ok(LTerm::var(self.ident()?)),
            _ => self.unexpected(&["number", "identifier"]),
        }
    }

    fn bexpr(&mut self) -> PResult<BExpr> {
        let mut b = self.conj()?;
        while self.eat_sym("||") {
            let rhs = self.conj()?;
            b = BExpr::or(b, rhs);
        }
        Ok(b)
    }

    fn conj(&mut self) -> PResult<BExpr> {
        let mut b = self.neg()?;
        while self.eat_sym("&&") {
            let rhs = self.neg()?;
            b = BExpr::and(b, rhs);
        }
        Ok(b)
    }

    fn neg(&mut self) -> PResult<BExpr> {
        if self.eat_sym("!") {
            return Ok(BExpr::negate(self.neg()?));
        }
        if self.eat_kw("true") {
            return Ok(BExpr::True);
        }
        if self.eat_kw("false") {
            return Ok(BExpr::False);
        }
        if self.eat_sym("(") {
            let b = self.bexpr()?;
            self.expect_sym(")")?;
            return Ok(b);
        }
        if !matches!(self.peek(), Tok::Number(_) | Tok::Ident(_)) {
            return self.unexpected(&["`true`", "`false`", "`!`", "`(`", "comparison"]);
        }
        let lhs = self.lterm()?;
        if self.eat_sym("<=") {
            Ok(BExpr::Leq(lhs, self.lterm()?))
        } else if self.eat_sym(">=") {
            Ok(BExpr::Geq(lhs, self.lterm()?))
        } else if matches!(self.peek(), Tok::Sym("==")) {
            Err(ParseError::Invalid {
                span: self.span(),
                message: "equality is not a guard; write `t <= s && t >= s`".to_string(),
            })
        } else {
            self.unexpected(&["`<=`", "`>=`"])
        }
    }
}

/// Parses a program and returns it with its variable set.
pub fn parse(src: &str) -> Result<(Prog, VarSet), ParseError> {
    let toks = Lexer::new(src).tokens()?;
    let mut vars = VarSet::new();
    for t in &toks {
        if let Tok::Ident(name) = &t.tok {
            let v = Var::new(name).map_err(|e| ParseError::Invalid {
                span: t.span,
                message: e.to_string(),
            })?;
            vars.insert(v);
        }
    }
    let mut parser = Parser { toks, pos: 0, vars };
    let prog = parser.program()?;
    if !matches!(parser.peek(), Tok::Eof) {
        return parser.unexpected(&["`;`", "end of input"]);
    }
    let diags = well_formed(&prog, &parser.vars);
    if !diags.is_empty() {
        return Err(ParseError::IllFormed(diags));
    }
    Ok((prog, parser.vars))
}

fn print_lterm(t: &LTerm, out: &mut String) {
    match t {
        LTerm::Const(r) => {
            let _ = write!(out, "{r}");
        }
        LTerm::Scaled(r, x) if *r == 1.0 && r.is_sign_positive() => out.push_str(x.name()),
        LTerm::Scaled(r, x) => {
            let _ = write!(out, "{r}*{x}");
        }
        // `+` associates to the left, so a right-nested sum prints flat and
        // reparses with a different shape.
        LTerm::Sum(a, b) => {
            print_lterm(a, out);
            out.push_str(" + ");
            print_lterm(b, out);
        }
    }
}

/// Renders a linear term in concrete syntax.
pub fn lterm_to_string(t: &LTerm) -> String {
    let mut s = String::new();
    print_lterm(t, &mut s);
    s
}

fn print_bexpr(b: &BExpr, out: &mut String) {
    match b {
        BExpr::True => out.push_str("true"),
        BExpr::False => out.push_str("false"),
        BExpr::Leq(a, c) => {
            print_lterm(a, out);
            out.push_str(" <= ");
            print_lterm(c, out);
        }
        BExpr::Geq(a, c) => {
            print_lterm(a, out);
            out.push_str(" >= ");
            print_lterm(c, out);
        }
        BExpr::And(a, c) => {
            out.push('(');
            print_bexpr(a, out);
            out.push_str(" && ");
            print_bexpr(c, out);
            out.push(')');
        }
        BExpr::Or(a, c) => {
            out.push('(');
            print_bexpr(a, out);
            out.push_str(" || ");
            print_bexpr(c, out);
            out.push(')');
        }
        BExpr::Not(a) => {
            out.push('!');
            match a.as_ref() {
                BExpr::Leq(..) | BExpr::Geq(..) => {
                    out.push('(');
                    print_bexpr(a, out);
                    out.push(')');
                }
                _ => print_bexpr(a, out),
            }
        }
    }
}

/// Renders a guard in concrete syntax.
pub fn bexpr_to_string(b: &BExpr) -> String {
    let mut s = String::new();
    print_bexpr(b, &mut s);
    s
}

fn print_atomic(a: &Atomic, out: &mut String) {
    match a {
        Atomic::Assign(x, t) => {
            let _ = write!(out, "{x} := ");
            print_lterm(t, out);
        }
        Atomic::DiffFor { eqs, dur } => {
            for (i, (x, t)) in eqs.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                let _ = write!(out, "{x}' = ");
                print_lterm(t, out);
            }
            out.push_str(" for ");
            print_lterm(dur, out);
        }
    }
}

/// Renders an atomic statement in concrete syntax.
pub fn atomic_to_string(a: &Atomic) -> String {
    let mut s = String::new();
    print_atomic(a, &mut s);
    s
}

fn print_prog(p: &Prog, out: &mut String) {
    match &p.kind {
        ProgKind::At(a) => print_atomic(a, out),
        // Left-nested sequences (produced by while unfolding) print flat.
        ProgKind::Seq(a, b) => {
            print_prog(a, out);
            out.push_str(" ; ");
            print_prog(b, out);
        }
        ProgKind::Ite(g, a, b) => {
            out.push_str("if ");
            print_bexpr(g, out);
            out.push_str(" then { ");
            print_prog(a, out);
            out.push_str(" } else { ");
            print_prog(b, out);
            out.push_str(" }");
        }
        ProgKind::While(g, body) => {
            out.push_str("while ");
            print_bexpr(g, out);
            out.push_str(" { ");
            print_prog(body, out);
            out.push_str(" }");
        }
    }
}

/// Renders a program in concrete syntax. For programs whose sequences are
/// right-associated and whose sums are left-associated, `parse` inverts this.
pub fn pretty(p: &Prog) -> String {
    let mut s = String::new();
    print_prog(p, &mut s);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: &str) -> Var {
        Var::new(n).unwrap()
    }

    #[test]
    fn remark_program() {
        let (p, vars) = parse("x := 0 ; while true { x := x + 1 ; wait 1 }").unwrap();
        assert_eq!(vars.names(), vec!["x"]);
        let body = Prog::seq(
            Prog::assign(v("x"), LTerm::sum(LTerm::var(v("x")), LTerm::Const(1.0))),
            Prog::atomic(Atomic::DiffFor {
                eqs: vec![(v("x"), LTerm::Const(0.0))],
                dur: LTerm::Const(1.0),
            }),
        );
        let want = Prog::seq(
            Prog::assign(v("x"), LTerm::Const(0.0)),
            Prog::while_loop(BExpr::True, body),
        );
        assert_eq!(p, want);
    }

    #[test]
    fn cruise_body() {
        let (p, _) = parse("v' = 1 for 1").unwrap();
        assert_eq!(
            p,
            Prog::atomic(Atomic::DiffFor {
                eqs: vec![(v("v"), LTerm::Const(1.0))],
                dur: LTerm::Const(1.0)
            })
        );
    }

    #[test]
    fn truncated_input() {
        let err = parse("x := ").unwrap_err();
        match err {
            ParseError::Unexpected { found, span, .. } => {
                assert_eq!(found, "end of input");
                assert_eq!(span.start, 5);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn strict_comparisons_rejected() {
        let err = parse("if x < 1 then { x := 1 } else { x := 2 }").unwrap_err();
        assert!(err.to_string().contains("strict comparison"));
    }

    #[test]
    fn seq_is_right_associated() {
        let (p, _) = parse("x := 1 ; x := 2 ; x := 3").unwrap();
        match p.kind {
            ProgKind::Seq(a, b) => {
                assert!(matches!(a.kind, ProgKind::At(_)));
                assert!(matches!(b.kind, ProgKind::Seq(..)));
            }
            _ => panic!(),
        }
    }

    #[test]
    fn bare_identifier_is_scaled_by_one() {
        let (p, _) = parse("y := x + 1").unwrap();
        assert_eq!(
            p,
            Prog::assign(
                v("y"),
                LTerm::sum(LTerm::Scaled(1.0, v("x")), LTerm::Const(1.0))
            )
        );
    }

    #[test]
    fn until_sugar_and_comments() {
        let src = "# ball\np := 5; v := 0;\np' = v, v' = -9.8 until [0.01] p <= 0 && v <= 0";
        let (p, vars) = parse(src).unwrap();
        assert_eq!(vars.names(), vec!["p", "v"]);
        let ProgKind::Seq(_, rest) = &p.kind else {
            panic!()
        };
        let ProgKind::Seq(_, lp) = &rest.kind else {
            panic!()
        };
        assert!(matches!(lp.kind, ProgKind::While(BExpr::Not(_), _)));
        assert!(parse("x' = 1 until [0] x >= 1").is_err());
    }

    #[test]
    fn incomplete_system_is_rejected() {
        let err = parse("x := 1 ; v' = 1 for 1").unwrap_err();
        assert!(matches!(err, ParseError::IllFormed(_)));
    }

    #[test]
    fn spans_point_at_statements() {
        let (p, _) = parse("x := 1 ;\n  wait 2").unwrap();
        let ProgKind::Seq(_, b) = &p.kind else {
            panic!()
        };
        assert_eq!(b.span.line, 2);
        assert_eq!(b.span.column, 3);
        assert_eq!(b.span.end - b.span.start, "wait 2".len());
    }

    #[test]
    fn pretty_round_trip_examples() {
        for src in [
            "x := 0 ; while true { x := x + 1 ; wait 1 }",
            "while true { if v <= 10 then { v' = 1 for 1 } else { v' = -1 for 1 } }",
            "x := 1 ; while true { wait x ; x := 0.5*x }",
            "p := 5 ; v := 0 ; while true { p' = v, v' = -9.8 until [0.01] (p <= 0 && v <= 0) ; v := -0.5*v }",
            "x := -0 ; if !(x >= 1) || false then { x := 2*x + -1 + 3 } else { x := x }",
        ] {
            let (p, _) = parse(src).unwrap();
            let printed = pretty(&p);
            let (q, _) = parse(&printed).unwrap_or_else(|e| panic!("{printed}: {e}"));
            assert_eq!(p, q, "{printed}");
        }
    }
}
