//! Core of the hybrid while-language workbench: syntax, closed-form linear
//! dynamics, small-step, big-step and denotational evaluators, and a
//! differential-testing harness that checks them against each other.

pub mod ast;
pub mod bigstep;
pub mod corpus;
pub mod denotational;
pub mod dynamics;
pub mod harness;
pub mod laws;
pub mod limits;
pub mod monad;
pub mod parser;
pub mod smallstep;
pub mod trajectory;
pub mod wire;

pub use ast::{Atomic, BExpr, LTerm, Prog, ProgKind, Span, Var, VarSet};
pub use dynamics::{Env, FlowFn, LinSys};
pub use parser::{parse, pretty, ParseError};
