//! Polynomial algebra, interval arithmetic and a branch-and-bound verifier
//! for inequalities over boxes.

mod eval;
mod expr;
mod interval;
mod parser;
mod polynomial;
mod verify;

pub use eval::{CompiledPoly, PolyEnclosure};
pub use expr::Expr;
pub use interval::{IntervalBox, IntervalScalar};
pub use parser::{parse_expr, parse_poly};
pub use polynomial::{var_list, Monomial, Polynomial, VarList};
pub use verify::{eval_interval, sup_over_box, sup_over_box_until, verify_nonpositive, SearchLimits, Verdict};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KernelError {
    #[error("empty interval [{lo}, {hi}]")]
    EmptyInterval { lo: f64, hi: f64 },
    #[error("expected {expected} variables, found {found}")]
    ArityMismatch { expected: usize, found: usize },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
}
