use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid base q = {0}: need q > 0 and q != 1")]
    InvalidBase(f64),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("pole: denominator parameter {param} vanishes at term {term}")]
    Pole { param: String, term: usize },
    #[error("series did not converge after {terms} terms (last term {last:e})")]
    Convergence { terms: usize, last: f64 },
    #[error("insufficient grid: {usable} usable points, {excluded} excluded")]
    InsufficientGrid { usable: usize, excluded: usize },
    #[error("parameter error: {0}")]
    Param(String),
    #[error("three-term recurrence defect is not constant (spread {spread:e} at n = {n})")]
    TtrrViolation { n: usize, spread: f64 },
    #[error("degenerate family: both second divided differences vanish and the spectrum is trivial")]
    Degenerate,
    #[error("truncation insufficient: tail bound {tail:e} exceeds tolerance; try cutoff {suggested}")]
    Truncation { tail: f64, suggested: i64 },
    #[error("not a ladder: fit residual {residual:e} exceeds tolerance")]
    NotALadder { residual: f64 },
    #[error("{family} does not support {what}")]
    Capability { family: String, what: String },
    #[error("no su_q(1,1) algebra: {0}")]
    NoAlgebra(String),
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("Pearson equation fails: max relative residual {max_residual:e} at s = {at}")]
    PearsonRejected { max_residual: f64, at: String },
    #[error("family definition error: {0}")]
    FamilyDefinition(String),
    #[error("unknown family '{0}'")]
    UnknownFamily(String),
}

pub type Result<T> = std::result::Result<T, Error>;
