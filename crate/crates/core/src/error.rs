use thiserror::Error;

use crate::model::ValidationReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for `{field}`: expected {expected}, got {got}")]
    Dimension {
        field: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("variable {var} is assigned to subset {subset}, but only {m} subsets exist")]
    SubsetIndex { var: usize, subset: usize, m: usize },

    #[error("instance failed validation ({} violation(s))", .0.violations.len())]
    Invalid(ValidationReport),

    #[error("resource {resource} lies outside the feasible range [{lo}, {hi}]")]
    Infeasible { resource: f64, lo: f64, hi: f64 },

    #[error("subset {subset} is not strictly convex: 1 + w*A = {margin}")]
    NotConvex { subset: usize, margin: f64 },

    #[error("multiplier is not determined: flat segment total {total} misses resource {resource}")]
    Degenerate { total: f64, resource: f64 },

    #[error("separable path requires w = 0, but subset {subset} has w = {w}")]
    NotSeparable { subset: usize, w: f64 },

    #[error("oracle limits exceeded: n = {n} (max {max_n}), m = {m} (max {max_m})")]
    OracleLimits {
        n: usize,
        m: usize,
        max_n: usize,
        max_m: usize,
    },

    #[error("oracle found no KKT point")]
    NoCandidate,

    #[error("empty breakpoint window [{lo}, {hi})")]
    EmptyWindow { lo: usize, hi: usize },

    #[error("invalid scenario: {0}")]
    Scenario(String),
}

pub type Result<T> = std::result::Result<T, Error>;
