//! Solvers for strictly convex quadratic resource allocation with
//! nonseparable per-subset terms and generalized bound constraints.
//!
//! ```
//! use gbc_alloc::{solve_binary, solve_sequential, Instance};
//!
//! let inst = Instance::with_blocks(
//!     &[2],
//!     vec![1.0, 1.0],   // a
//!     vec![0.0, 0.0],   // b
//!     vec![1.0],        // w
//!     vec![-1.0, -1.0], // l
//!     vec![1.0, 1.0],   // u
//!     vec![-2.0],       // L
//!     vec![2.0],        // U
//!     1.0,              // R
//! )
//! .unwrap();
//! let seq = solve_sequential(&inst).unwrap();
//! let bin = solve_binary(&inst).unwrap();
//! assert!((seq.objective - 0.75).abs() < 1e-12);
//! assert!((seq.x[0] - bin.x[0]).abs() < 1e-12);
//! ```

use serde::{Deserialize, Serialize};

pub mod bench;
pub mod breakpoints;
pub mod error;
pub mod evmodel;
pub mod gen;
pub mod model;
pub mod oracle;
pub mod qrap;
pub mod reduce;
mod search;
pub mod solver_bin;
pub mod solver_seq;

pub use breakpoints::{BreakpointTable, SweepState};
pub use error::{Error, Result};
pub use model::{validate, Instance, Solution, ValidationReport};
pub use oracle::solve_bruteforce;
pub use qrap::solve_separable_instance;
pub use reduce::tighten_bounds;
pub use solver_bin::{solve_binary, solve_binary_traced, solve_binary_with_stats};
pub use solver_seq::solve_sequential;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Seq,
    Bin,
    Separable,
    Oracle,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Seq => "seq",
            Algorithm::Bin => "bin",
            Algorithm::Separable => "separable",
            Algorithm::Oracle => "oracle",
        }
    }
}

pub fn solve(inst: &Instance, alg: Algorithm) -> Result<Solution> {
    match alg {
        Algorithm::Seq => solve_sequential(inst),
        Algorithm::Bin => solve_binary(inst),
        Algorithm::Separable => solve_separable_instance(inst),
        Algorithm::Oracle => solve_bruteforce(inst),
    }
}
