//! Sequential breakpoint search.
//!
//! Sweeps the merged breakpoints in ascending order while maintaining
//! `sum_j y_j(lambda) = F - V * lambda` for the current segment, and stops at
//! the first breakpoint whose total drops to the resource or below.

use crate::breakpoints::{aggregates_with, SweepState};
use crate::error::Result;
use crate::model::{Instance, Solution};
use crate::search::{hit_tol, package, prepare, segment_multiplier};

pub fn solve_sequential(inst: &Instance) -> Result<Solution> {
    let prep = prepare(inst)?;
    let tight = prep.tight();
    let merged = prep.table.merged();
    if merged.is_empty() {
        return package(&prep, 0.0);
    }
    let r = tight.resource();
    let tol = hit_tol(r);

    // gamma: largest breakpoint whose total is still >= R.
    let mut gamma = None;
    let mut state = SweepState::all_upper(tight);
    for bp in merged {
        let total = state.total_at(bp.value);
        if (total - r).abs() <= tol {
            gamma = Some(bp.value);
            break;
        }
        if total < r {
            break;
        }
        state.apply(tight, bp)?;
        gamma = Some(bp.value);
    }
    // Only rounding can leave the first breakpoint's total below R.
    let gamma = gamma.unwrap_or(merged[0].value);

    // The running F and V accumulate rounding over the sweep; the segment's
    // aggregates are recomputed for the final formula.
    let aggs = aggregates_with(tight, |i| prep.table.status_right_of(i, gamma));
    let lambda = segment_multiplier(&prep, gamma, &aggs)?;
    package(&prep, lambda)
}
