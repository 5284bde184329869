//! Binary breakpoint search.
//!
//! Bisects the sorted merged breakpoints. Variables whose status on the
//! optimal segment is already implied by the current multiplier bracket are
//! folded into per-subset sums and never looked at again, so each iteration
//! only touches variables that still own a breakpoint inside the window.

use serde::Serialize;

use crate::breakpoints::{Breakpoint, BreakpointTable, Status, SubsetAggregates};
use crate::error::{Error, Result};
use crate::model::{Instance, Solution};
use crate::search::{hit_tol, package, prepare, segment_multiplier};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BinaryStats {
    pub iterations: usize,
    /// Uncertain-variable visits summed over all iterations.
    pub visited: usize,
    pub n: usize,
}

/// Lower median of `sorted[lo..hi]`.
pub fn median_of_window(sorted: &[Breakpoint], lo: usize, hi: usize) -> Result<Breakpoint> {
    if lo >= hi || hi > sorted.len() {
        return Err(Error::EmptyWindow { lo, hi });
    }
    Ok(sorted[lo + (hi - lo - 1) / 2])
}

/// One bisection step as seen after the bracket update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BisectStep {
    pub median: f64,
    /// Total at the median from the accelerated bookkeeping.
    pub total: f64,
    pub down: f64,
    pub up: f64,
    pub window_before: usize,
    pub window_after: usize,
    pub uncertain_after: usize,
    /// The total matched the resource and the search stopped here.
    pub hit: bool,
}

pub fn solve_binary(inst: &Instance) -> Result<Solution> {
    run(inst, None).map(|(sol, _)| sol)
}

pub fn solve_binary_with_stats(inst: &Instance) -> Result<(Solution, BinaryStats)> {
    run(inst, None)
}

/// Like [`solve_binary_with_stats`], also recording every bisection step.
pub fn solve_binary_traced(inst: &Instance) -> Result<(Solution, BinaryStats, Vec<BisectStep>)> {
    let mut trace = Vec::new();
    let (sol, stats) = run(inst, Some(&mut trace))?;
    Ok((sol, stats, trace))
}

fn run(inst: &Instance, mut trace: Option<&mut Vec<BisectStep>>) -> Result<(Solution, BinaryStats)> {
    let prep = prepare(inst)?;
    let tight = prep.tight();
    let table = &prep.table;
    let merged = table.merged();
    let mut stats = BinaryStats {
        n: tight.n(),
        ..Default::default()
    };
    if merged.is_empty() {
        return Ok((package(&prep, 0.0)?, stats));
    }
    let r = tight.resource();
    let tol = hit_tol(r);
    let m = tight.m();

    let mut decided = vec![SubsetAggregates::default(); m];
    let mut uncertain: Vec<Vec<usize>> = (0..m).map(|j| tight.members(j).to_vec()).collect();
    let mut down = f64::NEG_INFINITY;
    let mut up = f64::INFINITY;
    let (mut lo, mut hi) = (0, merged.len());
    let mut hit = None;

    while lo < hi {
        stats.iterations += 1;
        let eta = median_of_window(merged, lo, hi)?.value;

        let mut total = 0.0;
        for j in 0..m {
            let mut agg = decided[j];
            for &i in &uncertain[j] {
                agg.add(table.status_at(i, eta), i, tight);
            }
            stats.visited += uncertain[j].len();
            total += agg.subset_sum(tight.w()[j], eta);
        }

        let window_before = hi - lo;
        if (total - r).abs() <= tol {
            hit = Some(eta);
            if let Some(t) = trace.as_deref_mut() {
                t.push(BisectStep {
                    median: eta,
                    total,
                    down,
                    up,
                    window_before,
                    window_after: window_before,
                    uncertain_after: uncertain.iter().map(Vec::len).sum(),
                    hit: true,
                });
            }
            break;
        }
        if total < r {
            hi = lo + merged[lo..hi].partition_point(|bp| bp.value < eta);
            up = eta;
        } else {
            // Copies of eta carry no more information once down = eta.
            lo += merged[lo..hi].partition_point(|bp| bp.value <= eta);
            down = eta;
        }

        for j in 0..m {
            let agg = &mut decided[j];
            uncertain[j].retain(|&i| match classify(table, i, down, up) {
                Some(status) => {
                    agg.add(status, i, tight);
                    false
                }
                None => true,
            });
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(BisectStep {
                median: eta,
                total,
                down,
                up,
                window_before,
                window_after: hi - lo,
                uncertain_after: uncertain.iter().map(Vec::len).sum(),
                hit: false,
            });
        }
    }

    // An empty window means every tested total above R set `down`; if none
    // did, only rounding kept the first breakpoint's total below R.
    let gamma = hit.unwrap_or(if down.is_finite() { down } else { merged[0].value });
    let aggs: Vec<SubsetAggregates> = (0..m)
        .map(|j| {
            let mut agg = decided[j];
            for &i in &uncertain[j] {
                agg.add(table.status_right_of(i, gamma), i, tight);
            }
            agg
        })
        .collect();
    let lambda = segment_multiplier(&prep, gamma, &aggs)?;
    Ok((package(&prep, lambda)?, stats))
}

/// Status on the optimal segment if the bracket `[down, up)` already
/// implies it.
fn classify(table: &BreakpointTable, i: usize, down: f64, up: f64) -> Option<Status> {
    let (exit, entry) = (table.upper_exit()[i], table.lower_entry()[i]);
    if entry <= down {
        Some(Status::Lower)
    } else if up <= exit {
        Some(Status::Upper)
    } else if exit <= down && up <= entry {
        Some(Status::Free)
    } else {
        None
    }
}
