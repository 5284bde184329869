//! Multiplier breakpoints and closed-form evaluation of `x(lambda)`.
//!
//! For a fixed multiplier `lambda`, let `x(lambda)` satisfy every KKT
//! condition of the box-constrained problem except the resource equation.
//! Each `x_i(lambda)` is nonincreasing; variable `i` sits at `u_i` for
//! `lambda <= upper_exit[i]`, at `l_i` for `lambda >= lower_entry[i]`, and
//! strictly between otherwise. Given which variables are free, the free ones
//! follow in closed form from the per-subset sums
//!
//! ```text
//!     fixed_j = sum_{lower} l_i + sum_{upper} u_i
//!     A_j     = sum_{free} 1/a_i
//!     B_j     = sum_{free} b_i/a_i
//! ```
//!
//! Everything in this module expects the tightened instance produced by
//! [`crate::reduce`]; generalized bounds are ignored.

use crate::error::{Error, Result};
use crate::model::Instance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BreakpointKind {
    /// The variable leaves its upper bound when the multiplier passes this value.
    UpperExit,
    /// The variable reaches its lower bound at this value.
    LowerEntry,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Breakpoint {
    pub value: f64,
    pub var: usize,
    pub subset: usize,
    pub kind: BreakpointKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Lower,
    Free,
    Upper,
}

/// Breakpoints of one subset, in the subset's local variable order.
#[derive(Debug, Clone)]
pub struct SubsetBreakpoints {
    pub upper_exit: Vec<f64>,
    pub lower_entry: Vec<f64>,
    /// Processing order as (local index, kind); breakpoint values are
    /// nondecreasing along it.
    pub order: Vec<(usize, BreakpointKind)>,
}

/// Computes one subset's breakpoints in ascending order.
///
/// Candidates `a_i u_i + b_i` (upper exits) and `a_i l_i + b_i` (lower
/// entries) are consumed in descending order, starting from the state where
/// every variable sits at its upper bound. A larger candidate value always
/// yields a smaller-or-equal breakpoint.
pub fn compute_subset_breakpoints(
    a: &[f64],
    b: &[f64],
    l: &[f64],
    u: &[f64],
    w: f64,
) -> Result<SubsetBreakpoints> {
    let n = a.len();
    // (candidate, rank, local index, sub-rank, kind). On equal candidates a
    // lower entry goes first, except that a variable whose two candidates
    // coincide enters its lower bound right after leaving its upper bound.
    // That covers l = u and also nearly fixed variables whose candidates
    // round to the same value.
    let mut cands = Vec::with_capacity(2 * n);
    for i in 0..n {
        let (exit, entry) = (a[i] * u[i] + b[i], a[i] * l[i] + b[i]);
        cands.push((exit, 1u8, i, 0u8, BreakpointKind::UpperExit));
        let (rank, sub) = if entry == exit { (1, 1) } else { (0, 0) };
        cands.push((entry, rank, i, sub, BreakpointKind::LowerEntry));
    }
    cands.sort_by(|p, q| {
        q.0.total_cmp(&p.0)
            .then(p.1.cmp(&q.1))
            .then(p.2.cmp(&q.2))
            .then(p.3.cmp(&q.3))
    });

    let mut upper_exit = vec![0.0; n];
    let mut lower_entry = vec![0.0; n];
    let mut order = Vec::with_capacity(2 * n);
    let mut agg = SubsetAggregates {
        fixed: u.iter().sum(),
        inv_a: 0.0,
        b_over_a: 0.0,
    };
    let mut prev = f64::NEG_INFINITY;
    for &(cand, _, i, _, kind) in &cands {
        let denom = agg.denom(w);
        if denom.is_nan() || denom <= 0.0 {
            return Err(Error::NotConvex {
                subset: 0,
                margin: denom,
            });
        }
        // Rounding can put a breakpoint a few ulps below its predecessor.
        let value = (w * (agg.b_over_a - agg.fixed) - cand * denom).max(prev);
        prev = value;
        match kind {
            BreakpointKind::UpperExit => {
                upper_exit[i] = value;
                agg.fixed -= u[i];
                agg.inv_a += 1.0 / a[i];
                agg.b_over_a += b[i] / a[i];
            }
            BreakpointKind::LowerEntry => {
                lower_entry[i] = value;
                agg.fixed += l[i];
                agg.inv_a -= 1.0 / a[i];
                agg.b_over_a -= b[i] / a[i];
            }
        }
        order.push((i, kind));
    }
    Ok(SubsetBreakpoints {
        upper_exit,
        lower_entry,
        order,
    })
}

#[derive(Debug, Clone)]
pub struct BreakpointTable {
    upper_exit: Vec<f64>,
    lower_entry: Vec<f64>,
    merged: Vec<Breakpoint>,
}

impl BreakpointTable {
    pub fn build(inst: &Instance) -> Result<Self> {
        let n = inst.n();
        let mut upper_exit = vec![0.0; n];
        let mut lower_entry = vec![0.0; n];
        // (breakpoint, subset, position in the subset's processing order)
        let mut keyed = Vec::with_capacity(2 * n);
        for j in 0..inst.m() {
            let idx = inst.members(j);
            let gather = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
            let sb = compute_subset_breakpoints(
                &gather(inst.a()),
                &gather(inst.b()),
                &gather(inst.l()),
                &gather(inst.u()),
                inst.w()[j],
            )
            .map_err(|e| match e {
                Error::NotConvex { margin, .. } => Error::NotConvex { subset: j, margin },
                other => other,
            })?;
            for (k, &i) in idx.iter().enumerate() {
                upper_exit[i] = sb.upper_exit[k];
                lower_entry[i] = sb.lower_entry[k];
            }
            for (pos, &(k, kind)) in sb.order.iter().enumerate() {
                let var = idx[k];
                let value = match kind {
                    BreakpointKind::UpperExit => sb.upper_exit[k],
                    BreakpointKind::LowerEntry => sb.lower_entry[k],
                };
                keyed.push((
                    Breakpoint {
                        value,
                        var,
                        subset: j,
                        kind,
                    },
                    pos,
                ));
            }
        }
        // Within a subset values are nondecreasing in processing order, so
        // this keeps each subset's transitions in their original sequence.
        keyed.sort_by(|(p, pp), (q, qp)| {
            p.value
                .total_cmp(&q.value)
                .then(p.subset.cmp(&q.subset))
                .then(pp.cmp(qp))
        });
        Ok(BreakpointTable {
            upper_exit,
            lower_entry,
            merged: keyed.into_iter().map(|(bp, _)| bp).collect(),
        })
    }

    pub fn upper_exit(&self) -> &[f64] {
        &self.upper_exit
    }

    pub fn lower_entry(&self) -> &[f64] {
        &self.lower_entry
    }

    /// All 2n breakpoints, ascending. Duplicates are kept.
    pub fn merged(&self) -> &[Breakpoint] {
        &self.merged
    }

    /// Status at `lambda`: lower if `lower_entry <= lambda`, upper if
    /// `upper_exit >= lambda`, free otherwise.
    pub fn status_at(&self, i: usize, lambda: f64) -> Status {
        if self.lower_entry[i] <= lambda {
            Status::Lower
        } else if self.upper_exit[i] >= lambda {
            Status::Upper
        } else {
            Status::Free
        }
    }

    /// Status on the open segment just to the right of `lambda`.
    pub fn status_right_of(&self, i: usize, lambda: f64) -> Status {
        if self.lower_entry[i] <= lambda {
            Status::Lower
        } else if self.upper_exit[i] > lambda {
            Status::Upper
        } else {
            Status::Free
        }
    }

    /// Smallest breakpoint strictly greater than `lambda`, if any.
    pub fn next_above(&self, lambda: f64) -> Option<f64> {
        let k = self.merged.partition_point(|bp| bp.value <= lambda);
        self.merged.get(k).map(|bp| bp.value)
    }
}

/// Per-subset sums over the current partition.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SubsetAggregates {
    /// Sum of the variables sitting at a bound.
    pub fixed: f64,
    /// Sum of `1/a_i` over free variables.
    pub inv_a: f64,
    /// Sum of `b_i/a_i` over free variables.
    pub b_over_a: f64,
}

impl SubsetAggregates {
    pub fn denom(&self, w: f64) -> f64 {
        1.0 + w * self.inv_a
    }

    pub fn add(&mut self, status: Status, i: usize, inst: &Instance) {
        match status {
            Status::Lower => self.fixed += inst.l()[i],
            Status::Upper => self.fixed += inst.u()[i],
            Status::Free => {
                self.inv_a += 1.0 / inst.a()[i];
                self.b_over_a += inst.b()[i] / inst.a()[i];
            }
        }
    }

    /// Intercept and slope contribution: `y_j(lambda) = offset - slope * lambda`.
    pub fn offset_slope(&self, w: f64) -> (f64, f64) {
        let d = self.denom(w);
        ((self.fixed - self.b_over_a) / d, self.inv_a / d)
    }

    pub fn subset_sum(&self, w: f64, lambda: f64) -> f64 {
        let (offset, slope) = self.offset_slope(w);
        offset - slope * lambda
    }

    /// Closed-form value of a free variable.
    pub fn free_value(&self, w: f64, a: f64, b: f64, lambda: f64) -> f64 {
        let d = self.denom(w);
        (-w * self.fixed - lambda) / (a * d) - b / a + w * self.b_over_a / (a * d)
    }
}

pub fn aggregates_with(
    inst: &Instance,
    mut status: impl FnMut(usize) -> Status,
) -> Vec<SubsetAggregates> {
    (0..inst.m())
        .map(|j| {
            let mut agg = SubsetAggregates::default();
            for &i in inst.members(j) {
                agg.add(status(i), i, inst);
            }
            agg
        })
        .collect()
}

/// `(F, V)` with `sum_j y_j(lambda) = F - V * lambda` on the segment the
/// aggregates describe.
pub fn totals(inst: &Instance, aggs: &[SubsetAggregates]) -> (f64, f64) {
    aggs.iter()
        .zip(inst.w())
        .fold((0.0, 0.0), |(f, v), (agg, &w)| {
            let (offset, slope) = agg.offset_slope(w);
            (f + offset, v + slope)
        })
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub total: f64,
}

pub fn eval_at(lambda: f64, inst: &Instance, table: &BreakpointTable) -> Evaluation {
    evaluate(inst, lambda, |i| table.status_at(i, lambda))
}

/// Evaluation with the partition of the segment right of `lambda`. Equal to
/// [`eval_at`] up to rounding; useful to read a variable's free formula
/// exactly at its upper exit.
pub fn eval_right_of(lambda: f64, inst: &Instance, table: &BreakpointTable) -> Evaluation {
    evaluate(inst, lambda, |i| table.status_right_of(i, lambda))
}

fn evaluate(inst: &Instance, lambda: f64, status: impl Fn(usize) -> Status) -> Evaluation {
    let mut x = vec![0.0; inst.n()];
    let mut y = Vec::with_capacity(inst.m());
    for j in 0..inst.m() {
        let w = inst.w()[j];
        let mut agg = SubsetAggregates::default();
        for &i in inst.members(j) {
            agg.add(status(i), i, inst);
        }
        for &i in inst.members(j) {
            x[i] = match status(i) {
                Status::Lower => inst.l()[i],
                Status::Upper => inst.u()[i],
                Status::Free => agg.free_value(w, inst.a()[i], inst.b()[i], lambda),
            };
        }
        y.push(agg.subset_sum(w, lambda));
    }
    let total = y.iter().sum();
    Evaluation { x, y, total }
}

/// Per-subset bookkeeping for an ascending sweep over the merged
/// breakpoints, together with the global `F` and `V`.
#[derive(Debug, Clone)]
pub struct SweepState {
    pub subsets: Vec<SubsetAggregates>,
    pub f: f64,
    pub v: f64,
}

impl SweepState {
    /// State left of every breakpoint: all variables at their upper bounds.
    pub fn all_upper(inst: &Instance) -> Self {
        let subsets = aggregates_with(inst, |_| Status::Upper);
        let (f, v) = totals(inst, &subsets);
        SweepState { subsets, f, v }
    }

    pub fn total_at(&self, lambda: f64) -> f64 {
        self.f - self.v * lambda
    }

    /// Moves one variable across `bp`, replacing its subset's contribution
    /// to `F` and `V`.
    pub fn apply(&mut self, inst: &Instance, bp: &Breakpoint) -> Result<()> {
        let j = bp.subset;
        let w = inst.w()[j];
        let agg = &mut self.subsets[j];
        let (offset, slope) = agg.offset_slope(w);
        self.f -= offset;
        self.v -= slope;
        let (a, b) = (inst.a()[bp.var], inst.b()[bp.var]);
        match bp.kind {
            BreakpointKind::UpperExit => {
                agg.fixed -= inst.u()[bp.var];
                agg.inv_a += 1.0 / a;
                agg.b_over_a += b / a;
            }
            BreakpointKind::LowerEntry => {
                agg.fixed += inst.l()[bp.var];
                agg.inv_a -= 1.0 / a;
                agg.b_over_a -= b / a;
            }
        }
        let denom = agg.denom(w);
        if denom.is_nan() || denom <= 0.0 {
            return Err(Error::NotConvex {
                subset: j,
                margin: denom,
            });
        }
        let (offset, slope) = agg.offset_slope(w);
        self.f += offset;
        self.v += slope;
        Ok(())
    }
}

/// Relative comparison used by tests and invariants.
pub fn rel_close(p: f64, q: f64, tol: f64) -> bool {
    (p - q).abs() <= tol * p.abs().max(q.abs()).max(1.0)
}
