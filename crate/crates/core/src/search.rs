//! Steps shared by the sequential and binary breakpoint searches.

use crate::breakpoints::{self, BreakpointTable, SubsetAggregates};
use crate::error::{Error, Result};
use crate::model::{self, feas_tol, Instance, Solution};
use crate::reduce::{self, ReducedInstance};

pub(crate) struct Prepared {
    pub reduced: ReducedInstance,
    pub table: BreakpointTable,
}

impl Prepared {
    pub fn tight(&self) -> &Instance {
        self.reduced.tightened()
    }
}

pub(crate) fn prepare(inst: &Instance) -> Result<Prepared> {
    model::validate(inst).into_result()?;
    let reduced = reduce::tighten_bounds(inst)?;
    let table = BreakpointTable::build(reduced.tightened())?;
    Ok(Prepared { reduced, table })
}

/// Tolerance for accepting a breakpoint whose total hits the resource.
/// Much tighter than the feasibility tolerance: the segment formula is still
/// applied afterwards, so this only decides which segment is used.
pub(crate) fn hit_tol(resource: f64) -> f64 {
    1e-12 * resource.abs().max(1.0)
}

/// Optimal multiplier on the segment right of `gamma`, given the aggregates
/// of that segment.
pub(crate) fn segment_multiplier(
    prep: &Prepared,
    gamma: f64,
    aggs: &[SubsetAggregates],
) -> Result<f64> {
    let tight = prep.tight();
    let r = tight.resource();
    let (f, v) = breakpoints::totals(tight, aggs);
    let inv_a: f64 = tight.a().iter().map(|a| 1.0 / a).sum();
    if v < 1e-14 * inv_a {
        // Flat segment: every multiplier on it is optimal if the total fits.
        let total = f - v * gamma;
        if (total - r).abs() > feas_tol(r) {
            return Err(Error::Degenerate { total, resource: r });
        }
        return Ok(gamma);
    }
    let upper = prep.table.next_above(gamma).unwrap_or(f64::INFINITY);
    Ok(((f - r) / v).clamp(gamma, upper.max(gamma)))
}

pub(crate) fn package(prep: &Prepared, lambda: f64) -> Result<Solution> {
    let tight = prep.tight();
    let x = breakpoints::eval_at(lambda, tight, &prep.table).x;
    let objective = model::objective_value(prep.reduced.base(), &x)?;
    let kkt_residual = model::kkt_check(tight, &x, lambda)?;
    Ok(Solution {
        x,
        lambda_star: lambda,
        objective,
        kkt_residual,
    })
}
