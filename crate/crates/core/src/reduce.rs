//! Elimination of the generalized bound constraints.
//!
//! For every subset `j`, the separable allocations of `L_j` and `U_j` over
//! the subset's own variables are componentwise lower and upper bounds on an
//! optimal solution. Replacing the boxes by these allocations makes the
//! generalized bounds redundant.

use crate::error::Result;
use crate::model::Instance;
use crate::qrap::{restore_sum, QrapProblem};

#[derive(Debug, Clone)]
pub struct ReducedInstance {
    base: Instance,
    tightened: Instance,
}

impl ReducedInstance {
    pub fn base(&self) -> &Instance {
        &self.base
    }

    /// The base instance with boxes `[l_tight, u_tight]`. Its generalized
    /// bounds are implied by the boxes.
    pub fn tightened(&self) -> &Instance {
        &self.tightened
    }

    pub fn l_tight(&self) -> &[f64] {
        self.tightened.l()
    }

    pub fn u_tight(&self) -> &[f64] {
        self.tightened.u()
    }
}

pub fn tighten_bounds(inst: &Instance) -> Result<ReducedInstance> {
    let n = inst.n();
    let mut l_tight = vec![0.0; n];
    let mut u_tight = vec![0.0; n];

    for j in 0..inst.m() {
        let idx = inst.members(j);
        let gather = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let (a, b, l, u) = (gather(inst.a()), gather(inst.b()), gather(inst.l()), gather(inst.u()));

        let mut lo = QrapProblem::new(&a, &b, &l, &u, inst.subset_lower()[j]).solve()?.x;
        let mut hi = QrapProblem::new(&a, &b, &l, &u, inst.subset_upper()[j]).solve()?.x;

        // Resource monotonicity gives lo <= hi; only rounding can break it.
        for k in 0..idx.len() {
            debug_assert!(
                lo[k] <= hi[k] + 1e-9 * (u[k] - l[k]).abs().max(1.0),
                "subset {j}: tightened bounds cross at {k}: {} > {}",
                lo[k],
                hi[k]
            );
            if lo[k] > hi[k] {
                let mid = 0.5 * (lo[k] + hi[k]);
                lo[k] = mid;
                hi[k] = mid;
            }
        }
        restore_sum(&mut lo, &l, &hi, inst.subset_lower()[j]);
        restore_sum(&mut hi, &lo, &u, inst.subset_upper()[j]);

        for (k, &i) in idx.iter().enumerate() {
            l_tight[i] = lo[k];
            u_tight[i] = hi[k];
        }
    }

    let tightened = inst.with_boxes(l_tight, u_tight)?;
    Ok(ReducedInstance {
        base: inst.clone(),
        tightened,
    })
}
