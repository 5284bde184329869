//! Separable quadratic resource allocation with a single equality constraint.
//!
//! Solves `min sum_i (1/2 a_i x_i^2 + b_i x_i)` subject to `sum_i x_i = S` and
//! `l <= x <= u` by sorting the 2n multiplier values at which a variable
//! leaves its upper bound or reaches its lower bound and sweeping them in
//! ascending order. For a multiplier `lambda` the allocation is
//! `x_i(lambda) = clamp((-lambda - b_i) / a_i, l_i, u_i)`.

use crate::error::{Error, Result};
use crate::model::{feas_tol, Instance, Solution};
use crate::{model, reduce};

#[derive(Debug, Clone, Copy)]
pub struct QrapProblem<'a> {
    pub a: &'a [f64],
    pub b: &'a [f64],
    pub l: &'a [f64],
    pub u: &'a [f64],
    pub resource: f64,
}

#[derive(Debug, Clone)]
pub struct QrapSolution {
    pub x: Vec<f64>,
    pub multiplier: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Event {
    // Order matters: on equal multiplier values the upper-bound exit is
    // processed first.
    LeaveUpper,
    ReachLower,
}

impl<'a> QrapProblem<'a> {
    pub fn new(a: &'a [f64], b: &'a [f64], l: &'a [f64], u: &'a [f64], resource: f64) -> Self {
        QrapProblem { a, b, l, u, resource }
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// Allocation at a given multiplier.
    pub fn allocation_at(&self, lambda: f64) -> Vec<f64> {
        (0..self.len())
            .map(|i| ((-lambda - self.b[i]) / self.a[i]).clamp(self.l[i], self.u[i]))
            .collect()
    }

    pub fn solve(&self) -> Result<QrapSolution> {
        let n = self.len();
        for (field, len) in [("b", self.b.len()), ("l", self.l.len()), ("u", self.u.len())] {
            if len != n {
                return Err(Error::Dimension {
                    field,
                    expected: n,
                    got: len,
                });
            }
        }
        let s = self.resource;
        let lo_sum: f64 = self.l.iter().sum();
        let hi_sum: f64 = self.u.iter().sum();
        let tol = feas_tol(s);
        if s < lo_sum - tol || s > hi_sum + tol {
            return Err(Error::Infeasible {
                resource: s,
                lo: lo_sum,
                hi: hi_sum,
            });
        }

        // Multiplier values: leaving the upper bound at -(a u + b), reaching
        // the lower bound at -(a l + b).
        let mut events: Vec<(f64, Event, usize)> = Vec::with_capacity(2 * n);
        for i in 0..n {
            events.push((-(self.a[i] * self.u[i] + self.b[i]), Event::LeaveUpper, i));
            events.push((-(self.a[i] * self.l[i] + self.b[i]), Event::ReachLower, i));
        }
        events.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)).then(p.2.cmp(&q.2)));

        if n == 0 {
            return Ok(QrapSolution {
                x: Vec::new(),
                multiplier: 0.0,
            });
        }
        if s <= lo_sum {
            return Ok(QrapSolution {
                x: self.l.to_vec(),
                multiplier: events[2 * n - 1].0,
            });
        }
        if s >= hi_sum {
            return Ok(QrapSolution {
                x: self.u.to_vec(),
                multiplier: events[0].0,
            });
        }

        // total(lambda) = fixed - inv_a * lambda - b_over_a on the current segment.
        let mut fixed = hi_sum;
        let mut inv_a = 0.0;
        let mut b_over_a = 0.0;
        let mut multiplier = events[2 * n - 1].0;
        for &(lambda, event, i) in &events {
            let total = fixed - inv_a * lambda - b_over_a;
            if total == s {
                multiplier = lambda;
                break;
            }
            if total < s {
                multiplier = if inv_a > 0.0 {
                    (fixed - b_over_a - s) / inv_a
                } else {
                    lambda
                };
                break;
            }
            match event {
                Event::LeaveUpper => {
                    fixed -= self.u[i];
                    inv_a += 1.0 / self.a[i];
                    b_over_a += self.b[i] / self.a[i];
                }
                Event::ReachLower => {
                    fixed += self.l[i];
                    inv_a -= 1.0 / self.a[i];
                    b_over_a -= self.b[i] / self.a[i];
                }
            }
        }

        let mut x = self.allocation_at(multiplier);
        restore_sum(&mut x, self.l, self.u, s);
        Ok(QrapSolution { x, multiplier })
    }
}

/// Moves rounding residue `target - sum(x)` onto the components with the
/// most room, keeping `l <= x <= u`.
pub(crate) fn restore_sum(x: &mut [f64], l: &[f64], u: &[f64], target: f64) {
    for _ in 0..x.len() {
        let gap = target - x.iter().sum::<f64>();
        if gap == 0.0 {
            return;
        }
        let room = |i: usize| if gap > 0.0 { u[i] - x[i] } else { x[i] - l[i] };
        let Some(best) = (0..x.len()).max_by(|&p, &q| room(p).total_cmp(&room(q))) else {
            return;
        };
        let step = room(best).min(gap.abs());
        if step <= 0.0 {
            return;
        }
        x[best] = (x[best] + step.copysign(gap)).clamp(l[best], u[best]);
        if step == gap.abs() {
            return;
        }
    }
}

pub fn solve_qrap(p: &QrapProblem<'_>) -> Result<Vec<f64>> {
    p.solve().map(|s| s.x)
}

/// Solves an instance with `w = 0` everywhere: tighten the boxes against the
/// generalized bounds, then one separable allocation over all variables.
pub fn solve_separable_instance(inst: &Instance) -> Result<Solution> {
    model::validate(inst).into_result()?;
    if let Some(j) = inst.w().iter().position(|&w| w != 0.0) {
        return Err(Error::NotSeparable {
            subset: j,
            w: inst.w()[j],
        });
    }
    let reduced = reduce::tighten_bounds(inst)?;
    let tight = reduced.tightened();
    let sol = QrapProblem::new(
        tight.a(),
        tight.b(),
        tight.l(),
        tight.u(),
        tight.resource(),
    )
    .solve()?;
    let objective = model::objective_value(inst, &sol.x)?;
    let kkt_residual = model::kkt_check(tight, &sol.x, sol.multiplier)?;
    Ok(Solution {
        x: sol.x,
        lambda_star: sol.multiplier,
        objective,
        kkt_residual,
    })
}
