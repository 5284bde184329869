//! Problem instances, solutions, validation and optimality checks.
//!
//! An instance minimizes
//!
//! ```text
//!     sum_j 1/2 w_j (sum_{i in N_j} x_i)^2 + sum_i (1/2 a_i x_i^2 + b_i x_i)
//!     s.t.  sum_i x_i = R
//!           L_j <= sum_{i in N_j} x_i <= U_j
//!           l_i <= x_i <= u_i
//! ```
//!
//! where the subsets `N_1..N_m` partition the variables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative feasibility tolerance: `|violation| <= FEAS_TOL * max(1, |scale|)`.
pub const FEAS_TOL: f64 = 1e-9;

/// Bound on the scaled KKT residual of a solver output.
pub const KKT_TOL: f64 = 1e-8;

pub fn feas_tol(scale: f64) -> f64 {
    FEAS_TOL * scale.abs().max(1.0)
}

/// On-disk layout of an instance. Field names are part of the file format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceData {
    pub m: usize,
    pub subset_of: Vec<usize>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub w: Vec<f64>,
    pub l: Vec<f64>,
    pub u: Vec<f64>,
    #[serde(rename = "L")]
    pub lower: Vec<f64>,
    #[serde(rename = "U")]
    pub upper: Vec<f64>,
    #[serde(rename = "R")]
    pub resource: f64,
}

/// A structurally consistent instance. Numeric invariants (convexity,
/// feasibility) are checked separately by [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceData", into = "InstanceData")]
pub struct Instance {
    subset_of: Vec<usize>,
    members: Vec<Vec<usize>>,
    a: Vec<f64>,
    b: Vec<f64>,
    w: Vec<f64>,
    l: Vec<f64>,
    u: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    resource: f64,
}

impl TryFrom<InstanceData> for Instance {
    type Error = Error;

    fn try_from(d: InstanceData) -> Result<Self> {
        let n = d.subset_of.len();
        let check = |field: &'static str, expected: usize, got: usize| {
            if expected == got {
                Ok(())
            } else {
                Err(Error::Dimension {
                    field,
                    expected,
                    got,
                })
            }
        };
        check("a", n, d.a.len())?;
        check("b", n, d.b.len())?;
        check("l", n, d.l.len())?;
        check("u", n, d.u.len())?;
        check("w", d.m, d.w.len())?;
        check("L", d.m, d.lower.len())?;
        check("U", d.m, d.upper.len())?;

        let mut members = vec![Vec::new(); d.m];
        for (var, &j) in d.subset_of.iter().enumerate() {
            if j >= d.m {
                return Err(Error::SubsetIndex {
                    var,
                    subset: j,
                    m: d.m,
                });
            }
            members[j].push(var);
        }

        Ok(Instance {
            subset_of: d.subset_of,
            members,
            a: d.a,
            b: d.b,
            w: d.w,
            l: d.l,
            u: d.u,
            lower: d.lower,
            upper: d.upper,
            resource: d.resource,
        })
    }
}

impl From<Instance> for InstanceData {
    fn from(inst: Instance) -> Self {
        InstanceData {
            m: inst.members.len(),
            subset_of: inst.subset_of,
            a: inst.a,
            b: inst.b,
            w: inst.w,
            l: inst.l,
            u: inst.u,
            lower: inst.lower,
            upper: inst.upper,
            resource: inst.resource,
        }
    }
}

impl Instance {
    pub fn from_data(data: InstanceData) -> Result<Self> {
        Self::try_from(data)
    }

    pub fn to_data(&self) -> InstanceData {
        self.clone().into()
    }

    /// Builds an instance whose subsets are consecutive blocks of the given sizes.
    #[allow(clippy::too_many_arguments)]
    pub fn with_blocks(
        sizes: &[usize],
        a: Vec<f64>,
        b: Vec<f64>,
        w: Vec<f64>,
        l: Vec<f64>,
        u: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        resource: f64,
    ) -> Result<Self> {
        let subset_of = sizes
            .iter()
            .enumerate()
            .flat_map(|(j, &c)| std::iter::repeat_n(j, c))
            .collect();
        Self::try_from(InstanceData {
            m: sizes.len(),
            subset_of,
            a,
            b,
            w,
            l,
            u,
            lower,
            upper,
            resource,
        })
    }

    /// Same instance with the per-variable boxes replaced.
    pub fn with_boxes(&self, l: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        let mut data = self.to_data();
        data.l = l;
        data.u = u;
        Self::try_from(data)
    }

    /// Same instance with a different total resource.
    pub fn with_resource(&self, resource: f64) -> Self {
        Instance {
            resource,
            ..self.clone()
        }
    }

    pub fn n(&self) -> usize {
        self.subset_of.len()
    }

    pub fn m(&self) -> usize {
        self.members.len()
    }

    pub fn subset_of(&self) -> &[usize] {
        &self.subset_of
    }

    /// Variable indices of subset `j`, ascending.
    pub fn members(&self, j: usize) -> &[usize] {
        &self.members[j]
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn l(&self) -> &[f64] {
        &self.l
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    /// Generalized lower bounds `L`.
    pub fn subset_lower(&self) -> &[f64] {
        &self.lower
    }

    /// Generalized upper bounds `U`.
    pub fn subset_upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn resource(&self) -> f64 {
        self.resource
    }

    /// `1 + w_j * sum_{i in N_j} 1/a_i`; strictly positive iff the subset's
    /// Hessian block is positive definite.
    pub fn convexity_margin(&self, j: usize) -> f64 {
        let inv: f64 = self.members[j].iter().map(|&i| 1.0 / self.a[i]).sum();
        1.0 + self.w[j] * inv
    }

    pub fn is_separable(&self) -> bool {
        self.w.iter().all(|&w| w == 0.0)
    }

    /// Per-subset sums of `x`.
    pub fn subset_sums(&self, x: &[f64]) -> Vec<f64> {
        self.members
            .iter()
            .map(|idx| idx.iter().map(|&i| x[i]).sum())
            .collect()
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() == self.n() {
            Ok(())
        } else {
            Err(Error::Dimension {
                field: "x",
                expected: self.n(),
                got: x.len(),
            })
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Solution {
    pub x: Vec<f64>,
    pub lambda_star: f64,
    pub objective: f64,
    pub kkt_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    NonFinite,
    NonPositiveCoefficient,
    InvertedBox,
    EmptySubset,
    SubsetLowerBelowBoxes,
    SubsetBoundsInverted,
    SubsetUpperAboveBoxes,
    ResourceBelowRange,
    ResourceAboveRange,
    NotStrictlyConvex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: Rule,
    /// Variable index for per-variable rules, subset index for per-subset
    /// rules, 0 for the resource rules.
    pub index: usize,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
    /// `1 + w_j * sum 1/a_i` for every subset.
    pub convexity_margins: Vec<f64>,
}

impl ValidationReport {
    pub fn into_result(self) -> Result<()> {
        if self.ok {
            Ok(())
        } else {
            Err(Error::Invalid(self))
        }
    }
}

pub fn validate(inst: &Instance) -> ValidationReport {
    let mut violations = Vec::new();
    let mut push = |rule, index, magnitude| {
        violations.push(Violation {
            rule,
            index,
            magnitude,
        })
    };

    for i in 0..inst.n() {
        let vals = [inst.a[i], inst.b[i], inst.l[i], inst.u[i]];
        if vals.iter().any(|v| !v.is_finite()) {
            push(Rule::NonFinite, i, f64::NAN);
            continue;
        }
        if inst.a[i] <= 0.0 {
            push(Rule::NonPositiveCoefficient, i, inst.a[i]);
        }
        if inst.l[i] > inst.u[i] {
            push(Rule::InvertedBox, i, inst.l[i] - inst.u[i]);
        }
    }

    let mut margins = Vec::with_capacity(inst.m());
    let (mut total_lower, mut total_upper) = (0.0, 0.0);
    for j in 0..inst.m() {
        let (w, lo, hi) = (inst.w[j], inst.lower[j], inst.upper[j]);
        if !(w.is_finite() && lo.is_finite() && hi.is_finite()) {
            push(Rule::NonFinite, j, f64::NAN);
        }
        let idx = inst.members(j);
        if idx.is_empty() {
            push(Rule::EmptySubset, j, 0.0);
        }
        let box_lo: f64 = idx.iter().map(|&i| inst.l[i]).sum();
        let box_hi: f64 = idx.iter().map(|&i| inst.u[i]).sum();
        if box_lo - lo > feas_tol(lo) {
            push(Rule::SubsetLowerBelowBoxes, j, box_lo - lo);
        }
        if lo - hi > feas_tol(hi) {
            push(Rule::SubsetBoundsInverted, j, lo - hi);
        }
        if hi - box_hi > feas_tol(hi) {
            push(Rule::SubsetUpperAboveBoxes, j, hi - box_hi);
        }
        let margin = inst.convexity_margin(j);
        // NaN margins are caught by the negated comparison.
        if margin.is_nan() || margin <= 0.0 {
            push(Rule::NotStrictlyConvex, j, margin);
        }
        margins.push(margin);
        total_lower += lo;
        total_upper += hi;
    }

    let r = inst.resource;
    if !r.is_finite() {
        push(Rule::NonFinite, 0, f64::NAN);
    } else {
        if total_lower - r > feas_tol(r) {
            push(Rule::ResourceBelowRange, 0, total_lower - r);
        }
        if r - total_upper > feas_tol(r) {
            push(Rule::ResourceAboveRange, 0, r - total_upper);
        }
    }

    ValidationReport {
        ok: violations.is_empty(),
        violations,
        convexity_margins: margins,
    }
}

pub fn objective_value(inst: &Instance, x: &[f64]) -> Result<f64> {
    inst.check_len(x)?;
    let coupled: f64 = inst
        .subset_sums(x)
        .iter()
        .zip(&inst.w)
        .map(|(y, w)| 0.5 * w * y * y)
        .sum();
    let separable: f64 = (0..inst.n())
        .map(|i| 0.5 * inst.a[i] * x[i] * x[i] + inst.b[i] * x[i])
        .sum();
    Ok(coupled + separable)
}

/// Scaled KKT residual of `(x, lambda)` for the problem without the
/// generalized bounds, i.e. with the bound multipliers reconstructed as
/// `mu_i = -(w_j y_j + a_i x_i + b_i + lambda)`.
///
/// Generalized-bound violations are still counted as primal violations, so
/// for an instance whose subset bounds bind, check the tightened instance
/// (see [`crate::reduce`]) or pass subset multipliers to
/// [`kkt_residual_with_subset_multipliers`].
pub fn kkt_check(inst: &Instance, x: &[f64], lambda: f64) -> Result<f64> {
    kkt_residual(inst, x, lambda, None)
}

/// Like [`kkt_check`], with explicit multipliers `nu_j` for the generalized
/// bounds: stationarity reads `w_j y_j + a_i x_i + b_i + lambda + nu_j + mu_i = 0`,
/// with `nu_j >= 0` only at `U_j` and `nu_j <= 0` only at `L_j`.
pub fn kkt_residual_with_subset_multipliers(
    inst: &Instance,
    x: &[f64],
    lambda: f64,
    nu: &[f64],
) -> Result<f64> {
    if nu.len() != inst.m() {
        return Err(Error::Dimension {
            field: "nu",
            expected: inst.m(),
            got: nu.len(),
        });
    }
    kkt_residual(inst, x, lambda, Some(nu))
}

fn kkt_residual(inst: &Instance, x: &[f64], lambda: f64, nu: Option<&[f64]>) -> Result<f64> {
    inst.check_len(x)?;
    let r = inst.resource;
    let total: f64 = x.iter().sum();
    let mut worst = (total - r).abs() / r.abs().max(1.0);

    let y = inst.subset_sums(x);
    for j in 0..inst.m() {
        let (lo, hi) = (inst.lower[j], inst.upper[j]);
        let width = (hi - lo).abs().max(1.0);
        worst = worst.max((lo - y[j]).max(y[j] - hi).max(0.0) / width);

        let nu_j = nu.map_or(0.0, |v| v[j]);
        if nu.is_some() {
            let tol = feas_tol(width);
            let nu_scale = lambda.abs().max(1.0);
            let scale = nu_scale * width;
            worst = worst.max((nu_j.max(0.0) * (y[j] - hi)).abs() / scale);
            worst = worst.max((nu_j.min(0.0) * (y[j] - lo)).abs() / scale);
            if y[j] < hi - tol {
                worst = worst.max(nu_j.max(0.0) / nu_scale);
            }
            if y[j] > lo + tol {
                worst = worst.max((-nu_j).max(0.0) / nu_scale);
            }
        }

        for &i in inst.members(j) {
            let (l, u, xi) = (inst.l[i], inst.u[i], x[i]);
            let width = (u - l).abs().max(1.0);
            worst = worst.max((l - xi).max(xi - u).max(0.0) / width);

            let terms = [
                inst.w[j] * y[j],
                inst.a[i] * xi,
                inst.b[i],
                lambda,
                nu_j,
            ];
            let mu = -terms.iter().sum::<f64>();
            let grad_scale = terms.iter().fold(1.0_f64, |s, t| s.max(t.abs()));

            // Multiplier relative to the gradient terms times slack relative
            // to the box width.
            let slack_scale = grad_scale * width;
            worst = worst.max((mu.max(0.0) * (xi - u)).abs() / slack_scale);
            worst = worst.max((mu.min(0.0) * (xi - l)).abs() / slack_scale);

            // mu > 0 is only allowed at the upper bound, mu < 0 only at the lower.
            let tol = feas_tol(width);
            if xi < u - tol {
                worst = worst.max(mu.max(0.0) / grad_scale);
            }
            if xi > l + tol {
                worst = worst.max((-mu).max(0.0) / grad_scale);
            }
        }
    }
    Ok(worst)
}
