//! Exact reference solver for small instances, by active-set enumeration
//! over the original problem including the generalized bounds.
//!
//! For a fixed multiplier `lambda` of the resource constraint the problem
//! splits into one strictly convex problem per subset. For every subset we
//! enumerate all variable statuses (lower, upper, free) and subset statuses
//! (inactive, at L, at U), solve the stationarity system once with the
//! multiplier as a parameter, and keep the `lambda`-interval on which that
//! active set satisfies every KKT sign and bound condition. The subset sums
//! `y_j(lambda)` are then piecewise affine and the resource equation is
//! solved exactly on each elementary interval.
//!
//! [`solve_exhaustive`] is the literal variant that enumerates global active
//! sets with `lambda` as an unknown; it is exponential in `n + m` and meant
//! for cross-checking on tiny instances.

use crate::error::{Error, Result};
use crate::model::{self, Instance, Solution};

pub const MAX_N: usize = 12;
pub const MAX_M: usize = 4;
pub const EXHAUSTIVE_MAX_N: usize = 8;

const PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarStatus {
    Lower,
    Upper,
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SubsetStatus {
    Inactive,
    AtLower,
    AtUpper,
}

const VAR_STATUSES: [VarStatus; 3] = [VarStatus::Lower, VarStatus::Upper, VarStatus::Free];
const SUBSET_STATUSES: [SubsetStatus; 3] = [
    SubsetStatus::Inactive,
    SubsetStatus::AtLower,
    SubsetStatus::AtUpper,
];

/// Oracle output: the solution plus the generalized-bound multipliers.
#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub solution: Solution,
    pub subset_multipliers: Vec<f64>,
}

/// Affine function `c + s * lambda`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Affine {
    c: f64,
    s: f64,
}

impl Affine {
    fn at(self, lambda: f64) -> f64 {
        self.c + self.s * lambda
    }
}

/// One active set of one subset, valid for `lambda` in `[lo, hi]`.
#[derive(Debug, Clone)]
struct Piece {
    lo: f64,
    hi: f64,
    x: Vec<Affine>,
    y: Affine,
    nu: Affine,
}

/// Solves `M z = r` for several right-hand sides by Gaussian elimination
/// with partial pivoting. Returns `None` for numerically singular `M`.
pub fn solve_dense(mut mat: Vec<Vec<f64>>, mut rhs: Vec<Vec<f64>>) -> Option<Vec<Vec<f64>>> {
    let k = mat.len();
    let scale = mat
        .iter()
        .flatten()
        .fold(0.0_f64, |s, v| s.max(v.abs()))
        .max(1.0);
    for col in 0..k {
        let piv = (col..k).max_by(|&p, &q| mat[p][col].abs().total_cmp(&mat[q][col].abs()))?;
        if mat[piv][col].abs() <= PIVOT_TOL * scale {
            return None;
        }
        mat.swap(col, piv);
        for r in &mut rhs {
            r.swap(col, piv);
        }
        for row in col + 1..k {
            let f = mat[row][col] / mat[col][col];
            if f == 0.0 {
                continue;
            }
            let (top, bottom) = mat.split_at_mut(row);
            for (dst, src) in bottom[0][col..].iter_mut().zip(&top[col][col..]) {
                *dst -= f * src;
            }
            for r in &mut rhs {
                r[row] -= f * r[col];
            }
        }
    }
    for r in &mut rhs {
        for row in (0..k).rev() {
            let tail: f64 = (row + 1..k).map(|c| mat[row][c] * r[c]).sum();
            r[row] = (r[row] - tail) / mat[row][row];
        }
    }
    Some(rhs)
}

fn check_limits(inst: &Instance, max_n: usize) -> Result<()> {
    if inst.n() > max_n || inst.m() > MAX_M {
        return Err(Error::OracleLimits {
            n: inst.n(),
            m: inst.m(),
            max_n,
            max_m: MAX_M,
        });
    }
    Ok(())
}

/// Calls `f` with every status vector of length `len`.
fn for_each_assignment<T: Copy>(len: usize, choices: &[T], mut f: impl FnMut(&[T])) {
    let mut digits = vec![0usize; len];
    let mut current: Vec<T> = vec![choices[0]; len];
    loop {
        f(&current);
        let mut k = 0;
        loop {
            if k == len {
                return;
            }
            digits[k] += 1;
            if digits[k] < choices.len() {
                current[k] = choices[digits[k]];
                break;
            }
            digits[k] = 0;
            current[k] = choices[0];
            k += 1;
        }
    }
}

/// Narrows `[lo, hi]` to where `g(lambda) >= -tol`.
fn require_nonneg(g: Affine, tol: f64, lo: &mut f64, hi: &mut f64) {
    if g.s.abs() <= 1e-13 * g.c.abs().max(1.0) {
        if g.c < -tol {
            *lo = f64::INFINITY;
        }
    } else if g.s > 0.0 {
        *lo = lo.max((-tol - g.c) / g.s);
    } else {
        *hi = hi.min((-tol - g.c) / g.s);
    }
}

fn subset_pieces(inst: &Instance, j: usize) -> Vec<Piece> {
    let idx = inst.members(j);
    let w = inst.w()[j];
    let (a, b, l, u) = (inst.a(), inst.b(), inst.l(), inst.u());
    let (sub_lo, sub_hi) = (inst.subset_lower()[j], inst.subset_upper()[j]);
    let scale = idx
        .iter()
        .flat_map(|&i| [l[i].abs(), u[i].abs(), b[i].abs()])
        .chain([sub_lo.abs(), sub_hi.abs(), inst.resource().abs()])
        .fold(1.0_f64, f64::max);
    let tol = 1e-9 * scale;
    let mut pieces = Vec::new();

    for_each_assignment(idx.len(), &VAR_STATUSES, |status| {
        for sub in SUBSET_STATUSES {
            let free: Vec<usize> = (0..idx.len()).filter(|&k| status[k] == VarStatus::Free).collect();
            let fixed_sum: f64 = (0..idx.len())
                .map(|k| match status[k] {
                    VarStatus::Lower => l[idx[k]],
                    VarStatus::Upper => u[idx[k]],
                    VarStatus::Free => 0.0,
                })
                .sum();
            let active = sub != SubsetStatus::Inactive;
            let target = match sub {
                SubsetStatus::AtLower => sub_lo,
                SubsetStatus::AtUpper => sub_hi,
                SubsetStatus::Inactive => 0.0,
            };
            // Unknowns: free x's, then nu if the subset bound is active.
            let dim = free.len() + usize::from(active);
            let mut mat = vec![vec![0.0; dim]; dim];
            let mut rhs_c = vec![0.0; dim];
            let mut rhs_s = vec![0.0; dim];
            for (r, &k) in free.iter().enumerate() {
                let i = idx[k];
                mat[r][..free.len()].fill(w);
                mat[r][r] += a[i];
                if active {
                    mat[r][free.len()] = 1.0;
                }
                rhs_c[r] = -b[i] - w * fixed_sum;
                rhs_s[r] = -1.0;
            }
            if active {
                let r = free.len();
                mat[r][..free.len()].fill(1.0);
                rhs_c[r] = target - fixed_sum;
            }
            let Some(sol) = solve_dense(mat, vec![rhs_c, rhs_s]) else {
                return;
            };
            let var = |r: usize| Affine {
                c: sol[0][r],
                s: sol[1][r],
            };

            let mut x = vec![Affine::default(); idx.len()];
            for k in 0..idx.len() {
                x[k] = match status[k] {
                    VarStatus::Lower => Affine { c: l[idx[k]], s: 0.0 },
                    VarStatus::Upper => Affine { c: u[idx[k]], s: 0.0 },
                    VarStatus::Free => Affine::default(),
                };
            }
            for (r, &k) in free.iter().enumerate() {
                x[k] = var(r);
            }
            let y = x.iter().fold(Affine::default(), |acc, v| Affine {
                c: acc.c + v.c,
                s: acc.s + v.s,
            });
            let nu = if active { var(free.len()) } else { Affine::default() };

            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
            // Primal bounds first; they reject most candidates.
            for &k in &free {
                let i = idx[k];
                require_nonneg(Affine { c: x[k].c - l[i], s: x[k].s }, tol, &mut lo, &mut hi);
                require_nonneg(Affine { c: u[i] - x[k].c, s: -x[k].s }, tol, &mut lo, &mut hi);
            }
            if !active {
                require_nonneg(Affine { c: y.c - sub_lo, s: y.s }, tol, &mut lo, &mut hi);
                require_nonneg(Affine { c: sub_hi - y.c, s: -y.s }, tol, &mut lo, &mut hi);
            }
            if lo > hi {
                return;
            }
            // Multiplier signs: mu = -(a x + b + w y + lambda + nu) is >= 0 at
            // the upper bound and <= 0 at the lower; nu likewise.
            for k in 0..idx.len() {
                if status[k] == VarStatus::Free {
                    continue;
                }
                let i = idx[k];
                let grad = Affine {
                    c: a[i] * x[k].c + b[i] + w * y.c + nu.c,
                    s: w * y.s + 1.0 + nu.s,
                };
                let g = if status[k] == VarStatus::Upper {
                    Affine { c: -grad.c, s: -grad.s }
                } else {
                    grad
                };
                require_nonneg(g, tol, &mut lo, &mut hi);
            }
            match sub {
                SubsetStatus::AtUpper => require_nonneg(nu, tol, &mut lo, &mut hi),
                SubsetStatus::AtLower => {
                    require_nonneg(Affine { c: -nu.c, s: -nu.s }, tol, &mut lo, &mut hi)
                }
                SubsetStatus::Inactive => {}
            }
            if lo <= hi {
                pieces.push(Piece { lo, hi, x, y, nu });
            }
        }
    });
    pieces
}

pub fn solve_bruteforce(inst: &Instance) -> Result<Solution> {
    solve_bruteforce_detailed(inst).map(|s| s.solution)
}

pub fn solve_bruteforce_detailed(inst: &Instance) -> Result<OracleSolution> {
    check_limits(inst, MAX_N)?;
    model::validate(inst).into_result()?;
    let m = inst.m();
    let r = inst.resource();
    let pieces: Vec<Vec<Piece>> = (0..m).map(|j| subset_pieces(inst, j)).collect();

    let mut ends: Vec<f64> = pieces
        .iter()
        .flatten()
        .flat_map(|p| [p.lo, p.hi])
        .filter(|v| v.is_finite())
        .collect();
    ends.sort_by(f64::total_cmp);
    ends.dedup();
    if ends.is_empty() {
        ends.push(0.0);
    }

    // Elementary intervals, including the two unbounded ends.
    let mut intervals = Vec::with_capacity(ends.len() + 1);
    intervals.push((f64::NEG_INFINITY, ends[0]));
    intervals.extend(ends.windows(2).map(|p| (p[0], p[1])));
    intervals.push((ends[ends.len() - 1], f64::INFINITY));

    let mut best: Option<(f64, f64, Vec<&Piece>)> = None;
    for (lo, hi) in intervals {
        let probe = match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (false, true) => hi - hi.abs().max(1.0),
            (true, false) => lo + lo.abs().max(1.0),
            (false, false) => 0.0,
        };
        let chosen: Option<Vec<&Piece>> = pieces
            .iter()
            .map(|ps| ps.iter().find(|p| p.lo <= probe && probe <= p.hi))
            .collect();
        let Some(chosen) = chosen else {
            continue;
        };
        let c: f64 = chosen.iter().map(|p| p.y.c).sum();
        let s: f64 = chosen.iter().map(|p| p.y.s).sum();
        let lambda = if s.abs() <= 1e-13 {
            probe
        } else {
            (r - c) / s
        };
        let width = (hi - lo).abs().max(1.0);
        let slack = 1e-9 * width.min(lambda.abs().max(1.0));
        let inside = lambda >= lo - slack && lambda <= hi + slack;
        let miss = (c + s * lambda - r).abs();
        if inside && miss <= model::feas_tol(r) && best.as_ref().is_none_or(|b| miss < b.1) {
            best = Some((lambda, miss, chosen));
        }
    }
    let (lambda, _, chosen) = best.ok_or(Error::NoCandidate)?;

    let mut x = vec![0.0; inst.n()];
    let mut nu = vec![0.0; m];
    for (j, p) in chosen.iter().enumerate() {
        for (k, &i) in inst.members(j).iter().enumerate() {
            x[i] = p.x[k].at(lambda).clamp(inst.l()[i], inst.u()[i]);
        }
        nu[j] = p.nu.at(lambda);
    }
    finish(inst, x, lambda, nu)
}

fn finish(inst: &Instance, x: Vec<f64>, lambda: f64, nu: Vec<f64>) -> Result<OracleSolution> {
    let objective = model::objective_value(inst, &x)?;
    let kkt_residual = model::kkt_residual_with_subset_multipliers(inst, &x, lambda, &nu)?;
    Ok(OracleSolution {
        solution: Solution {
            x,
            lambda_star: lambda,
            objective,
            kkt_residual,
        },
        subset_multipliers: nu,
    })
}

/// Literal enumeration of all `3^(n+m)` global active sets, each solved with
/// the resource multiplier as an unknown. Limited to `n <= 8`.
pub fn solve_exhaustive(inst: &Instance) -> Result<OracleSolution> {
    check_limits(inst, EXHAUSTIVE_MAX_N)?;
    model::validate(inst).into_result()?;
    let (n, m) = (inst.n(), inst.m());
    let (a, b, l, u, w) = (inst.a(), inst.b(), inst.l(), inst.u(), inst.w());
    let r = inst.resource();
    let scale = (0..n)
        .flat_map(|i| [l[i].abs(), u[i].abs(), b[i].abs()])
        .chain([r.abs()])
        .fold(1.0_f64, f64::max);
    let tol = 1e-9 * scale;

    let mut found: Option<(Vec<f64>, f64, Vec<f64>)> = None;
    for_each_assignment(m, &SUBSET_STATUSES, |subs| {
        if found.is_some() {
            return;
        }
        for_each_assignment(n, &VAR_STATUSES, |status| {
            if found.is_some() {
                return;
            }
            let free: Vec<usize> = (0..n).filter(|&i| status[i] == VarStatus::Free).collect();
            let active: Vec<usize> = (0..m).filter(|&j| subs[j] != SubsetStatus::Inactive).collect();
            let mut pos = vec![usize::MAX; n];
            for (p, &i) in free.iter().enumerate() {
                pos[i] = p;
            }
            let lam = free.len();
            let nu_pos = |j: usize| lam + 1 + active.iter().position(|&k| k == j).unwrap();
            let dim = free.len() + 1 + active.len();
            let fixed_val = |i: usize| match status[i] {
                VarStatus::Lower => l[i],
                VarStatus::Upper => u[i],
                VarStatus::Free => 0.0,
            };

            let mut mat = vec![vec![0.0; dim]; dim];
            let mut rhs = vec![0.0; dim];
            for (row, &i) in free.iter().enumerate() {
                let j = inst.subset_of()[i];
                let fixed_j: f64 = inst.members(j).iter().map(|&k| fixed_val(k)).sum();
                for &k in inst.members(j) {
                    if pos[k] != usize::MAX {
                        mat[row][pos[k]] += w[j];
                    }
                }
                mat[row][row] += a[i];
                mat[row][lam] = 1.0;
                if subs[j] != SubsetStatus::Inactive {
                    mat[row][nu_pos(j)] = 1.0;
                }
                rhs[row] = -b[i] - w[j] * fixed_j;
            }
            for &i in &free {
                mat[lam][pos[i]] = 1.0;
            }
            rhs[lam] = r - (0..n).map(fixed_val).sum::<f64>();
            for &j in &active {
                let row = nu_pos(j);
                for &k in inst.members(j) {
                    if pos[k] != usize::MAX {
                        mat[row][pos[k]] = 1.0;
                    }
                }
                let target = if subs[j] == SubsetStatus::AtLower {
                    inst.subset_lower()[j]
                } else {
                    inst.subset_upper()[j]
                };
                rhs[row] = target - inst.members(j).iter().map(|&k| fixed_val(k)).sum::<f64>();
            }
            let Some(sol) = solve_dense(mat, vec![rhs]) else {
                return;
            };
            let z = &sol[0];
            let x: Vec<f64> = (0..n)
                .map(|i| if pos[i] == usize::MAX { fixed_val(i) } else { z[pos[i]] })
                .collect();
            if (0..n).any(|i| x[i] < l[i] - tol || x[i] > u[i] + tol) {
                return;
            }
            let y = inst.subset_sums(&x);
            let lambda = z[lam];
            let mut nu = vec![0.0; m];
            for j in 0..m {
                match subs[j] {
                    SubsetStatus::Inactive => {
                        if y[j] < inst.subset_lower()[j] - tol || y[j] > inst.subset_upper()[j] + tol {
                            return;
                        }
                    }
                    SubsetStatus::AtLower | SubsetStatus::AtUpper => nu[j] = z[nu_pos(j)],
                }
                if (subs[j] == SubsetStatus::AtUpper && nu[j] < -tol)
                    || (subs[j] == SubsetStatus::AtLower && nu[j] > tol)
                {
                    return;
                }
            }
            for i in 0..n {
                let j = inst.subset_of()[i];
                let mu = -(a[i] * x[i] + b[i] + w[j] * y[j] + lambda + nu[j]);
                if (status[i] == VarStatus::Upper && mu < -tol)
                    || (status[i] == VarStatus::Lower && mu > tol)
                {
                    return;
                }
            }
            let x = (0..n).map(|i| x[i].clamp(l[i], u[i])).collect();
            found = Some((x, lambda, nu));
        });
    });
    let (x, lambda, nu) = found.ok_or(Error::NoCandidate)?;
    finish(inst, x, lambda, nu)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> Instance {
        Instance::with_blocks(
            &[2],
            vec![1.0, 1.0],
            vec![0.0, 0.0],
            vec![1.0],
            vec![-1.0, -1.0],
            vec![1.0, 1.0],
            vec![-2.0],
            vec![2.0],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn dense_solve_with_pivoting() {
        let mat = vec![vec![0.0, 2.0], vec![1.0, 1.0]];
        let sol = solve_dense(mat, vec![vec![4.0, 3.0]]).unwrap();
        assert!((sol[0][0] - 1.0).abs() < 1e-15 && (sol[0][1] - 2.0).abs() < 1e-15);
        assert!(solve_dense(vec![vec![1.0, 1.0], vec![2.0, 2.0]], vec![vec![0.0, 0.0]]).is_none());
    }

    #[test]
    fn symmetric_pair() {
        for sol in [solve_bruteforce(&pair()).unwrap(), solve_exhaustive(&pair()).unwrap().solution] {
            assert!((sol.x[0] - 0.5).abs() < 1e-12 && (sol.x[1] - 0.5).abs() < 1e-12);
            assert!((sol.lambda_star + 1.5).abs() < 1e-12);
            assert!(sol.kkt_residual <= 1e-9);
        }
    }

    #[test]
    fn single_variable() {
        let inst = Instance::with_blocks(
            &[1],
            vec![2.0],
            vec![1.0],
            vec![0.5],
            vec![-1.0],
            vec![3.0],
            vec![-1.0],
            vec![2.0],
            1.5,
        )
        .unwrap();
        let sol = solve_bruteforce(&inst).unwrap();
        assert!((sol.x[0] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn binding_generalized_bound() {
        // Unconstrained split would put 1.5 in the first subset; U caps it at 1.
        let inst = Instance::with_blocks(
            &[2, 1],
            vec![1.0, 1.0, 1.0],
            vec![0.0, 0.0, 1.0],
            vec![0.0, 0.0],
            vec![0.0, 0.0, 0.0],
            vec![2.0, 2.0, 2.0],
            vec![0.0, 0.0],
            vec![1.0, 2.0],
            2.0,
        )
        .unwrap();
        let fast = solve_bruteforce_detailed(&inst).unwrap();
        let slow = solve_exhaustive(&inst).unwrap();
        let y = inst.subset_sums(&fast.solution.x);
        assert!((y[0] - 1.0).abs() < 1e-12);
        assert!(fast.subset_multipliers[0] > 0.0);
        for i in 0..3 {
            assert!((fast.solution.x[i] - slow.solution.x[i]).abs() < 1e-12);
        }
        assert!(fast.solution.kkt_residual <= 1e-9);
    }

    #[test]
    fn limits_are_enforced() {
        let n = 13;
        let inst = Instance::with_blocks(
            &[n],
            vec![1.0; n],
            vec![0.0; n],
            vec![0.0],
            vec![0.0; n],
            vec![1.0; n],
            vec![0.0],
            vec![n as f64],
            1.0,
        )
        .unwrap();
        assert!(matches!(solve_bruteforce(&inst), Err(Error::OracleLimits { .. })));
    }
}
