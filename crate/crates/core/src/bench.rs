//! Timing harness and power-law fits for the scalability study.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gen;
use crate::{solve, Algorithm};

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    #[serde(rename = "C")]
    pub subset_size: usize,
    pub m: usize,
    pub seed: u64,
    pub alg: Algorithm,
    pub time_s: f64,
    pub residual: f64,
    pub objective: f64,
}

/// `time = c1 * m^c2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    pub c1: f64,
    pub c2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    #[serde(rename = "C")]
    pub subset_size: usize,
    pub alg: Algorithm,
    pub c1: f64,
    pub c2: f64,
}

/// Least-squares fit of `log t = log c1 + c2 log m`. Needs at least two
/// distinct positive `m` values; points with non-positive entries are skipped.
pub fn fit_power_law(points: &[(f64, f64)]) -> Option<PowerLaw> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(m, t)| *m > 0.0 && *t > 0.0)
        .map(|(m, t)| (m.ln(), t.ln()))
        .collect();
    let k = logs.len() as f64;
    if logs.len() < 2 {
        return None;
    }
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let c2 = sxy / sxx;
    Some(PowerLaw {
        c1: (my - c2 * mx).exp(),
        c2,
    })
}

/// Seed of repetition `rep` in a grid started from `base`.
pub fn rep_seed(base: u64, rep: usize) -> u64 {
    base.wrapping_add(rep as u64)
}

/// Generates one instance and times one solve. Generation is not timed.
pub fn run_cell(subset_size: usize, m: usize, seed: u64, alg: Algorithm) -> Result<BenchRecord> {
    let inst = gen::generate(subset_size, m, seed).instance;
    let start = Instant::now();
    let sol = solve(&inst, alg)?;
    let time_s = start.elapsed().as_secs_f64();
    Ok(BenchRecord {
        subset_size,
        m,
        seed,
        alg,
        time_s,
        residual: sol.kkt_residual,
        objective: sol.objective,
    })
}

/// Runs every (C, m, rep, algorithm) combination in order. One untimed
/// warm-up solve precedes each (C, m) cell.
pub fn run_grid(
    sizes: &[usize],
    counts: &[usize],
    reps: usize,
    base_seed: u64,
    algs: &[Algorithm],
) -> Result<Vec<BenchRecord>> {
    let mut out = Vec::new();
    for &c in sizes {
        for &m in counts {
            for &alg in algs {
                run_cell(c, m, rep_seed(base_seed, 0), alg)?;
            }
            for rep in 0..reps {
                for &alg in algs {
                    out.push(run_cell(c, m, rep_seed(base_seed, rep), alg)?);
                }
            }
        }
    }
    Ok(out)
}

/// Fits a power law per (C, algorithm) to the mean time per m.
pub fn fit_records(records: &[BenchRecord]) -> Vec<FitSummary> {
    let mut groups: BTreeMap<(usize, Algorithm), BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.subset_size, r.alg))
            .or_default()
            .entry(r.m)
            .or_default()
            .push(r.time_s);
    }
    groups
        .into_iter()
        .filter_map(|((subset_size, alg), by_m)| {
            let points: Vec<(f64, f64)> = by_m
                .into_iter()
                .map(|(m, ts)| (m as f64, ts.iter().sum::<f64>() / ts.len() as f64))
                .collect();
            fit_power_law(&points).map(|p| FitSummary {
                subset_size,
                alg,
                c1: p.c1,
                c2: p.c2,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let fit = fit_power_law(&[(1.0, 2.0), (10.0, 20.0), (100.0, 200.0)]).unwrap();
        assert!((fit.c1 - 2.0).abs() < 1e-12);
        assert!((fit.c2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_points() {
        assert!(fit_power_law(&[(1.0, 2.0)]).is_none());
        assert!(fit_power_law(&[(3.0, 2.0), (3.0, 4.0)]).is_none());
    }

    #[test]
    fn grid_rows_and_fits() {
        let records = run_grid(&[2], &[1, 4], 2, 5, &[Algorithm::Seq, Algorithm::Bin]).unwrap();
        assert_eq!(records.len(), 8);
        assert!(records.iter().all(|r| r.residual <= 1e-8));
        let fits = fit_records(&records);
        assert_eq!(fits.len(), 2);
    }
}
