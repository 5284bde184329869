use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use gbc_alloc::bench::{fit_records, rep_seed, run_cell, BenchRecord, FitSummary};
use gbc_alloc::evmodel::{self, EvScenario};
use gbc_alloc::{gen, model, solve, Algorithm, Error, Instance, Solution};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "gbc-alloc", version, about = "Quadratic resource allocation with generalized bound constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Alg {
    Seq,
    Bin,
    Separable,
    Oracle,
}

impl From<Alg> for Algorithm {
    fn from(a: Alg) -> Self {
        match a {
            Alg::Seq => Algorithm::Seq,
            Alg::Bin => Algorithm::Bin,
            Alg::Separable => Algorithm::Separable,
            Alg::Oracle => Algorithm::Oracle,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance file and write the solution as JSON.
    Solve {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "bin")]
        algorithm: Alg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time both breakpoint searches over a grid of random instances.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "10")]
        grid_c: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "10,20,50,100,200,500,1000")]
        grid_m: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "seq,bin")]
        algorithm: Vec<Alg>,
        /// Timing CSV; the fit summary goes next to it with a `.fit.csv` suffix.
        #[arg(long, default_value = "bench.csv")]
        out: PathBuf,
        /// Run cells in parallel. Timings are then not comparable.
        #[arg(long)]
        parallel: bool,
    },
    /// Build and solve an EV charging scenario.
    Ev {
        /// Scenario JSON. Without it, the built-in overnight scenario with
        /// synthetic baseload is used.
        scenario: Option<PathBuf>,
        /// Override the weights as `W1,W2`.
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
        #[arg(long, value_enum, default_value = "bin")]
        algorithm: Alg,
        #[arg(long, default_value_t = 40)]
        households: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a random instance.
    Generate {
        /// Variables per subset.
        #[arg(long = "c")]
        subset_size: usize,
        /// Number of subsets.
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check an instance file and print the validation report.
    Validate { input: PathBuf },
}

/// Error with the process exit code it maps to.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(err: anyhow::Error) -> Self {
        Failure { code: 1, err }
    }
}

fn solver_failure(err: Error) -> Failure {
    let code = match err {
        Error::Invalid(_)
        | Error::NotSeparable { .. }
        | Error::OracleLimits { .. }
        | Error::Scenario(_)
        | Error::Dimension { .. }
        | Error::SubsetIndex { .. } => 2,
        _ => 3,
    };
    let err = match err {
        Error::Invalid(report) => {
            let detail = serde_json::to_string_pretty(&report).unwrap_or_default();
            anyhow!("instance failed validation:\n{detail}")
        }
        other => anyhow!(other),
    };
    Failure { code, err }
}

/// Prints to stdout, ignoring a closed pipe.
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display())),
        None => {
            out!("{text}");
            Ok(())
        }
    }
}

fn timed_solve(inst: &Instance, alg: Algorithm) -> Result<(Solution, f64), Failure> {
    let start = Instant::now();
    let sol = solve(inst, alg).map_err(solver_failure)?;
    Ok((sol, start.elapsed().as_secs_f64()))
}

/// Summary lines go to stdout when the JSON went to a file, else to stderr.
fn summary(to_file: bool, sol: &Solution, secs: f64, extra: &[(&str, f64)]) {
    let mut lines = vec![
        format!("objective      {:.12e}", sol.objective),
        format!("lambda*        {:.12e}", sol.lambda_star),
        format!("kkt residual   {:.3e}", sol.kkt_residual),
        format!("wall time      {:.3} ms", secs * 1e3),
    ];
    lines.extend(extra.iter().map(|(k, v)| format!("{k:<14} {v:.12e}")));
    for line in lines {
        if to_file {
            out!("{line}");
        } else {
            eprintln!("{line}");
        }
    }
}

fn cmd_solve(input: &Path, alg: Alg, out: Option<&Path>) -> Result<(), Failure> {
    let inst: Instance = read_json(input)?;
    let (sol, secs) = timed_solve(&inst, alg.into())?;
    write_json(out, &sol)?;
    summary(out.is_some(), &sol, secs, &[]);
    Ok(())
}

fn cmd_bench(
    grid_c: &[usize],
    grid_m: &[usize],
    reps: usize,
    seed: u64,
    algs: &[Alg],
    out: &Path,
    parallel: bool,
) -> Result<(), Failure> {
    if grid_c.iter().chain(grid_m).any(|&v| v == 0) || reps == 0 {
        return Err(anyhow!("grid entries and reps must be positive").into());
    }
    let algs: Vec<Algorithm> = algs.iter().map(|&a| a.into()).collect();
    let cells: Vec<(usize, usize)> = grid_c
        .iter()
        .flat_map(|&c| grid_m.iter().map(move |&m| (c, m)))
        .collect();
    let run = |&(c, m): &(usize, usize)| -> gbc_alloc::Result<Vec<BenchRecord>> {
        for &alg in &algs {
            run_cell(c, m, rep_seed(seed, 0), alg)?;
        }
        let mut rows = Vec::with_capacity(reps * algs.len());
        for rep in 0..reps {
            for &alg in &algs {
                rows.push(run_cell(c, m, rep_seed(seed, rep), alg)?);
            }
        }
        Ok(rows)
    };
    let per_cell: Vec<Vec<BenchRecord>> = if parallel {
        cells.par_iter().map(run).collect::<gbc_alloc::Result<_>>()
    } else {
        cells.iter().map(run).collect::<gbc_alloc::Result<_>>()
    }
    .map_err(solver_failure)?;
    let records: Vec<BenchRecord> = per_cell.into_iter().flatten().collect();

    let mut w = csv::Writer::from_path(out).with_context(|| format!("writing {}", out.display()))?;
    for r in &records {
        w.serialize(r).context("writing CSV row")?;
    }
    w.flush().context("flushing CSV")?;

    let fits = fit_records(&records);
    let fit_path = fit_path(out);
    let mut w = csv::Writer::from_path(&fit_path).with_context(|| format!("writing {}", fit_path.display()))?;
    for f in &fits {
        w.serialize(f).context("writing fit row")?;
    }
    w.flush().context("flushing fit CSV")?;

    let worst = records.iter().fold(0.0_f64, |w, r| w.max(r.residual));
    out!("{} rows -> {}", records.len(), out.display());
    out!("max kkt residual {worst:.3e}");
    print_fits(&fits);
    Ok(())
}

fn fit_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.fit.csv"))
}

fn print_fits(fits: &[FitSummary]) {
    out!("{:>6} {:>6} {:>12} {:>8}", "C", "alg", "c1", "c2");
    for f in fits {
        out!("{:>6} {:>6} {:>12.4e} {:>8.3}", f.subset_size, f.alg.name(), f.c1, f.c2);
    }
}

#[derive(Serialize)]
struct EvReport {
    #[serde(rename = "W1")]
    w1: f64,
    #[serde(rename = "W2")]
    w2: f64,
    solution: Solution,
    /// Objective terms that depend only on the baseload.
    constant: f64,
    /// Full charging objective, `solution.objective + constant`.
    ev_objective: f64,
    intervals: Vec<evmodel::IntervalReport>,
}

fn cmd_ev(
    scenario: Option<&Path>,
    weights: Option<&[f64]>,
    alg: Alg,
    households: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let mut s: EvScenario = match scenario {
        Some(p) => read_json(p)?,
        None => evmodel::desk_scenario(households, seed, 1.0, 1.0),
    };
    if let Some(w) = weights {
        let &[w1, w2] = w else {
            return Err(Failure {
                code: 2,
                err: anyhow!("--weights takes exactly two values, W1,W2"),
            });
        };
        s = s.with_weights(w1, w2);
    }
    let ev = evmodel::build_instance(&s).map_err(solver_failure)?;
    let (sol, secs) = timed_solve(&ev.instance, alg.into())?;
    let report = EvReport {
        w1: s.w1,
        w2: s.w2,
        constant: ev.constant,
        ev_objective: evmodel::ev_objective(&s, &sol.x),
        intervals: evmodel::interval_report(&s, &sol.x),
        solution: sol,
    };
    write_json(out, &report)?;
    summary(out.is_some(), &report.solution, secs, &[("ev objective", report.ev_objective)]);
    Ok(())
}

fn cmd_generate(subset_size: usize, m: usize, seed: u64, out: Option<&Path>) -> Result<(), Failure> {
    if subset_size == 0 || m == 0 {
        return Err(anyhow!("--c and --m must be positive").into());
    }
    write_json(out, &gen::generate(subset_size, m, seed))?;
    Ok(())
}

fn cmd_validate(input: &Path) -> Result<(), Failure> {
    let inst: Instance = read_json(input)?;
    let report = model::validate(&inst);
    write_json(None, &report)?;
    if report.ok {
        Ok(())
    } else {
        Err(Failure {
            code: 2,
            err: anyhow!("{} violation(s)", report.violations.len()),
        })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve { input, algorithm, out } => cmd_solve(input, *algorithm, out.as_deref()),
        Command::Bench {
            grid_c,
            grid_m,
            reps,
            seed,
            algorithm,
            out,
            parallel,
        } => cmd_bench(grid_c, grid_m, *reps, *seed, algorithm, out, *parallel),
        Command::Ev {
            scenario,
            weights,
            algorithm,
            households,
            seed,
            out,
        } => cmd_ev(
            scenario.as_deref(),
            weights.as_deref(),
            *algorithm,
            *households,
            *seed,
            out.as_deref(),
        ),
        Command::Generate {
            subset_size,
            m,
            seed,
            out,
        } => cmd_generate(*subset_size, *m, *seed, out.as_deref()),
        Command::Validate { input } => cmd_validate(input),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}
