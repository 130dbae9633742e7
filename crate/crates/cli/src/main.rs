use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use contact_reach::export::{metadata, write_run};
use contact_reach::guard::Method;
use contact_reach::runner::{
    check_scenario, grid_csv, intersections_csv, measure_table, run_bench, run_grid_with, run_scenario, time_table,
    trends, CellSummary, MASSES, SPEEDS,
};
use contact_reach::safety::Verdict;
use contact_reach::scenario::Scenario;

/// Reachability-based force verification of a delayed robot contact task.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verify one scenario and export its sets.
    Run {
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Overrides the scenario's method.
        #[arg(long)]
        method: Option<Method>,
        /// Defaults to the scenario's `out`, then `out`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write every set to `sets.dump`.
        #[arg(long)]
        dump: bool,
    },
    /// Verify every mass/speed combination.
    Grid {
        #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = MASSES)]
        masses: Vec<f64>,
        #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = SPEEDS)]
        speeds: Vec<f64>,
        #[arg(long, default_value = "trinal")]
        method: Method,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Base scenario for everything except mass, speed and method.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Compare simulated trajectories against the computed sets.
    Check {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Intersection measures and times of all methods over the grid.
    Bench {
        #[arg(long, default_value = "bench")]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = MASSES)]
        masses: Vec<f64>,
        #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = SPEEDS)]
        speeds: Vec<f64>,
    },
}

fn load(path: Option<&Path>) -> Result<Scenario> {
    match path {
        Some(p) => Ok(Scenario::load(p)?),
        None => Ok(Scenario::default()),
    }
}

fn write(dir: &Path, name: &str, text: String) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn cell_dir(out: &Path, mass: f64, speed: f64) -> PathBuf {
    out.join(format!("m{mass}_v{speed}"))
}

fn print_cells(cells: &[CellSummary]) {
    for c in cells {
        match (&c.verdict, &c.error) {
            (Some(v), _) => println!(
                "m = {:<4} v = {:<5} {:<9} {:?} ({} branches, {:.2} s)",
                c.mass, c.speed, c.method, v, c.branches, c.wall_time
            ),
            (None, Some(e)) => println!("m = {:<4} v = {:<5} {:<9} FAILED: {e}", c.mass, c.speed, c.method),
            (None, None) => {}
        }
    }
}

/// Exit code 0 when everything verified safe, 1 otherwise.
fn execute(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Run {
            scenario,
            method,
            out,
            dump,
        } => {
            let mut s = load(scenario.as_deref())?;
            if let Some(m) = method {
                s.method = m;
            }
            let out = out.or_else(|| s.out.clone().map(PathBuf::from)).unwrap_or_else(|| "out".into());
            let run = run_scenario(&s)?;
            write_run(&run, &out, dump)?;
            println!(
                "m = {} v = {} method = {}: {:?} ({} branches, {:.2} s)",
                s.mass,
                s.speed,
                s.method,
                run.verdict(),
                run.result.branches.len(),
                run.wall_time
            );
            if let Some(t) = run.safety.contact_start {
                println!("contact from t = {t:.5} s");
            }
            Ok(u8::from(!run.verdict().is_safe()))
        }
        Command::Grid {
            masses,
            speeds,
            method,
            out,
            scenario,
        } => {
            let base = load(scenario.as_deref())?;
            let cells = run_grid_with(&base, &masses, &speeds, method, |run| {
                write_run(run, &cell_dir(&out, run.scenario.mass, run.scenario.speed), false)
            });
            write(&out, "grid.csv", grid_csv(&cells))?;
            write(&out, "intersections.csv", intersections_csv(&cells))?;
            print_cells(&cells);
            let all_safe = cells.iter().all(|c| c.verdict == Some(Verdict::Safe));
            Ok(u8::from(!all_safe))
        }
        Command::Check {
            scenario,
            samples,
            seed,
            out,
        } => {
            let s = load(scenario.as_deref())?;
            let (run, report) = check_scenario(&s, samples, seed)?;
            if let Some(dir) = out {
                write_run(&run, &dir, false)?;
                let meta = serde_json::to_string_pretty(&metadata(&run, Some((&report, seed))))?;
                write(&dir, "run.json", meta + "\n")?;
            }
            println!(
                "{} trajectories, {} checks, {} violations, {} failed simulations",
                report.samples,
                report.checks,
                report.violations.len(),
                report.failed_simulations
            );
            for v in report.violations.iter().take(10) {
                println!("  sample {} at t = {:.5} in location {}", v.sample, v.time, v.location + 1);
            }
            Ok(u8::from(!report.passed()))
        }
        Command::Bench { out, masses, speeds } => {
            let cells = run_bench(&Scenario::default(), &masses, &speeds);
            write(&out, "measures.csv", measure_table(&cells))?;
            write(&out, "times.csv", time_table(&cells))?;
            write(&out, "cells.csv", grid_csv(&cells))?;
            write(&out, "intersections.csv", intersections_csv(&cells))?;
            write(&out, "trends.json", serde_json::to_string_pretty(&trends(&cells))? + "\n")?;
            print_cells(&cells);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
