//! Scenario runs, parameter grids, containment checks and method tables.

use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::contact::{ContactCase, L1};
use crate::engine::{run_automaton, ReachResult};
use crate::error::ReachError;
use crate::guard::Method;
use crate::par;
use crate::safety::{check_safety, SafetyReport, Verdict};
use crate::scenario::Scenario;
use crate::sim::{containment_test, ContainmentReport, SimConfig};

pub const MASSES: [f64; 3] = [1.5, 4.5, 8.0];
pub const SPEEDS: [f64; 5] = [0.1, 0.2, 0.35, 0.45, 0.55];

/// Intersection orders reported in the method tables.
pub const TABLE_ORDERS: [usize; 2] = [2, 3];

#[derive(Debug, Error)]
pub enum RunError {
    #[error("model: {0}")]
    Model(ReachError),
    #[error("reachability: {0}")]
    Reach(ReachError),
    #[error("safety check: {0}")]
    Safety(ReachError),
    #[error("export: {0}")]
    Export(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub scenario: Scenario,
    pub case: ContactCase,
    pub result: ReachResult,
    pub safety: SafetyReport,
    /// Seconds spent in reachability and the safety check.
    pub wall_time: f64,
}

impl RunOutput {
    pub fn verdict(&self) -> Verdict {
        self.safety.verdict
    }
}

pub fn run_scenario(s: &Scenario) -> Result<RunOutput, RunError> {
    s.validate().map_err(RunError::Model)?;
    let case = s.case().map_err(RunError::Model)?;
    let started = Instant::now();
    let result =
        run_automaton(&case.automaton, &case.initial, L1, &case.inputs, &s.engine_config()).map_err(RunError::Reach)?;
    let safety = check_safety(&case, &result, &s.limits()).map_err(RunError::Safety)?;
    Ok(RunOutput {
        scenario: s.clone(),
        case,
        result,
        safety,
        wall_time: started.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntersectionRow {
    pub branch: usize,
    pub transition: String,
    pub order: usize,
    pub measure: Option<f64>,
    pub geometric_measure: Option<f64>,
    pub tsm_measure: Option<f64>,
    pub wall_time: f64,
    pub fallback: Option<String>,
}

/// Result of one grid cell; `error` is set when the run failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub mass: f64,
    pub speed: f64,
    pub method: Method,
    pub verdict: Option<Verdict>,
    pub error: Option<String>,
    pub branches: usize,
    pub wall_time: f64,
    pub intersections: Vec<IntersectionRow>,
}

impl CellSummary {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }

    /// Largest measure over the intersections with `order` jumps.
    pub fn measure_at(&self, order: usize) -> Option<f64> {
        self.intersections
            .iter()
            .filter(|r| r.order == order)
            .filter_map(|r| r.measure)
            .reduce(f64::max)
    }

    /// Mean computation time of the intersections with `order` jumps.
    pub fn time_at(&self, order: usize) -> Option<f64> {
        let t: Vec<f64> = self
            .intersections
            .iter()
            .filter(|r| r.order == order)
            .map(|r| r.wall_time)
            .collect();
        (!t.is_empty()).then(|| t.iter().sum::<f64>() / t.len() as f64)
    }
}

pub fn summarize(run: &RunOutput) -> CellSummary {
    CellSummary {
        mass: run.scenario.mass,
        speed: run.scenario.speed,
        method: run.scenario.method,
        verdict: Some(run.verdict()),
        error: None,
        branches: run.result.branches.len(),
        wall_time: run.wall_time,
        intersections: run
            .result
            .intersections()
            .map(|(b, r)| IntersectionRow {
                branch: b.id,
                transition: r.transition.clone(),
                order: r.order,
                measure: r.measure,
                geometric_measure: r.geometric_measure,
                tsm_measure: r.tsm_measure,
                wall_time: r.wall_time,
                fallback: r.fallback.clone(),
            })
            .collect(),
    }
}

fn run_cell<F>(base: &Scenario, mass: f64, speed: f64, method: Method, sink: &F) -> CellSummary
where
    F: Fn(&RunOutput) -> std::io::Result<()>,
{
    let s = Scenario {
        mass,
        speed,
        method,
        ..base.clone()
    };
    let outcome = run_scenario(&s).and_then(|run| {
        sink(&run)?;
        Ok(run)
    });
    match outcome {
        Ok(run) => summarize(&run),
        Err(e) => CellSummary {
            mass,
            speed,
            method,
            verdict: None,
            error: Some(e.to_string()),
            branches: 0,
            wall_time: 0.0,
            intersections: Vec::new(),
        },
    }
}

/// Every mass/speed combination, mass-major. Cells run concurrently and a
/// failing cell does not stop the others.
pub fn run_grid(base: &Scenario, masses: &[f64], speeds: &[f64], method: Method) -> Vec<CellSummary> {
    run_grid_with(base, masses, speeds, method, |_| Ok(()))
}

/// As [`run_grid`], handing every completed run to `sink` (for export).
pub fn run_grid_with<F>(base: &Scenario, masses: &[f64], speeds: &[f64], method: Method, sink: F) -> Vec<CellSummary>
where
    F: Fn(&RunOutput) -> std::io::Result<()> + Sync,
{
    let cells: Vec<(f64, f64)> = masses.iter().flat_map(|&m| speeds.iter().map(move |&v| (m, v))).collect();
    par::map(&cells, |&(m, v)| run_cell(base, m, v, method, &sink))
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.16e}")).unwrap_or_default()
}

fn csv_text(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub const GRID_HEADER: &str =
    "mass,speed,method,failed,verdict,branches,wall_time,measure2_x1e3,measure3_x1e3,time2,time3,error";

/// One row per cell; measures are scaled by 10³.
pub fn grid_csv(cells: &[CellSummary]) -> String {
    let mut out = String::from(GRID_HEADER);
    out.push('\n');
    for c in cells {
        let verdict = match c.verdict {
            Some(Verdict::Safe) => "SAFE",
            Some(Verdict::Unsafe) => "UNSAFE",
            None => "",
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{:.16e},{},{},{},{},{}\n",
            c.mass,
            c.speed,
            c.method,
            u8::from(c.failed()),
            verdict,
            c.branches,
            c.wall_time,
            opt(c.measure_at(2).map(|m| m * 1e3)),
            opt(c.measure_at(3).map(|m| m * 1e3)),
            opt(c.time_at(2)),
            opt(c.time_at(3)),
            csv_text(c.error.as_deref().unwrap_or("")),
        ));
    }
    out
}

pub const INTERSECTIONS_HEADER: &str =
    "mass,speed,method,branch,transition,order,measure_x1e3,geometric_x1e3,tsm_x1e3,wall_time,fallback";

pub fn intersections_csv(cells: &[CellSummary]) -> String {
    let mut out = String::from(INTERSECTIONS_HEADER);
    out.push('\n');
    for c in cells {
        for r in &c.intersections {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{:.16e},{}\n",
                c.mass,
                c.speed,
                c.method,
                r.branch,
                r.transition,
                r.order,
                opt(r.measure.map(|m| m * 1e3)),
                opt(r.geometric_measure.map(|m| m * 1e3)),
                opt(r.tsm_measure.map(|m| m * 1e3)),
                r.wall_time,
                csv_text(r.fallback.as_deref().unwrap_or("")),
            ));
        }
    }
    out
}

/// Coarse time grid `0, Δτ, 2Δτ, …` up to the horizon.
pub fn time_grid(s: &Scenario) -> Vec<f64> {
    let n = (s.horizon / s.step).floor() as usize;
    (0..=n).map(|k| k as f64 * s.step).collect()
}

/// Runs the scenario and checks `samples` simulated trajectories against it.
pub fn check_scenario(s: &Scenario, samples: usize, seed: u64) -> Result<(RunOutput, ContainmentReport), RunError> {
    let run = run_scenario(s)?;
    let report = containment(&run, samples, seed);
    Ok((run, report))
}

pub fn containment(run: &RunOutput, samples: usize, seed: u64) -> ContainmentReport {
    let s = &run.scenario;
    let cfg = SimConfig {
        dt: s.step / 20.0,
        t_end: s.horizon,
        max_jumps: 200,
    };
    containment_test(
        &run.case.automaton,
        &run.case.initial,
        L1,
        &run.case.inputs,
        &run.result.timed_sets(),
        &time_grid(s),
        samples,
        seed,
        &cfg,
    )
}

/// All methods over the grid. Cells run one after another so that wall
/// times are comparable.
pub fn run_bench(base: &Scenario, masses: &[f64], speeds: &[f64]) -> Vec<CellSummary> {
    let mut out = Vec::new();
    for &m in masses {
        for &v in speeds {
            for method in Method::ALL {
                out.push(run_cell(base, m, v, method, &|_: &RunOutput| Ok(())));
            }
        }
    }
    out
}

/// Method table: one row per cell, one column pair per method.
pub fn method_table(cells: &[CellSummary], value: impl Fn(&CellSummary, usize) -> Option<f64>) -> String {
    let mut out = String::from("mass,speed");
    for method in Method::ALL {
        for order in TABLE_ORDERS {
            out.push_str(&format!(",{method}_{order}"));
        }
    }
    out.push('\n');
    let mut keys: Vec<(f64, f64)> = Vec::new();
    for c in cells {
        if !keys.contains(&(c.mass, c.speed)) {
            keys.push((c.mass, c.speed));
        }
    }
    for (m, v) in keys {
        out.push_str(&format!("{m},{v}"));
        for method in Method::ALL {
            let cell = cells.iter().find(|c| c.mass == m && c.speed == v && c.method == method);
            for order in TABLE_ORDERS {
                let text = match cell {
                    None => String::new(),
                    Some(c) if c.failed() => "failed".to_string(),
                    Some(c) => opt(value(c, order)),
                };
                out.push(',');
                out.push_str(&text);
            }
        }
        out.push('\n');
    }
    out
}

pub fn measure_table(cells: &[CellSummary]) -> String {
    method_table(cells, |c, k| c.measure_at(k).map(|m| m * 1e3))
}

pub fn time_table(cells: &[CellSummary]) -> String {
    method_table(cells, |c, k| c.time_at(k))
}

/// Qualitative comparisons between methods, reported but not enforced.
#[derive(Debug, Clone, Serialize)]
pub struct Trends {
    /// (cell, order) pairs with speed ≥ 0.2 where TSM and scaling both
    /// produced a measure.
    pub tsm_vs_scaling_pairs: usize,
    pub tsm_le_scaling_pairs: usize,
    pub tsm_le_scaling_fraction: Option<f64>,
    /// Third intersections at speed 0.1 in trinal runs, where both component
    /// enclosures exist.
    pub low_speed_third: usize,
    pub low_speed_third_tsm_worse: usize,
}

pub fn trends(cells: &[CellSummary]) -> Trends {
    let mut pairs = 0;
    let mut better = 0;
    for c in cells.iter().filter(|c| c.method == Method::Tsm && c.speed >= 0.2 - 1e-12) {
        let Some(sc) = cells
            .iter()
            .find(|o| o.method == Method::Scaling && o.mass == c.mass && o.speed == c.speed)
        else {
            continue;
        };
        for order in TABLE_ORDERS {
            if let (Some(a), Some(b)) = (c.measure_at(order), sc.measure_at(order)) {
                pairs += 1;
                if a <= b {
                    better += 1;
                }
            }
        }
    }
    let mut third = 0;
    let mut worse = 0;
    for c in cells
        .iter()
        .filter(|c| c.method == Method::Trinal && (c.speed - 0.1).abs() < 1e-12)
    {
        for r in c.intersections.iter().filter(|r| r.order == 3) {
            if let (Some(g), Some(t)) = (r.geometric_measure, r.tsm_measure) {
                third += 1;
                if t > g {
                    worse += 1;
                }
            }
        }
    }
    Trends {
        tsm_vs_scaling_pairs: pairs,
        tsm_le_scaling_pairs: better,
        tsm_le_scaling_fraction: (pairs > 0).then(|| better as f64 / pairs as f64),
        low_speed_third: third,
        low_speed_third_tsm_worse: worse,
    }
}
