//! Run exports.
//!
//! `envelope.csv` has one row per time-interval set:
//!
//! ```text
//! t_lo,t_hi,location,branch,z_lo,z_hi,zdot_lo,zdot_hi,zhat_lo,zhat_hi,zhatdot_lo,zhatdot_hi,clock_lo,clock_hi,force_lo,force_hi
//! ```
//!
//! `location` is a location name, or two names joined by `+` for sets
//! propagated jointly across a switching surface.
//!
//! `sets.dump` is line oriented:
//!
//! ```text
//! dump 1
//! dim <n>
//! set <branch> <step> <location> <partner or -> <generator count>
//! c <n numbers>
//! g <n numbers>        one line per generator
//! ```
//!
//! All reals are written with 17 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::json;

use crate::contact::entry_force_range;
use crate::engine::{Outcome, ReachEntry};
use crate::error::{ReachError, Result};
use crate::runner::RunOutput;
use crate::sim::ContainmentReport;
use crate::zonotope::Zonotope;

pub const ENVELOPE_HEADER: &str = "t_lo,t_hi,location,branch,z_lo,z_hi,zdot_lo,zdot_hi,zhat_lo,zhat_hi,\
zhatdot_lo,zhatdot_hi,clock_lo,clock_hi,force_lo,force_hi";

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn location_label(run: &RunOutput, e: &ReachEntry) -> String {
    let names = &run.case.automaton.locations;
    match e.partner {
        Some(p) => format!("{}+{}", names[e.location].name, names[p].name),
        None => names[e.location].name.clone(),
    }
}

pub fn envelope_csv(run: &RunOutput) -> String {
    let mut out = String::from(ENVELOPE_HEADER);
    out.push('\n');
    for b in &run.result.branches {
        for e in &b.entries {
            let h = e.time_interval.interval_hull();
            let f = entry_force_range(&run.case.params, e);
            let _ = write!(
                out,
                "{},{},{},{}",
                num(e.clock.lo),
                num(e.clock.hi),
                location_label(run, e),
                b.id
            );
            for iv in h.intervals() {
                let _ = write!(out, ",{},{}", num(iv.lo), num(iv.hi));
            }
            let _ = writeln!(out, ",{},{}", num(f.lo), num(f.hi));
        }
    }
    out
}

#[derive(Serialize)]
struct BranchMeta {
    id: usize,
    parent: Option<usize>,
    kind: crate::engine::BranchKind,
    location: String,
    depth: usize,
    steps: usize,
    halt: String,
    outcomes: Vec<Outcome>,
    sync_note: Option<String>,
}

#[derive(Serialize)]
struct RecordMeta<'a> {
    branch: usize,
    transition: &'a str,
    order: usize,
    method: crate::guard::Method,
    first_step: usize,
    last_step: usize,
    hit_window: [f64; 2],
    reached: bool,
    measure: Option<f64>,
    geometric_measure: Option<f64>,
    tsm_measure: Option<f64>,
    fallback: Option<&'a str>,
    wall_time: f64,
}

/// Structured description of a run; `check` adds the containment result.
pub fn metadata(run: &RunOutput, check: Option<(&ContainmentReport, u64)>) -> serde_json::Value {
    let names = &run.case.automaton.locations;
    let branches: Vec<BranchMeta> = run
        .result
        .branches
        .iter()
        .map(|b| BranchMeta {
            id: b.id,
            parent: b.parent,
            kind: b.kind,
            location: names[b.location].name.clone(),
            depth: b.depth,
            steps: b.entries.len(),
            halt: format!("{:?}", b.halt),
            outcomes: b.outcomes.clone(),
            sync_note: b.sync_note.clone(),
        })
        .collect();
    let records: Vec<RecordMeta> = run
        .result
        .intersections()
        .map(|(b, r)| RecordMeta {
            branch: b.id,
            transition: &r.transition,
            order: r.order,
            method: r.method,
            first_step: r.first_step,
            last_step: r.last_step,
            hit_window: [r.hit_window.lo, r.hit_window.hi],
            reached: r.pruned.is_some(),
            measure: r.measure,
            geometric_measure: r.geometric_measure,
            tsm_measure: r.tsm_measure,
            fallback: r.fallback.as_deref(),
            wall_time: r.wall_time,
        })
        .collect();
    let mut doc = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "parallel": crate::par::is_parallel(),
        "scenario": run.scenario,
        "params": run.case.params,
        "verdict": run.safety.verdict,
        "safety": run.safety,
        "wall_time": run.wall_time,
        "branches": branches,
        "intersections": records,
    });
    if let Some((report, seed)) = check {
        doc["containment"] = json!({
            "seed": seed,
            "samples": report.samples,
            "checks": report.checks,
            "violations": report.violations.len(),
            "failed_simulations": report.failed_simulations,
            "first_violations": report.violations.iter().take(20).collect::<Vec<_>>(),
        });
    }
    doc
}

pub fn dump(run: &RunOutput) -> String {
    let n = run.case.automaton.dim();
    let mut out = format!("dump 1\ndim {n}\n");
    for b in &run.result.branches {
        for (k, e) in b.entries.iter().enumerate() {
            let z = &e.time_interval;
            let partner = e.partner.map_or("-".to_string(), |p| p.to_string());
            let _ = writeln!(out, "set {} {} {} {} {}", b.id, k, e.location, partner, z.num_generators());
            out.push('c');
            for v in z.center().iter() {
                let _ = write!(out, " {}", num(*v));
            }
            out.push('\n');
            for g in z.generators().column_iter() {
                out.push('g');
                for v in g.iter() {
                    let _ = write!(out, " {}", num(*v));
                }
                out.push('\n');
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct DumpedSet {
    pub branch: usize,
    pub step: usize,
    pub location: usize,
    pub partner: Option<usize>,
    pub set: Zonotope,
}

fn parse_err(line: usize, msg: impl std::fmt::Display) -> ReachError {
    ReachError::InvalidArgument(format!("dump line {line}: {msg}"))
}

fn parse_reals(line: usize, words: &[&str], n: usize) -> Result<Vec<f64>> {
    if words.len() != n {
        return Err(parse_err(line, format!("expected {n} numbers, found {}", words.len())));
    }
    words
        .iter()
        .map(|w| w.parse::<f64>().map_err(|e| parse_err(line, e)))
        .collect()
}

fn parse_index(line: usize, w: &str) -> Result<usize> {
    w.parse().map_err(|e| parse_err(line, e))
}

pub fn parse_dump(text: &str) -> Result<Vec<DumpedSet>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.split_whitespace().collect::<Vec<_>>()));
    let mut next = |what: &str| lines.next().ok_or_else(|| parse_err(0, format!("unexpected end, wanted {what}")));
    let (i, head) = next("header")?;
    if head != ["dump", "1"] {
        return Err(parse_err(i, "not a version 1 dump"));
    }
    let (i, dim) = next("dim")?;
    let n = match dim.as_slice() {
        ["dim", n] => parse_index(i, n)?,
        _ => return Err(parse_err(i, "expected `dim <n>`")),
    };
    let mut out = Vec::new();
    while let Some((i, words)) = lines.next() {
        if words.is_empty() {
            continue;
        }
        let ["set", branch, step, location, partner, gens] = words.as_slice() else {
            return Err(parse_err(i, "expected a `set` line"));
        };
        let partner = match *partner {
            "-" => None,
            p => Some(parse_index(i, p)?),
        };
        let count = parse_index(i, gens)?;
        let (ci, c) = lines.next().ok_or_else(|| parse_err(i, "missing center"))?;
        if c.first() != Some(&"c") {
            return Err(parse_err(ci, "expected a `c` line"));
        }
        let center = DVector::from_vec(parse_reals(ci, &c[1..], n)?);
        let mut g = DMatrix::zeros(n, count);
        for j in 0..count {
            let (gi, words) = lines.next().ok_or_else(|| parse_err(i, "missing generator"))?;
            if words.first() != Some(&"g") {
                return Err(parse_err(gi, "expected a `g` line"));
            }
            g.set_column(j, &DVector::from_vec(parse_reals(gi, &words[1..], n)?));
        }
        out.push(DumpedSet {
            branch: parse_index(i, branch)?,
            step: parse_index(i, step)?,
            location: parse_index(i, location)?,
            partner,
            set: Zonotope::new(center, g)?,
        });
    }
    Ok(out)
}

/// Writes `envelope.csv`, `run.json` and, if asked, `sets.dump` into `dir`.
pub fn write_run(run: &RunOutput, dir: &Path, with_dump: bool) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("envelope.csv"), envelope_csv(run))?;
    let meta = serde_json::to_string_pretty(&metadata(run, None)).expect("metadata serializes");
    fs::write(dir.join("run.json"), meta + "\n")?;
    if with_dump {
        fs::write(dir.join("sets.dump"), dump(run))?;
    }
    Ok(())
}
