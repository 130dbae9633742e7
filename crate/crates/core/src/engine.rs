//! Hybrid reachability: location visits, guard hits, intersections, jumps
//! and optional time synchronization after wide hit windows.

use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::automaton::{HybridAutomaton, Transition};
use crate::constrained::ConstrainedZonotope;
use crate::error::{ReachError, Result};
use crate::guard::{intersect, intersection_measure, prune_with_invariant, IntersectionJob, Method, Tuning};
use crate::input::InputModel;
use crate::interval::{Interval, IntervalVector};
use crate::par;
use crate::reach_linear::{outside_invariant, Halt, LinearStepper};
use crate::sim::TimedSet;
use crate::switching::{pair_step, LocationPair};
use crate::zonotope::{HalfSpace, Hyperplane, Zonotope};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyncMode {
    /// Keep the synchronized and the unsynchronized continuation.
    Both,
    #[serde(rename = "synced")]
    SyncedOnly,
    #[serde(rename = "unsynced")]
    UnsyncedOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub dt: f64,
    pub t_end: f64,
    pub method: Method,
    pub tuning: Tuning,
    pub max_order: f64,
    /// Hit windows wider than this get synchronized; `None` means `2·dt`.
    pub sync_threshold: Option<f64>,
    pub sync_mode: SyncMode,
    pub max_jumps: usize,
    pub max_branches: usize,
    pub max_hit_steps: usize,
}

impl EngineConfig {
    pub fn new(dt: f64, t_end: f64, method: Method) -> Self {
        EngineConfig {
            dt,
            t_end,
            method,
            tuning: Tuning::default(),
            max_order: 20.0,
            sync_threshold: None,
            sync_mode: SyncMode::Both,
            max_jumps: 12,
            max_branches: 256,
            max_hit_steps: 2000,
        }
    }

    pub fn sync_threshold(&self) -> f64 {
        self.sync_threshold.unwrap_or(2.0 * self.dt)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.t_end > 0.0) || !(self.max_order >= 1.0) {
            return Err(ReachError::InvalidArgument(
                "step, horizon and order must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ReachEntry {
    pub location: usize,
    /// Other location of a switching pair when propagated jointly.
    pub partner: Option<usize>,
    pub time_point: Zonotope,
    pub time_interval: Zonotope,
    /// Clock range of the time-interval set.
    pub clock: Interval,
}

#[derive(Debug, Clone)]
pub struct IntersectionRecord {
    pub transition: String,
    pub source: usize,
    pub target: usize,
    /// Number of jumps from the root including this one.
    pub order: usize,
    pub method: Method,
    pub first_step: usize,
    pub last_step: usize,
    /// Clock range covered by the hit sets.
    pub hit_window: Interval,
    /// Enclosure returned by the method, before pruning.
    pub raw: Option<IntervalVector>,
    /// After pruning with the source invariant and side conditions.
    pub pruned: Option<IntervalVector>,
    pub measure: Option<f64>,
    pub geometric_measure: Option<f64>,
    pub tsm_measure: Option<f64>,
    pub fallback: Option<String>,
    pub wall_time: f64,
}

impl IntersectionRecord {
    pub fn clock(&self, clock_index: usize) -> Option<Interval> {
        self.pruned.as_ref().map(|b| b.get(clock_index))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchKind {
    Root,
    Jump,
    Synced,
    Unsynced,
}

/// What follows a successful intersection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Outcome {
    Single(usize),
    /// Two enclosures of the same continuation; either being safe suffices.
    Alternatives { synced: usize, unsynced: usize },
}

#[derive(Debug, Clone)]
pub struct Branch {
    pub id: usize,
    pub parent: Option<usize>,
    pub kind: BranchKind,
    pub location: usize,
    pub depth: usize,
    pub start: Zonotope,
    pub entries: Vec<ReachEntry>,
    pub halt: Halt,
    pub intersections: Vec<IntersectionRecord>,
    /// One per entry of `intersections` with a nonempty pruned set.
    pub outcomes: Vec<Outcome>,
    /// Set when a synchronization was abandoned.
    pub sync_note: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ReachResult {
    pub branches: Vec<Branch>,
    pub clock_index: usize,
    pub wall_time: f64,
}

impl ReachResult {
    pub fn root(&self) -> &Branch {
        &self.branches[0]
    }

    /// Ids of `id` and all its descendants.
    pub fn subtree(&self, id: usize) -> Vec<usize> {
        let mut out = vec![id];
        let mut i = 0;
        while i < out.len() {
            let b = &self.branches[out[i]];
            for o in &b.outcomes {
                match *o {
                    Outcome::Single(c) => out.push(c),
                    Outcome::Alternatives { synced, unsynced } => {
                        out.push(synced);
                        out.push(unsynced);
                    }
                }
            }
            i += 1;
        }
        out
    }

    pub fn intersections(&self) -> impl Iterator<Item = (&Branch, &IntersectionRecord)> {
        self.branches.iter().flat_map(|b| b.intersections.iter().map(move |r| (b, r)))
    }

    /// All time-interval sets tagged with their branch.
    pub fn timed_sets(&self) -> Vec<TimedSet> {
        self.branches
            .iter()
            .flat_map(|b| {
                b.entries.iter().map(move |e| TimedSet {
                    branch: b.id,
                    location: e.location,
                    clock: e.clock,
                    set: e.time_interval.clone(),
                })
            })
            .collect()
    }
}

/// Work item for one location visit.
#[derive(Debug, Clone)]
struct Visit {
    parent: Option<usize>,
    kind: BranchKind,
    location: usize,
    /// Set when entered through one side of a switching pair.
    pair: Option<LocationPair>,
    depth: usize,
    start: Zonotope,
    prefix: Vec<ReachEntry>,
}

/// Continuations produced for one intersection.
enum Spawn {
    Single(Visit),
    Pair { synced: Visit, unsynced: Visit },
}

struct VisitOutput {
    branch: Branch,
    spawns: Vec<Spawn>,
}

/// Contiguous runs of steps whose time-interval set meets the guard and its
/// side conditions.
pub fn detect_guard_hits(sets: &[Zonotope], tr: &Transition, max_run: usize) -> Result<Vec<(usize, usize)>> {
    let mut runs = Vec::new();
    let mut open: Option<usize> = None;
    for (k, z) in sets.iter().enumerate() {
        let hit = meets_guard(z, &tr.guard, &tr.side_conditions)?;
        match (hit, open) {
            (true, None) => open = Some(k),
            (false, Some(s)) => {
                runs.push((s, k - 1));
                open = None;
            }
            _ => {}
        }
        if let Some(s) = open {
            if k + 1 - s > max_run {
                return Err(ReachError::UnboundedHit(max_run));
            }
        }
    }
    if let Some(s) = open {
        runs.push((s, sets.len() - 1));
    }
    Ok(runs)
}

/// Whether `z ∩ guard ∩ side` is nonempty.
pub fn meets_guard(z: &Zonotope, guard: &Hyperplane, side: &[HalfSpace]) -> Result<bool> {
    if !guard.touches(z) {
        return Ok(false);
    }
    if side.iter().all(|h| h.contains_set(z)) {
        return Ok(true);
    }
    if side.iter().any(|h| !h.intersects(z)) {
        return Ok(false);
    }
    let cz = ConstrainedZonotope::from(z).intersect_hyperplane(guard)?;
    match cz.intersect_halfspaces(side)? {
        None => Ok(false),
        Some(c) => Ok(!c.is_empty()?),
    }
}

/// States at clock value `t` of the given time-interval sets, boxed, with
/// the clock pinned to `t`.
pub fn sync_time(sets: &[Zonotope], t: f64, clock_index: usize) -> Result<Zonotope> {
    let n = sets.first().map(|z| z.dim()).ok_or(ReachError::EmptyInitialSet)?;
    let plane = Hyperplane::axis(n, clock_index, t);
    let mut acc: Option<IntervalVector> = None;
    for z in sets {
        let c = z.coordinate_range(clock_index);
        if c.lo > t + 1e-12 || c.hi < t - 1e-12 {
            continue;
        }
        let slice = if c.width() == 0.0 {
            Some(z.interval_hull())
        } else {
            ConstrainedZonotope::from(z).intersect_hyperplane(&plane)?.interval_hull()?
        };
        if let Some(b) = slice {
            acc = Some(match acc {
                Some(a) => a.hull(&b),
                None => b,
            });
        }
    }
    let mut b = acc.ok_or_else(|| ReachError::Inconsistent(format!("no set reaches clock value {t}")))?;
    b.set(clock_index, Interval::point(t));
    Ok(Zonotope::from_box(&b))
}

/// Linear-program feasibility of `z ∩ halfspaces`, with the maximum of `dir`.
pub fn max_over(z: &Zonotope, dir: &DVector<f64>, halfspaces: &[HalfSpace]) -> Result<Option<f64>> {
    let Some(cz) = ConstrainedZonotope::from(z).intersect_halfspaces(halfspaces)? else {
        return Ok(None);
    };
    if cz.num_constraints() == 0 {
        return Ok(Some(z.range_along(dir).hi));
    }
    Ok(cz.range_along(dir)?.map(|(_, hi)| hi))
}

struct Engine<'a> {
    ha: &'a HybridAutomaton,
    inputs: &'a InputModel,
    cfg: &'a EngineConfig,
}

impl Engine<'_> {
    /// Steps from the visit start, switching from paired to single-location
    /// propagation once the set leaves the shared guard.
    fn propagate(&self, v: &Visit) -> Result<(Vec<ReachEntry>, Halt)> {
        let ci = self.ha.clock_index;
        let dt = self.cfg.dt;
        let mut pair = v.pair.clone();
        let mut location = v.location;
        let mut steppers: Vec<Option<LinearStepper>> = vec![None; self.ha.locations.len()];
        let mut cur = v.start.clone();
        let mut entries = Vec::new();
        let halt = loop {
            if pair.is_none() && outside_invariant(&cur, &self.ha.locations[location].invariant) {
                break if entries.is_empty() {
                    Halt::InitialOutside
                } else {
                    Halt::LeftInvariant
                };
            }
            if cur.coordinate_range(ci).lo >= self.cfg.t_end - 1e-12 {
                break Halt::Horizon;
            }
            let s = match &pair {
                Some(p) => pair_step(self.ha, p, &cur, self.inputs, dt, self.cfg.max_order)?,
                None => {
                    if steppers[location].is_none() {
                        steppers[location] =
                            Some(LinearStepper::new(&self.ha.locations[location].flow, dt, self.cfg.max_order)?);
                    }
                    let u = self.inputs.unify(&cur, dt, ci);
                    steppers[location].as_ref().expect("just built").step(&cur, &u, None)?
                }
            };
            entries.push(ReachEntry {
                location,
                partner: pair.as_ref().map(|p| p.outer),
                clock: s.time_interval.coordinate_range(ci),
                time_point: s.time_point.clone(),
                time_interval: s.time_interval,
            });
            cur = s.time_point;
            if let Some(side) = pair.as_ref().and_then(|p| p.side_of(&cur)) {
                location = side;
                pair = None;
            }
        };
        Ok((entries, halt))
    }

    fn visit(&self, mut v: Visit) -> Result<VisitOutput> {
        let (steps, halt) = self.propagate(&v)?;
        let ti: Vec<Zonotope> = steps.iter().map(|e| e.time_interval.clone()).collect();

        let mut intersections = Vec::new();
        let mut spawns = Vec::new();
        let mut sync_note = None;
        let mut seg_start = 0;
        while seg_start < steps.len() {
            let (location, partner) = (steps[seg_start].location, steps[seg_start].partner);
            let mut seg_end = seg_start;
            while seg_end + 1 < steps.len()
                && steps[seg_end + 1].location == location
                && steps[seg_end + 1].partner == partner
            {
                seg_end += 1;
            }
            // In paired mode the switches inside the pair are part of the
            // flow; other transitions of both locations still apply.
            let mut candidates: Vec<(usize, &Transition)> = self.ha.locations[location]
                .transitions
                .iter()
                .map(|t| (location, t))
                .collect();
            if let (Some(other), Some(p)) = (partner, v.pair.as_ref()) {
                candidates.extend(self.ha.locations[other].transitions.iter().map(|t| (other, t)));
                candidates.retain(|(src, t)| !p.is_internal(*src, t));
            }
            for (source, tr) in candidates {
                for (first, last) in detect_guard_hits(&ti[seg_start..=seg_end], tr, self.cfg.max_hit_steps)? {
                    let (first, last) = (first + seg_start, last + seg_start);
                    let pre_hit = if first == 0 {
                        &v.start
                    } else {
                        &steps[first - 1].time_point
                    };
                    let (record, next) =
                        self.intersect_one(&v, source, partner.is_some(), tr, &ti[first..=last], pre_hit, first, last)?;
                    intersections.push(record);
                    if let Some(set) = next {
                        let (spawn, note) = self.continuation(&v, source, tr, set)?;
                        if note.is_some() {
                            sync_note = note;
                        }
                        spawns.push(spawn);
                    }
                }
            }
            seg_start = seg_end + 1;
        }
        let mut entries = std::mem::take(&mut v.prefix);
        entries.extend(steps);
        Ok(VisitOutput {
            branch: Branch {
                id: usize::MAX,
                parent: v.parent,
                kind: v.kind,
                location: v.location,
                depth: v.depth,
                start: v.start,
                entries,
                halt,
                intersections,
                outcomes: Vec::new(),
                sync_note,
            },
            spawns,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn intersect_one(
        &self,
        v: &Visit,
        source: usize,
        paired: bool,
        tr: &Transition,
        hit_sets: &[Zonotope],
        pre_hit: &Zonotope,
        first: usize,
        last: usize,
    ) -> Result<(IntersectionRecord, Option<Zonotope>)> {
        let ci = self.ha.clock_index;
        let loc = &self.ha.locations[source];
        let job = IntersectionJob {
            flow: &loc.flow,
            guard: &tr.guard,
            hit_sets,
            pre_hit,
            inputs: self.inputs,
            clock_index: ci,
            dt: self.cfg.dt,
            max_order: self.cfg.max_order,
            tuning: &self.cfg.tuning,
        };
        let started = Instant::now();
        // The flow-based methods assume a single location's dynamics.
        let mut out = intersect(&job, if paired { Method::Geometric } else { self.cfg.method })?;
        if paired && self.cfg.method != Method::Geometric {
            out.fallback = Some("geometric: hit sets follow switching dynamics".into());
        }
        let wall_time = started.elapsed().as_secs_f64();

        let mut constraints = loc.invariant.clone();
        constraints.extend(tr.side_conditions.iter().cloned());
        let pruned = match &out.set {
            Some(b) => prune_with_invariant(b, &constraints)?,
            None => None,
        };
        let hit_window = hit_sets
            .iter()
            .map(|z| z.coordinate_range(ci))
            .reduce(|a, b| a.hull(&b))
            .expect("hit runs are nonempty");
        let measure = |b: &Option<IntervalVector>| b.as_ref().map(|b| intersection_measure(b, &tr.guard));
        let record = IntersectionRecord {
            transition: tr.label.clone(),
            source,
            target: tr.target,
            order: v.depth + 1,
            method: self.cfg.method,
            first_step: first,
            last_step: last,
            hit_window,
            measure: measure(&out.set),
            geometric_measure: measure(&out.geometric),
            tsm_measure: measure(&out.tsm),
            raw: out.set,
            pruned: pruned.clone(),
            fallback: out.fallback,
            wall_time,
        };
        let next = match pruned {
            Some(b) => Some(tr.apply_jump(&Zonotope::from_box(&b))?),
            None => None,
        };
        Ok((record, next))
    }

    fn continuation(&self, v: &Visit, source: usize, tr: &Transition, set: Zonotope) -> Result<(Spawn, Option<String>)> {
        let depth = v.depth + 1;
        if depth > self.cfg.max_jumps {
            return Err(ReachError::JumpLimit(self.cfg.max_jumps));
        }
        let pair = LocationPair::find(self.ha, source, tr);
        let plain = |kind| Visit {
            parent: None,
            kind,
            location: tr.target,
            pair: pair.clone(),
            depth,
            start: set.clone(),
            prefix: Vec::new(),
        };
        let width = set.coordinate_range(self.ha.clock_index).width();
        if width <= self.cfg.sync_threshold() || self.cfg.sync_mode == SyncMode::UnsyncedOnly {
            return Ok((Spawn::Single(plain(BranchKind::Jump)), None));
        }
        match self.synchronize(tr.target, pair.as_ref(), &set)? {
            Err(note) => Ok((Spawn::Single(plain(BranchKind::Jump)), Some(note))),
            Ok((synced_set, prefix)) => {
                let synced = Visit {
                    parent: None,
                    kind: BranchKind::Synced,
                    location: tr.target,
                    pair: pair.clone(),
                    depth,
                    start: synced_set,
                    prefix,
                };
                if self.cfg.sync_mode == SyncMode::SyncedOnly {
                    Ok((Spawn::Single(synced), None))
                } else {
                    Ok((
                        Spawn::Pair {
                            synced,
                            unsynced: plain(BranchKind::Unsynced),
                        },
                        None,
                    ))
                }
            }
        }
    }

    /// Propagates `set` in `location` over its clock width and slices at the
    /// latest clock value. Gives up (inner `Err`) if a guard of the location
    /// is reached before that instant.
    #[allow(clippy::type_complexity)]
    fn synchronize(
        &self,
        location: usize,
        pair: Option<&LocationPair>,
        set: &Zonotope,
    ) -> Result<std::result::Result<(Zonotope, Vec<ReachEntry>), String>> {
        let ci = self.ha.clock_index;
        let clock = set.coordinate_range(ci);
        let t_l = clock.hi;
        let steps = (clock.width() / self.cfg.dt).ceil().max(1.0) as usize;
        let h = clock.width() / steps as f64;
        // Switching back across a pair guard also ends the attempt.
        let mut guards: Vec<&Transition> = self.ha.locations[location].transitions.iter().collect();
        if let Some(p) = pair {
            guards.extend(self.ha.locations[p.outer].transitions.iter().filter(|t| t.target != location));
        }
        let stepper = match pair {
            Some(_) => None,
            None => Some(LinearStepper::new(&self.ha.locations[location].flow, h, self.cfg.max_order)?),
        };
        let mut cur = set.clone();
        let mut prefix = Vec::new();
        let mut sets = Vec::new();
        for _ in 0..steps {
            let s = match (&stepper, pair) {
                (Some(st), _) => st.step(&cur, &self.inputs.unify(&cur, h, ci), None)?,
                (None, Some(p)) => pair_step(self.ha, p, &cur, self.inputs, h, self.cfg.max_order)?,
                (None, None) => unreachable!("a stepper exists without a pair"),
            };
            let c = s.time_interval.coordinate_range(ci);
            if c.lo <= t_l {
                for tr in &guards {
                    if meets_guard(&s.time_interval, &tr.guard, &tr.side_conditions)? {
                        return Ok(Err(format!(
                            "synchronization at t = {t_l} skipped: guard {} reached first",
                            tr.label
                        )));
                    }
                }
                prefix.push(ReachEntry {
                    location,
                    partner: pair.map(|p| p.outer),
                    time_point: s.time_point.clone(),
                    time_interval: s.time_interval.clone(),
                    clock: c,
                });
            }
            sets.push(s.time_interval);
            cur = s.time_point;
        }
        let synced = sync_time(&sets, t_l, ci)?;
        // The boxed slice may already sit on an exit guard.
        for tr in &guards {
            if meets_guard(&synced, &tr.guard, &tr.side_conditions)? {
                return Ok(Err(format!(
                    "synchronization at t = {t_l} skipped: synchronized set meets guard {}",
                    tr.label
                )));
            }
        }
        Ok(Ok((synced, prefix)))
    }
}

/// Reachable sets of `ha` from `x0` in `start_location`.
pub fn run_automaton(
    ha: &HybridAutomaton,
    x0: &Zonotope,
    start_location: usize,
    inputs: &InputModel,
    cfg: &EngineConfig,
) -> Result<ReachResult> {
    cfg.validate()?;
    if x0.dim() != ha.dim() {
        return Err(ReachError::dims("initial set", ha.dim(), x0.dim()));
    }
    if start_location >= ha.locations.len() {
        return Err(ReachError::InvalidArgument(format!("no location {start_location}")));
    }
    if ha.locations[start_location]
        .invariant
        .iter()
        .any(|h| !h.contains_set(x0))
    {
        return Err(ReachError::InvalidArgument(
            "initial set not inside the start invariant".into(),
        ));
    }
    let started = Instant::now();
    let engine = Engine { ha, inputs, cfg };
    let mut branches: Vec<Branch> = Vec::new();
    let mut level = vec![Visit {
        parent: None,
        kind: BranchKind::Root,
        location: start_location,
        pair: None,
        depth: 0,
        start: x0.clone(),
        prefix: Vec::new(),
    }];
    while !level.is_empty() {
        let outputs = par::map(&level, |v| engine.visit(v.clone()));
        let mut next = Vec::new();
        for out in outputs {
            let VisitOutput { mut branch, spawns } = out?;
            let id = branches.len();
            branch.id = id;
            branches.push(branch);
            // Children get ids in spawn order once this level is stored.
            for s in spawns {
                next.push((id, s));
            }
        }
        let mut visits = Vec::new();
        let mut id = branches.len();
        for (parent, s) in next {
            match s {
                Spawn::Single(mut v) => {
                    v.parent = Some(parent);
                    branches[parent].outcomes.push(Outcome::Single(id));
                    visits.push(v);
                    id += 1;
                }
                Spawn::Pair {
                    mut synced,
                    mut unsynced,
                } => {
                    synced.parent = Some(parent);
                    unsynced.parent = Some(parent);
                    branches[parent].outcomes.push(Outcome::Alternatives {
                        synced: id,
                        unsynced: id + 1,
                    });
                    visits.push(synced);
                    visits.push(unsynced);
                    id += 2;
                }
            }
        }
        if id > cfg.max_branches {
            return Err(ReachError::BranchLimit(cfg.max_branches));
        }
        level = visits;
    }
    Ok(ReachResult {
        branches,
        clock_index: ha.clock_index,
        wall_time: started.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::Location;
    use crate::reach_linear::{reach_affine_until, AffineFlow};
    use nalgebra::DMatrix;

    fn const_flow(v: f64) -> AffineFlow {
        AffineFlow::new(
            DMatrix::zeros(2, 2),
            DMatrix::zeros(2, 1),
            DVector::from_row_slice(&[v, 1.0]),
        )
        .unwrap()
    }

    fn zero_inputs() -> InputModel {
        InputModel::new(vec![DVector::zeros(1)], 1.0, 0.0, Zonotope::point(DVector::zeros(1))).unwrap()
    }

    #[test]
    fn scalar_single_step_hit() {
        let tr = Transition::identity("t", Hyperplane::axis(2, 0, 0.0).flipped(), vec![], 0);
        let sets = vec![
            Zonotope::from_box(&IntervalVector::new(
                DVector::from_row_slice(&[0.3, 0.0]),
                DVector::from_row_slice(&[0.4, 0.1]),
            ).unwrap()),
            Zonotope::from_box(&IntervalVector::new(
                DVector::from_row_slice(&[-0.1, 0.1]),
                DVector::from_row_slice(&[0.2, 0.2]),
            ).unwrap()),
            Zonotope::from_box(&IntervalVector::new(
                DVector::from_row_slice(&[-0.5, 0.2]),
                DVector::from_row_slice(&[-0.3, 0.3]),
            ).unwrap()),
        ];
        assert_eq!(detect_guard_hits(&sets, &tr, 10).unwrap(), vec![(1, 1)]);
        assert!(matches!(detect_guard_hits(&sets[1..2], &tr, 0), Err(ReachError::UnboundedHit(0))));
    }

    #[test]
    fn side_condition_blocks_hit() {
        let side = vec![HalfSpace::axis(2, 1, 5.0, false)];
        let z = Zonotope::from_diagonal(DVector::from_row_slice(&[0.0, 1.0]), &[0.1, 0.5]).unwrap();
        assert!(!meets_guard(&z, &Hyperplane::axis(2, 0, 0.0), &side).unwrap());
        assert!(meets_guard(&z, &Hyperplane::axis(2, 0, 0.0), &[]).unwrap());
    }

    #[test]
    fn sync_pins_clock() {
        let z = Zonotope::from_diagonal(DVector::from_row_slice(&[1.0, 0.5]), &[0.2, 0.0]).unwrap();
        let s = sync_time(std::slice::from_ref(&z), 0.5, 1).unwrap();
        let h = s.interval_hull();
        assert_eq!(h.get(1).width(), 0.0);
        assert!((h.get(0).lo - 0.8).abs() < 1e-12 && (h.get(0).hi - 1.2).abs() < 1e-12);
        // Sheared set: x = t, slice at t = 0.25 is x = 0.25.
        let sheared = Zonotope::new(
            DVector::from_row_slice(&[0.5, 0.5]),
            DMatrix::from_row_slice(2, 1, &[0.5, 0.5]),
        )
        .unwrap();
        let s = sync_time(&[sheared], 0.25, 1).unwrap().interval_hull();
        assert!(s.get(0).width() < 1e-9 && (s.get(0).lo - 0.25).abs() < 1e-9);
        assert!(sync_time(&[z], 3.0, 1).is_err());
    }

    #[test]
    fn single_location_matches_plain_reach() {
        let loc = Location {
            name: "only".into(),
            flow: const_flow(1.0),
            invariant: vec![],
            transitions: vec![],
        };
        let ha = HybridAutomaton::new(vec![loc], 1).unwrap();
        let x0 = Zonotope::from_diagonal(DVector::zeros(2), &[0.1, 0.0]).unwrap();
        let cfg = EngineConfig::new(0.1, 1.0, Method::Geometric);
        let res = run_automaton(&ha, &x0, 0, &zero_inputs(), &cfg).unwrap();
        assert_eq!(res.branches.len(), 1);
        let plain = reach_affine_until(
            &ha.locations[0].flow,
            &x0,
            |_| Ok(Zonotope::point(DVector::zeros(1))),
            &[],
            0.1,
            1.0,
            1,
            20.0,
        )
        .unwrap();
        assert_eq!(res.root().entries.len(), plain.steps.len());
        for (e, s) in res.root().entries.iter().zip(&plain.steps) {
            assert_eq!(e.time_interval, s.time_interval);
        }
    }

    #[test]
    fn two_location_toy() {
        // ẋ = 1 until x = 1, then ẋ = −1.
        let up = Location {
            name: "up".into(),
            flow: const_flow(1.0),
            invariant: vec![HalfSpace::axis(2, 0, 1.0, true)],
            transitions: vec![Transition::identity("up-down", Hyperplane::axis(2, 0, 1.0), vec![], 1)],
        };
        let down = Location {
            name: "down".into(),
            flow: const_flow(-1.0),
            invariant: vec![],
            transitions: vec![],
        };
        let ha = HybridAutomaton::new(vec![up, down], 1).unwrap();
        let x0 = Zonotope::from_diagonal(DVector::from_row_slice(&[0.2, 0.0]), &[0.05, 0.0]).unwrap();
        let mut cfg = EngineConfig::new(0.05, 2.0, Method::Geometric);
        cfg.sync_mode = SyncMode::Both;
        let res = run_automaton(&ha, &x0, 0, &zero_inputs(), &cfg).unwrap();
        let rec = &res.root().intersections[0];
        let pruned = rec.pruned.as_ref().unwrap();
        assert!((pruned.get(0).lo - 1.0).abs() < 1e-9 && (pruned.get(0).hi - 1.0).abs() < 1e-9);
        // Crossing times are 1 − x₀ ∈ [0.75, 0.85].
        assert!(pruned.get(1).lo <= 0.75 + 1e-9 && pruned.get(1).hi >= 0.85 - 1e-9);
        assert!(res.branches.len() >= 2);
        let last = res.branches.last().unwrap().entries.last().unwrap();
        assert!(last.time_interval.interval_hull().get(0).hi < 1.0);
    }
}
