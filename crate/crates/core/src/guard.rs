//! Guard intersection: geometric, mapping, scaling, scaling-then-mapping
//! (TSM) and the trinal combination of geometric and TSM.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::constrained::ConstrainedZonotope;
use crate::error::{ReachError, Result};
use crate::input::InputModel;
use crate::interval::{Interval, IntervalVector};
use crate::par;
use crate::reach_linear::{AffineFlow, LinearStepper};
use crate::reach_quadratic::{reach_quadratic_step_windowed, QuadraticFlow};
use crate::zonotope::{box_volume_measure, hcat, HalfSpace, Hyperplane, Zonotope};

/// Widths below this are treated as degenerate by the expansion measure.
pub const DEGENERATE_WIDTH: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Geometric,
    Mapping,
    Scaling,
    Tsm,
    Trinal,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Geometric,
        Method::Mapping,
        Method::Scaling,
        Method::Tsm,
        Method::Trinal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Geometric => "geometric",
            Method::Mapping => "mapping",
            Method::Scaling => "scaling",
            Method::Tsm => "tsm",
            Method::Trinal => "trinal",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = ReachError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| ReachError::InvalidArgument(format!("unknown intersection method `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tuning {
    pub k_s: f64,
    /// Target crossing duration in seconds; `None` uses one coarse step.
    pub r_delta_target: Option<f64>,
    pub r_vol_limit: f64,
    pub refine_factor: usize,
    /// Scaled step is the coarse step divided by this.
    pub scaling_divisor: usize,
    pub max_scaling_steps: usize,
    pub max_refine_steps: usize,
}

impl Default for Tuning {
    fn default() -> Self {
        Tuning {
            k_s: 1.0,
            r_delta_target: None,
            r_vol_limit: 2.0,
            refine_factor: 8,
            scaling_divisor: 4,
            max_scaling_steps: 400,
            max_refine_steps: 4000,
        }
    }
}

/// Inputs shared by all intersection methods.
#[derive(Debug, Clone, Copy)]
pub struct IntersectionJob<'a> {
    pub flow: &'a AffineFlow,
    pub guard: &'a Hyperplane,
    /// Time-interval sets of the steps touching the guard.
    pub hit_sets: &'a [Zonotope],
    /// Time-point set at the start of the first hit step.
    pub pre_hit: &'a Zonotope,
    pub inputs: &'a InputModel,
    pub clock_index: usize,
    pub dt: f64,
    pub max_order: f64,
    pub tuning: &'a Tuning,
}

impl IntersectionJob<'_> {
    /// Latest clock value of the coarse hit sets.
    fn hit_window_end(&self) -> f64 {
        self.hit_sets
            .iter()
            .map(|z| z.coordinate_range(self.clock_index).hi)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Fine-step budget: the tuning cap, extended to cover the whole coarse
    /// hit window from `from`.
    fn refine_limit(&self, from: &Zonotope, fine_dt: f64) -> usize {
        let span = self.hit_window_end() - from.coordinate_range(self.clock_index).lo;
        self.tuning.max_refine_steps.max((span / fine_dt).ceil() as usize + 2)
    }

    fn delta_target(&self) -> f64 {
        self.tuning.r_delta_target.unwrap_or(self.dt)
    }

    fn input_center(&self, z: &Zonotope) -> DVector<f64> {
        let t = z.coordinate_range(self.clock_index);
        self.inputs.window_set(t.lo, t.hi).center().clone()
    }

    fn input_over(&self, sets: &[Zonotope]) -> Zonotope {
        let lo = sets
            .iter()
            .map(|s| s.coordinate_range(self.clock_index).lo)
            .fold(f64::INFINITY, f64::min);
        let hi = sets
            .iter()
            .map(|s| s.coordinate_range(self.clock_index).hi)
            .fold(f64::NEG_INFINITY, f64::max);
        self.inputs.window_set(lo, hi)
    }
}

/// `r^δ`: normal extent over normal speed of the center.
pub fn measure_delta(x: &Zonotope, guard: &Hyperplane, flow: &AffineFlow, u_center: &DVector<f64>) -> Result<f64> {
    let delta = guard.signed_range(x).width();
    let speed = guard.normal().dot(&flow.eval(x.center(), u_center)).abs();
    if !(speed > 0.0) {
        return Err(ReachError::UndefinedMeasure("zero normal speed at the set center"));
    }
    Ok(delta / speed)
}

/// Projector onto the plane perpendicular to `v`.
pub fn flow_projector(v: &DVector<f64>) -> Result<DMatrix<f64>> {
    let nn = v.norm_squared();
    if !(nn > 0.0) {
        return Err(ReachError::UndefinedMeasure("zero flow at the set center"));
    }
    let n = v.len();
    Ok(DMatrix::identity(n, n) - v * v.transpose() / nn)
}

/// `r^v`: ratio of projected volume measures, skipping axes where either
/// projection is degenerate.
pub fn measure_vol_ratio(
    x: &Zonotope,
    reference: &Zonotope,
    flow: &AffineFlow,
    u_center: &DVector<f64>,
) -> Result<f64> {
    let p = flow_projector(&flow.eval(x.center(), u_center))?;
    let wx = x.linear_map(&p)?.interval_hull().widths();
    let wr = reference.linear_map(&p)?.interval_hull().widths();
    let mut log_ratio = 0.0;
    let mut count = 0usize;
    for i in 0..wx.len() {
        if wx[i] < DEGENERATE_WIDTH || wr[i] < DEGENERATE_WIDTH {
            continue;
        }
        log_ratio += wx[i].ln() - wr[i].ln();
        count += 1;
    }
    if count == 0 {
        return Err(ReachError::UndefinedMeasure("all projected widths degenerate"));
    }
    Ok((log_ratio / count as f64).exp())
}

/// Volume measure over all axes except the one most aligned with the guard
/// normal. Sets on the guard are flat along that axis.
pub fn intersection_measure(b: &IntervalVector, guard: &Hyperplane) -> f64 {
    let skip = guard.dominant_axis();
    let items: Vec<Interval> = b.intervals().enumerate().filter(|(i, _)| *i != skip).map(|(_, v)| v).collect();
    box_volume_measure(&IntervalVector::from_intervals(&items))
}

/// Slice of one zonotope with the guard, boxed.
pub fn slice_box(z: &Zonotope, guard: &Hyperplane) -> Result<Option<IntervalVector>> {
    if !guard.touches(z) {
        return Ok(None);
    }
    let cz = ConstrainedZonotope::from(z).intersect_hyperplane(guard)?;
    cz.interval_hull()
}

fn union_boxes(items: impl IntoIterator<Item = IntervalVector>) -> Option<IntervalVector> {
    items.into_iter().reduce(|a, b| a.hull(&b))
}

/// Hull of the guard slices of all hit sets.
pub fn intersect_geometric(hit_sets: &[Zonotope], guard: &Hyperplane) -> Result<Option<IntervalVector>> {
    let slices = par::map(hit_sets, |z| slice_box(z, guard));
    let mut boxes = Vec::new();
    for s in slices {
        if let Some(b) = s? {
            boxes.push(b);
        }
    }
    Ok(union_boxes(boxes))
}

/// Constant-flow abstraction from `start` over `[0, ts]`, sliced by the guard.
///
/// `window` must enclose every state reached before crossing; it bounds the
/// abstraction error.
pub fn intersect_mapping(
    start: &Zonotope,
    flow: &AffineFlow,
    guard: &Hyperplane,
    u: &Zonotope,
    ts: f64,
    window: &[Zonotope],
) -> Result<Option<IntervalVector>> {
    if !(ts > 0.0) {
        return Err(ReachError::MappingInapplicable(format!("horizon {ts} must be positive")));
    }
    let n = flow.dim();
    let w = flow.input_image(u)?;

    // Flow over the window: its normal component must stay positive, and
    // its image under A bounds the drift of the flow along trajectories.
    let mut speed = f64::INFINITY;
    let mut accel: Option<IntervalVector> = None;
    for z in window.iter().chain(std::iter::once(start)) {
        let f = z.linear_map(&flow.a)?.minkowski_sum(&w)?;
        speed = speed.min(f.range_along(guard.normal()).lo);
        let a = f.linear_map(&flow.a)?.interval_hull();
        accel = Some(match accel {
            Some(acc) => acc.hull(&a),
            None => a,
        });
    }
    if !(speed > 0.0) {
        return Err(ReachError::MappingInapplicable(format!(
            "normal speed not bounded away from zero ({speed:e})"
        )));
    }
    let e = accel
        .expect("start is always present")
        .mul_interval(Interval::new(0.0, 0.5 * ts * ts));

    let half = 0.5 * ts;
    let c = start.center();
    let g = start.generators();
    let drift = &flow.a * c + w.center();
    let center = c + &drift * half;
    let main = g + &flow.a * g * half;
    let mut gens = hcat(&main, &DMatrix::from_column_slice(n, 1, (&drift * half).as_slice()));
    gens = hcat(&gens, &(&flow.a * g * half));
    gens = hcat(&gens, &(w.generators() * half));
    gens = hcat(&gens, &(w.generators() * half));
    let abstraction = Zonotope::new(center, gens)?
        .compact()
        .minkowski_sum(&Zonotope::from_box(&e))?;
    slice_box(&abstraction, guard)
}

/// Result of the scaling phase.
#[derive(Debug, Clone)]
pub struct Flattened {
    pub set: Zonotope,
    pub steps: usize,
}

/// Scaled reachability from `pre_hit` until the crossing-time measure
/// reaches its target or the expansion measure its limit.
pub fn reach_until_flat(job: &IntersectionJob<'_>, vol_limit: f64) -> Result<Flattened> {
    let guard = job.guard;
    if guard.signed_range(job.pre_hit).hi >= 0.0 {
        return Err(ReachError::ScalingInapplicable("start set already touches the guard".into()));
    }
    let qf = QuadraticFlow::toward_guard(job.flow, guard, job.pre_hit, job.tuning.k_s)?;
    let dt_s = job.dt / job.tuning.scaling_divisor.max(1) as f64;
    let target = job.delta_target();
    let mut x = job.pre_hit.clone();
    for k in 0..=job.tuning.max_scaling_steps {
        let uc = job.input_center(&x);
        if measure_delta(&x, guard, job.flow, &uc)? <= target {
            return Ok(Flattened { set: x, steps: k });
        }
        if k > 0 && vol_limit.is_finite() && measure_vol_ratio(&x, job.pre_hit, job.flow, &uc)? >= vol_limit {
            return Ok(Flattened { set: x, steps: k });
        }
        if k == job.tuning.max_scaling_steps {
            break;
        }
        let step = reach_quadratic_step_windowed(
            &qf,
            &x,
            |w| job.inputs.window_set(w.lo, w.hi),
            job.clock_index,
            dt_s,
            job.max_order,
        )?;
        // Enclosure growth can push the scaled set onto the guard; the last
        // set clear of it is an equally valid start for the refinement.
        if guard.signed_range(&step.time_point).hi >= 0.0 {
            return Ok(Flattened { set: x, steps: k });
        }
        x = step.time_point;
    }
    Err(ReachError::ScalingLimit(job.tuning.max_scaling_steps))
}

/// Fine-step reach from a flattened set through the guard.
#[derive(Debug, Clone)]
pub struct Refined {
    /// Time-point set at the start of the first guard-touching fine step.
    pub start: Zonotope,
    /// Time-interval sets from that step until the set is past the guard or
    /// past the coarse hit window.
    pub sets: Vec<Zonotope>,
    pub duration: f64,
}

pub fn refine_crossing(
    flow: &AffineFlow,
    guard: &Hyperplane,
    from: &Zonotope,
    inputs: &InputModel,
    clock_index: usize,
    fine_dt: f64,
    until_clock: f64,
    max_steps: usize,
    max_order: f64,
) -> Result<Option<Refined>> {
    if guard.signed_range(from).hi >= 0.0 {
        return Err(ReachError::ScalingInapplicable("flattened set touches the guard".into()));
    }
    let stepper = LinearStepper::new(flow, fine_dt, max_order)?;
    let mut cur = from.clone();
    let mut start: Option<Zonotope> = None;
    let mut sets = Vec::new();
    for _ in 0..max_steps {
        let u = inputs.unify(&cur, fine_dt, clock_index);
        let s = stepper.step(&cur, &u, None)?;
        if start.is_none() && guard.signed_range(&s.time_interval).hi >= 0.0 {
            start = Some(cur.clone());
        }
        if start.is_some() {
            sets.push(s.time_interval.clone());
        }
        let past_window = s.time_point.coordinate_range(clock_index).lo > until_clock;
        if guard.signed_range(&s.time_point).lo > 0.0 || past_window {
            let Some(start) = start else {
                // Every trajectory passes the flattened set before crossing.
                return Ok(None);
            };
            let duration = sets.len() as f64 * fine_dt;
            return Ok(Some(Refined { start, sets, duration }));
        }
        cur = s.time_point;
    }
    Err(ReachError::NoCrossing(max_steps))
}

/// Scaling followed by mapping.
pub fn intersect_tsm(job: &IntersectionJob<'_>) -> Result<Option<IntervalVector>> {
    let flat = reach_until_flat(job, job.tuning.r_vol_limit)?;
    let fine_dt = job.dt / job.tuning.refine_factor.max(1) as f64;
    let refined = refine_crossing(
        job.flow,
        job.guard,
        &flat.set,
        job.inputs,
        job.clock_index,
        fine_dt,
        job.hit_window_end(),
        job.refine_limit(&flat.set, fine_dt),
        job.max_order,
    )?;
    let Some(refined) = refined else {
        return Ok(None);
    };
    let u = job.input_over(&refined.sets);
    intersect_mapping(&refined.start, job.flow, job.guard, &u, refined.duration, &refined.sets)
}

/// Mapping straight from the pre-hit set over the coarse hit window.
pub fn intersect_mapping_only(job: &IntersectionJob<'_>) -> Result<Option<IntervalVector>> {
    if job.guard.signed_range(job.pre_hit).hi >= 0.0 {
        return Err(ReachError::MappingInapplicable("start set already touches the guard".into()));
    }
    let ts = job.hit_sets.len() as f64 * job.dt;
    let u = job.input_over(job.hit_sets);
    intersect_mapping(job.pre_hit, job.flow, job.guard, &u, ts, job.hit_sets)
}

/// Scaling alone: sets of the short crossing window, sliced by the guard.
pub fn intersect_scaling(job: &IntersectionJob<'_>) -> Result<Option<IntervalVector>> {
    let flat = reach_until_flat(job, f64::INFINITY)?;
    let fine_dt = job.dt / job.tuning.refine_factor.max(1) as f64;
    let refined = refine_crossing(
        job.flow,
        job.guard,
        &flat.set,
        job.inputs,
        job.clock_index,
        fine_dt,
        job.hit_window_end(),
        job.refine_limit(&flat.set, fine_dt),
        job.max_order,
    )?;
    let Some(refined) = refined else {
        return Ok(None);
    };
    let hull = union_boxes(refined.sets.iter().map(|z| z.interval_hull())).expect("crossing has sets");
    slice_box(&Zonotope::from_box(&hull), job.guard)
}

/// Per-method enclosures of one intersection.
#[derive(Debug, Clone)]
pub struct IntersectionOutcome {
    pub method: Method,
    /// Enclosure used downstream; `None` means the guard is not reached.
    pub set: Option<IntervalVector>,
    pub geometric: Option<IntervalVector>,
    pub tsm: Option<IntervalVector>,
    /// Why TSM was unavailable when the trinal method fell back.
    pub fallback: Option<String>,
}

pub fn intersect(job: &IntersectionJob<'_>, method: Method) -> Result<IntersectionOutcome> {
    let single = |set: Option<IntervalVector>| IntersectionOutcome {
        method,
        set,
        geometric: None,
        tsm: None,
        fallback: None,
    };
    match method {
        Method::Geometric => {
            let g = intersect_geometric(job.hit_sets, job.guard)?;
            Ok(IntersectionOutcome {
                geometric: g.clone(),
                ..single(g)
            })
        }
        Method::Mapping => Ok(single(intersect_mapping_only(job)?)),
        Method::Scaling => Ok(single(intersect_scaling(job)?)),
        Method::Tsm => {
            let t = intersect_tsm(job)?;
            Ok(IntersectionOutcome {
                tsm: t.clone(),
                ..single(t)
            })
        }
        Method::Trinal => {
            let (g, t) = par::join(|| intersect_geometric(job.hit_sets, job.guard), || intersect_tsm(job));
            let g = g?;
            match t {
                Err(e) => Ok(IntersectionOutcome {
                    method,
                    set: g.clone(),
                    geometric: g,
                    tsm: None,
                    fallback: Some(e.to_string()),
                }),
                Ok(t) => {
                    let set = match (&g, &t) {
                        (Some(a), Some(b)) => Some(a.intersect(b).ok_or_else(|| {
                            ReachError::DisjointEnclosures(format!(
                                "geometric [{:?}, {:?}] vs tsm [{:?}, {:?}]",
                                a.lower().as_slice(),
                                a.upper().as_slice(),
                                b.lower().as_slice(),
                                b.upper().as_slice()
                            ))
                        })?),
                        // One enclosure says the guard is not reached.
                        _ => None,
                    };
                    Ok(IntersectionOutcome {
                        method,
                        set,
                        geometric: g,
                        tsm: t,
                        fallback: None,
                    })
                }
            }
        }
    }
}

/// Intersects a box with half-spaces exactly and re-boxes the result.
pub fn prune_with_invariant(b: &IntervalVector, halfspaces: &[HalfSpace]) -> Result<Option<IntervalVector>> {
    let z = Zonotope::from_box(b);
    let cz = ConstrainedZonotope::from(&z);
    match cz.intersect_halfspaces(halfspaces)? {
        None => Ok(None),
        Some(c) if c.num_constraints() == 0 => Ok(Some(b.clone())),
        Some(c) => Ok(c.interval_hull()?.map(|h| h.intersect(b).unwrap_or(h))),
    }
}
