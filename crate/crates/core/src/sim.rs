//! Monte Carlo simulation of the hybrid model, used as a containment oracle.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::automaton::HybridAutomaton;
use crate::error::{ReachError, Result};
use crate::input::InputModel;
use crate::interval::{Interval, IntervalVector};
use crate::par;
use crate::reach_linear::AffineFlow;
use crate::zonotope::Zonotope;

pub const EVENT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    pub max_jumps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimEvent {
    pub time: f64,
    pub from: usize,
    pub transition: usize,
    pub to: usize,
}

/// States at the requested output times plus the event list.
#[derive(Debug, Clone)]
pub struct SimTrace {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub locations: Vec<usize>,
    pub events: Vec<SimEvent>,
    pub final_state: DVector<f64>,
    pub final_location: usize,
}

pub fn rk4_step(flow: &AffineFlow, x: &DVector<f64>, u: &DVector<f64>, h: f64) -> DVector<f64> {
    let k1 = flow.eval(x, u);
    let k2 = flow.eval(&(x + &k1 * (0.5 * h)), u);
    let k3 = flow.eval(&(x + &k2 * (0.5 * h)), u);
    let k4 = flow.eval(&(x + &k3 * h), u);
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// First guard crossing within one step, as `(transition, θ)`.
fn find_event(
    ha: &HybridAutomaton,
    loc: usize,
    x: &DVector<f64>,
    x_new: &DVector<f64>,
    u: &DVector<f64>,
    h: f64,
) -> Option<(usize, f64, DVector<f64>)> {
    let location = &ha.locations[loc];
    let flow = &location.flow;
    let mut best: Option<(usize, f64, DVector<f64>)> = None;
    for (j, tr) in location.transitions.iter().enumerate() {
        let g0 = tr.guard.signed(x);
        let g1 = tr.guard.signed(x_new);
        if !(g0 <= 0.0 && g1 > 0.0) {
            continue;
        }
        let (mut lo, mut hi) = (0.0, h);
        let mut x_hi = x_new.clone();
        while hi - lo > EVENT_TOL {
            let mid = 0.5 * (lo + hi);
            let xm = rk4_step(flow, x, u, mid);
            if tr.guard.signed(&xm) > 0.0 {
                hi = mid;
                x_hi = xm;
            } else {
                lo = mid;
            }
        }
        if !tr.side_conditions_hold(&x_hi) {
            continue;
        }
        if best.as_ref().is_none_or(|b| hi < b.1) {
            best = Some((j, hi, x_hi));
        }
    }
    best
}

/// Integrates one trajectory from `x0` with the constant input offset `w`.
/// States are recorded at each of `output_times` (sorted).
pub fn simulate_trajectory(
    ha: &HybridAutomaton,
    x0: &DVector<f64>,
    start: usize,
    inputs: &InputModel,
    w: &DVector<f64>,
    cfg: &SimConfig,
    output_times: &[f64],
) -> Result<SimTrace> {
    if x0.len() != ha.dim() {
        return Err(ReachError::dims("simulation start", ha.dim(), x0.len()));
    }
    if w.len() != inputs.dim() {
        return Err(ReachError::dims("input offset", inputs.dim(), w.len()));
    }
    let clock = ha.clock_index;
    let mut x = x0.clone();
    let mut loc = start;
    let mut trace = SimTrace {
        times: Vec::new(),
        states: Vec::new(),
        locations: Vec::new(),
        events: Vec::new(),
        final_state: x0.clone(),
        final_location: start,
    };
    let mut next_out = 0;
    let mut t = x[clock];
    while next_out < output_times.len() && output_times[next_out] < t - 1e-15 {
        next_out += 1;
    }

    // Segment ends: output times, input switches and the horizon.
    let mut marks: Vec<f64> = output_times.iter().copied().filter(|&s| s > t).collect();
    marks.extend(inputs.switch_times(t, cfg.t_end));
    marks.push(cfg.t_end);
    marks.sort_by(f64::total_cmp);
    marks.dedup_by(|a, b| (*a - *b).abs() < 1e-14);

    let record = |trace: &mut SimTrace, t: f64, x: &DVector<f64>, loc: usize, next_out: &mut usize| {
        while *next_out < output_times.len() && (output_times[*next_out] - t).abs() <= 1e-12 {
            trace.times.push(output_times[*next_out]);
            trace.states.push(x.clone());
            trace.locations.push(loc);
            *next_out += 1;
        }
    };
    record(&mut trace, t, &x, loc, &mut next_out);

    for &mark in &marks {
        if mark > cfg.t_end + 1e-15 {
            break;
        }
        let u = inputs.value_at(0.5 * (t + mark)) + w;
        while mark - t > 1e-14 {
            let remaining = mark - t;
            let steps = (remaining / cfg.dt).ceil().max(1.0);
            let h = remaining / steps;
            let flow = &ha.locations[loc].flow;
            let x_new = rk4_step(flow, &x, &u, h);
            match find_event(ha, loc, &x, &x_new, &u, h) {
                Some((j, theta, xe)) => {
                    let tr = &ha.locations[loc].transitions[j];
                    if trace.events.len() >= cfg.max_jumps {
                        return Err(ReachError::JumpLimit(cfg.max_jumps));
                    }
                    trace.events.push(SimEvent {
                        time: t + theta,
                        from: loc,
                        transition: j,
                        to: tr.target,
                    });
                    x = tr.apply_jump_point(&xe);
                    loc = tr.target;
                    t += theta;
                    x[clock] = t;
                }
                None => {
                    x = x_new;
                    t = if steps == 1.0 { mark } else { t + h };
                    x[clock] = t;
                }
            }
        }
        t = mark;
        x[clock] = t;
        record(&mut trace, t, &x, loc, &mut next_out);
    }
    trace.final_state = x;
    trace.final_location = loc;
    Ok(trace)
}

/// Uniform sample from a box.
pub fn sample_box<R: Rng + ?Sized>(b: &IntervalVector, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(b.dim(), |i, _| {
        let iv = b.get(i);
        if iv.width() > 0.0 {
            rng.random_range(iv.lo..=iv.hi)
        } else {
            iv.lo
        }
    })
}

/// Deterministic per-trajectory generator.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One reachable set with the clock span it covers.
#[derive(Debug, Clone)]
pub struct TimedSet {
    pub branch: usize,
    pub location: usize,
    pub clock: Interval,
    pub set: Zonotope,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub sample: usize,
    pub time: f64,
    pub location: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContainmentReport {
    pub samples: usize,
    pub checks: usize,
    pub violations: Vec<Violation>,
    pub failed_simulations: usize,
}

impl ContainmentReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.failed_simulations == 0
    }
}

fn contained_in_any(x: &DVector<f64>, candidates: &[usize], sets: &[TimedSet], hulls: &[IntervalVector]) -> bool {
    let inside: Vec<usize> = candidates
        .iter()
        .copied()
        .filter(|&k| hulls[k].contains_with_tol(x, 1e-9))
        .collect();
    // Prefer the set whose center is closest to the point.
    let mut order = inside;
    order.sort_by(|&a, &b| {
        let da = (sets[a].set.center() - x).norm();
        let db = (sets[b].set.center() - x).norm();
        da.total_cmp(&db)
    });
    order
        .into_iter()
        .any(|k| sets[k].set.contains_point(x).unwrap_or(false))
}

/// Simulates `n` trajectories from the box of `x0` with inputs perturbed by
/// one constant draw from the input uncertainty, and checks every state at
/// `grid` times against the sets covering that time.
#[allow(clippy::too_many_arguments)]
pub fn containment_test(
    ha: &HybridAutomaton,
    x0: &Zonotope,
    start: usize,
    inputs: &InputModel,
    sets: &[TimedSet],
    grid: &[f64],
    n: usize,
    seed: u64,
    cfg: &SimConfig,
) -> ContainmentReport {
    let x0_box = x0.interval_hull();
    let u_box = inputs.uncertainty().interval_hull();
    let hulls: Vec<IntervalVector> = sets.iter().map(|s| s.set.interval_hull()).collect();
    let covering: Vec<Vec<usize>> = grid
        .iter()
        .map(|&t| {
            (0..sets.len())
                .filter(|&k| sets[k].clock.lo - 1e-12 <= t && t <= sets[k].clock.hi + 1e-12)
                .collect()
        })
        .collect();
    let results = par::map_range(n, |i| {
        let mut rng = trajectory_rng(seed, i as u64);
        let x = sample_box(&x0_box, &mut rng);
        let w = sample_box(&u_box, &mut rng);
        let trace = match simulate_trajectory(ha, &x, start, inputs, &w, cfg, grid) {
            Ok(t) => t,
            Err(_) => return (0, Vec::new(), true),
        };
        let mut violations = Vec::new();
        for (k, (t, state)) in trace.times.iter().zip(&trace.states).enumerate() {
            let g = grid.partition_point(|&s| s < *t - 1e-12);
            let cands = covering.get(g).map(Vec::as_slice).unwrap_or(&[]);
            if !contained_in_any(state, cands, sets, &hulls) {
                violations.push(Violation {
                    sample: i,
                    time: *t,
                    location: trace.locations[k],
                });
            }
        }
        (trace.times.len(), violations, false)
    });
    let mut report = ContainmentReport {
        samples: n,
        checks: 0,
        violations: Vec::new(),
        failed_simulations: 0,
    };
    for (checks, v, failed) in results {
        report.checks += checks;
        report.violations.extend(v);
        report.failed_simulations += failed as usize;
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::{Location, Transition};
    use crate::reach_linear::matrix_exponential;
    use crate::zonotope::{HalfSpace, Hyperplane};
    use nalgebra::DMatrix;

    fn bounce() -> HybridAutomaton {
        let up = AffineFlow::new(
            DMatrix::zeros(2, 2),
            DMatrix::zeros(2, 1),
            DVector::from_row_slice(&[1.0, 1.0]),
        )
        .unwrap();
        let down = AffineFlow::new(
            DMatrix::zeros(2, 2),
            DMatrix::zeros(2, 1),
            DVector::from_row_slice(&[-1.0, 1.0]),
        )
        .unwrap();
        HybridAutomaton::new(
            vec![
                Location {
                    name: "up".into(),
                    flow: up,
                    invariant: vec![HalfSpace::axis(2, 0, 1.0, true)],
                    transitions: vec![Transition::identity("up->down", Hyperplane::axis(2, 0, 1.0), vec![], 1)],
                },
                Location {
                    name: "down".into(),
                    flow: down,
                    invariant: vec![],
                    transitions: vec![],
                },
            ],
            1,
        )
        .unwrap()
    }

    fn zero_inputs(m: usize) -> InputModel {
        InputModel::new(vec![DVector::zeros(m)], 1.0, 0.0, Zonotope::point(DVector::zeros(m))).unwrap()
    }

    #[test]
    fn event_time_uniform_motion() {
        let ha = bounce();
        let cfg = SimConfig {
            dt: 0.013,
            t_end: 2.0,
            max_jumps: 4,
        };
        let x0 = DVector::from_row_slice(&[0.3, 0.0]);
        let tr = simulate_trajectory(&ha, &x0, 0, &zero_inputs(1), &DVector::zeros(1), &cfg, &[1.5, 2.0]).unwrap();
        assert_eq!(tr.events.len(), 1);
        assert!((tr.events[0].time - 0.7).abs() < 1e-9);
        assert!((tr.states[0][0] - 0.2).abs() < 1e-9);
        assert_eq!(tr.locations, vec![1, 1]);
    }

    #[test]
    fn matches_exponential_without_transitions() {
        let a = DMatrix::from_row_slice(3, 3, &[-1.0, 2.0, 0.0, -2.0, -0.5, 0.0, 0.0, 0.0, 0.0]);
        let flow = AffineFlow::new(a.clone(), DMatrix::zeros(3, 1), DVector::from_row_slice(&[0.0, 0.0, 1.0])).unwrap();
        let ha = HybridAutomaton::new(
            vec![Location {
                name: "only".into(),
                flow,
                invariant: vec![],
                transitions: vec![],
            }],
            2,
        )
        .unwrap();
        let x0 = DVector::from_row_slice(&[1.0, -0.5, 0.0]);
        let cfg = SimConfig {
            dt: 1e-3,
            t_end: 1.0,
            max_jumps: 0,
        };
        let tr = simulate_trajectory(&ha, &x0, 0, &zero_inputs(1), &DVector::zeros(1), &cfg, &[1.0]).unwrap();
        let e = matrix_exponential(&a, 1.0).unwrap().value;
        let want = &e * &x0;
        assert!((tr.states[0][0] - want[0]).abs() < 1e-8);
        assert!((tr.states[0][1] - want[1]).abs() < 1e-8);
        assert!((tr.states[0][2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn per_trajectory_streams_differ() {
        let a: f64 = trajectory_rng(7, 0).random();
        let b: f64 = trajectory_rng(7, 1).random();
        let c: f64 = trajectory_rng(7, 0).random();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }
}
