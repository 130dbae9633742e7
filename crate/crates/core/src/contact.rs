//! One-dimensional robot contact task with delayed feedback.
//!
//! State `[z, ż, ẑ, ẑ̇, t]`: robot position and velocity, their delayed
//! copies seen by the controller, and a clock. Input `[z_d, ż_d, z̈_d]`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::automaton::{HybridAutomaton, Location, Transition};
use crate::engine::ReachEntry;
use crate::error::{ReachError, Result};
use crate::input::InputModel;
use crate::interval::Interval;
use crate::reach_linear::AffineFlow;
use crate::zonotope::{HalfSpace, Hyperplane, Zonotope};

pub const Z: usize = 0;
pub const ZD: usize = 1;
pub const ZH: usize = 2;
pub const ZHD: usize = 3;
pub const CLOCK: usize = 4;
pub const STATE_DIM: usize = 5;
pub const INPUT_DIM: usize = 3;

/// Location indices.
pub const L1: usize = 0;
pub const L2: usize = 1;
pub const L3: usize = 2;
pub const L4: usize = 3;

pub const DEFAULT_STEP: f64 = 6.5e-4;

/// Locations where the robot touches the surface.
pub fn in_contact(location: usize) -> bool {
    location == L2 || location == L3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactParams {
    pub m: f64,
    pub k_t: f64,
    pub d_t: f64,
    pub d_r: f64,
    pub f_t: f64,
    pub k_e: f64,
    pub d_e: f64,
    pub l: f64,
    pub d1: f64,
    pub d2: f64,
}

impl ContactParams {
    /// Nominal parameter set for effective mass `m`. The three tabulated
    /// masses use the listed tracking damping, others `2√(m k_t)`.
    pub fn nominal(m: f64) -> Self {
        let k_t = 1000.0;
        let d_t = if (m - 1.5).abs() < 1e-12 {
            80.0
        } else if (m - 4.5).abs() < 1e-12 {
            135.0
        } else if (m - 8.0).abs() < 1e-12 {
            180.0
        } else {
            critical_damping(m, k_t)
        };
        ContactParams {
            m,
            k_t,
            d_t,
            d_r: 380.0,
            f_t: 100.0,
            k_e: 75000.0,
            d_e: 0.0,
            l: 0.0,
            d1: 0.0013,
            d2: 0.0019,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [self.k_t, self.d_t, self.d_r, self.k_e, self.d_e, self.d1];
        if !(self.m > 0.0) || !(self.d2 > 0.0) || nonneg.iter().any(|v| !(*v >= 0.0)) {
            return Err(ReachError::InvalidArgument(format!("invalid contact parameters {self:?}")));
        }
        Ok(())
    }

    /// Row `r` and offset `o` with contact force `rᵀx + o`.
    pub fn force_map(&self) -> (DVector<f64>, f64) {
        let mut r = DVector::zeros(STATE_DIM);
        r[Z] = -self.k_e;
        r[ZD] = -self.d_e;
        (r, self.k_e * self.l)
    }

    /// Force the controller sees, computed from the delayed states.
    pub fn delayed_force_map(&self) -> (DVector<f64>, f64) {
        let mut r = DVector::zeros(STATE_DIM);
        r[ZH] = -self.k_e;
        r[ZHD] = -self.d_e;
        (r, self.k_e * self.l)
    }
}

pub fn critical_damping(m: f64, k_t: f64) -> f64 {
    2.0 * (m * k_t).sqrt()
}

/// Assembles the 5-state flow from the robot blocks `ẋ_f = A₁x_f + A₂x̂_f + B₁u + b₁`.
pub fn assemble_flow(
    a1: &DMatrix<f64>,
    a2: &DMatrix<f64>,
    b1: &DMatrix<f64>,
    b1_offset: &DVector<f64>,
    d2: f64,
) -> AffineFlow {
    let mut a = DMatrix::zeros(STATE_DIM, STATE_DIM);
    let mut b = DMatrix::zeros(STATE_DIM, INPUT_DIM);
    let mut c = DVector::zeros(STATE_DIM);
    let k = 2.0 / d2;
    let eye = DMatrix::<f64>::identity(2, 2);
    a.view_mut((0, 0), (2, 2)).copy_from(a1);
    a.view_mut((0, 2), (2, 2)).copy_from(a2);
    a.view_mut((2, 0), (2, 2)).copy_from(&(&eye * k - a1));
    a.view_mut((2, 2), (2, 2)).copy_from(&(-&eye * k - a2));
    b.view_mut((0, 0), (2, INPUT_DIM)).copy_from(b1);
    b.view_mut((2, 0), (2, INPUT_DIM)).copy_from(&(-b1));
    c.rows_mut(0, 2).copy_from(b1_offset);
    c.rows_mut(2, 2).copy_from(&(-b1_offset));
    c[CLOCK] = 1.0;
    AffineFlow::new(a, b, c).expect("fixed block sizes")
}

/// First-order delay approximation of one scalar signal `x` driven by its
/// derivative `u = ẋ`, as state `[x, x̂, t]`.
pub fn delay_subsystem(d2: f64) -> AffineFlow {
    let k = 2.0 / d2;
    AffineFlow::new(
        DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, k, -k, 0.0, 0.0, 0.0, 0.0]),
        DMatrix::from_row_slice(3, 1, &[1.0, -1.0, 0.0]),
        DVector::from_row_slice(&[0.0, 0.0, 1.0]),
    )
    .expect("fixed block sizes")
}

/// Flows of the four locations.
pub fn location_flows(p: &ContactParams) -> [AffineFlow; 4] {
    let m = p.m;
    let free = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    let touching = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -p.k_e / m, -p.d_e / m]);
    let tracking = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, -p.k_t / m, -p.d_t / m]);
    let reacting = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -p.d_r / m]);
    let b_track = DMatrix::from_row_slice(2, 3, &[0.0, 0.0, 0.0, p.k_t / m, p.d_t / m, 1.0]);
    let b_none = DMatrix::zeros(2, 3);
    let off_free = DVector::zeros(2);
    let off_touch = DVector::from_row_slice(&[0.0, p.k_e * p.l / m]);
    [
        assemble_flow(&free, &tracking, &b_track, &off_free, p.d2),
        assemble_flow(&touching, &tracking, &b_track, &off_touch, p.d2),
        assemble_flow(&touching, &reacting, &b_none, &off_touch, p.d2),
        assemble_flow(&free, &reacting, &b_none, &off_free, p.d2),
    ]
}

pub fn build_automaton(p: &ContactParams) -> Result<HybridAutomaton> {
    p.validate()?;
    let n = STATE_DIM;
    let [f1, f2, f3, f4] = location_flows(p);
    let above = HalfSpace::axis(n, Z, p.l, false);
    let below = HalfSpace::axis(n, Z, p.l, true);
    let moving_down = HalfSpace::axis(n, ZD, 0.0, true);
    let moving_up = HalfSpace::axis(n, ZD, 0.0, false);
    let (fr, fo) = p.delayed_force_map();
    let force_ok = HalfSpace::new(fr.clone(), p.f_t - fo);
    let surface_in = Hyperplane::axis(n, Z, p.l).flipped();
    let surface_out = Hyperplane::axis(n, Z, p.l);
    let threshold = Hyperplane::new(fr, p.f_t - fo)?;

    let locations = vec![
        Location {
            name: "L1".into(),
            flow: f1,
            invariant: vec![above.clone()],
            transitions: vec![Transition::identity("L1->L2", surface_in.clone(), vec![moving_down.clone()], L2)],
        },
        Location {
            name: "L2".into(),
            flow: f2,
            invariant: vec![force_ok, below.clone()],
            transitions: vec![
                Transition::identity("L2->L1", surface_out.clone(), vec![moving_up.clone()], L1),
                Transition::identity("L2->L3", threshold, vec![], L3),
            ],
        },
        Location {
            name: "L3".into(),
            flow: f3,
            invariant: vec![below],
            transitions: vec![Transition::identity("L3->L4", surface_out, vec![moving_up], L4)],
        },
        Location {
            name: "L4".into(),
            flow: f4,
            invariant: vec![above],
            transitions: vec![Transition::identity("L4->L3", surface_in, vec![moving_down], L3)],
        },
    ];
    HybridAutomaton::new(locations, CLOCK)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub impact_time: f64,
    pub impact_speed: f64,
    pub stop_position: f64,
    pub sample_rate: f64,
    pub horizon: f64,
}

impl TrajectorySpec {
    pub fn nominal(impact_speed: f64) -> Self {
        TrajectorySpec {
            impact_time: 0.1,
            impact_speed,
            stop_position: -0.06,
            sample_rate: 1000.0,
            horizon: 0.8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.impact_speed > 0.0)
            || !(self.impact_time > 0.0)
            || !(self.stop_position < 0.0)
            || !(self.sample_rate > 0.0)
            || !(self.horizon > 0.0)
        {
            return Err(ReachError::InvalidArgument(format!("invalid trajectory {self:?}")));
        }
        Ok(())
    }

    /// Desired `[z_d, ż_d, z̈_d]` at time `t`: uniform acceleration from rest
    /// to the surface, uniform deceleration to the stop position, then parked.
    pub fn desired(&self, t: f64) -> [f64; 3] {
        let v = self.impact_speed;
        let ti = self.impact_time;
        let a1 = v / ti;
        let depth = -self.stop_position;
        let a2 = v * v / (2.0 * depth);
        let t_stop = ti + 2.0 * depth / v;
        if t < ti {
            let t = t.max(0.0);
            [0.5 * a1 * (ti * ti - t * t), -a1 * t, -a1]
        } else if t < t_stop {
            let s = t - ti;
            [-v * s + 0.5 * a2 * s * s, -v + a2 * s, a2]
        } else {
            [self.stop_position, 0.0, 0.0]
        }
    }

    pub fn start_position(&self) -> f64 {
        0.5 * self.impact_speed * self.impact_time
    }

    pub fn stop_time(&self) -> f64 {
        self.impact_time - 2.0 * self.stop_position / self.impact_speed
    }

    pub fn samples(&self) -> Vec<DVector<f64>> {
        let count = (self.horizon * self.sample_rate).round() as usize;
        (0..=count)
            .map(|k| DVector::from_row_slice(&self.desired(k as f64 / self.sample_rate)))
            .collect()
    }
}

pub const INITIAL_RADII: [f64; STATE_DIM] = [1e-4, 2e-3, 1e-4, 2e-3, 0.0];
pub const INPUT_RADII: [f64; INPUT_DIM] = [5e-5, 0.0, 0.0];

/// Initial set around the first desired sample, copied into the delayed states.
pub fn initial_set(first_sample: &DVector<f64>) -> Zonotope {
    let c = DVector::from_row_slice(&[
        first_sample[0],
        first_sample[1],
        first_sample[0],
        first_sample[1],
        0.0,
    ]);
    Zonotope::from_diagonal(c, &INITIAL_RADII).expect("fixed dimension")
}

pub fn input_uncertainty() -> Zonotope {
    Zonotope::from_diagonal(DVector::zeros(INPUT_DIM), &INPUT_RADII).expect("fixed dimension")
}

pub fn input_model(p: &ContactParams, traj: &TrajectorySpec) -> Result<InputModel> {
    traj.validate()?;
    InputModel::new(traj.samples(), 1.0 / traj.sample_rate, p.d1, input_uncertainty())
}

/// Contact force of a state in `location`.
pub fn force_at(p: &ContactParams, location: usize, x: &DVector<f64>) -> f64 {
    if !in_contact(location) {
        return 0.0;
    }
    let (r, o) = p.force_map();
    r.dot(x) + o
}

/// Contact force range of a set in `location`.
pub fn force_range(p: &ContactParams, location: usize, z: &Zonotope) -> Interval {
    if !in_contact(location) {
        return Interval::point(0.0);
    }
    let (r, o) = p.force_map();
    let f = z
        .linear_map(&DMatrix::from_row_slice(1, STATE_DIM, r.as_slice()))
        .expect("state dimension")
        .interval_hull();
    Interval::new(f.lower()[0] + o, f.upper()[0] + o)
}

/// Contact force range of a reach entry. Jointly propagated pairs cover
/// states on both sides of the surface, where the force is zero.
pub fn entry_force_range(p: &ContactParams, e: &ReachEntry) -> Interval {
    let f = force_range(p, e.location, &e.time_interval);
    match e.partner {
        Some(other) if in_contact(e.location) != in_contact(other) => {
            let g = if in_contact(e.location) { f } else { force_range(p, other, &e.time_interval) };
            Interval::new(0.0, g.hi.max(0.0))
        }
        _ => f,
    }
}

/// Everything needed to analyze one contact case.
#[derive(Debug, Clone)]
pub struct ContactCase {
    pub params: ContactParams,
    pub trajectory: TrajectorySpec,
    pub automaton: HybridAutomaton,
    pub inputs: InputModel,
    pub initial: Zonotope,
}

impl ContactCase {
    pub fn new(params: ContactParams, trajectory: TrajectorySpec) -> Result<Self> {
        let automaton = build_automaton(&params)?;
        let inputs = input_model(&params, &trajectory)?;
        let initial = initial_set(&inputs.samples()[0]);
        Ok(ContactCase {
            params,
            trajectory,
            automaton,
            inputs,
            initial,
        })
    }

    pub fn nominal(m: f64, v: f64) -> Result<Self> {
        ContactCase::new(ContactParams::nominal(m), TrajectorySpec::nominal(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn force_guard_position() {
        let p = ContactParams::nominal(4.5);
        let ha = build_automaton(&p).unwrap();
        let g = &ha.locations[L2].transitions[1].guard;
        // Points on the guard have ẑ = −f_t/k_e.
        let mut x = DVector::zeros(STATE_DIM);
        x[ZH] = -p.f_t / p.k_e;
        assert!(g.signed(&x).abs() < 1e-12);
        assert!((x[ZH] + 1.333_333e-3).abs() < 1e-9);
        // Pressing deeper is outside the source invariant.
        x[ZH] -= 1e-4;
        assert!(g.signed(&x) > 0.0);
    }

    #[test]
    fn steady_tracking_is_equilibrium() {
        let p = ContactParams::nominal(8.0);
        let f = &location_flows(&p)[L1];
        let x = DVector::from_row_slice(&[0.02, 0.0, 0.02, 0.0, 0.3]);
        let u = DVector::from_row_slice(&[0.02, 0.0, 0.0]);
        let dx = f.eval(&x, &u);
        assert_eq!(dx[ZD], 0.0);
        assert_eq!(dx[Z], 0.0);
        assert_eq!(dx[CLOCK], 1.0);
    }

    #[test]
    fn trajectory_waypoints() {
        for v in [0.1, 0.2, 0.35, 0.45, 0.55] {
            let t = TrajectorySpec::nominal(v);
            let s = t.samples();
            assert_eq!(s.len(), 801);
            assert!(s[100][0].abs() < 1e-15);
            assert!((s[100][1] + v).abs() < 1e-15);
            assert!((s[0][0] - 0.05 * v).abs() < 1e-15);
            let last = s.last().unwrap();
            if t.stop_time() <= t.horizon {
                assert_eq!(last.as_slice(), &[-0.06, 0.0, 0.0]);
            } else {
                assert!(last[0] > -0.06 && last[1] < 0.0);
            }
        }
        assert!((TrajectorySpec::nominal(0.2).stop_time() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn trajectory_is_c1() {
        let t = TrajectorySpec::nominal(0.35);
        for joint in [t.impact_time, t.stop_time()] {
            let a = t.desired(joint - 1e-9);
            let b = t.desired(joint + 1e-9);
            assert!((a[0] - b[0]).abs() < 1e-9);
            assert!((a[1] - b[1]).abs() < 1e-6);
        }
    }

    #[test]
    fn initial_set_layout() {
        let case = ContactCase::nominal(1.5, 0.2).unwrap();
        let h = case.initial.interval_hull();
        assert!((h.center()[Z] - 0.01).abs() < 1e-15);
        assert!((h.center()[ZH] - 0.01).abs() < 1e-15);
        assert_eq!(h.widths()[CLOCK], 0.0);
        assert_eq!(h.center()[ZD], 0.0);
        assert!((h.radius()[ZD] - 0.002).abs() < 1e-15);
        let u = input_uncertainty().interval_hull();
        assert_eq!(u.center().as_slice(), &[0.0, 0.0, 0.0]);
        assert_eq!(u.radius().as_slice(), &[5e-5, 0.0, 0.0]);
    }

    #[test]
    fn force_values() {
        let p = ContactParams::nominal(4.5);
        let mut x = DVector::zeros(STATE_DIM);
        x[Z] = 0.001;
        assert_eq!(force_at(&p, L1, &x), 0.0);
        x[Z] = -0.001;
        assert!((force_at(&p, L2, &x) - 75.0).abs() < 1e-9);
        let z = Zonotope::from_diagonal(
            DVector::from_row_slice(&[-0.0015, 0.0, 0.0, 0.0, 0.0]),
            &[0.0005, 0.0, 0.0, 0.0, 0.0],
        )
        .unwrap();
        let f = force_range(&p, L3, &z);
        assert!((f.lo - 75.0).abs() < 1e-9 && (f.hi - 150.0).abs() < 1e-9);
    }
}
