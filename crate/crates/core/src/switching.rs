//! Propagation across a pair of locations that switch into each other on
//! one hyperplane with identity jumps.
//!
//! Right after such a jump the set lies on the shared guard, and states at
//! the boundary may switch back at once. Instead of spawning a branch per
//! switch, the pair is propagated as the differential inclusion whose
//! solutions contain every switching trajectory. When the two flows agree on
//! the guard, `f_B − f_A = K·s` with `s` the signed distance into `B`, and
//! the inclusion is `ẋ = f_A(x) + K·max(0, s)`, relaxed linearly over the
//! reachable range of `s`. Otherwise the difference is boxed.

use nalgebra::{DMatrix, DVector};

use crate::automaton::{HybridAutomaton, Transition};
use crate::error::{ReachError, Result};
use crate::input::InputModel;
use crate::interval::{Interval, IntervalVector};
use crate::reach_linear::{AffineFlow, LinearStepper, StepResult};
use crate::zonotope::{hcat, Hyperplane, Zonotope};

const DOMAIN_ITERATIONS: usize = 8;
const DOMAIN_GROWTH: f64 = 1.1;
const MATCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
enum Coupling {
    /// `f_B − f_A = K·(nᵀx − d)`.
    Continuous(DVector<f64>),
    /// Flow difference `f_B − f_A`.
    General(AffineFlow),
}

/// Two locations `outer` (A) and `inner` (B) joined by a guard whose normal
/// points from A into B.
#[derive(Debug, Clone)]
pub struct LocationPair {
    pub outer: usize,
    pub inner: usize,
    pub guard: Hyperplane,
    coupling: Coupling,
}

fn is_identity(tr: &Transition) -> bool {
    let n = tr.jump_matrix.nrows();
    (&tr.jump_matrix - DMatrix::identity(n, n)).amax() <= MATCH_TOL && tr.jump_offset.amax() <= MATCH_TOL
}

fn same_plane_reversed(a: &Hyperplane, b: &Hyperplane) -> bool {
    let flipped = b.flipped();
    (a.normal() - flipped.normal()).amax() <= MATCH_TOL
        && (a.offset() - flipped.offset()).abs() <= MATCH_TOL * a.offset().abs().max(1.0)
}

impl LocationPair {
    /// Pair formed by `tr` (leaving `source`) and a reverse transition of its
    /// target on the same hyperplane, both with identity jumps.
    pub fn find(ha: &HybridAutomaton, source: usize, tr: &Transition) -> Option<LocationPair> {
        if tr.target == source || !is_identity(tr) {
            return None;
        }
        let back = ha.locations[tr.target]
            .transitions
            .iter()
            .any(|r| r.target == source && is_identity(r) && same_plane_reversed(&tr.guard, &r.guard));
        if !back {
            return None;
        }
        let fa = &ha.locations[source].flow;
        let fb = &ha.locations[tr.target].flow;
        let da = &fb.a - &fa.a;
        let db = &fb.b - &fa.b;
        let dc = &fb.c - &fa.c;
        let n = tr.guard.normal();
        let k: DVector<f64> = &da * n;
        let rank_one = (&da - &k * n.transpose()).amax() <= MATCH_TOL * da.amax().max(1.0);
        let offset_ok = (&dc + &k * tr.guard.offset()).amax() <= MATCH_TOL * dc.amax().max(1.0);
        let coupling = if rank_one && offset_ok && db.amax() == 0.0 {
            Coupling::Continuous(k)
        } else {
            Coupling::General(AffineFlow::new(da, db, dc).expect("flows share dimensions"))
        };
        Some(LocationPair {
            outer: source,
            inner: tr.target,
            guard: tr.guard.clone(),
            coupling,
        })
    }

    /// Whether `tr` leaving `location` switches within the pair.
    pub fn is_internal(&self, location: usize, tr: &Transition) -> bool {
        let ends = (location == self.outer && tr.target == self.inner) || (location == self.inner && tr.target == self.outer);
        ends && is_identity(tr)
            && ((self.guard.normal() - tr.guard.normal()).amax() <= MATCH_TOL
                || same_plane_reversed(&self.guard, &tr.guard))
    }

    /// Location containing the whole set, if it lies strictly on one side.
    pub fn side_of(&self, z: &Zonotope) -> Option<usize> {
        let s = self.guard.signed_range(z);
        if s.lo > 0.0 {
            Some(self.inner)
        } else if s.hi < 0.0 {
            Some(self.outer)
        } else {
            None
        }
    }

    /// Affine flow, extended input set and extra disturbance box enclosing
    /// the inclusion over states in `domain`.
    fn relax(
        &self,
        ha: &HybridAutomaton,
        domain: &IntervalVector,
        u: &Zonotope,
    ) -> Result<(AffineFlow, Zonotope, Option<IntervalVector>)> {
        let fa = &ha.locations[self.outer].flow;
        let fb = &ha.locations[self.inner].flow;
        let n = self.guard.normal();
        let s = {
            let c = n.dot(&domain.center()) - self.guard.offset();
            let r = n.abs().dot(&domain.radius());
            Interval::new(c - r, c + r)
        };
        if s.lo >= 0.0 {
            return Ok((fb.clone(), u.clone(), None));
        }
        if s.hi <= 0.0 {
            return Ok((fa.clone(), u.clone(), None));
        }
        match &self.coupling {
            Coupling::Continuous(k) => {
                // max(0, s) ∈ α·s + [0, w] on [s.lo, s.hi].
                let alpha = s.hi / (s.hi - s.lo);
                let w = s.hi * (-s.lo) / (s.hi - s.lo);
                let a = &fa.a + k * n.transpose() * alpha;
                let c = &fa.c - k * (alpha * self.guard.offset());
                let b = hcat(&fa.b, &DMatrix::from_column_slice(k.len(), 1, k.as_slice()));
                let flow = AffineFlow::new(a, b, c)?;
                let extra = Zonotope::new(
                    DVector::from_element(1, 0.5 * w),
                    DMatrix::from_element(1, 1, 0.5 * w),
                )?;
                Ok((flow, stack(u, &extra)?, None))
            }
            Coupling::General(delta) => {
                let d = domain
                    .linear_image(&delta.a)
                    .add(&u.interval_hull().linear_image(&delta.b))
                    .add(&IntervalVector::point(&delta.c));
                let lo = d.lower().map(|v| v.min(0.0));
                let hi = d.upper().map(|v| v.max(0.0));
                Ok((fa.clone(), u.clone(), Some(IntervalVector::new(lo, hi)?)))
            }
        }
    }
}

/// Cartesian product of two zonotopes.
fn stack(a: &Zonotope, b: &Zonotope) -> Result<Zonotope> {
    let (na, nb) = (a.dim(), b.dim());
    let (pa, pb) = (a.num_generators(), b.num_generators());
    let mut c = DVector::zeros(na + nb);
    c.rows_mut(0, na).copy_from(a.center());
    c.rows_mut(na, nb).copy_from(b.center());
    let mut g = DMatrix::zeros(na + nb, pa + pb);
    if pa > 0 {
        g.view_mut((0, 0), (na, pa)).copy_from(a.generators());
    }
    if pb > 0 {
        g.view_mut((na, pa), (nb, pb)).copy_from(b.generators());
    }
    Zonotope::new(c, g)
}

fn grow(b: &IntervalVector) -> IntervalVector {
    let r = b.radius() * DOMAIN_GROWTH + DVector::from_element(b.dim(), 1e-15);
    IntervalVector::from_center_radius(&b.center(), &r)
}

/// One step of the switching inclusion from `r`.
pub fn pair_step(
    ha: &HybridAutomaton,
    pair: &LocationPair,
    r: &Zonotope,
    inputs: &InputModel,
    dt: f64,
    max_order: f64,
) -> Result<StepResult> {
    let ci = ha.clock_index;
    let u = inputs.unify(r, dt, ci);
    let r_hull = r.interval_hull();
    let uh = u.interval_hull();
    let mut moves: Option<IntervalVector> = None;
    for loc in [pair.outer, pair.inner] {
        let f = &ha.locations[loc].flow;
        let m = r_hull
            .linear_image(&f.a)
            .add(&uh.linear_image(&f.b))
            .add(&IntervalVector::point(&f.c))
            .scale(dt);
        moves = Some(match moves {
            Some(acc) => acc.hull(&m),
            None => m,
        });
    }
    let step_box = moves.expect("two locations");
    let mut domain = grow(&r_hull.hull(&r_hull.add(&step_box)));
    for _ in 0..DOMAIN_ITERATIONS {
        let (flow, u_ext, extra) = pair.relax(ha, &domain, &u)?;
        let out = LinearStepper::new(&flow, dt, max_order)?.step(r, &u_ext, extra.as_ref())?;
        let reached = out.time_interval.interval_hull();
        if domain.contains_box(&reached) {
            return Ok(out);
        }
        domain = domain.hull(&grow(&reached));
    }
    Err(ReachError::LinearizationDomain {
        iterations: DOMAIN_ITERATIONS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::Location;
    use crate::zonotope::HalfSpace;

    /// Spring below x = 0, free above; clock in the last state.
    fn spring_wall(continuous: bool) -> HybridAutomaton {
        let free = AffineFlow::new(
            DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            DMatrix::zeros(3, 1),
            DVector::from_row_slice(&[0.0, -1.0, 1.0]),
        )
        .unwrap();
        let spring = AffineFlow::new(
            DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, -100.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            DMatrix::zeros(3, 1),
            DVector::from_row_slice(&[0.0, if continuous { -1.0 } else { 5.0 }, 1.0]),
        )
        .unwrap();
        let down = Hyperplane::axis(3, 0, 0.0).flipped();
        let up = Hyperplane::axis(3, 0, 0.0);
        HybridAutomaton::new(
            vec![
                Location {
                    name: "free".into(),
                    flow: free,
                    invariant: vec![HalfSpace::axis(3, 0, 0.0, false)],
                    transitions: vec![Transition::identity("in", down, vec![HalfSpace::axis(3, 1, 0.0, true)], 1)],
                },
                Location {
                    name: "spring".into(),
                    flow: spring,
                    invariant: vec![HalfSpace::axis(3, 0, 0.0, true)],
                    transitions: vec![Transition::identity("out", up, vec![HalfSpace::axis(3, 1, 0.0, false)], 0)],
                },
            ],
            2,
        )
        .unwrap()
    }

    fn no_inputs() -> InputModel {
        InputModel::new(vec![DVector::zeros(1)], 1.0, 0.0, Zonotope::point(DVector::zeros(1))).unwrap()
    }

    #[test]
    fn detects_continuous_coupling() {
        let ha = spring_wall(true);
        let pair = LocationPair::find(&ha, 0, &ha.locations[0].transitions[0]).unwrap();
        assert!(matches!(pair.coupling, Coupling::Continuous(_)));
        let ha = spring_wall(false);
        let pair = LocationPair::find(&ha, 0, &ha.locations[0].transitions[0]).unwrap();
        assert!(matches!(pair.coupling, Coupling::General(_)));
    }

    #[test]
    fn one_sided_set_uses_exact_flow() {
        let ha = spring_wall(true);
        let pair = LocationPair::find(&ha, 0, &ha.locations[0].transitions[0]).unwrap();
        // Deep inside the spring side for the whole step.
        let r = Zonotope::from_diagonal(DVector::from_row_slice(&[-0.5, 0.0, 0.0]), &[0.01, 0.01, 0.0]).unwrap();
        let merged = pair_step(&ha, &pair, &r, &no_inputs(), 0.01, 20.0).unwrap();
        let exact = LinearStepper::new(&ha.locations[1].flow, 0.01, 20.0)
            .unwrap()
            .step(&r, &Zonotope::point(DVector::zeros(1)), None)
            .unwrap();
        assert_eq!(merged.time_point, exact.time_point);
    }

    #[test]
    fn straddling_set_contains_switching_trajectories() {
        for continuous in [true, false] {
            let ha = spring_wall(continuous);
            let pair = LocationPair::find(&ha, 0, &ha.locations[0].transitions[0]).unwrap();
            let r = Zonotope::from_diagonal(DVector::from_row_slice(&[0.0, 0.0, 0.0]), &[0.01, 0.2, 0.0]).unwrap();
            let dt = 0.01;
            let out = pair_step(&ha, &pair, &r, &no_inputs(), dt, 20.0).unwrap();
            // Piecewise flow integrated finely from sampled corners.
            for &(x0, v0) in &[(0.01, -0.2), (-0.01, 0.2), (0.0, 0.0), (0.01, 0.2), (-0.01, -0.2), (0.005, -0.1)] {
                let (mut x, mut v) = (x0, v0);
                let h = dt / 10_000.0;
                for k in 0..10_000 {
                    let acc = if x >= 0.0 { -1.0 } else { -100.0 * x + if continuous { -1.0 } else { 5.0 } };
                    v += h * acc;
                    x += h * v;
                    let t = (k + 1) as f64 * h;
                    let p = DVector::from_row_slice(&[x, v, t]);
                    assert!(out.time_interval.contains_point(&p).unwrap(), "{p:?}");
                }
                let p = DVector::from_row_slice(&[x, v, dt]);
                assert!(out.time_point.interval_hull().contains_with_tol(&p, 1e-9), "{p:?}");
            }
        }
    }
}
