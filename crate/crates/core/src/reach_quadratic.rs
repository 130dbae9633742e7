//! Reachability for scaled dynamics `f^s(x, u) = g(x)·f(x, u)` with an
//! affine scaling `g(x) = κ(aᵀx − e)`. The product is quadratic, so the
//! linearization error is an exact bilinear form.

use nalgebra::DVector;

use crate::error::{ReachError, Result};
use crate::interval::{Interval, IntervalVector};
use crate::reach_linear::{AffineFlow, LinearStepper, StepResult};
use crate::zonotope::{Hyperplane, Zonotope};

/// Iterations allowed for the linearization domain to settle.
pub const DOMAIN_ITERATIONS: usize = 8;
const DOMAIN_GROWTH: f64 = 1.1;

#[derive(Debug, Clone)]
pub struct QuadraticFlow {
    pub base: AffineFlow,
    pub scale_normal: DVector<f64>,
    pub scale_offset: f64,
    pub scale_gain: f64,
}

impl QuadraticFlow {
    /// Scaling that is `k_s` at the largest distance of `start` from the
    /// guard and vanishes on it. The guard normal points away from `start`.
    pub fn toward_guard(base: &AffineFlow, guard: &Hyperplane, start: &Zonotope, k_s: f64) -> Result<Self> {
        let a = -guard.normal();
        let e = -guard.offset();
        let rho = start.range_along(&a).hi - e;
        if !(rho > 0.0) {
            return Err(ReachError::ScalingInapplicable(format!(
                "start set has no positive distance to the guard ({rho:e})"
            )));
        }
        Ok(QuadraticFlow {
            base: base.clone(),
            scale_normal: a,
            scale_offset: e,
            scale_gain: k_s / rho,
        })
    }

    pub fn scale(&self, x: &DVector<f64>) -> f64 {
        self.scale_gain * (self.scale_normal.dot(x) - self.scale_offset)
    }

    pub fn scale_range(&self, z: &Zonotope) -> Interval {
        let r = z.range_along(&self.scale_normal);
        Interval::new(r.lo - self.scale_offset, r.hi - self.scale_offset).scale(self.scale_gain)
    }

    pub fn eval(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        self.base.eval(x, u) * self.scale(x)
    }

    /// Affine flow tangent at `(x*, u*)`.
    pub fn linearize(&self, xs: &DVector<f64>, us: &DVector<f64>) -> AffineFlow {
        let g = self.scale(xs);
        let f = self.base.eval(xs, us);
        let m = &self.base.a * g + &f * self.scale_normal.transpose() * self.scale_gain;
        let nb = &self.base.b * g;
        let c = &f * g - &m * xs - &nb * us;
        AffineFlow::new(m, nb, c).expect("dimensions follow the base flow")
    }

    /// Box of `κ(aᵀΔx)(AΔx + BΔu)` over deviation boxes.
    pub fn remainder(&self, dx: &IntervalVector, du: &IntervalVector) -> IntervalVector {
        let n = self.base.dim();
        let a = &self.scale_normal;
        let s_c = a.dot(&dx.center());
        let s_r = a.abs().dot(&dx.radius());
        let s = Interval::new(s_c - s_r, s_c + s_r).scale(self.scale_gain);
        let v = dx.linear_image(&self.base.a).add(&du.linear_image(&self.base.b));
        IntervalVector::from_intervals(&(0..n).map(|i| s.mul(&v.get(i))).collect::<Vec<_>>())
    }
}

/// Relative-plus-absolute box enlargement around its center.
fn grow(b: &IntervalVector) -> IntervalVector {
    let r = b.radius() * DOMAIN_GROWTH + DVector::from_element(b.dim(), 1e-15);
    IntervalVector::from_center_radius(&b.center(), &r)
}

/// One scaled step. `inputs` returns the input set for a clock window.
pub fn reach_quadratic_step_windowed<F>(
    qf: &QuadraticFlow,
    r: &Zonotope,
    mut inputs: F,
    clock_index: usize,
    dt: f64,
    max_order: f64,
) -> Result<StepResult>
where
    F: FnMut(Interval) -> Zonotope,
{
    let xs = r.center().clone();
    let r_hull = r.interval_hull();
    let t0 = r.coordinate_range(clock_index);

    // First guess: hull of R plus one Euler move.
    let mut u = inputs(t0);
    let g = qf.scale_range(r);
    let f_box = r_hull
        .linear_image(&qf.base.a)
        .add(&u.affine_map(&qf.base.b, &qf.base.c)?.interval_hull());
    let step_box = f_box.mul_interval(g).scale(dt);
    let mut domain = grow(&r_hull.hull(&r_hull.add(&step_box)));

    for _ in 0..DOMAIN_ITERATIONS {
        let window = Interval::new(t0.lo, domain.get(clock_index).hi.max(t0.hi));
        u = inputs(window);
        let us = u.center().clone();
        let lin = qf.linearize(&xs, &us);
        let dx = IntervalVector::from_center_radius(&(domain.center() - &xs), &domain.radius());
        let uh = u.interval_hull();
        let du = IntervalVector::from_center_radius(&(uh.center() - &us), &uh.radius());
        let rem = qf.remainder(&dx, &du);
        let stepper = LinearStepper::new(&lin, dt, max_order)?;
        let out = stepper.step(r, &u, Some(&rem))?;
        let reached = out.time_interval.interval_hull();
        if domain.contains_box(&reached) {
            return Ok(out);
        }
        domain = grow(&domain.hull(&reached));
    }
    Err(ReachError::LinearizationDomain {
        iterations: DOMAIN_ITERATIONS,
    })
}

/// One scaled step with a fixed input set.
pub fn reach_quadratic_step(
    qf: &QuadraticFlow,
    r: &Zonotope,
    u: &Zonotope,
    clock_index: usize,
    dt: f64,
    max_order: f64,
) -> Result<StepResult> {
    reach_quadratic_step_windowed(qf, r, |_| u.clone(), clock_index, dt, max_order)
}
