//! Reachable sets of affine dynamics `ẋ = Ax + Bu + c` under a set-valued
//! input that is held within each step.

use nalgebra::{DMatrix, DVector};

use crate::error::{ReachError, Result};
use crate::interval::{Interval, IntervalVector};
use crate::zonotope::{HalfSpace, Zonotope};

/// Remainder bound above which a step is rejected.
pub const REMAINDER_LIMIT: f64 = 1e-6;
/// Target remainder for the adaptive Taylor order.
pub const REMAINDER_TARGET: f64 = 1e-12;
pub const MIN_TAYLOR_ORDER: usize = 10;
pub const MAX_TAYLOR_ORDER: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct AffineFlow {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DVector<f64>,
}

impl AffineFlow {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DVector<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(ReachError::dims("flow matrix A", n, a.ncols()));
        }
        if b.nrows() != n {
            return Err(ReachError::dims("flow matrix B", n, b.nrows()));
        }
        if c.len() != n {
            return Err(ReachError::dims("flow offset", n, c.len()));
        }
        Ok(AffineFlow { a, b, c })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn eval(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u + &self.c
    }

    /// State-space image `B ⊗ U ⊕ {c}` of an input set.
    pub fn input_image(&self, u: &Zonotope) -> Result<Zonotope> {
        u.affine_map(&self.b, &self.c)
    }
}

/// Truncated Taylor series of `e^{At}` with entrywise remainder bounds.
#[derive(Debug, Clone)]
pub struct MatrixExponential {
    pub value: DMatrix<f64>,
    /// Upper bound on `‖e^{At} − value‖_∞`.
    pub remainder: f64,
    pub order: usize,
    /// `tails[j]` bounds `Σ_{k≥j} |At|^k / k!` entrywise, for `j ≤ order + 1`.
    tails: Vec<DMatrix<f64>>,
}

impl MatrixExponential {
    /// Entrywise bound on `Σ_{k≥j} |At|^k / k!`.
    pub fn tail(&self, j: usize) -> &DMatrix<f64> {
        &self.tails[j.min(self.tails.len() - 1)]
    }
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn matrix_exponential(a: &DMatrix<f64>, t: f64) -> Result<MatrixExponential> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(ReachError::dims("matrix exponential", n, a.ncols()));
    }
    if !(t >= 0.0) {
        return Err(ReachError::InvalidArgument(format!("negative time {t}")));
    }
    let at = a * t;
    let abs = at.abs();
    let s = inf_norm(&abs);
    if s > 200.0 {
        return Err(ReachError::StepSize {
            remainder: f64::INFINITY,
            limit: REMAINDER_LIMIT,
        });
    }
    // Explicit terms up to K, geometric bound beyond (ratio ≤ 1/2).
    let k_max = (2.0 * s).ceil() as usize + MAX_TAYLOR_ORDER + 2;
    let mut abs_terms = Vec::with_capacity(k_max + 1);
    let mut cur = DMatrix::identity(n, n);
    abs_terms.push(cur.clone());
    for k in 1..=k_max {
        cur = &cur * &abs / k as f64;
        abs_terms.push(cur.clone());
    }
    let ratio = s / (k_max as f64 + 1.0);
    let geo = inf_norm(&abs_terms[k_max]) * ratio / (1.0 - ratio);
    let mut suffix = vec![DMatrix::zeros(n, n); k_max + 2];
    suffix[k_max + 1] = DMatrix::from_element(n, n, geo);
    for k in (0..=k_max).rev() {
        suffix[k] = &suffix[k + 1] + &abs_terms[k];
    }

    let mut order = MIN_TAYLOR_ORDER;
    while order < MAX_TAYLOR_ORDER && inf_norm(&suffix[order + 1]) > REMAINDER_TARGET {
        order += 1;
    }
    let remainder = inf_norm(&suffix[order + 1]);
    if remainder > REMAINDER_LIMIT {
        return Err(ReachError::StepSize {
            remainder,
            limit: REMAINDER_LIMIT,
        });
    }

    let mut value = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=order {
        term = &term * &at / k as f64;
        value += &term;
    }
    suffix.truncate(order + 2);
    Ok(MatrixExponential {
        value,
        remainder,
        order,
        tails: suffix,
    })
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub time_point: Zonotope,
    pub time_interval: Zonotope,
    pub dt: f64,
}

/// Per-(flow, dt) precomputation for repeated steps.
#[derive(Debug, Clone)]
pub struct LinearStepper {
    flow: AffineFlow,
    dt: f64,
    expm: MatrixExponential,
    /// `A^i` for `i = 0..=order`.
    powers: Vec<DMatrix<f64>>,
    gamma: DMatrix<f64>,
    max_order: f64,
}

impl LinearStepper {
    pub fn new(flow: &AffineFlow, dt: f64, max_order: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(ReachError::InvalidArgument(format!("step size {dt} must be positive")));
        }
        let expm = matrix_exponential(&flow.a, dt)?;
        let n = flow.dim();
        let mut powers = vec![DMatrix::identity(n, n)];
        for i in 1..=expm.order {
            let next = &powers[i - 1] * &flow.a;
            powers.push(next);
        }
        let mut gamma = DMatrix::zeros(n, n);
        let mut coef = dt;
        for (i, p) in powers.iter().enumerate() {
            gamma += p * coef;
            coef *= dt / (i as f64 + 2.0);
        }
        Ok(LinearStepper {
            flow: flow.clone(),
            dt,
            expm,
            powers,
            gamma,
            max_order,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn flow(&self) -> &AffineFlow {
        &self.flow
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.expm.value
    }

    pub fn order(&self) -> usize {
        self.expm.order
    }

    /// One step from `r` with inputs in `u`, plus an optional state-space
    /// disturbance box that may vary arbitrarily within the step.
    pub fn step(
        &self,
        r: &Zonotope,
        u: &Zonotope,
        disturbance: Option<&IntervalVector>,
    ) -> Result<StepResult> {
        let n = self.flow.dim();
        if r.dim() != n {
            return Err(ReachError::dims("step state set", n, r.dim()));
        }
        if u.dim() != self.flow.input_dim() {
            return Err(ReachError::dims("step input set", self.flow.input_dim(), u.dim()));
        }
        let dt = self.dt;
        let eta = self.expm.order;

        let mut v_set = self.flow.input_image(u)?;
        if let Some(w) = disturbance {
            if w.dim() != n {
                return Err(ReachError::dims("disturbance", n, w.dim()));
            }
            v_set = v_set.minkowski_sum(&Zonotope::from_box(w))?;
        }
        let v = v_set.center().clone();
        let v0 = v_set.generators().clone();
        let v0_abs = v_set.interval_hull().radius();

        // Homogeneous part plus the constant input.
        let hom = r.linear_map(self.phi())?.translate(&(&self.gamma * &v))?;

        // Time-varying input part: first two Taylor terms kept as
        // generators, the rest as a box.
        let mut input_gens = crate::zonotope::hcat(&(&v0 * dt), &(&self.flow.a * &v0 * (0.5 * dt * dt)));
        let mut box_r = DVector::zeros(n);
        let mut coef = dt * dt * dt / 6.0;
        for i in 2..=eta {
            let gi = &self.powers[i] * &v0;
            for row in 0..n {
                box_r[row] += coef * gi.row(row).iter().map(|x| x.abs()).sum::<f64>();
            }
            coef *= dt / (i as f64 + 2.0);
        }
        input_gens = crate::zonotope::drop_zero_columns(input_gens);

        // Truncation remainders.
        let r_abs = r.interval_hull().abs_max();
        let tail_next = self.expm.tail(eta + 1);
        box_r += tail_next * &r_abs;
        box_r += tail_next * v.abs() * dt;
        box_r += tail_next * &v0_abs * dt;

        let input_part = Zonotope::new(DVector::zeros(n), input_gens)?;
        let common_box = IntervalVector::from_center_radius(&DVector::zeros(n), &box_r);

        let time_point = hom
            .minkowski_sum(&input_part)?
            .minkowski_sum(&Zonotope::from_box(&common_box))?
            .reduce_order(self.max_order);

        // Curvature between time points, built from w = Ax + v over R.
        let w_center = &self.flow.a * r.center() + &v;
        let w_gens = &self.flow.a * r.generators();
        let mut curv = IntervalVector::zeros(n);
        let mut coef = dt * dt / 2.0;
        for i in 2..=eta {
            let c_i = curvature_coefficient(i);
            let p = &self.powers[i - 1];
            let center = p * &w_center;
            let gens = p * &w_gens;
            let rad = DVector::from_iterator(
                n,
                gens.row_iter().map(|row| row.iter().map(|x| x.abs()).sum::<f64>()),
            );
            let hull = IntervalVector::from_center_radius(&center, &rad);
            curv = curv.add(&hull.mul_interval(Interval::new(-c_i * coef, 0.0)));
            coef *= dt / (i as f64 + 1.0);
        }
        let w_abs = IntervalVector::from_center_radius(
            &w_center,
            &DVector::from_iterator(n, w_gens.row_iter().map(|row| row.iter().map(|x| x.abs()).sum::<f64>())),
        )
        .abs_max();
        let curv_tail = self.expm.tail(eta) * w_abs * dt;
        let ti_box = curv.add(&common_box).bloat(&curv_tail);

        let time_interval = r
            .enclose(&hom)?
            .minkowski_sum(&input_part)?
            .minkowski_sum(&Zonotope::from_box(&ti_box))?
            .reduce_order(self.max_order);

        Ok(StepResult {
            time_point,
            time_interval,
            dt,
        })
    }
}

/// `max_{s∈[0,1]} (s − s^i)`.
pub fn curvature_coefficient(i: usize) -> f64 {
    let k = i as f64;
    k.powf(-1.0 / (k - 1.0)) - k.powf(-k / (k - 1.0))
}

/// One step with a freshly built stepper.
pub fn propagate_step(
    flow: &AffineFlow,
    r: &Zonotope,
    u: &Zonotope,
    dt: f64,
    max_order: f64,
) -> Result<StepResult> {
    LinearStepper::new(flow, dt, max_order)?.step(r, u, None)
}

/// True when some half-space of the list excludes the whole set.
pub fn outside_invariant(z: &Zonotope, invariant: &[HalfSpace]) -> bool {
    invariant.iter().any(|h| z.range_along(&h.normal).lo > h.offset)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Halt {
    /// The start set already violates the invariant.
    InitialOutside,
    LeftInvariant,
    Horizon,
}

#[derive(Debug, Clone)]
pub struct AffineReach {
    pub start: Zonotope,
    pub steps: Vec<StepResult>,
    pub halt: Halt,
}

/// Steps until the time-point set leaves the invariant or its clock passes
/// `t_end`. `inputs` is asked for the input set of every step.
#[allow(clippy::too_many_arguments)]
pub fn reach_affine_until<F>(
    flow: &AffineFlow,
    r0: &Zonotope,
    mut inputs: F,
    invariant: &[HalfSpace],
    dt: f64,
    t_end: f64,
    clock_index: usize,
    max_order: f64,
) -> Result<AffineReach>
where
    F: FnMut(&Zonotope) -> Result<Zonotope>,
{
    if outside_invariant(r0, invariant) {
        return Ok(AffineReach {
            start: r0.clone(),
            steps: Vec::new(),
            halt: Halt::InitialOutside,
        });
    }
    let stepper = LinearStepper::new(flow, dt, max_order)?;
    let mut steps: Vec<StepResult> = Vec::new();
    let mut cur = r0.clone();
    loop {
        if cur.coordinate_range(clock_index).lo >= t_end - 1e-12 {
            return Ok(AffineReach {
                start: r0.clone(),
                steps,
                halt: Halt::Horizon,
            });
        }
        let u = inputs(&cur)?;
        let s = stepper.step(&cur, &u, None)?;
        cur = s.time_point.clone();
        steps.push(s);
        if outside_invariant(&cur, invariant) {
            return Ok(AffineReach {
                start: r0.clone(),
                steps,
                halt: Halt::LeftInvariant,
            });
        }
    }
}
