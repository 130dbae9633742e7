//! Independent oracles shared by the numeric suites and the acceptance run.
//! Each check returns its largest observed error.

#![allow(dead_code)]

use contact_reach::constrained::ConstrainedZonotope;
use contact_reach::contact::{delay_subsystem, location_flows, ContactParams, DEFAULT_STEP};
use contact_reach::linprog::{solve, LpOutcome, LpProblem};
use contact_reach::reach_linear::{matrix_exponential, AffineFlow, LinearStepper};
use contact_reach::sim::rk4_step;
use contact_reach::zonotope::Zonotope;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `e^{At}` by scaling and squaring around a 30-term Taylor sum.
pub fn expm_oracle(a: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let n = a.nrows();
    let at = a * t;
    let norm = at.iter().map(|v| v.abs()).sum::<f64>();
    let mut s = 0;
    while norm / 2f64.powi(s) > 0.5 {
        s += 1;
    }
    let m = at / 2f64.powi(s);
    let mut sum = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=30 {
        term = &term * &m / k as f64;
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    (a - b).iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale
}

/// Contact flows at the default step plus random 4×4 matrices.
pub fn expm_error() -> f64 {
    let mut worst = 0.0f64;
    for m in [1.5, 4.5, 8.0] {
        for f in location_flows(&ContactParams::nominal(m)) {
            let e = matrix_exponential(&f.a, DEFAULT_STEP).unwrap();
            worst = worst.max(rel_err(&e.value, &expm_oracle(&f.a, DEFAULT_STEP)));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let a = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-3.0..3.0));
        let t = rng.random_range(0.01..0.5);
        let e = matrix_exponential(&a, t).unwrap();
        worst = worst.max(rel_err(&e.value, &expm_oracle(&a, t)));
    }
    worst
}

/// Double integrator under a constant input, box of initial states.
pub fn lti_error() -> f64 {
    let flow = AffineFlow::new(
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
        DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        DVector::zeros(2),
    )
    .unwrap();
    let (p0, v0, rp, rv, u, dt) = (0.3, -0.7, 0.05, 0.1, 1.7, 0.01);
    let stepper = LinearStepper::new(&flow, dt, 50.0).unwrap();
    let input = Zonotope::point(DVector::from_element(1, u));
    let mut z = Zonotope::from_diagonal(DVector::from_row_slice(&[p0, v0]), &[rp, rv]).unwrap();
    let mut worst = 0.0f64;
    for k in 1..=200 {
        z = stepper.step(&z, &input, None).unwrap().time_point;
        let t = k as f64 * dt;
        // Position depends on both initial coordinates, velocity on one.
        let pc = p0 + v0 * t + 0.5 * u * t * t;
        let pr = rp + rv * t;
        let vc = v0 + u * t;
        let h = z.interval_hull();
        let expected = [(pc - pr, pc + pr), (vc - rv, vc + rv)];
        for (i, (lo, hi)) in expected.iter().enumerate() {
            worst = worst.max((h.lower()[i] - lo).abs()).max((h.upper()[i] - hi).abs());
        }
    }
    worst
}

/// Unit step through the first-order delay approximation, against
/// `1 − 2e^{−2t/d₂}`, by set propagation and by fine integration.
pub fn pade_error() -> f64 {
    let d2 = 0.0019;
    let flow = delay_subsystem(d2);
    // The step's derivative is an impulse that kicks x by +1 and x̂ by −1.
    let x0 = DVector::from_row_slice(&[1.0, -1.0, 0.0]);
    let u = DVector::zeros(1);
    let analytic = |t: f64| 1.0 - 2.0 * (-2.0 * t / d2).exp();
    let mut worst = 0.0f64;

    let dt = 1e-4;
    let stepper = LinearStepper::new(&flow, dt, 50.0).unwrap();
    let mut z = Zonotope::point(x0.clone());
    let input = Zonotope::point(u.clone());
    for k in 1..=100 {
        z = stepper.step(&z, &input, None).unwrap().time_point;
        worst = worst.max((z.center()[1] - analytic(k as f64 * dt)).abs());
    }

    let h = 1e-6;
    let mut x = x0;
    for k in 1..=10_000 {
        x = rk4_step(&flow, &x, &u, h);
        if k % 100 == 0 {
            worst = worst.max((x[1] - analytic(k as f64 * h)).abs());
        }
    }
    worst
}

/// All `k`-subsets of `0..n`.
fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    if n < k {
        return Vec::new();
    }
    let mut out = subsets(n - 1, k);
    for mut s in subsets(n - 1, k - 1) {
        s.push(n - 1);
        out.push(s);
    }
    out
}

/// Vertices of `{x | Ex = f, l ≤ x ≤ u}`: every choice of `n − m` variables
/// at a bound, remaining ones solved for.
pub fn box_polytope_vertices(
    e: &DMatrix<f64>,
    f: &DVector<f64>,
    l: &DVector<f64>,
    u: &DVector<f64>,
) -> Vec<DVector<f64>> {
    let (m, n) = e.shape();
    let mut out = Vec::new();
    for basic in subsets(n, m) {
        let free: Vec<usize> = (0..n).filter(|i| !basic.contains(i)).collect();
        let eb = DMatrix::from_fn(m, m, |r, c| e[(r, basic[c])]);
        let Some(inv) = eb.clone().try_inverse() else {
            continue;
        };
        if eb.determinant().abs() < 1e-9 {
            continue;
        }
        for mask in 0..(1u64 << free.len()) {
            let mut x = DVector::zeros(n);
            for (j, &i) in free.iter().enumerate() {
                x[i] = if mask >> j & 1 == 1 { u[i] } else { l[i] };
            }
            let xb = &inv * (f - e * &x);
            for (c, &i) in basic.iter().enumerate() {
                x[i] = xb[c];
            }
            if (0..n).all(|i| x[i] >= l[i] - 1e-9 && x[i] <= u[i] + 1e-9) {
                out.push(x);
            }
        }
    }
    out
}

fn random_cz(rng: &mut ChaCha8Rng) -> ConstrainedZonotope {
    let n = 2;
    let p = rng.random_range(3..=5);
    let m = rng.random_range(1..=2);
    let g = DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
    let a = DMatrix::from_fn(m, p, |_, _| rng.random_range(-1.0..1.0));
    // Right-hand side of a feasible coefficient vector.
    let beta = DVector::from_fn(p, |_, _| rng.random_range(-0.8..0.8));
    let b = &a * beta;
    let c = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
    ConstrainedZonotope::new(c, g, a, b).unwrap()
}

/// Interval hulls of small constrained zonotopes against the images of all
/// feasible coefficient vertices.
pub fn cz_hull_error() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..60 {
        let cz = random_cz(&mut rng);
        let p = cz.num_generators();
        let ones = DVector::from_element(p, 1.0);
        let verts = box_polytope_vertices(cz.constraint_matrix(), cz.constraint_vector(), &(-&ones), &ones);
        let hull = cz.interval_hull().unwrap().expect("feasible by construction");
        for i in 0..cz.dim() {
            let vals: Vec<f64> = verts
                .iter()
                .map(|b| cz.center()[i] + (cz.generators().row(i) * b)[0])
                .collect();
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            worst = worst.max((hull.lower()[i] - lo).abs()).max((hull.upper()[i] - hi).abs());
        }
    }
    worst
}

/// Optimal values of random bounded LPs against the best vertex.
pub fn lp_error() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    let mut infeasible_agree = true;
    for _ in 0..80 {
        let n = rng.random_range(3..=6);
        let m = rng.random_range(1..=2.min(n - 1));
        let e = DMatrix::from_fn(m, n, |_, _| rng.random_range(-2.0..2.0));
        let l = DVector::from_fn(n, |_, _| rng.random_range(-2.0..0.0));
        let u = DVector::from_fn(n, |i, _| l[i] + rng.random_range(0.1..3.0));
        // Half the instances are feasible by construction.
        let f = if rng.random_bool(0.5) {
            let x = DVector::from_fn(n, |i, _| rng.random_range(l[i]..u[i]));
            &e * x
        } else {
            DVector::from_fn(m, |_, _| rng.random_range(-8.0..8.0))
        };
        let c = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let verts = box_polytope_vertices(&e, &f, &l, &u);
        let best = verts.iter().map(|x| c.dot(x)).fold(f64::INFINITY, f64::min);
        let p = LpProblem {
            objective: c,
            eq_matrix: e,
            eq_vector: f,
            lower: l,
            upper: u,
        };
        match solve(&p).unwrap() {
            LpOutcome::Optimal(s) => {
                if verts.is_empty() {
                    infeasible_agree = false;
                } else {
                    worst = worst.max((s.optimum - best).abs());
                }
            }
            LpOutcome::Infeasible => {
                if !verts.is_empty() {
                    infeasible_agree = false;
                }
            }
        }
    }
    if infeasible_agree {
        worst
    } else {
        f64::INFINITY
    }
}
