use contact_reach::contact::*;
use contact_reach::engine::{Branch, BranchKind, Outcome, ReachEntry, ReachResult};
use contact_reach::guard::Method;
use contact_reach::interval::Interval;
use contact_reach::reach_linear::Halt;
use contact_reach::safety::{check_safety, force_envelope_at, ForceLimits, Verdict};
use contact_reach::zonotope::Zonotope;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// State derivative written out from the robot, controller, contact and
/// delay equations one term at a time.
fn physics(p: &ContactParams, location: usize, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
    let (z, zd, zh, zhd) = (x[Z], x[ZD], x[ZH], x[ZHD]);
    let (z_des, zd_des, zdd_des) = (u[0], u[1], u[2]);
    let impedance = location == L1 || location == L2;
    let controller = if impedance {
        -p.k_t * (zh - z_des) - p.d_t * (zhd - zd_des) + p.m * zdd_des
    } else {
        -p.d_r * zhd
    };
    let contact = if in_contact(location) {
        -p.k_e * (z - p.l) - p.d_e * zd
    } else {
        0.0
    };
    let zdd = (controller + contact) / p.m;
    let k = 2.0 / p.d2;
    DVector::from_row_slice(&[zd, zdd, k * (z - zh) - zd, k * (zd - zhd) - zdd, 1.0])
}

#[test]
fn flows_match_the_equations_of_motion() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for m in [1.5, 4.5, 8.0, 3.0] {
        let mut p = ContactParams::nominal(m);
        p.d_e = 12.0;
        p.l = 0.002;
        let flows = location_flows(&p);
        for _ in 0..50 {
            let x = DVector::from_fn(STATE_DIM, |_, _| rng.random_range(-0.05..0.05));
            let u = DVector::from_fn(INPUT_DIM, |_, _| rng.random_range(-1.0..1.0));
            for (loc, f) in flows.iter().enumerate() {
                let a = f.eval(&x, &u);
                let b = physics(&p, loc, &x, &u);
                for i in 0..STATE_DIM {
                    assert!((a[i] - b[i]).abs() <= 1e-12 * b[i].abs().max(1.0), "m {m} L{} row {i}", loc + 1);
                }
            }
        }
    }
}

#[test]
fn untabulated_mass_uses_critical_damping() {
    let p = ContactParams::nominal(2.0);
    assert!((p.d_t - 2.0 * (2.0f64 * 1000.0).sqrt()).abs() < 1e-12);
    assert_eq!(ContactParams::nominal(4.5).d_t, 135.0);
}

#[test]
fn delayed_states_converge_to_a_constant_signal() {
    let p = ContactParams::nominal(4.5);
    let f = &location_flows(&p)[L4];
    // Robot at rest, delayed copy off by a little: only the delay rows move.
    let x = DVector::from_row_slice(&[0.01, 0.0, 0.012, 0.0, 0.0]);
    let dx = f.eval(&x, &DVector::zeros(INPUT_DIM));
    assert!((dx[ZH] - (2.0 / p.d2) * (0.01 - 0.012)).abs() < 1e-12);
    assert_eq!(dx[Z], 0.0);
}

fn entry(location: usize, force: f64, t0: f64, t1: f64) -> ReachEntry {
    let p = ContactParams::nominal(4.5);
    let z = -force / p.k_e;
    let set = Zonotope::from_diagonal(
        DVector::from_row_slice(&[z, 0.0, z, 0.0, 0.5 * (t0 + t1)]),
        &[0.0, 0.0, 0.0, 0.0, 0.5 * (t1 - t0)],
    )
    .unwrap();
    ReachEntry {
        location,
        partner: None,
        time_point: set.clone(),
        time_interval: set,
        clock: Interval::new(t0, t1),
    }
}

fn branch(id: usize, parent: Option<usize>, kind: BranchKind, entries: Vec<ReachEntry>, outcomes: Vec<Outcome>) -> Branch {
    Branch {
        id,
        parent,
        kind,
        location: entries[0].location,
        depth: usize::from(parent.is_some()),
        start: entries[0].time_point.clone(),
        entries,
        halt: Halt::Horizon,
        intersections: Vec::new(),
        outcomes,
        sync_note: None,
    }
}

/// Root in free motion, then two alternative contact branches with the given
/// force profiles (time, force) over 0.1 s slices.
fn synthetic(a: &[(f64, f64)], b: &[(f64, f64)]) -> ReachResult {
    let slices = |profile: &[(f64, f64)]| profile.iter().map(|&(t, f)| entry(L2, f, t, t + 0.1)).collect();
    ReachResult {
        branches: vec![
            branch(
                0,
                None,
                BranchKind::Root,
                vec![entry(L1, 0.0, 0.0, 0.1)],
                vec![Outcome::Alternatives { synced: 1, unsynced: 2 }],
            ),
            branch(1, Some(0), BranchKind::Synced, slices(a), vec![]),
            branch(2, Some(0), BranchKind::Unsynced, slices(b), vec![]),
        ],
        clock_index: CLOCK,
        wall_time: 0.0,
    }
}

#[test]
fn safety_logic() {
    let case = ContactCase::nominal(4.5, 0.2).unwrap();
    let limits = ForceLimits::default();
    // Without a recorded contact intersection the transient limit applies throughout.
    let low = synthetic(&[(0.1, 50.0), (0.2, 40.0)], &[(0.1, 30.0)]);
    assert_eq!(check_safety(&case, &low, &limits).unwrap().verdict, Verdict::Safe);
    let both = synthetic(&[(0.2, 300.0)], &[(0.2, 300.0)]);
    assert_eq!(check_safety(&case, &both, &limits).unwrap().verdict, Verdict::Unsafe);
    // One alternative within limits is enough.
    let one = synthetic(&[(0.2, 300.0)], &[(0.2, 250.0)]);
    let report = check_safety(&case, &one, &limits).unwrap();
    assert_eq!(report.verdict, Verdict::Safe);
    assert!(!report.branches[1].subtree_safe && report.branches[2].subtree_safe);
    let env = force_envelope_at(&case, &one, &[1, 2], 0.25).unwrap();
    assert!((env.lo - 250.0).abs() < 1e-9 && (env.hi - 300.0).abs() < 1e-9);
}

#[test]
fn free_motion_has_no_force() {
    let p = ContactParams::nominal(1.5);
    let e = entry(L1, 100.0, 0.0, 0.1);
    assert_eq!(entry_force_range(&p, &e), Interval::point(0.0));
    let mut paired = entry(L1, 100.0, 0.0, 0.1);
    paired.partner = Some(L2);
    let f = entry_force_range(&p, &paired);
    assert!(f.lo == 0.0 && (f.hi - 100.0).abs() < 1e-9);
}

#[test]
fn contact_run_starts_on_schedule() {
    let s = contact_reach::scenario::Scenario::nominal(1.5, 0.2, Method::Geometric);
    let run = contact_reach::runner::run_scenario(&s).unwrap();
    let start = run.safety.contact_start.unwrap();
    assert!((start - 0.1).abs() <= 2.0 * DEFAULT_STEP);
}
