//! Contact-force limits over a reach tree.

use serde::{Deserialize, Serialize};

use crate::contact::{entry_force_range, in_contact, ContactCase, CLOCK, L1, L2, STATE_DIM};
use crate::engine::{max_over, Outcome, ReachEntry, ReachResult};
use crate::error::Result;
use crate::interval::Interval;
use crate::zonotope::HalfSpace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceLimits {
    /// Newtons, from contact start until `window` later.
    pub transient: f64,
    /// Newtons, afterwards.
    pub quasi_static: f64,
    pub window: f64,
}

impl Default for ForceLimits {
    fn default() -> Self {
        ForceLimits {
            transient: 280.0,
            quasi_static: 120.0,
            window: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Safe,
    /// Some limit is exceeded by the over-approximation in every alternative.
    /// This does not prove that a real trajectory violates it.
    Unsafe,
}

impl Verdict {
    pub fn is_safe(self) -> bool {
        self == Verdict::Safe
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchCheck {
    pub branch: usize,
    /// Largest force bound inside the transient window (0 without contact).
    pub transient_peak: f64,
    /// Largest force bound after the transient window.
    pub quasi_static_peak: f64,
    /// This branch's own sets stay within the limits.
    pub within_limits: bool,
    /// Same, for the branch and what follows it.
    pub subtree_safe: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SafetyReport {
    pub verdict: Verdict,
    /// Earliest clock value of the first contact intersection.
    pub contact_start: Option<f64>,
    pub limits: ForceLimits,
    pub branches: Vec<BranchCheck>,
}

/// Lower end of the hit window of the first free-to-contact intersection.
pub fn contact_start(res: &ReachResult) -> Option<f64> {
    let first = res
        .intersections()
        .filter(|(_, r)| r.source == L1 && r.target == L2 && r.pruned.is_some())
        .map(|(_, r)| r.order)
        .min()?;
    res.intersections()
        .filter(|(_, r)| r.source == L1 && r.target == L2 && r.pruned.is_some() && r.order == first)
        .map(|(_, r)| r.hit_window.lo)
        .reduce(f64::min)
}

/// Upper force bound of `e` restricted to the clock halfspace `cut`.
fn restricted_peak(case: &ContactCase, e: &ReachEntry, cut: HalfSpace) -> Result<f64> {
    let contact = if in_contact(e.location) {
        e.location
    } else {
        match e.partner {
            Some(o) if in_contact(o) => o,
            _ => return Ok(0.0),
        }
    };
    let mut hs = vec![cut];
    if e.partner.is_none() {
        hs.extend(case.automaton.locations[contact].invariant.iter().cloned());
    }
    let (r, o) = case.params.force_map();
    Ok(match max_over(&e.time_interval, &r, &hs)? {
        // The restriction is empty.
        None => 0.0,
        Some(m) if e.partner.is_some() => (m + o).max(0.0),
        Some(m) => m + o,
    })
}

/// Transient and quasi-static peaks of one entry given the window split.
fn entry_peaks(case: &ContactCase, e: &ReachEntry, split: f64, limits: &ForceLimits) -> Result<(f64, f64)> {
    let hull = entry_force_range(&case.params, e).hi;
    let mut transient = 0.0;
    let mut quasi = 0.0;
    if e.clock.lo <= split {
        transient = hull;
        if hull >= limits.transient && e.clock.hi > split {
            transient = restricted_peak(case, e, HalfSpace::axis(STATE_DIM, CLOCK, split, true))?;
        }
    }
    if e.clock.hi > split {
        quasi = hull;
        if hull >= limits.quasi_static && e.clock.lo < split {
            quasi = restricted_peak(case, e, HalfSpace::axis(STATE_DIM, CLOCK, split, false))?;
        }
    }
    Ok((transient, quasi))
}

/// Checks every branch and combines them: alternatives need one safe side,
/// everything else must be safe.
pub fn check_safety(case: &ContactCase, res: &ReachResult, limits: &ForceLimits) -> Result<SafetyReport> {
    let start = contact_start(res);
    let split = start.map_or(f64::INFINITY, |s| s + limits.window);
    let mut checks = Vec::with_capacity(res.branches.len());
    for b in &res.branches {
        let mut transient = 0.0f64;
        let mut quasi = 0.0f64;
        for e in &b.entries {
            let (t, q) = entry_peaks(case, e, split, limits)?;
            transient = transient.max(t);
            quasi = quasi.max(q);
        }
        checks.push(BranchCheck {
            branch: b.id,
            transient_peak: transient,
            quasi_static_peak: quasi,
            within_limits: transient < limits.transient && quasi < limits.quasi_static,
            subtree_safe: false,
        });
    }
    // Children always carry larger ids than their parent.
    for id in (0..res.branches.len()).rev() {
        let children_ok = res.branches[id].outcomes.iter().all(|o| match *o {
            Outcome::Single(c) => checks[c].subtree_safe,
            Outcome::Alternatives { synced, unsynced } => checks[synced].subtree_safe || checks[unsynced].subtree_safe,
        });
        checks[id].subtree_safe = checks[id].within_limits && children_ok;
    }
    let verdict = if checks.first().is_some_and(|c| c.subtree_safe) {
        Verdict::Safe
    } else {
        Verdict::Unsafe
    };
    Ok(SafetyReport {
        verdict,
        contact_start: start,
        limits: *limits,
        branches: checks,
    })
}

/// Hull of the force bounds at clock value `t` over the given branches.
pub fn force_envelope_at(case: &ContactCase, res: &ReachResult, branches: &[usize], t: f64) -> Option<Interval> {
    branches
        .iter()
        .flat_map(|&id| res.branches[id].entries.iter())
        .filter(|e| e.clock.contains(t))
        .map(|e| entry_force_range(&case.params, e))
        .reduce(|a, b| a.hull(&b))
}
