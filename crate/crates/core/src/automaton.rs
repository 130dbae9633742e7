//! Hybrid automaton data model.

use nalgebra::{DMatrix, DVector};

use crate::error::{ReachError, Result};
use crate::reach_linear::AffineFlow;
use crate::zonotope::{HalfSpace, Hyperplane, Zonotope};

/// Discrete transition. The guard normal points out of the source
/// invariant, so `nᵀx − d ≤ 0` on the approach side.
#[derive(Debug, Clone)]
pub struct Transition {
    pub label: String,
    pub guard: Hyperplane,
    /// Closed half-spaces that must also hold on the guard.
    pub side_conditions: Vec<HalfSpace>,
    pub jump_matrix: DMatrix<f64>,
    pub jump_offset: DVector<f64>,
    pub target: usize,
}

impl Transition {
    /// Transition with an identity jump.
    pub fn identity(label: &str, guard: Hyperplane, side_conditions: Vec<HalfSpace>, target: usize) -> Self {
        let n = guard.dim();
        Transition {
            label: label.to_string(),
            guard,
            side_conditions,
            jump_matrix: DMatrix::identity(n, n),
            jump_offset: DVector::zeros(n),
            target,
        }
    }

    pub fn apply_jump(&self, z: &Zonotope) -> Result<Zonotope> {
        z.affine_map(&self.jump_matrix, &self.jump_offset)
    }

    pub fn apply_jump_point(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.jump_matrix * x + &self.jump_offset
    }

    /// Side conditions hold at `x` (with a small tolerance).
    pub fn side_conditions_hold(&self, x: &DVector<f64>) -> bool {
        self.side_conditions.iter().all(|h| h.contains_with_tol(x, 1e-12))
    }
}

#[derive(Debug, Clone)]
pub struct Location {
    pub name: String,
    pub flow: AffineFlow,
    pub invariant: Vec<HalfSpace>,
    pub transitions: Vec<Transition>,
}

impl Location {
    pub fn invariant_holds(&self, x: &DVector<f64>, tol: f64) -> bool {
        self.invariant.iter().all(|h| h.contains_with_tol(x, tol))
    }
}

#[derive(Debug, Clone)]
pub struct HybridAutomaton {
    pub locations: Vec<Location>,
    pub clock_index: usize,
}

impl HybridAutomaton {
    pub fn new(locations: Vec<Location>, clock_index: usize) -> Result<Self> {
        let Some(first) = locations.first() else {
            return Err(ReachError::InvalidArgument("automaton without locations".into()));
        };
        let n = first.flow.dim();
        if clock_index >= n {
            return Err(ReachError::InvalidArgument(format!("clock index {clock_index} out of range")));
        }
        for loc in &locations {
            let f = &loc.flow;
            if f.dim() != n {
                return Err(ReachError::dims("location flow", n, f.dim()));
            }
            let clock_row_zero = f.a.row(clock_index).iter().all(|&v| v == 0.0)
                && f.b.row(clock_index).iter().all(|&v| v == 0.0);
            if !clock_row_zero || f.c[clock_index] != 1.0 {
                return Err(ReachError::InvalidArgument(format!(
                    "location {} does not advance the clock at unit rate",
                    loc.name
                )));
            }
            for h in &loc.invariant {
                if h.normal.len() != n {
                    return Err(ReachError::dims("invariant", n, h.normal.len()));
                }
            }
            for tr in &loc.transitions {
                if tr.target >= locations.len() {
                    return Err(ReachError::InvalidArgument(format!(
                        "transition {} targets missing location {}",
                        tr.label, tr.target
                    )));
                }
                if tr.guard.dim() != n
                    || tr.jump_matrix.shape() != (n, n)
                    || tr.jump_offset.len() != n
                    || tr.side_conditions.iter().any(|h| h.normal.len() != n)
                {
                    return Err(ReachError::dims("transition", n, tr.guard.dim()));
                }
            }
        }
        Ok(HybridAutomaton {
            locations,
            clock_index,
        })
    }

    pub fn dim(&self) -> usize {
        self.locations[0].flow.dim()
    }

    pub fn input_dim(&self) -> usize {
        self.locations[0].flow.input_dim()
    }
}

/// Clock interval of a set.
pub fn clock_projection(z: &Zonotope, clock_index: usize) -> crate::interval::Interval {
    z.coordinate_range(clock_index)
}
