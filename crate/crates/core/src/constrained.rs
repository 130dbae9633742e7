//! Constrained zonotopes `{c + Gβ | Aβ = b, β ∈ [-1, 1]^p}`.

use nalgebra::{DMatrix, DVector};

use crate::error::{ReachError, Result};
use crate::interval::IntervalVector;
use crate::linprog::{self, LpOutcome, LpProblem};
use crate::zonotope::{hcat, HalfSpace, Hyperplane, Zonotope, GEOM_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedZonotope {
    center: DVector<f64>,
    generators: DMatrix<f64>,
    constraint_matrix: DMatrix<f64>,
    constraint_vector: DVector<f64>,
}

impl From<&Zonotope> for ConstrainedZonotope {
    fn from(z: &Zonotope) -> Self {
        ConstrainedZonotope {
            center: z.center().clone(),
            generators: z.generators().clone(),
            constraint_matrix: DMatrix::zeros(0, z.num_generators()),
            constraint_vector: DVector::zeros(0),
        }
    }
}

impl ConstrainedZonotope {
    pub fn new(
        center: DVector<f64>,
        generators: DMatrix<f64>,
        constraint_matrix: DMatrix<f64>,
        constraint_vector: DVector<f64>,
    ) -> Result<Self> {
        if generators.nrows() != center.len() {
            return Err(ReachError::dims("constrained generators", center.len(), generators.nrows()));
        }
        if constraint_matrix.ncols() != generators.ncols() {
            return Err(ReachError::dims(
                "constraint columns",
                generators.ncols(),
                constraint_matrix.ncols(),
            ));
        }
        if constraint_matrix.nrows() != constraint_vector.len() {
            return Err(ReachError::dims(
                "constraint rows",
                constraint_matrix.nrows(),
                constraint_vector.len(),
            ));
        }
        Ok(ConstrainedZonotope {
            center,
            generators,
            constraint_matrix,
            constraint_vector,
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn num_generators(&self) -> usize {
        self.generators.ncols()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraint_matrix.nrows()
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn generators(&self) -> &DMatrix<f64> {
        &self.generators
    }

    pub fn constraint_matrix(&self) -> &DMatrix<f64> {
        &self.constraint_matrix
    }

    pub fn constraint_vector(&self) -> &DVector<f64> {
        &self.constraint_vector
    }

    /// Drops the constraints; a superset of the constrained set.
    pub fn unconstrained(&self) -> Zonotope {
        Zonotope::new(self.center.clone(), self.generators.clone()).expect("consistent dimensions")
    }

    fn push_row(&mut self, row: DVector<f64>, rhs: f64) {
        let m = self.num_constraints();
        let p = self.num_generators();
        let mut a = DMatrix::zeros(m + 1, p);
        if m > 0 {
            a.view_mut((0, 0), (m, p)).copy_from(&self.constraint_matrix);
        }
        a.set_row(m, &row.transpose());
        self.constraint_matrix = a;
        self.constraint_vector = self.constraint_vector.push(rhs);
    }

    /// Exact intersection with `{x | nᵀx = d}`.
    pub fn intersect_hyperplane(&self, h: &Hyperplane) -> Result<ConstrainedZonotope> {
        if h.dim() != self.dim() {
            return Err(ReachError::dims("hyperplane", self.dim(), h.dim()));
        }
        let mut out = self.clone();
        let row = self.generators.transpose() * h.normal();
        out.push_row(row, h.offset() - h.normal().dot(&self.center));
        Ok(out)
    }

    /// Exact intersection with `{x | aᵀx ≤ b}` via one slack generator.
    /// Returns `None` when the zonotope part lies entirely outside.
    pub fn intersect_halfspace(&self, hs: &HalfSpace) -> Result<Option<ConstrainedZonotope>> {
        if hs.normal.len() != self.dim() {
            return Err(ReachError::dims("half-space", self.dim(), hs.normal.len()));
        }
        let range = self.unconstrained().range_along(&hs.normal);
        // Round-off on the boundary is resolved toward the larger set.
        let tol = GEOM_TOL * range.lo.abs().max(range.hi.abs()).max(hs.offset.abs()).max(1.0);
        if range.hi <= hs.offset + tol {
            return Ok(Some(self.clone()));
        }
        let dm = hs.offset - range.lo;
        if dm < -tol {
            return Ok(None);
        }
        let dm = dm.max(0.0);
        let n = self.dim();
        let p = self.num_generators();
        let m = self.num_constraints();
        let half = 0.5 * dm;
        let generators = hcat(&self.generators, &DMatrix::zeros(n, 1));
        let mut a = DMatrix::zeros(m + 1, p + 1);
        if m > 0 {
            a.view_mut((0, 0), (m, p)).copy_from(&self.constraint_matrix);
        }
        let row = self.generators.transpose() * &hs.normal;
        for j in 0..p {
            a[(m, j)] = row[j];
        }
        a[(m, p)] = half;
        let b = self
            .constraint_vector
            .push(hs.offset - hs.normal.dot(&self.center) - half);
        Ok(Some(ConstrainedZonotope {
            center: self.center.clone(),
            generators,
            constraint_matrix: a,
            constraint_vector: b,
        }))
    }

    /// Intersects with every half-space in turn; `None` once empty.
    pub fn intersect_halfspaces(&self, list: &[HalfSpace]) -> Result<Option<ConstrainedZonotope>> {
        let mut cur = self.clone();
        for hs in list {
            match cur.intersect_halfspace(hs)? {
                Some(next) => cur = next,
                None => return Ok(None),
            }
        }
        Ok(Some(cur))
    }

    fn lp(&self, objective: DVector<f64>) -> LpProblem {
        LpProblem::unit_box(
            objective,
            self.constraint_matrix.clone(),
            self.constraint_vector.clone(),
        )
    }

    pub fn is_empty(&self) -> Result<bool> {
        if self.num_constraints() == 0 {
            return Ok(false);
        }
        let lp = self.lp(DVector::zeros(self.num_generators()));
        Ok(!linprog::solve(&lp)?.is_feasible())
    }

    /// Range of `ℓᵀx` over the set, `None` when empty.
    ///
    /// Bounds come from the Lagrangian dual of each LP, so they enclose the
    /// true range even when the primal solution is slightly off.
    pub fn range_along(&self, dir: &DVector<f64>) -> Result<Option<(f64, f64)>> {
        if dir.len() != self.dim() {
            return Err(ReachError::dims("support direction", self.dim(), dir.len()));
        }
        if self.num_constraints() == 0 {
            let r = self.unconstrained().range_along(dir);
            return Ok(Some((r.lo, r.hi)));
        }
        let w = self.generators.transpose() * dir;
        let base = dir.dot(&self.center);
        let lo = match linprog::solve(&self.lp(w.clone()))? {
            LpOutcome::Infeasible => return Ok(None),
            LpOutcome::Optimal(s) => s.dual_bound.min(s.optimum),
        };
        let hi = match linprog::solve(&self.lp(-w))? {
            LpOutcome::Infeasible => return Ok(None),
            LpOutcome::Optimal(s) => -(s.dual_bound.min(s.optimum)),
        };
        // Keep the zonotope bound as an outer limit on LP round-off.
        let outer = self.unconstrained().range_along(dir);
        let lo = (base + lo).max(outer.lo);
        let hi = (base + hi).min(outer.hi);
        Ok(Some((lo.min(hi), hi.max(lo))))
    }

    /// Tightest axis-aligned enclosure via `2n` LPs; `None` when empty.
    pub fn interval_hull(&self) -> Result<Option<IntervalVector>> {
        let n = self.dim();
        if self.num_constraints() == 0 {
            return Ok(Some(self.unconstrained().interval_hull()));
        }
        if self.is_empty()? {
            return Ok(None);
        }
        let mut lower = DVector::zeros(n);
        let mut upper = DVector::zeros(n);
        for i in 0..n {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            match self.range_along(&e)? {
                Some((lo, hi)) => {
                    lower[i] = lo;
                    upper[i] = hi;
                }
                None => return Ok(None),
            }
        }
        Ok(Some(IntervalVector::new(lower, upper)?))
    }

    /// Tests membership of `x` with tolerance [`GEOM_TOL`].
    pub fn contains_point(&self, x: &DVector<f64>) -> Result<bool> {
        if x.len() != self.dim() {
            return Err(ReachError::dims("containment", self.dim(), x.len()));
        }
        let p = self.num_generators();
        let m = self.num_constraints();
        let n = self.dim();
        let mut a = DMatrix::zeros(n + m, p);
        a.view_mut((0, 0), (n, p)).copy_from(&self.generators);
        if m > 0 {
            a.view_mut((n, 0), (m, p)).copy_from(&self.constraint_matrix);
        }
        let mut b = DVector::zeros(n + m);
        b.rows_mut(0, n).copy_from(&(x - &self.center));
        b.rows_mut(n, m).copy_from(&self.constraint_vector);
        if p == 0 {
            return Ok(b.amax() <= GEOM_TOL);
        }
        let lp = LpProblem::unit_box(DVector::zeros(p), a, b);
        Ok(linprog::solve(&lp)?.is_feasible())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box() -> ConstrainedZonotope {
        let z = Zonotope::from_diagonal(DVector::zeros(2), &[1.0, 1.0]).unwrap();
        ConstrainedZonotope::from(&z)
    }

    #[test]
    fn unconstrained_hull_matches_zonotope() {
        let z = Zonotope::new(
            DVector::from_row_slice(&[1.0, 2.0]),
            DMatrix::from_row_slice(2, 3, &[1.0, 0.5, -0.2, 0.3, -1.0, 0.4]),
        )
        .unwrap();
        let cz = ConstrainedZonotope::from(&z);
        assert_eq!(cz.interval_hull().unwrap().unwrap(), z.interval_hull());
    }

    #[test]
    fn fixed_factor_constraint() {
        let b = unit_box();
        let cz = ConstrainedZonotope::new(
            b.center().clone(),
            b.generators().clone(),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DVector::from_row_slice(&[0.5]),
        )
        .unwrap();
        let h = cz.interval_hull().unwrap().unwrap();
        assert!((h.lower()[0] - 0.5).abs() < 1e-9 && (h.upper()[0] - 0.5).abs() < 1e-9);
        assert!((h.lower()[1] + 1.0).abs() < 1e-9 && (h.upper()[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn hyperplane_slice_and_emptiness() {
        let b = unit_box();
        let s = b.intersect_hyperplane(&Hyperplane::axis(2, 0, 0.0)).unwrap();
        let h = s.interval_hull().unwrap().unwrap();
        assert!(h.lower()[0].abs() < 1e-9 && h.upper()[0].abs() < 1e-9);
        let far = b.intersect_hyperplane(&Hyperplane::axis(2, 0, 3.0)).unwrap();
        assert!(far.is_empty().unwrap());
        assert!(far.interval_hull().unwrap().is_none());
    }

    #[test]
    fn halfspace_prune() {
        let b = unit_box();
        let cut = b
            .intersect_halfspace(&HalfSpace::axis(2, 1, 0.0, true))
            .unwrap()
            .unwrap();
        let h = cut.interval_hull().unwrap().unwrap();
        assert!((h.lower()[1] + 1.0).abs() < 1e-9 && h.upper()[1].abs() < 1e-9);
        assert!((h.lower()[0] + 1.0).abs() < 1e-9 && (h.upper()[0] - 1.0).abs() < 1e-9);
        let whole = b
            .intersect_halfspace(&HalfSpace::axis(2, 1, 5.0, true))
            .unwrap()
            .unwrap();
        assert_eq!(whole, b);
        assert!(b
            .intersect_halfspace(&HalfSpace::axis(2, 1, -2.0, true))
            .unwrap()
            .is_none());
    }

    #[test]
    fn point_membership() {
        let s = unit_box().intersect_hyperplane(&Hyperplane::axis(2, 0, 0.0)).unwrap();
        assert!(s.contains_point(&DVector::from_row_slice(&[0.0, 0.7])).unwrap());
        assert!(!s.contains_point(&DVector::from_row_slice(&[0.2, 0.7])).unwrap());
    }
}
