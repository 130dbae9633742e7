//! Zonotopes `{c + Gβ | β ∈ [-1, 1]^p}` and the exact operations on them.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{ReachError, Result};
use crate::interval::{Interval, IntervalVector};
use crate::linprog::{self, LpProblem};

/// Tolerance for unit normals and emptiness decisions.
pub const GEOM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Zonotope {
    center: DVector<f64>,
    generators: DMatrix<f64>,
}

impl Zonotope {
    pub fn new(center: DVector<f64>, generators: DMatrix<f64>) -> Result<Self> {
        if generators.nrows() != center.len() {
            return Err(ReachError::dims("zonotope generators", center.len(), generators.nrows()));
        }
        Ok(Zonotope { center, generators })
    }

    pub fn point(center: DVector<f64>) -> Self {
        let n = center.len();
        Zonotope {
            center,
            generators: DMatrix::zeros(n, 0),
        }
    }

    /// Axis-aligned box; zero-width axes get no generator.
    pub fn from_box(b: &IntervalVector) -> Self {
        let r = b.radius();
        let axes: Vec<usize> = (0..b.dim()).filter(|&i| r[i] > 0.0).collect();
        let mut g = DMatrix::zeros(b.dim(), axes.len());
        for (k, &i) in axes.iter().enumerate() {
            g[(i, k)] = r[i];
        }
        Zonotope {
            center: b.center(),
            generators: g,
        }
    }

    /// Center with a diagonal generator matrix built from `radii`.
    pub fn from_diagonal(center: DVector<f64>, radii: &[f64]) -> Result<Self> {
        if radii.len() != center.len() {
            return Err(ReachError::dims("diagonal radii", center.len(), radii.len()));
        }
        let lo = &center - DVector::from_row_slice(radii).abs();
        let hi = &center + DVector::from_row_slice(radii).abs();
        Ok(Zonotope::from_box(&IntervalVector::new(lo, hi)?))
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn num_generators(&self) -> usize {
        self.generators.ncols()
    }

    pub fn order(&self) -> f64 {
        if self.dim() == 0 {
            0.0
        } else {
            self.num_generators() as f64 / self.dim() as f64
        }
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn generators(&self) -> &DMatrix<f64> {
        &self.generators
    }

    pub fn into_parts(self) -> (DVector<f64>, DMatrix<f64>) {
        (self.center, self.generators)
    }

    fn check_dim(&self, context: &'static str, n: usize) -> Result<()> {
        if n != self.dim() {
            return Err(ReachError::dims(context, self.dim(), n));
        }
        Ok(())
    }

    /// Exact Minkowski sum: centers add, generator matrices concatenate.
    pub fn minkowski_sum(&self, other: &Zonotope) -> Result<Zonotope> {
        self.check_dim("minkowski sum", other.dim())?;
        Ok(Zonotope {
            center: &self.center + &other.center,
            generators: hcat(&self.generators, &other.generators),
        })
    }

    /// Exact linear image `M ⊗ Z`.
    pub fn linear_map(&self, m: &DMatrix<f64>) -> Result<Zonotope> {
        self.check_dim("linear map", m.ncols())?;
        Ok(Zonotope {
            center: m * &self.center,
            generators: m * &self.generators,
        })
    }

    /// Affine image `M ⊗ Z + o`.
    pub fn affine_map(&self, m: &DMatrix<f64>, offset: &DVector<f64>) -> Result<Zonotope> {
        let mut z = self.linear_map(m)?;
        if offset.len() != z.dim() {
            return Err(ReachError::dims("affine offset", z.dim(), offset.len()));
        }
        z.center += offset;
        Ok(z)
    }

    pub fn translate(&self, v: &DVector<f64>) -> Result<Zonotope> {
        self.check_dim("translation", v.len())?;
        Ok(Zonotope {
            center: &self.center + v,
            generators: self.generators.clone(),
        })
    }

    /// Scales the generators by `s` around the center.
    pub fn scale_generators(&self, s: f64) -> Zonotope {
        Zonotope {
            center: self.center.clone(),
            generators: &self.generators * s,
        }
    }

    /// Tightest box: radius i = Σ_j |G_ij|.
    pub fn interval_hull(&self) -> IntervalVector {
        let r = self.generator_radius();
        IntervalVector::from_center_radius(&self.center, &r)
    }

    fn generator_radius(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.generators.row_iter().map(|row| row.iter().map(|v| v.abs()).sum::<f64>()),
        )
    }

    /// n-th root of the interval-hull volume.
    pub fn volume_measure(&self) -> f64 {
        box_volume_measure(&self.interval_hull())
    }

    /// Support function `max ℓᵀx`.
    pub fn support(&self, dir: &DVector<f64>) -> f64 {
        self.range_along(dir).hi
    }

    /// Range of `ℓᵀx` over the set.
    pub fn range_along(&self, dir: &DVector<f64>) -> Interval {
        let c = dir.dot(&self.center);
        let r: f64 = (self.generators.transpose() * dir).iter().map(|v| v.abs()).sum();
        Interval::new(c - r, c + r)
    }

    /// Range of coordinate `i`.
    pub fn coordinate_range(&self, i: usize) -> Interval {
        let r: f64 = self.generators.row(i).iter().map(|v| v.abs()).sum();
        Interval::new(self.center[i] - r, self.center[i] + r)
    }

    /// Over-approximating order reduction: keeps the longest generators and
    /// boxes the rest so that at most `max_order · n` generators remain.
    pub fn reduce_order(&self, max_order: f64) -> Zonotope {
        let n = self.dim();
        let p = self.num_generators();
        let limit = (max_order.max(1.0) * n as f64).floor() as usize;
        if p <= limit || n == 0 {
            return self.clone();
        }
        let mut idx: Vec<(usize, f64)> = (0..p)
            .map(|j| (j, self.generators.column(j).norm()))
            .collect();
        idx.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        // `n` slots go to the box of the remainder.
        let keep = limit.saturating_sub(n);
        let mut g = DMatrix::zeros(n, keep + n);
        let mut boxed = DVector::zeros(n);
        for (rank, &(j, _)) in idx.iter().enumerate() {
            if rank < keep {
                g.set_column(rank, &self.generators.column(j));
            } else {
                boxed += self.generators.column(j).abs();
            }
        }
        for i in 0..n {
            g[(i, keep + i)] = boxed[i];
        }
        Zonotope {
            center: self.center.clone(),
            generators: drop_zero_columns(g),
        }
    }

    /// Removes generators that are exactly zero.
    pub fn compact(&self) -> Zonotope {
        Zonotope {
            center: self.center.clone(),
            generators: drop_zero_columns(self.generators.clone()),
        }
    }

    /// Enclosure of `conv(self ∪ other)` with matched generators.
    pub fn enclose(&self, other: &Zonotope) -> Result<Zonotope> {
        self.check_dim("enclose", other.dim())?;
        let n = self.dim();
        let p = self.num_generators().max(other.num_generators());
        let pad = |g: &DMatrix<f64>| {
            let mut out = DMatrix::zeros(n, p);
            out.view_mut((0, 0), (n, g.ncols())).copy_from(g);
            out
        };
        let ga = pad(&self.generators);
        let gb = pad(&other.generators);
        let center = (&self.center + &other.center) * 0.5;
        let mut g = DMatrix::zeros(n, 2 * p + 1);
        g.view_mut((0, 0), (n, p)).copy_from(&((&ga + &gb) * 0.5));
        g.set_column(p, &((&self.center - &other.center) * 0.5));
        g.view_mut((0, p + 1), (n, p)).copy_from(&((&ga - &gb) * 0.5));
        Ok(Zonotope {
            center,
            generators: drop_zero_columns(g),
        })
    }

    /// Decides `x ∈ Z` with one feasibility LP over the generator factors.
    pub fn contains_point(&self, x: &DVector<f64>) -> Result<bool> {
        self.check_dim("containment", x.len())?;
        if !self.interval_hull().contains_with_tol(x, GEOM_TOL) {
            return Ok(false);
        }
        let d = x - &self.center;
        if self.num_generators() == 0 {
            return Ok(d.amax() <= GEOM_TOL);
        }
        if self.least_norm_certificate(&d) {
            return Ok(true);
        }
        let p = self.num_generators();
        let lp = LpProblem::unit_box(DVector::zeros(p), self.generators.clone(), d);
        Ok(linprog::solve(&lp)?.is_feasible())
    }

    /// Cheap sufficient test: the minimum-norm factor vector lies in the box.
    fn least_norm_certificate(&self, d: &DVector<f64>) -> bool {
        let g = &self.generators;
        let gram = g * g.transpose();
        let Some(chol) = gram.cholesky() else {
            return false;
        };
        let beta = g.transpose() * chol.solve(d);
        let resid = (g * &beta - d).amax();
        beta.amax() <= 1.0 && resid <= GEOM_TOL * (1.0 + d.amax())
    }

    /// Point for the factor vector `beta`.
    pub fn point_at(&self, beta: &DVector<f64>) -> DVector<f64> {
        &self.center + &self.generators * beta
    }

    /// Uniformly sampled factor vector mapped into the set.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let beta = DVector::from_fn(self.num_generators(), |_, _| rng.random_range(-1.0..=1.0));
        self.point_at(&beta)
    }

    /// Vertex-ish sample: every factor at ±1.
    pub fn sample_extreme<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let beta = DVector::from_fn(self.num_generators(), |_, _| {
            if rng.random_bool(0.5) {
                1.0
            } else {
                -1.0
            }
        });
        self.point_at(&beta)
    }
}

/// n-th root of the volume of a box; any zero width gives 0.
pub fn box_volume_measure(b: &IntervalVector) -> f64 {
    let n = b.dim();
    if n == 0 {
        return 0.0;
    }
    let w = b.widths();
    if w.iter().any(|&v| v <= 0.0) {
        return 0.0;
    }
    // Log domain keeps tiny widths from underflowing.
    let log_sum: f64 = w.iter().map(|v| v.ln()).sum();
    (log_sum / n as f64).exp()
}

pub(crate) fn hcat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows().max(b.nrows());
    let mut g = DMatrix::zeros(n, a.ncols() + b.ncols());
    if a.ncols() > 0 {
        g.view_mut((0, 0), (n, a.ncols())).copy_from(a);
    }
    if b.ncols() > 0 {
        g.view_mut((0, a.ncols()), (n, b.ncols())).copy_from(b);
    }
    g
}

pub(crate) fn drop_zero_columns(g: DMatrix<f64>) -> DMatrix<f64> {
    let keep: Vec<usize> = (0..g.ncols())
        .filter(|&j| g.column(j).iter().any(|&v| v != 0.0))
        .collect();
    if keep.len() == g.ncols() {
        return g;
    }
    let mut out = DMatrix::zeros(g.nrows(), keep.len());
    for (k, &j) in keep.iter().enumerate() {
        out.set_column(k, &g.column(j));
    }
    out
}

/// Hyperplane `{x | nᵀx = d}` with unit normal.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperplane {
    normal: DVector<f64>,
    offset: f64,
}

impl Hyperplane {
    /// Normalizes `(normal, offset)` so that `‖normal‖ = 1`.
    pub fn new(normal: DVector<f64>, offset: f64) -> Result<Self> {
        let norm = normal.norm();
        if !(norm > GEOM_TOL) {
            return Err(ReachError::InvalidArgument("hyperplane normal is zero".into()));
        }
        Ok(Hyperplane {
            normal: normal / norm,
            offset: offset / norm,
        })
    }

    /// Axis-aligned plane `x_i = value` in `R^n`.
    pub fn axis(n: usize, i: usize, value: f64) -> Self {
        let mut normal = DVector::zeros(n);
        normal[i] = 1.0;
        Hyperplane { normal, offset: value }
    }

    pub fn normal(&self) -> &DVector<f64> {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn dim(&self) -> usize {
        self.normal.len()
    }

    /// Signed value `nᵀx - d`.
    pub fn signed(&self, x: &DVector<f64>) -> f64 {
        self.normal.dot(x) - self.offset
    }

    /// Range of `nᵀx - d` over a zonotope.
    pub fn signed_range(&self, z: &Zonotope) -> Interval {
        let r = z.range_along(&self.normal);
        Interval::new(r.lo - self.offset, r.hi - self.offset)
    }

    pub fn touches(&self, z: &Zonotope) -> bool {
        self.signed_range(z).contains(0.0)
    }

    /// Same plane with the opposite orientation.
    pub fn flipped(&self) -> Hyperplane {
        Hyperplane {
            normal: -&self.normal,
            offset: -self.offset,
        }
    }

    /// Index of the coordinate with the largest normal component.
    pub fn dominant_axis(&self) -> usize {
        self.normal.iamax()
    }
}

/// Half-space `{x | aᵀx ≤ b}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpace {
    pub normal: DVector<f64>,
    pub offset: f64,
}

impl HalfSpace {
    pub fn new(normal: DVector<f64>, offset: f64) -> Self {
        HalfSpace { normal, offset }
    }

    /// `x_i ≤ value` (or `x_i ≥ value` when `upper` is false).
    pub fn axis(n: usize, i: usize, value: f64, upper: bool) -> Self {
        let mut normal = DVector::zeros(n);
        let s = if upper { 1.0 } else { -1.0 };
        normal[i] = s;
        HalfSpace {
            normal,
            offset: s * value,
        }
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        self.normal.dot(x) <= self.offset
    }

    pub fn contains_with_tol(&self, x: &DVector<f64>, tol: f64) -> bool {
        self.normal.dot(x) <= self.offset + tol * (1.0 + self.offset.abs())
    }

    /// Whole set inside.
    pub fn contains_set(&self, z: &Zonotope) -> bool {
        z.support(&self.normal) <= self.offset
    }

    /// Some point of the set inside.
    pub fn intersects(&self, z: &Zonotope) -> bool {
        z.range_along(&self.normal).lo <= self.offset
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn z2(c: [f64; 2], g: &[[f64; 2]]) -> Zonotope {
        let gm = DMatrix::from_fn(2, g.len(), |i, j| g[j][i]);
        Zonotope::new(DVector::from_row_slice(&c), gm).unwrap()
    }

    #[test]
    fn minkowski_concatenates() {
        let a = z2([1.0, 0.0], &[[1.0, 0.0], [0.0, 1.0]]);
        let b = z2([0.0, 1.0], &[[0.5, 0.0]]);
        let s = a.minkowski_sum(&b).unwrap();
        assert_eq!(s.center().as_slice(), &[1.0, 1.0]);
        assert_eq!(
            s.generators(),
            &DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.5, 0.0, 1.0, 0.0])
        );
        let p = Zonotope::point(DVector::zeros(2));
        assert_eq!(a.minkowski_sum(&p).unwrap(), a);
    }

    #[test]
    fn minkowski_dimension_mismatch() {
        let a = Zonotope::point(DVector::zeros(2));
        let b = Zonotope::point(DVector::zeros(3));
        assert!(matches!(a.minkowski_sum(&b), Err(ReachError::DimensionMismatch { .. })));
    }

    #[test]
    fn hull_of_diamond() {
        let z = z2([0.0, 0.0], &[[1.0, 1.0], [1.0, -1.0]]);
        let h = z.interval_hull();
        assert_eq!(h.lower().as_slice(), &[-2.0, -2.0]);
        assert_eq!(h.upper().as_slice(), &[2.0, 2.0]);
        assert!((z.volume_measure() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn volume_measure_cases() {
        let b = Zonotope::from_diagonal(DVector::zeros(2), &[1.0, 2.0]).unwrap();
        assert!((b.volume_measure() - 8f64.sqrt()).abs() < 1e-12);
        assert!((b.scale_generators(3.0).volume_measure() - 3.0 * 8f64.sqrt()).abs() < 1e-12);
        let p = Zonotope::point(DVector::from_row_slice(&[1.0, 2.0]));
        assert_eq!(p.volume_measure(), 0.0);
        let h = p.interval_hull();
        assert_eq!(h.lower(), h.upper());
    }

    #[test]
    fn rotation_swaps_hull_widths() {
        let b = Zonotope::from_diagonal(DVector::zeros(2), &[1.0, 3.0]).unwrap();
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let w = b.linear_map(&rot).unwrap().interval_hull().widths();
        assert_eq!(w.as_slice(), &[6.0, 2.0]);
        let id = DMatrix::identity(2, 2);
        assert_eq!(b.linear_map(&id).unwrap(), b);
    }

    #[test]
    fn reduce_keeps_low_order_and_axis_exactness() {
        let z = z2([0.0, 0.0], &[[1.0, 0.3], [0.2, 1.0]]);
        assert_eq!(z.reduce_order(2.0), z);
        let axis = z2([0.0, 0.0], &[[1.0, 0.0], [0.0, 2.0], [0.5, 0.0], [0.0, 0.1], [0.3, 0.0]]);
        let r = axis.reduce_order(1.0);
        assert!(r.num_generators() <= 2);
        assert_eq!(r.interval_hull(), axis.interval_hull());
    }

    #[test]
    fn enclose_cases() {
        let z = z2([1.0, -1.0], &[[1.0, 0.5]]);
        let e = z.enclose(&z).unwrap();
        assert_eq!(e.interval_hull(), z.interval_hull());
        let p = Zonotope::point(DVector::from_row_slice(&[2.0, 0.0]));
        let q = Zonotope::point(DVector::from_row_slice(&[0.0, 2.0]));
        let s = p.enclose(&q).unwrap();
        assert_eq!(s.center().as_slice(), &[1.0, 1.0]);
        assert_eq!(s.num_generators(), 1);
        assert_eq!(s.generators().column(0).as_slice(), &[1.0, -1.0]);
    }

    #[test]
    fn containment_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = z2([0.5, 0.5], &[[1.0, 0.2], [0.3, -0.7], [0.1, 0.1]]);
        assert!(z.contains_point(z.center()).unwrap());
        let outside = DVector::from_row_slice(&[10.0, 0.0]);
        assert!(!z.contains_point(&outside).unwrap());
        for _ in 0..50 {
            let x = z.sample(&mut rng);
            assert!(z.contains_point(&x).unwrap());
        }
    }

    #[test]
    fn hyperplane_normalizes() {
        let h = Hyperplane::new(DVector::from_row_slice(&[3.0, 4.0]), 10.0).unwrap();
        assert!((h.normal().norm() - 1.0).abs() < 1e-12);
        assert!((h.offset() - 2.0).abs() < 1e-12);
        assert!(Hyperplane::new(DVector::zeros(2), 1.0).is_err());
    }
}
