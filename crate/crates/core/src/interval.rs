//! Scalar intervals and axis-aligned boxes.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{ReachError, Result};

/// Closed real interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "interval bounds out of order: [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    pub fn symmetric(r: f64) -> Self {
        Interval { lo: -r, hi: r }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn radius(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn abs_max(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval::new(self.lo.min(other.lo), self.hi.max(other.hi))
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then(|| Interval { lo, hi })
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn add(&self, other: &Interval) -> Interval {
        Interval::new(self.lo + other.lo, self.hi + other.hi)
    }

    pub fn scale(&self, s: f64) -> Interval {
        if s >= 0.0 {
            Interval::new(s * self.lo, s * self.hi)
        } else {
            Interval::new(s * self.hi, s * self.lo)
        }
    }

    pub fn mul(&self, other: &Interval) -> Interval {
        let p = [
            self.lo * other.lo,
            self.lo * other.hi,
            self.hi * other.lo,
            self.hi * other.hi,
        ];
        let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval::new(lo, hi)
    }
}

/// Axis-aligned box `[lower, upper]` in `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalVector {
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl IntervalVector {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(ReachError::dims("interval vector", lower.len(), upper.len()));
        }
        if let Some(i) = (0..lower.len()).find(|&i| !(lower[i] <= upper[i])) {
            return Err(ReachError::InvalidArgument(format!(
                "interval vector component {i}: lower {} > upper {}",
                lower[i], upper[i]
            )));
        }
        Ok(IntervalVector { lower, upper })
    }

    pub fn from_intervals(items: &[Interval]) -> Self {
        IntervalVector {
            lower: DVector::from_iterator(items.len(), items.iter().map(|i| i.lo)),
            upper: DVector::from_iterator(items.len(), items.iter().map(|i| i.hi)),
        }
    }

    pub fn from_center_radius(center: &DVector<f64>, radius: &DVector<f64>) -> Self {
        IntervalVector {
            lower: center - radius,
            upper: center + radius,
        }
    }

    pub fn point(x: &DVector<f64>) -> Self {
        IntervalVector {
            lower: x.clone(),
            upper: x.clone(),
        }
    }

    pub fn zeros(n: usize) -> Self {
        IntervalVector {
            lower: DVector::zeros(n),
            upper: DVector::zeros(n),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    pub fn get(&self, i: usize) -> Interval {
        Interval {
            lo: self.lower[i],
            hi: self.upper[i],
        }
    }

    pub fn set(&mut self, i: usize, iv: Interval) {
        self.lower[i] = iv.lo;
        self.upper[i] = iv.hi;
    }

    pub fn intervals(&self) -> impl Iterator<Item = Interval> + '_ {
        (0..self.dim()).map(move |i| self.get(i))
    }

    pub fn center(&self) -> DVector<f64> {
        (&self.lower + &self.upper) * 0.5
    }

    pub fn radius(&self) -> DVector<f64> {
        (&self.upper - &self.lower) * 0.5
    }

    pub fn widths(&self) -> DVector<f64> {
        &self.upper - &self.lower
    }

    /// Componentwise `max(|lo|, |hi|)`.
    pub fn abs_max(&self) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.intervals().map(|i| i.abs_max()))
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        x.len() == self.dim() && (0..self.dim()).all(|i| self.get(i).contains(x[i]))
    }

    pub fn contains_with_tol(&self, x: &DVector<f64>, tol: f64) -> bool {
        x.len() == self.dim()
            && (0..self.dim()).all(|i| self.lower[i] - tol <= x[i] && x[i] <= self.upper[i] + tol)
    }

    /// True when `other` lies inside `self`.
    pub fn contains_box(&self, other: &IntervalVector) -> bool {
        (0..self.dim()).all(|i| self.lower[i] <= other.lower[i] && other.upper[i] <= self.upper[i])
    }

    pub fn hull(&self, other: &IntervalVector) -> IntervalVector {
        IntervalVector {
            lower: self.lower.zip_map(&other.lower, f64::min),
            upper: self.upper.zip_map(&other.upper, f64::max),
        }
    }

    /// Componentwise intersection; `None` when empty in any component.
    pub fn intersect(&self, other: &IntervalVector) -> Option<IntervalVector> {
        let lower = self.lower.zip_map(&other.lower, f64::max);
        let upper = self.upper.zip_map(&other.upper, f64::min);
        (0..lower.len())
            .all(|i| lower[i] <= upper[i])
            .then_some(IntervalVector { lower, upper })
    }

    pub fn add(&self, other: &IntervalVector) -> IntervalVector {
        IntervalVector {
            lower: &self.lower + &other.lower,
            upper: &self.upper + &other.upper,
        }
    }

    pub fn scale(&self, s: f64) -> IntervalVector {
        IntervalVector::from_intervals(&self.intervals().map(|i| i.scale(s)).collect::<Vec<_>>())
    }

    /// Multiplies every component by the scalar interval `s`.
    pub fn mul_interval(&self, s: Interval) -> IntervalVector {
        IntervalVector::from_intervals(&self.intervals().map(|i| i.mul(&s)).collect::<Vec<_>>())
    }

    /// Enlarges every component symmetrically by `r`.
    pub fn bloat(&self, r: &DVector<f64>) -> IntervalVector {
        IntervalVector {
            lower: &self.lower - r,
            upper: &self.upper + r,
        }
    }

    /// Interval image of a real matrix applied to this box.
    pub fn linear_image(&self, m: &nalgebra::DMatrix<f64>) -> IntervalVector {
        let c = m * self.center();
        let r = m.abs() * self.radius();
        IntervalVector::from_center_radius(&c, &r)
    }
}
