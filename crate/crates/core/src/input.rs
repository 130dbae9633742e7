//! Zero-order-hold input trajectories with a delay and bounded uncertainty.

use nalgebra::DVector;

use crate::error::{ReachError, Result};
use crate::interval::IntervalVector;
use crate::zonotope::Zonotope;

/// Slack used when mapping window ends to sample indices; an input value
/// that is active only on a boundary instant does not affect solutions.
const INDEX_SLACK: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct InputModel {
    samples: Vec<DVector<f64>>,
    period: f64,
    delay: f64,
    uncertainty: Zonotope,
}

impl InputModel {
    pub fn new(samples: Vec<DVector<f64>>, period: f64, delay: f64, uncertainty: Zonotope) -> Result<Self> {
        if samples.is_empty() {
            return Err(ReachError::InvalidArgument("input trajectory has no samples".into()));
        }
        if !(period > 0.0) {
            return Err(ReachError::InvalidArgument(format!("sample period {period} must be positive")));
        }
        let m = samples[0].len();
        if let Some(s) = samples.iter().find(|s| s.len() != m) {
            return Err(ReachError::dims("input sample", m, s.len()));
        }
        if uncertainty.dim() != m {
            return Err(ReachError::dims("input uncertainty", m, uncertainty.dim()));
        }
        Ok(InputModel {
            samples,
            period,
            delay,
            uncertainty,
        })
    }

    pub fn samples(&self) -> &[DVector<f64>] {
        &self.samples
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    pub fn uncertainty(&self) -> &Zonotope {
        &self.uncertainty
    }

    pub fn dim(&self) -> usize {
        self.samples[0].len()
    }

    fn clamp_index(&self, k: f64) -> usize {
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.samples.len() - 1)
        }
    }

    /// Index of the sample active at (undelayed) time `t`.
    pub fn index_at(&self, t: f64) -> usize {
        self.clamp_index(((t - self.delay) / self.period).floor())
    }

    /// Delayed trajectory value `u_d(t − d₁)`, holding the end samples.
    pub fn value_at(&self, t: f64) -> &DVector<f64> {
        &self.samples[self.index_at(t)]
    }

    /// Times in `(t0, t1)` where the delayed input switches.
    pub fn switch_times(&self, t0: f64, t1: f64) -> Vec<f64> {
        let mut out = Vec::new();
        let last = self.samples.len() - 1;
        let k0 = ((t0 - self.delay) / self.period).floor().max(0.0) as usize + 1;
        for k in k0..=last {
            let t = self.delay + k as f64 * self.period;
            if t >= t1 {
                break;
            }
            if t > t0 {
                out.push(t);
            }
        }
        out
    }

    /// Box of all samples active during the time window `[t0, t1]`.
    pub fn window_box(&self, t0: f64, t1: f64) -> IntervalVector {
        let k_lo = self.clamp_index(((t0 - self.delay) / self.period + INDEX_SLACK).floor());
        let k_hi = self
            .clamp_index(((t1 - self.delay) / self.period - INDEX_SLACK).floor())
            .max(k_lo);
        let mut b = IntervalVector::point(&self.samples[k_lo]);
        for s in &self.samples[k_lo + 1..=k_hi] {
            b = b.hull(&IntervalVector::point(s));
        }
        b
    }

    /// Input set over `[t0, t1]`: sample box plus the uncertainty.
    pub fn window_set(&self, t0: f64, t1: f64) -> Zonotope {
        Zonotope::from_box(&self.window_box(t0, t1))
            .minkowski_sum(&self.uncertainty)
            .expect("input dimensions are validated")
    }

    /// Input set for one step of length `dt` starting from `r`.
    pub fn unify(&self, r: &Zonotope, dt: f64, clock_index: usize) -> Zonotope {
        let t = r.coordinate_range(clock_index);
        self.window_set(t.lo, t.hi + dt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_model(values: &[f64]) -> InputModel {
        InputModel::new(
            values.iter().map(|&v| DVector::from_element(1, v)).collect(),
            1.0,
            0.0,
            Zonotope::point(DVector::zeros(1)),
        )
        .unwrap()
    }

    #[test]
    fn single_sample_window() {
        let m = scalar_model(&[1.0, 3.0, 5.0]);
        let b = m.window_box(1.2, 1.7);
        assert_eq!((b.lower()[0], b.upper()[0]), (3.0, 3.0));
    }

    #[test]
    fn two_sample_window() {
        let m = scalar_model(&[1.0, 3.0, 5.0]);
        let b = m.window_box(0.5, 1.5);
        assert_eq!((b.lower()[0], b.upper()[0]), (1.0, 3.0));
        // Boundary instants do not pull in the neighbour.
        let b = m.window_box(0.0, 1.0);
        assert_eq!((b.lower()[0], b.upper()[0]), (1.0, 1.0));
    }

    #[test]
    fn clamps_at_ends() {
        let m = scalar_model(&[1.0, 3.0, 5.0]);
        assert_eq!(m.value_at(-4.0)[0], 1.0);
        assert_eq!(m.value_at(40.0)[0], 5.0);
        let b = m.window_box(10.0, 12.0);
        assert_eq!((b.lower()[0], b.upper()[0]), (5.0, 5.0));
    }

    #[test]
    fn delay_shifts_lookup() {
        let m = InputModel::new(
            vec![DVector::from_element(1, 0.0), DVector::from_element(1, 1.0)],
            1.0,
            0.25,
            Zonotope::from_diagonal(DVector::zeros(1), &[0.1]).unwrap(),
        )
        .unwrap();
        assert_eq!(m.value_at(1.1)[0], 0.0);
        assert_eq!(m.value_at(1.3)[0], 1.0);
        assert_eq!(m.switch_times(0.0, 3.0), vec![1.25]);
        let u = m.window_set(1.3, 1.4).interval_hull();
        assert!((u.lower()[0] - 0.9).abs() < 1e-15 && (u.upper()[0] - 1.1).abs() < 1e-15);
    }
}
