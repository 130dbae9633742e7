//! Dense bounded-variable simplex for small linear programs.
//!
//! Solves
//!
//! ```text
//! minimize cᵀx  subject to  A x = b,  lo ≤ x ≤ hi
//! ```
//!
//! with a two-phase tableau method. Entering and leaving variables are picked
//! by Bland's rule so degenerate problems terminate. Rows are scaled to unit
//! max-norm before solving, so the tolerances below are relative to each row.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

const PIVOT_TOL: f64 = 1e-10;
const COST_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("LP dimensions inconsistent: {0}")]
    Dimensions(String),
    #[error("LP bound {index} has lower {lower} > upper {upper}")]
    Bounds { index: usize, lower: f64, upper: f64 },
    #[error("LP bounds must be finite (variable {0})")]
    Unbounded(usize),
    #[error("simplex iteration limit {0} reached")]
    IterationLimit(usize),
}

#[derive(Debug, Clone)]
pub struct LpProblem {
    pub objective: DVector<f64>,
    pub eq_matrix: DMatrix<f64>,
    pub eq_vector: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub optimum: f64,
    pub x: DVector<f64>,
    /// Equality multipliers `y` with reduced costs `c - Aᵀy`.
    pub dual: DVector<f64>,
    /// Lagrangian lower bound certified by `dual`.
    pub dual_bound: f64,
}

#[derive(Debug, Clone)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
}

impl LpOutcome {
    pub fn optimal(self) -> Option<LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            LpOutcome::Infeasible => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, LpOutcome::Optimal(_))
    }
}

impl LpProblem {
    /// Box-constrained LP with `m` equality rows over `[-1, 1]^n`.
    pub fn unit_box(objective: DVector<f64>, eq_matrix: DMatrix<f64>, eq_vector: DVector<f64>) -> Self {
        let n = objective.len();
        LpProblem {
            objective,
            eq_matrix,
            eq_vector,
            lower: DVector::from_element(n, -1.0),
            upper: DVector::from_element(n, 1.0),
        }
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.objective.len();
        let (m, cols) = self.eq_matrix.shape();
        if m > 0 && cols != n {
            return Err(LpError::Dimensions(format!("{m}x{cols} matrix for {n} variables")));
        }
        if self.eq_vector.len() != m {
            return Err(LpError::Dimensions(format!(
                "{} right-hand sides for {m} rows",
                self.eq_vector.len()
            )));
        }
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::Dimensions("bound vector length".into()));
        }
        for j in 0..n {
            if !self.lower[j].is_finite() || !self.upper[j].is_finite() {
                return Err(LpError::Unbounded(j));
            }
            if self.lower[j] > self.upper[j] {
                return Err(LpError::Bounds {
                    index: j,
                    lower: self.lower[j],
                    upper: self.upper[j],
                });
            }
        }
        Ok(())
    }
}

struct Tableau {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
    value: Vec<f64>,
    at_upper: Vec<bool>,
    upper: Vec<f64>,
    blocked: Vec<bool>,
}

impl Tableau {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        if self.at_upper[j] {
            self.upper[j]
        } else {
            0.0
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let cols = self.cols;
        let p = self.at(r, j);
        for k in 0..cols {
            self.data[r * cols + k] /= p;
        }
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.at(i, j);
            if f != 0.0 {
                for k in 0..cols {
                    self.data[i * cols + k] -= f * self.data[r * cols + k];
                }
                self.data[i * cols + j] = 0.0;
            }
        }
    }

    /// Runs simplex iterations for `cost` until optimal.
    fn optimize(&mut self, cost: &[f64], max_iter: usize) -> Result<(), LpError> {
        let mut in_basis = vec![false; self.cols];
        for &b in &self.basis {
            in_basis[b] = true;
        }
        for _ in 0..max_iter {
            // Bland: lowest-index improving column.
            let mut entering = None;
            for j in 0..self.cols {
                if in_basis[j] || self.blocked[j] {
                    continue;
                }
                let mut d = cost[j];
                for i in 0..self.rows {
                    d -= cost[self.basis[i]] * self.at(i, j);
                }
                let improving = if self.at_upper[j] { d > COST_TOL } else { d < -COST_TOL };
                if improving {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else {
                return Ok(());
            };
            let dir = if self.at_upper[j] { -1.0 } else { 1.0 };

            let mut best = self.upper[j];
            let mut leave: Option<(usize, bool)> = None;
            for i in 0..self.rows {
                let a = dir * self.at(i, j);
                let bi = self.basis[i];
                let ratio = if a > PIVOT_TOL {
                    (self.value[i] / a).max(0.0)
                } else if a < -PIVOT_TOL && self.upper[bi].is_finite() {
                    ((self.upper[bi] - self.value[i]) / -a).max(0.0)
                } else {
                    continue;
                };
                // Ties with the bound flip keep the flip; ties between rows
                // go to the lowest basic index.
                let take = match leave {
                    None => ratio < best,
                    Some((li, _)) => ratio < best || (ratio == best && bi < self.basis[li]),
                };
                if take {
                    best = ratio;
                    leave = Some((i, a < 0.0));
                }
            }
            if !best.is_finite() {
                // Only possible for unbounded artificials, which never enter.
                return Err(LpError::Dimensions("unbounded ray in bounded LP".into()));
            }
            for i in 0..self.rows {
                let a = self.at(i, j);
                self.value[i] -= dir * a * best;
            }
            match leave {
                None => {
                    self.at_upper[j] = !self.at_upper[j];
                }
                Some((r, to_upper)) => {
                    let entering_value = if self.at_upper[j] {
                        self.upper[j] - best
                    } else {
                        best
                    };
                    let old = self.basis[r];
                    self.at_upper[old] = to_upper;
                    in_basis[old] = false;
                    self.pivot(r, j);
                    self.basis[r] = j;
                    in_basis[j] = true;
                    self.at_upper[j] = false;
                    self.value[r] = entering_value;
                }
            }
            for i in 0..self.rows {
                let ub = self.upper[self.basis[i]];
                self.value[i] = self.value[i].clamp(0.0, ub);
            }
        }
        Err(LpError::IterationLimit(max_iter))
    }
}

/// Solves a bounded LP. Infeasibility is a normal outcome, not an error.
pub fn solve(p: &LpProblem) -> Result<LpOutcome, LpError> {
    p.validate()?;
    let n = p.objective.len();
    let m_all = p.eq_vector.len();

    // Shift to y = x - lo in [0, u].
    let span: Vec<f64> = (0..n).map(|j| p.upper[j] - p.lower[j]).collect();
    let mut rows_kept = Vec::with_capacity(m_all);
    let mut scale = vec![0.0; m_all];
    let mut sign = vec![1.0; m_all];
    let mut rhs = vec![0.0; m_all];
    for i in 0..m_all {
        let row = p.eq_matrix.row(i);
        let shifted = p.eq_vector[i] - row.dot(&p.lower.transpose());
        let s = row.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        if s == 0.0 || !s.is_normal() {
            if shifted.abs() > FEAS_TOL {
                return Ok(LpOutcome::Infeasible);
            }
            continue;
        }
        scale[i] = s;
        let b = shifted / s;
        sign[i] = if b < 0.0 { -1.0 } else { 1.0 };
        rhs[i] = b.abs();
        rows_kept.push(i);
    }
    let m = rows_kept.len();
    let cols = n + m;
    let mut data = vec![0.0; m * cols];
    for (r, &i) in rows_kept.iter().enumerate() {
        let f = sign[i] / scale[i];
        for j in 0..n {
            data[r * cols + j] = p.eq_matrix[(i, j)] * f;
        }
        data[r * cols + n + r] = 1.0;
    }
    let mut upper = span.clone();
    upper.extend(std::iter::repeat_n(f64::INFINITY, m));
    let mut tab = Tableau {
        rows: m,
        cols,
        data,
        basis: (n..cols).collect(),
        value: rows_kept.iter().map(|&i| rhs[i]).collect(),
        at_upper: vec![false; cols],
        upper,
        // Artificials never re-enter once they leave the basis.
        blocked: (0..cols).map(|k| k >= n).collect(),
    };
    let max_iter = 50 * cols + 1000;

    if m > 0 {
        let mut phase1 = vec![0.0; cols];
        phase1[n..].fill(1.0);
        tab.optimize(&phase1, max_iter)?;
        let infeas: f64 = (0..m)
            .filter(|&i| tab.basis[i] >= n)
            .map(|i| tab.value[i])
            .sum();
        let rhs_scale = 1.0 + rows_kept.iter().map(|&i| rhs[i]).fold(0.0, f64::max);
        if infeas > FEAS_TOL * rhs_scale {
            return Ok(LpOutcome::Infeasible);
        }
        // Drive zero-level artificials out of the basis where possible.
        for r in 0..m {
            if tab.basis[r] < n {
                continue;
            }
            let candidate = (0..n)
                .filter(|&j| !tab.basis.contains(&j))
                .find(|&j| tab.at(r, j).abs() > 1e-9);
            if let Some(j) = candidate {
                let v = tab.nonbasic_value(j);
                let old = tab.basis[r];
                tab.pivot(r, j);
                tab.basis[r] = j;
                tab.at_upper[old] = false;
                tab.at_upper[j] = false;
                // Basic values shift by the column times the (zero) artificial level.
                tab.value[r] = v;
            }
        }
        for k in n..cols {
            tab.upper[k] = 0.0;
        }
        // Recompute basic values from scratch for numerical hygiene.
        recompute_values(&mut tab, &rows_kept, &rhs, n);
    }

    let mut cost = vec![0.0; cols];
    cost[..n].copy_from_slice(p.objective.as_slice());
    tab.optimize(&cost, max_iter)?;

    let mut y = DVector::zeros(n);
    for j in 0..n {
        y[j] = tab.nonbasic_value(j);
    }
    for r in 0..m {
        let b = tab.basis[r];
        if b < n {
            y[b] = tab.value[r];
        }
    }
    let x = DVector::from_iterator(n, (0..n).map(|j| (p.lower[j] + y[j]).clamp(p.lower[j], p.upper[j])));
    let optimum = p.objective.dot(&x);

    // Duals: y_scaled = c_Bᵀ B⁻¹ with B⁻¹ stored in the artificial columns.
    let mut dual = DVector::zeros(m_all);
    for (r, &i) in rows_kept.iter().enumerate() {
        let mut ys = 0.0;
        for k in 0..m {
            ys += cost[tab.basis[k]] * tab.at(k, n + r);
        }
        dual[i] = ys * sign[i] / scale[i];
    }
    let reduced = if m_all > 0 {
        &p.objective - p.eq_matrix.transpose() * &dual
    } else {
        p.objective.clone()
    };
    let mut dual_bound = p.eq_vector.dot(&dual);
    for j in 0..n {
        dual_bound += (reduced[j] * p.lower[j]).min(reduced[j] * p.upper[j]);
    }
    Ok(LpOutcome::Optimal(LpSolution {
        optimum,
        x,
        dual,
        dual_bound,
    }))
}

fn recompute_values(tab: &mut Tableau, rows_kept: &[usize], rhs: &[f64], n: usize) {
    // value = B⁻¹ (b - N x_N); B⁻¹ lives in the artificial block.
    let m = tab.rows;
    let mut in_basis = vec![false; tab.cols];
    for &b in &tab.basis {
        in_basis[b] = true;
    }
    let b: Vec<f64> = rows_kept.iter().map(|&i| rhs[i]).collect();
    let mut out = vec![0.0; m];
    for r in 0..m {
        let mut v = 0.0;
        for k in 0..m {
            v += tab.at(r, n + k) * b[k];
        }
        for j in 0..n {
            if !in_basis[j] && tab.at_upper[j] {
                v -= tab.at(r, j) * tab.upper[j];
            }
        }
        out[r] = v.clamp(0.0, tab.upper[tab.basis[r]].max(0.0));
    }
    tab.value = out;
}

/// Convenience: minimum of `objective · x` over the box with equalities.
pub fn minimize(
    objective: &DVector<f64>,
    eq_matrix: &DMatrix<f64>,
    eq_vector: &DVector<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
) -> Result<Option<LpSolution>, LpError> {
    let p = LpProblem {
        objective: objective.clone(),
        eq_matrix: eq_matrix.clone(),
        eq_vector: eq_vector.clone(),
        lower: lower.clone(),
        upper: upper.clone(),
    };
    Ok(solve(&p)?.optimal())
}
