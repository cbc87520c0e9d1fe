//! Dense revised simplex for standard-form linear programs.
//!
//! Solves `min c'x  s.t.  Ax = b, x >= 0` with an explicit dense basis
//! inverse. Small and self-contained; adequate for the LP sizes produced
//! by the consistency and NSP tests (hundreds of rows and columns).
//!
//! Anti-cycling: Dantzig pricing switches to Bland's rule after a run of
//! degenerate pivots and switches back on the next progress-making pivot.
//! The basis inverse is refreshed from scratch whenever the primal
//! residual drifts.

use crate::{CoreError, Result};
use nalgebra::{DMatrix, DVector};

const COST_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;
const DEGENERATE_RUN: usize = 40;
const RESIDUAL_CHECK_EVERY: usize = 100;

/// Outcome of a successful solve.
#[derive(Debug, Clone)]
pub struct LpSolution {
    /// Primal solution, length `n`.
    pub x: DVector<f64>,
    /// Objective value `c'x`.
    pub objective: f64,
    /// Total simplex pivots across both phases.
    pub iterations: usize,
}

/// A feasible starting basis: `basis[i]` is the column basic in row `i`,
/// `binv` its inverse, `xb = binv * b` (must be nonnegative).
pub struct WarmStart {
    pub basis: Vec<usize>,
    pub binv: DMatrix<f64>,
    pub xb: DVector<f64>,
}

/// Solves `min c'x  s.t.  Ax = b, x >= 0` from scratch (two-phase).
pub fn solve_standard(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    c: &DVector<f64>,
) -> Result<LpSolution> {
    let m = a.nrows();
    let n = a.ncols();
    assert_eq!(b.len(), m);
    assert_eq!(c.len(), n);

    // Flip rows so the right-hand side is nonnegative, then append one
    // artificial identity column per row.
    let mut a1 = DMatrix::<f64>::zeros(m, n + m);
    let mut b1 = DVector::<f64>::zeros(m);
    for i in 0..m {
        let s = if b[i] < 0.0 { -1.0 } else { 1.0 };
        b1[i] = s * b[i];
        for j in 0..n {
            a1[(i, j)] = s * a[(i, j)];
        }
        a1[(i, n + i)] = 1.0;
    }
    let mut c1 = DVector::<f64>::zeros(n + m);
    for i in 0..m {
        c1[n + i] = 1.0;
    }
    let start = WarmStart {
        basis: (n..n + m).collect(),
        binv: DMatrix::identity(m, m),
        xb: b1.clone(),
    };
    let mut state = State::new(&a1, &b1, &c1, start, n);
    state.run()?;
    if state.objective() > FEAS_TOL {
        return Err(CoreError::LpFailed(format!(
            "infeasible (phase-1 objective {:.3e})",
            state.objective()
        )));
    }
    let phase1_iters = state.iterations;

    // Phase 2: real costs, artificials pinned at zero.
    let mut c2 = DVector::<f64>::zeros(n + m);
    c2.rows_mut(0, n).copy_from(c);
    let start = WarmStart {
        basis: state.basis.clone(),
        binv: state.binv.clone(),
        xb: state.xb.clone(),
    };
    let mut state = State::new(&a1, &b1, &c2, start, n);
    state.run()?;
    let mut sol = state.solution(n);
    sol.iterations += phase1_iters;
    Ok(sol)
}

/// Solves from a caller-supplied feasible basis. All columns may enter.
pub fn solve_warm(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    c: &DVector<f64>,
    start: WarmStart,
) -> Result<LpSolution> {
    let n = a.ncols();
    let mut state = State::new(a, b, c, start, n);
    state.run()?;
    Ok(state.solution(n))
}

struct State<'a> {
    a: &'a DMatrix<f64>,
    b: &'a DVector<f64>,
    c: &'a DVector<f64>,
    /// Columns with index >= entry_limit never enter the basis (artificials).
    entry_limit: usize,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    binv: DMatrix<f64>,
    xb: DVector<f64>,
    iterations: usize,
}

impl<'a> State<'a> {
    fn new(
        a: &'a DMatrix<f64>,
        b: &'a DVector<f64>,
        c: &'a DVector<f64>,
        start: WarmStart,
        entry_limit: usize,
    ) -> Self {
        let mut in_basis = vec![false; a.ncols()];
        for &j in &start.basis {
            in_basis[j] = true;
        }
        State {
            a,
            b,
            c,
            entry_limit,
            basis: start.basis,
            in_basis,
            binv: start.binv,
            xb: start.xb,
            iterations: 0,
        }
    }

    fn objective(&self) -> f64 {
        self.basis
            .iter()
            .zip(self.xb.iter())
            .map(|(&j, &v)| self.c[j] * v)
            .sum()
    }

    fn solution(&self, n: usize) -> LpSolution {
        let mut x = DVector::zeros(n);
        for (i, &j) in self.basis.iter().enumerate() {
            if j < n {
                x[j] = self.xb[i];
            }
        }
        let objective = self.c.rows(0, n).dot(&x);
        LpSolution {
            x,
            objective,
            iterations: self.iterations,
        }
    }

    fn run(&mut self) -> Result<()> {
        let m = self.a.nrows();
        let n = self.a.ncols();
        let max_iters = 60 * (m + n) + 500;
        let mut degenerate_run = 0usize;

        while self.iterations < max_iters {
            // Simplex multipliers y' = c_B' * binv.
            let mut y = DVector::<f64>::zeros(m);
            for (i, &j) in self.basis.iter().enumerate() {
                let cb = self.c[j];
                if cb != 0.0 {
                    y.axpy(cb, &self.binv.row(i).transpose(), 1.0);
                }
            }

            let bland = degenerate_run >= DEGENERATE_RUN;
            let entering = self.price(&y, bland);
            let Some(entering) = entering else {
                return Ok(()); // optimal
            };

            // Direction w = binv * A_e.
            let col = self.a.column(entering);
            let mut w = DVector::<f64>::zeros(m);
            for i in 0..m {
                w[i] = self.binv.row(i).transpose().dot(&col);
            }

            // Ratio test. Rows holding an artificial at zero must not grow.
            let mut leave: Option<usize> = None;
            let mut theta = f64::INFINITY;
            for i in 0..m {
                let blocked_artificial = self.basis[i] >= self.entry_limit
                    && w[i] < -PIVOT_TOL
                    && self.xb[i] <= 1e-9;
                let candidate_theta = if blocked_artificial {
                    0.0
                } else if w[i] > PIVOT_TOL {
                    self.xb[i] / w[i]
                } else {
                    continue;
                };
                let better = match leave {
                    None => true,
                    Some(r) => {
                        candidate_theta < theta - 1e-12
                            || (candidate_theta < theta + 1e-12
                                && if bland {
                                    self.basis[i] < self.basis[r]
                                } else {
                                    w[i].abs() > w[r].abs()
                                })
                    }
                };
                if better {
                    leave = Some(i);
                    theta = candidate_theta;
                }
            }
            let Some(r) = leave else {
                return Err(CoreError::LpFailed("unbounded".into()));
            };
            if theta <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }

            self.pivot(entering, r, &w, theta);
            self.iterations += 1;

            if self.iterations % RESIDUAL_CHECK_EVERY == 0 {
                self.refresh_if_drifting()?;
            }
        }
        Err(CoreError::LpFailed(format!(
            "iteration limit {max_iters} reached"
        )))
    }

    /// Returns the entering column, or None at optimality.
    fn price(&self, y: &DVector<f64>, bland: bool) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.entry_limit {
            if self.in_basis[j] {
                continue;
            }
            let d = self.c[j] - y.dot(&self.a.column(j));
            if d < -COST_TOL {
                if bland {
                    return Some(j);
                }
                if best.map(|(_, bd)| d < bd).unwrap_or(true) {
                    best = Some((j, d));
                }
            }
        }
        best.map(|(j, _)| j)
    }

    fn pivot(&mut self, entering: usize, r: usize, w: &DVector<f64>, theta: f64) {
        let m = self.a.nrows();
        let wr = w[r];
        // Update the basis inverse by the elementary row operations that
        // turn w into e_r.
        for k in 0..m {
            self.binv[(r, k)] /= wr;
        }
        for i in 0..m {
            if i != r {
                let f = w[i];
                if f != 0.0 {
                    for k in 0..m {
                        self.binv[(i, k)] -= f * self.binv[(r, k)];
                    }
                }
            }
        }
        for i in 0..m {
            if i != r {
                self.xb[i] -= theta * w[i];
                if self.xb[i] < 0.0 {
                    self.xb[i] = 0.0;
                }
            }
        }
        self.xb[r] = theta;
        self.in_basis[self.basis[r]] = false;
        self.in_basis[entering] = true;
        self.basis[r] = entering;
    }

    /// Rebuilds the basis inverse if `A_B xb` has drifted from `b`.
    fn refresh_if_drifting(&mut self) -> Result<()> {
        let m = self.a.nrows();
        let mut residual = 0.0f64;
        for i in 0..m {
            let mut s = 0.0;
            for (k, &j) in self.basis.iter().enumerate() {
                s += self.a[(i, j)] * self.xb[k];
            }
            residual = residual.max((s - self.b[i]).abs());
        }
        if residual < 1e-9 {
            return Ok(());
        }
        let mut bmat = DMatrix::<f64>::zeros(m, m);
        for (k, &j) in self.basis.iter().enumerate() {
            bmat.set_column(k, &self.a.column(j));
        }
        let binv = bmat
            .try_inverse()
            .ok_or_else(|| CoreError::LpFailed("singular basis during refresh".into()))?;
        self.xb = &binv * self.b;
        for v in self.xb.iter_mut() {
            if *v < 0.0 && *v > -FEAS_TOL {
                *v = 0.0;
            }
        }
        self.binv = binv;
        Ok(())
    }
}
