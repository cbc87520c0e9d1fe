//! Shared numerical machinery for the detection solvers.
//!
//! A [`SolverState`] owns the activity iterate `a` together with cached
//! inverses of the model covariances `Sigma_b(a) = S G_b diag(a) S^H +
//! sigma2 I`. Coordinate updates maintain the inverses by rank-one
//! (Sherman-Morrison) updates in O(B L^2); a full Cholesky re-inversion
//! runs every `BN` updates and at solver iteration boundaries, which keeps
//! the accumulated update error negligible.

use crate::system_model::{model_covariance, SampleCovariances, SystemInstance};
use crate::{CoreError, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Per-coordinate scalar coefficients of the one-dimensional subproblem.
///
/// For coordinate `i` owned by cell `b`: `xi[j] = g_{j,i} s_i^H
/// Sigma_j^{-1} s_i` and `zeta[j] = g_{j,i} s_i^H Sigma_j^{-1}
/// SigmaHat_j Sigma_j^{-1} s_i`; both are nonnegative quadratic forms.
/// `ys[j] = Sigma_j^{-1} s_i` is kept for the subsequent rank-one update.
#[derive(Debug, Clone)]
pub struct CoordCoeffs {
    pub xi: Vec<f64>,
    pub zeta: Vec<f64>,
    pub ys: Vec<DVector<Complex64>>,
}

/// Iterate plus cached inverses for one solve.
pub struct SolverState<'a> {
    pub inst: &'a SystemInstance,
    pub covs: &'a SampleCovariances,
    pub a: DVector<f64>,
    inv_sigmas: Vec<DMatrix<Complex64>>,
    updates_since_refresh: usize,
}

impl<'a> SolverState<'a> {
    /// Fresh state at `a = 0` with `Sigma_b^{-1} = I / sigma2`.
    pub fn new(inst: &'a SystemInstance, covs: &'a SampleCovariances) -> Self {
        let l = inst.sequence_length();
        let inv0 = DMatrix::<Complex64>::identity(l, l) / Complex64::new(inst.sigma2, 0.0);
        SolverState {
            inst,
            covs,
            a: DVector::zeros(inst.total_devices()),
            inv_sigmas: vec![inv0; inst.cells()],
            updates_since_refresh: 0,
        }
    }

    /// State at a caller-chosen iterate (inverses built fresh).
    pub fn with_activity(
        inst: &'a SystemInstance,
        covs: &'a SampleCovariances,
        a: DVector<f64>,
    ) -> Result<Self> {
        let mut st = SolverState::new(inst, covs);
        st.a = a;
        st.refresh_inverses()?;
        Ok(st)
    }

    pub fn cells(&self) -> usize {
        self.inst.cells()
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.len() == 0
    }

    /// Read-only view of the cached inverse for cell `b`.
    pub fn inverse(&self, b: usize) -> &DMatrix<Complex64> {
        &self.inv_sigmas[b]
    }

    /// Negative log-likelihood `sum_b [log det Sigma_b + tr(Sigma_b^{-1}
    /// SigmaHat_b)]`, evaluated via a fresh Cholesky of each `Sigma_b(a)`
    /// so that descent monitoring never depends on cache drift.
    pub fn objective(&self) -> Result<f64> {
        negative_log_likelihood(self.inst, self.covs, &self.a)
    }

    /// Gradient of the objective in coordinate `i` (flat index).
    pub fn gradient_coordinate(&self, i: usize) -> Result<f64> {
        let c = self.coord_coefficients(i)?;
        Ok(c.xi.iter().zip(&c.zeta).map(|(x, z)| x - z).sum())
    }

    /// Full gradient, computed coordinate-wise in O(BN * B * L^2).
    pub fn full_gradient(&self) -> Result<DVector<f64>> {
        let n = self.len();
        let mut g = DVector::zeros(n);
        for i in 0..n {
            g[i] = self.gradient_coordinate(i)?;
        }
        Ok(g)
    }

    /// Optimality violation `V(a) = |clamp_[0,1](a - grad F(a)) - a|`;
    /// zero exactly at points satisfying the first-order condition.
    pub fn optimality_violation(&self) -> Result<DVector<f64>> {
        let g = self.full_gradient()?;
        Ok(violation_from_gradient(&self.a, &g))
    }

    /// The subproblem coefficients for coordinate `i` in O(B L^2).
    pub fn coord_coefficients(&self, i: usize) -> Result<CoordCoeffs> {
        let b_cells = self.cells();
        let s_col = self.inst.s.column(i);
        let mut xi = Vec::with_capacity(b_cells);
        let mut zeta = Vec::with_capacity(b_cells);
        let mut ys = Vec::with_capacity(b_cells);
        for j in 0..b_cells {
            let g = self.inst.gains[j][i];
            let y = &self.inv_sigmas[j] * s_col;
            let alpha = complex_to_real(s_col.dotc(&y), j)?;
            let quad = complex_to_real(y.dotc(&(&self.covs.mats[j] * &y)), j)?;
            xi.push(g * alpha);
            zeta.push(g * quad);
            ys.push(y);
        }
        Ok(CoordCoeffs { xi, zeta, ys })
    }

    /// Applies `a_i += d` and updates all cached inverses by the
    /// Sherman-Morrison formula. A no-op when `d == 0`.
    pub fn rank_one_update(&mut self, i: usize, d: f64) -> Result<()> {
        if d == 0.0 {
            return Ok(());
        }
        let coeffs = self.coord_coefficients(i)?;
        self.rank_one_update_with(i, d, &coeffs)
    }

    /// Sherman-Morrison update reusing the already-computed coefficients.
    pub fn rank_one_update_with(&mut self, i: usize, d: f64, coeffs: &CoordCoeffs) -> Result<()> {
        if d == 0.0 {
            return Ok(());
        }
        for j in 0..self.cells() {
            let denom = 1.0 + d * coeffs.xi[j];
            if denom <= 0.0 {
                return Err(CoreError::InfeasibleStep {
                    cell: j,
                    denominator: denom,
                });
            }
            let factor = d * self.inst.gains[j][i] / denom;
            if factor == 0.0 {
                continue;
            }
            let y = &coeffs.ys[j];
            let inv = &mut self.inv_sigmas[j];
            let l = y.len();
            for c in 0..l {
                let yc = y[c].conj() * factor;
                for r in 0..l {
                    let prod = y[r] * yc;
                    inv[(r, c)] -= prod;
                }
            }
        }
        self.a[i] = (self.a[i] + d).clamp(0.0, 1.0);
        self.updates_since_refresh += 1;
        if self.updates_since_refresh >= self.len() {
            self.refresh_inverses()?;
        }
        Ok(())
    }

    /// Rebuilds every cached inverse from `a` by Cholesky.
    pub fn refresh_inverses(&mut self) -> Result<()> {
        for b in 0..self.cells() {
            let sigma =
                model_covariance(&self.inst.s, &self.inst.gains[b], &self.a, self.inst.sigma2);
            let chol = sigma
                .cholesky()
                .ok_or(CoreError::NotPositiveDefinite { cell: b })?;
            self.inv_sigmas[b] = chol.inverse();
        }
        self.updates_since_refresh = 0;
        Ok(())
    }

    /// Worst-case cache inconsistency `max_b ||Sigma_b inv_b - I||_F`.
    pub fn cache_drift(&self) -> f64 {
        let l = self.inst.sequence_length();
        let eye = DMatrix::<Complex64>::identity(l, l);
        (0..self.cells())
            .map(|b| {
                let sigma =
                    model_covariance(&self.inst.s, &self.inst.gains[b], &self.a, self.inst.sigma2);
                (&sigma * &self.inv_sigmas[b] - &eye).norm()
            })
            .fold(0.0, f64::max)
    }
}

/// `V(a)` from a precomputed gradient.
pub fn violation_from_gradient(a: &DVector<f64>, grad: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(a.len(), |i, _| {
        ((a[i] - grad[i]).clamp(0.0, 1.0) - a[i]).abs()
    })
}

/// The MLE objective at iterate `a`, evaluated with fresh Cholesky
/// factorizations (no dependence on any cached inverse).
pub fn negative_log_likelihood(
    inst: &SystemInstance,
    covs: &SampleCovariances,
    a: &DVector<f64>,
) -> Result<f64> {
    let l = inst.sequence_length();
    let mut total = 0.0;
    for b in 0..inst.cells() {
        let sigma = model_covariance(&inst.s, &inst.gains[b], a, inst.sigma2);
        let chol = sigma
            .cholesky()
            .ok_or(CoreError::NotPositiveDefinite { cell: b })?;
        let lfac = chol.l();
        let mut logdet = 0.0;
        for i in 0..l {
            logdet += lfac[(i, i)].re.ln();
        }
        logdet *= 2.0;
        let solved = chol.solve(&covs.mats[b]);
        let trace: f64 = (0..l).map(|i| solved[(i, i)].re).sum();
        total += logdet + trace;
    }
    Ok(total)
}

fn complex_to_real(z: Complex64, cell: usize) -> Result<f64> {
    if z.im.abs() > 1e-8 * z.re.abs().max(1e-300) {
        return Err(CoreError::ImaginaryResidue {
            cell,
            residue: z.im.abs(),
        });
    }
    Ok(z.re)
}
