//! Coordinate-descent detection algorithms.
//!
//! Four variants share one loop structure: the one-dimensional subproblem
//! in each coordinate is solved either *exactly* (companion-matrix root
//! finding on the degree 2B-1 stationarity polynomial) or *inexactly*
//! (keep the own-cell term, linearize the interference terms, add a
//! proximal quadratic, solve the resulting cubic, and backtrack the
//! proximal weight until a sufficient-decrease condition holds); the
//! coordinates visited per iteration are either all of them in a random
//! permutation or an active set of coordinates whose optimality violation
//! exceeds a geometrically decaying threshold.

use crate::poly;
use crate::solver_core::{CoordCoeffs, SolverState};
use crate::{CoreError, Result};
use nalgebra::DVector;
use rand::seq::SliceRandom;
use std::time::{Duration, Instant};

/// How the per-coordinate subproblem is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubproblemMode {
    Exact,
    Inexact,
}

/// Solver variant and tolerances.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub mode: SubproblemMode,
    pub active_set: bool,
    /// Stationarity tolerance on the sup-norm of the violation vector.
    pub epsilon: f64,
    /// Iteration cap (outer sweeps or active-set iterations).
    pub max_sweeps: usize,
    /// Fallback proximal weight when the curvature estimate is nonpositive.
    pub mu0_floor: f64,
    /// Backtracking growth factor for the proximal weight.
    pub beta: f64,
    /// Geometric decay factor of the active-set threshold schedule.
    pub omega_decay: f64,
    /// Seed of the coordinate-permutation stream.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mode: SubproblemMode::Inexact,
            active_set: true,
            epsilon: 1e-3,
            max_sweeps: 1000,
            mu0_floor: 1e-2,
            beta: 2.0,
            omega_decay: 5.0,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn exact() -> Self {
        SolverConfig {
            mode: SubproblemMode::Exact,
            active_set: false,
            ..Default::default()
        }
    }

    pub fn inexact() -> Self {
        SolverConfig {
            mode: SubproblemMode::Inexact,
            active_set: false,
            ..Default::default()
        }
    }

    pub fn active_exact() -> Self {
        SolverConfig {
            mode: SubproblemMode::Exact,
            active_set: true,
            ..Default::default()
        }
    }

    pub fn active_inexact() -> Self {
        SolverConfig {
            mode: SubproblemMode::Inexact,
            active_set: true,
            ..Default::default()
        }
    }

    /// Short name used in experiment CSVs.
    pub fn variant_name(&self) -> &'static str {
        match (self.active_set, self.mode) {
            (false, SubproblemMode::Exact) => "cd",
            (false, SubproblemMode::Inexact) => "icd",
            (true, SubproblemMode::Exact) => "ascd",
            (true, SubproblemMode::Inexact) => "asicd",
        }
    }

    fn validate(&self) -> Result<()> {
        if self.epsilon <= 0.0 || self.beta <= 1.0 || self.mu0_floor <= 0.0 || self.omega_decay <= 1.0
        {
            return Err(CoreError::InvalidParameter(
                "solver config requires epsilon > 0, beta > 1, mu0_floor > 0, omega_decay > 1"
                    .into(),
            ));
        }
        Ok(())
    }
}

/// Result of one solve.
#[derive(Debug, Clone)]
pub struct Solution {
    pub a_hat: DVector<f64>,
    pub final_objective: f64,
    /// Outer iterations performed (sweeps, or active-set rounds).
    pub sweeps: usize,
    /// Coordinates attempted across the whole run.
    pub coord_updates_total: usize,
    /// Coordinates attempted per iteration.
    pub coord_updates_per_sweep: Vec<usize>,
    /// Sup-norm of the violation vector at each termination check.
    pub v_inf_trace: Vec<f64>,
    /// Objective at iteration boundaries, starting from the initial point.
    pub objective_trace: Vec<f64>,
    /// Elapsed wall time at the end of each iteration.
    pub sweep_elapsed: Vec<Duration>,
    pub wall_time: Duration,
    pub converged: bool,
}

/// Callback invoked after every attempted coordinate update; used for
/// wall-clock trajectory recording without pausing the sweep.
pub trait ProgressObserver {
    fn on_update(&mut self, a: &DVector<f64>, elapsed: Duration, attempted_updates: usize);
}

/// Observer that does nothing.
pub struct NoObserver;

impl ProgressObserver for NoObserver {
    fn on_update(&mut self, _: &DVector<f64>, _: Duration, _: usize) {}
}

/// Change of the cell-`j` likelihood term along step `d` in the current
/// coordinate: `ln(1 + d xi_j) - d zeta_j / (1 + d xi_j)`.
#[inline]
fn term_delta(xi: f64, zeta: f64, d: f64) -> f64 {
    let den = 1.0 + d * xi;
    if den <= 0.0 {
        return f64::INFINITY;
    }
    den.ln() - d * zeta / den
}

/// Local objective along the coordinate (objective change from `d = 0`).
pub fn local_objective(coeffs: &CoordCoeffs, d: f64) -> f64 {
    coeffs
        .xi
        .iter()
        .zip(&coeffs.zeta)
        .map(|(&x, &z)| term_delta(x, z, d))
        .sum()
}

/// Picks the candidate with the smallest objective value; near-ties go to
/// the smallest |d| so that no-movement is preferred at flat optima.
fn pick_candidate(cands: &[f64], obj: impl Fn(f64) -> f64) -> f64 {
    let mut best: Option<(f64, f64)> = None;
    for &d in cands {
        let v = obj(d);
        if !v.is_finite() {
            continue;
        }
        match best {
            None => best = Some((d, v)),
            Some((bd, bv)) => {
                // Near-stationary coordinates have genuine improvements
                // down at curvature * step^2, far below any fixed
                // tolerance window, so ties are exact-value only.
                if v < bv || (v == bv && d.abs() < bd.abs()) {
                    best = Some((d, v));
                }
            }
        }
    }
    best.map(|(d, _)| d).unwrap_or(0.0)
}

/// Exact subproblem: minimizes the local objective over `[-a, 1-a]`.
///
/// The stationarity condition, after clearing denominators, is the degree
/// 2B-1 polynomial `sum_j (xi_j - zeta_j + d xi_j^2) prod_{k!=j} (1 + d
/// xi_k)^2 = 0`; all roots come from the companion-matrix eigenvalues and
/// the minimizer is selected among the real roots inside the interval plus
/// the endpoints.
pub fn solve_subproblem_exact(coeffs: &CoordCoeffs, a_bn: f64) -> f64 {
    let b = coeffs.xi.len();
    let lo = -a_bn;
    let hi = 1.0 - a_bn;

    // Factor polynomials q_k(d) = (1 + d xi_k)^2, with prefix/suffix
    // products so each j-term costs one extra convolution.
    let q: Vec<[f64; 3]> = coeffs
        .xi
        .iter()
        .map(|&x| [1.0, 2.0 * x, x * x])
        .collect();
    let mut prefix: Vec<Vec<f64>> = Vec::with_capacity(b + 1);
    prefix.push(vec![1.0]);
    for k in 0..b {
        prefix.push(poly::conv(&prefix[k], &q[k]));
    }
    let mut suffix: Vec<Vec<f64>> = vec![vec![1.0]; b + 1];
    for k in (0..b).rev() {
        suffix[k] = poly::conv(&q[k], &suffix[k + 1]);
    }
    let mut stationarity = vec![0.0; 2 * b];
    for j in 0..b {
        let others = poly::conv(&prefix[j], &suffix[j + 1]);
        let lin = [coeffs.xi[j] - coeffs.zeta[j], coeffs.xi[j] * coeffs.xi[j]];
        let term = poly::conv(&lin, &others);
        for (i, v) in term.iter().enumerate() {
            stationarity[i] += v;
        }
    }

    let mut cands: Vec<f64> = poly::real_roots(&stationarity)
        .into_iter()
        .filter(|&d| d >= lo - 1e-9 && d <= hi + 1e-9)
        .map(|d| d.clamp(lo, hi))
        .collect();
    cands.push(lo);
    cands.push(hi);
    cands.push(0.0);
    pick_candidate(&cands, |d| local_objective(coeffs, d))
}

/// Curvature-based initial proximal weight: the diagonal second
/// derivative of the interference terms, `sum_{j != b} xi_j (2 zeta_j -
/// xi_j)`, or `mu0_floor` when that is nonpositive.
pub fn init_mu_from_coeffs(coeffs: &CoordCoeffs, own_cell: usize, mu0_floor: f64) -> f64 {
    let curvature: f64 = coeffs
        .xi
        .iter()
        .zip(&coeffs.zeta)
        .enumerate()
        .filter(|(j, _)| *j != own_cell)
        .map(|(_, (&x, &z))| x * (2.0 * z - x))
        .sum();
    if curvature > 0.0 {
        curvature
    } else {
        mu0_floor
    }
}

/// Spec-shaped wrapper for [`init_mu_from_coeffs`] on a live state.
pub fn init_mu(state: &SolverState, i: usize, mu0_floor: f64) -> Result<f64> {
    let coeffs = state.coord_coefficients(i)?;
    Ok(init_mu_from_coeffs(&coeffs, state.inst.cell_of(i), mu0_floor))
}

/// Inexact subproblem: keeps the own-cell term, linearizes interference,
/// adds `mu/2 d^2`, solves the resulting cubic, and grows `mu` until the
/// sufficient-decrease condition holds for the returned step.
pub fn inexact_from_coeffs(
    coeffs: &CoordCoeffs,
    own_cell: usize,
    a_bn: f64,
    config: &SolverConfig,
) -> Result<f64> {
    let lo = -a_bn;
    let hi = 1.0 - a_bn;
    let xi = coeffs.xi[own_cell];
    let zeta = coeffs.zeta[own_cell];
    // Interference gradient sum_{j != b} (xi_j - zeta_j).
    let interf_grad: f64 = coeffs
        .xi
        .iter()
        .zip(&coeffs.zeta)
        .enumerate()
        .filter(|(j, _)| *j != own_cell)
        .map(|(_, (&x, &z))| x - z)
        .sum();

    let mu0 = init_mu_from_coeffs(coeffs, own_cell, config.mu0_floor);
    let max_tries = (1e12f64.ln() / config.beta.ln()).ceil() as usize + 1;
    let mut mu = mu0;
    for _ in 0..max_tries {
        // Stationarity of the surrogate: (1 + d xi)^2 (interf_grad + mu d)
        // + xi (1 + d xi) - zeta = 0, a cubic in d.
        let g = interf_grad;
        let c0 = g + xi - zeta;
        let c1 = 2.0 * g * xi + mu + xi * xi;
        let c2 = g * xi * xi + 2.0 * mu * xi;
        let c3 = mu * xi * xi;
        let mut cands: Vec<f64> = poly::cubic_real_roots(&[c0, c1, c2, c3])
            .into_iter()
            .filter(|&d| d >= lo - 1e-9 && d <= hi + 1e-9)
            .map(|d| d.clamp(lo, hi))
            .collect();
        cands.push(lo);
        cands.push(hi);
        cands.push(0.0);
        let surrogate =
            |d: f64| term_delta(xi, zeta, d) + g * d + 0.5 * mu * d * d;
        let d = pick_candidate(&cands, surrogate);

        // Sufficient decrease: the true interference change must not
        // exceed its linear-plus-proximal model.
        let actual: f64 = coeffs
            .xi
            .iter()
            .zip(&coeffs.zeta)
            .enumerate()
            .filter(|(j, _)| *j != own_cell)
            .map(|(_, (&x, &z))| term_delta(x, z, d))
            .sum();
        let model = g * d + 0.5 * mu * d * d;
        let slack = 1e-12 * (1.0 + actual.abs().max(model.abs()));
        if actual.is_finite() && actual <= model + slack {
            return Ok(d);
        }
        mu *= config.beta;
    }
    Err(CoreError::BacktrackingFailed { tries: max_tries })
}

/// Spec-shaped wrapper for [`inexact_from_coeffs`] on a live state.
pub fn solve_subproblem_inexact(
    state: &SolverState,
    i: usize,
    config: &SolverConfig,
) -> Result<f64> {
    let coeffs = state.coord_coefficients(i)?;
    inexact_from_coeffs(&coeffs, state.inst.cell_of(i), state.a[i], config)
}

/// Coordinates whose violation is at least `omega` (flat indices).
pub fn select_active_set(v: &DVector<f64>, omega: f64) -> Vec<usize> {
    (0..v.len()).filter(|&i| v[i] >= omega).collect()
}

/// Threshold schedule `omega_k = max(decay^-(k+1) v_inf, epsilon)`.
pub fn omega_schedule(k: usize, v_inf: f64, epsilon: f64, decay: f64) -> f64 {
    (decay.powi(-(k as i32) - 1) * v_inf).max(epsilon)
}

/// Element-wise thresholding of the relaxed estimate to binary activity;
/// a coordinate is declared active when `a_hat >= ell_th`.
pub fn threshold_estimate(a_hat: &DVector<f64>, ell_th: f64) -> DVector<f64> {
    assert!(ell_th > 0.0 && ell_th < 1.0, "threshold must lie in (0,1)");
    DVector::from_fn(a_hat.len(), |i, _| if a_hat[i] >= ell_th { 1.0 } else { 0.0 })
}

/// Runs the configured solver variant to the stationarity tolerance.
pub fn solve(
    state: &mut SolverState,
    config: &SolverConfig,
    observer: &mut dyn ProgressObserver,
) -> Result<Solution> {
    if config.active_set {
        run_active_set_cd(state, config, observer)
    } else {
        run_cd(state, config, observer)
    }
}

fn coordinate_step(
    state: &mut SolverState,
    i: usize,
    config: &SolverConfig,
) -> Result<bool> {
    let coeffs = state.coord_coefficients(i)?;
    let d = match config.mode {
        SubproblemMode::Exact => solve_subproblem_exact(&coeffs, state.a[i]),
        SubproblemMode::Inexact => {
            inexact_from_coeffs(&coeffs, state.inst.cell_of(i), state.a[i], config)?
        }
    };
    state.rank_one_update_with(i, d, &coeffs)?;
    Ok(d != 0.0)
}

/// Randomly permuted coordinate descent over all coordinates per sweep,
/// with termination checked at sweep boundaries.
pub fn run_cd(
    state: &mut SolverState,
    config: &SolverConfig,
    observer: &mut dyn ProgressObserver,
) -> Result<Solution> {
    config.validate()?;
    let start = Instant::now();
    let n = state.len();
    let mut perm_rng = crate::rng::substream(config.seed, crate::rng::stream::PERMUTATIONS);
    let mut order: Vec<usize> = (0..n).collect();

    let mut sol = Solution {
        a_hat: DVector::zeros(n),
        final_objective: f64::NAN,
        sweeps: 0,
        coord_updates_total: 0,
        coord_updates_per_sweep: Vec::new(),
        v_inf_trace: Vec::new(),
        objective_trace: vec![state.objective()?],
        sweep_elapsed: Vec::new(),
        wall_time: Duration::ZERO,
        converged: false,
    };

    while sol.sweeps < config.max_sweeps {
        order.shuffle(&mut perm_rng);
        for &i in &order {
            coordinate_step(state, i, config)?;
            sol.coord_updates_total += 1;
            observer.on_update(&state.a, start.elapsed(), sol.coord_updates_total);
        }
        sol.coord_updates_per_sweep.push(n);
        sol.sweeps += 1;
        state.refresh_inverses()?;
        let v_inf = state.optimality_violation()?.amax();
        sol.v_inf_trace.push(v_inf);
        sol.objective_trace.push(state.objective()?);
        sol.sweep_elapsed.push(start.elapsed());
        if v_inf <= config.epsilon {
            sol.converged = true;
            break;
        }
    }

    sol.a_hat = state.a.clone();
    sol.final_objective = *sol.objective_trace.last().unwrap();
    sol.wall_time = start.elapsed();
    Ok(sol)
}

/// Active-set coordinate descent: each iteration updates only the
/// coordinates whose violation exceeds the scheduled threshold, once each
/// in random order.
pub fn run_active_set_cd(
    state: &mut SolverState,
    config: &SolverConfig,
    observer: &mut dyn ProgressObserver,
) -> Result<Solution> {
    config.validate()?;
    let start = Instant::now();
    let n = state.len();
    let mut perm_rng = crate::rng::substream(config.seed, crate::rng::stream::PERMUTATIONS);

    let mut sol = Solution {
        a_hat: DVector::zeros(n),
        final_objective: f64::NAN,
        sweeps: 0,
        coord_updates_total: 0,
        coord_updates_per_sweep: Vec::new(),
        v_inf_trace: Vec::new(),
        objective_trace: vec![state.objective()?],
        sweep_elapsed: Vec::new(),
        wall_time: Duration::ZERO,
        converged: false,
    };

    loop {
        let v = state.optimality_violation()?;
        let v_inf = v.amax();
        sol.v_inf_trace.push(v_inf);
        if v_inf <= config.epsilon {
            sol.converged = true;
            break;
        }
        if sol.sweeps >= config.max_sweeps {
            break;
        }
        let omega = omega_schedule(sol.sweeps, v_inf, config.epsilon, config.omega_decay);
        let mut active = select_active_set(&v, omega);
        debug_assert!(!active.is_empty(), "active set empty while v_inf > epsilon");
        active.shuffle(&mut perm_rng);
        for &i in &active {
            coordinate_step(state, i, config)?;
            sol.coord_updates_total += 1;
            observer.on_update(&state.a, start.elapsed(), sol.coord_updates_total);
        }
        sol.coord_updates_per_sweep.push(active.len());
        sol.sweeps += 1;
        state.refresh_inverses()?;
        sol.objective_trace.push(state.objective()?);
        sol.sweep_elapsed.push(start.elapsed());
    }

    sol.a_hat = state.a.clone();
    sol.final_objective = *sol.objective_trace.last().unwrap();
    sol.wall_time = start.elapsed();
    Ok(sol)
}
