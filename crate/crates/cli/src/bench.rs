//! Solver benchmarking: detection-error trajectories against wall-clock
//! time, per-iteration coordinate-update counts, and time to reach the
//! stationarity tolerance.
//!
//! Snapshots of the iterate are taken between coordinate updates at
//! geometrically spaced wall-clock checkpoints (factor 1.5 starting at
//! 1 ms), so the solver sweep is never paused mid-coordinate. Benchmark
//! trials always run sequentially so timings stay uncontaminated.

use crate::config::{solver_config_by_name, ExperimentConfig};
use crate::csvio::{fmt_f64, write_csv};
use crate::metrics::equal_error_probability;
use anyhow::{Context, Result};
use covdet_core::error_analysis::threshold_grid;
use covdet_core::rng::trial_seed;
use covdet_core::solver_core::SolverState;
use covdet_core::solvers::{solve, ProgressObserver};
use covdet_core::system_model::{simulate_received, SystemInstance};
use nalgebra::DVector;
use std::path::Path;
use std::time::Duration;

/// Records iterate snapshots at geometric wall-clock checkpoints.
pub struct TrajectoryRecorder {
    next: Duration,
    factor: f64,
    pub snaps: Vec<(Duration, DVector<f64>)>,
}

impl TrajectoryRecorder {
    pub fn new() -> Self {
        TrajectoryRecorder {
            next: Duration::from_millis(1),
            factor: 1.5,
            snaps: Vec::new(),
        }
    }
}

impl Default for TrajectoryRecorder {
    fn default() -> Self {
        Self::new()
    }
}

impl ProgressObserver for TrajectoryRecorder {
    fn on_update(&mut self, a: &DVector<f64>, elapsed: Duration, _attempted: usize) {
        if elapsed >= self.next {
            self.snaps.push((elapsed, a.clone()));
            while self.next <= elapsed {
                self.next = Duration::from_secs_f64(self.next.as_secs_f64() * self.factor);
            }
        }
    }
}

/// One trajectory sample.
#[derive(Debug, Clone)]
pub struct TrajectoryPoint {
    pub solver: String,
    pub trial: usize,
    pub elapsed_s: f64,
    pub equal_error: f64,
}

/// One (solver, trial) timing summary.
#[derive(Debug, Clone)]
pub struct TimingRecord {
    pub solver: String,
    pub trial: usize,
    pub wall_s: f64,
    pub sweeps: usize,
    pub coord_updates: usize,
    pub converged: bool,
}

/// Full benchmark output.
#[derive(Debug, Clone)]
pub struct BenchOutput {
    pub trajectories: Vec<TrajectoryPoint>,
    pub timings: Vec<TimingRecord>,
    /// (solver, trial, iteration, coordinates attempted).
    pub updates_per_iteration: Vec<(String, usize, usize, usize)>,
}

/// Runs every configured solver on every trial and records trajectories.
pub fn benchmark_solvers(cfg: &ExperimentConfig) -> Result<BenchOutput> {
    cfg.validate()?;
    let grid = threshold_grid();
    let mut out = BenchOutput {
        trajectories: Vec::new(),
        timings: Vec::new(),
        updates_per_iteration: Vec::new(),
    };
    for trial in 0..cfg.run.trials {
        let seed = trial_seed(cfg.run.seed, trial as u64);
        let icfg = cfg.instance_config(seed)?;
        let inst = SystemInstance::generate(&icfg)?;
        let mut chan_rng = inst.channel_rng();
        let covs = simulate_received(&inst, cfg.run.m, &mut chan_rng)?;
        for name in &cfg.run.solvers {
            let mut scfg = solver_config_by_name(name, &cfg.run)?;
            scfg.seed = seed;
            let mut recorder = TrajectoryRecorder::new();
            let mut state = SolverState::new(&inst, &covs);
            let sol = solve(&mut state, &scfg, &mut recorder)
                .with_context(|| format!("solver {name} on trial {trial}"))?;
            for (elapsed, a) in &recorder.snaps {
                let ee = equal_error_probability(a, &inst.a_true, &grid);
                out.trajectories.push(TrajectoryPoint {
                    solver: name.clone(),
                    trial,
                    elapsed_s: elapsed.as_secs_f64(),
                    equal_error: ee.value,
                });
            }
            // Always include the final point.
            let ee = equal_error_probability(&sol.a_hat, &inst.a_true, &grid);
            out.trajectories.push(TrajectoryPoint {
                solver: name.clone(),
                trial,
                elapsed_s: sol.wall_time.as_secs_f64(),
                equal_error: ee.value,
            });
            for (it, &c) in sol.coord_updates_per_sweep.iter().enumerate() {
                out.updates_per_iteration.push((name.clone(), trial, it, c));
            }
            out.timings.push(TimingRecord {
                solver: name.clone(),
                trial,
                wall_s: sol.wall_time.as_secs_f64(),
                sweeps: sol.sweeps,
                coord_updates: sol.coord_updates_total,
                converged: sol.converged,
            });
        }
    }
    Ok(out)
}

/// Writes `trajectory.csv`, `timing.csv`, and `updates.csv`.
pub fn write_outputs(out: &BenchOutput, dir: &Path) -> Result<()> {
    let rows: Vec<Vec<String>> = out
        .trajectories
        .iter()
        .map(|p| {
            vec![
                p.solver.clone(),
                p.trial.to_string(),
                fmt_f64(p.elapsed_s),
                fmt_f64(p.equal_error),
            ]
        })
        .collect();
    write_csv(
        &dir.join("trajectory.csv"),
        &["solver", "trial", "elapsed_s", "equal_error"],
        &rows,
    )?;

    let rows: Vec<Vec<String>> = out
        .timings
        .iter()
        .map(|t| {
            vec![
                t.solver.clone(),
                t.trial.to_string(),
                fmt_f64(t.wall_s),
                t.sweeps.to_string(),
                t.coord_updates.to_string(),
                t.converged.to_string(),
            ]
        })
        .collect();
    write_csv(
        &dir.join("timing.csv"),
        &["solver", "trial", "wall_s", "sweeps", "coord_updates", "converged"],
        &rows,
    )?;

    let rows: Vec<Vec<String>> = out
        .updates_per_iteration
        .iter()
        .map(|(s, t, it, c)| vec![s.clone(), t.to_string(), it.to_string(), c.to_string()])
        .collect();
    write_csv(
        &dir.join("updates.csv"),
        &["solver", "trial", "iteration", "coord_updates"],
        &rows,
    )?;
    Ok(())
}
