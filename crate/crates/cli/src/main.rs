//! Command-line interface for the covariance-based activity-detection
//! experiments. Every command echoes its resolved configuration to
//! `run.toml` in the output directory and writes deterministic CSVs.

use anyhow::{anyhow, Result};
use clap::{Parser, Subcommand};
use covdet_cli::config::{solver_config_by_name, ExperimentConfig};
use covdet_cli::csvio::{fmt_f64, write_csv};
use covdet_cli::{bench, montecarlo, normexp, presets};
use covdet_core::error_analysis::predicted_error_distribution;
use covdet_core::scaling::{interference_bound, phase_diagram, PhaseConfig};
use covdet_core::solver_core::SolverState;
use covdet_core::solvers::{solve, NoObserver, Solution};
use covdet_core::system_model::{
    place_devices, simulate_received, snapshot, SystemInstance,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "covdet",
    version,
    about = "Covariance-based multi-cell device-activity detection experiments"
)]
struct Cli {
    /// TOML experiment configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Named desk-scale preset (see `list-presets`).
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Run seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default `out`).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads for trial-level parallelism.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance and export it as a snapshot fixture.
    Simulate,
    /// Solve one instance with one solver; write solution and trace CSVs.
    Detect {
        /// Solver variant: cd, icd, ascd, asicd.
        #[arg(long)]
        solver: Option<String>,
        /// Antenna count override.
        #[arg(long)]
        m: Option<usize>,
    },
    /// Consistency phase diagram over (L, K).
    Phase {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        b: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        l_grid: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        k_grid: Option<Vec<usize>>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seq_type: Option<String>,
        /// Output CSV path (default `<out_dir>/phase.csv`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predicted error distribution and PM/PF curves.
    Errordist {
        #[arg(long)]
        m: Option<usize>,
        /// Number of predicted error samples.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Monte-Carlo detection experiment over fresh instances.
    Mc,
    /// Wall-clock solver benchmarking with error trajectories.
    Bench,
    /// Inter-cell interference bound check on random placements.
    CheckBound {
        #[arg(long)]
        gamma: Option<f64>,
        /// Number of random placements to test.
        #[arg(long, default_value_t = 10)]
        seeds: usize,
    },
    /// Sequence-norm rescaling experiment.
    NormExp {
        #[arg(long, value_delimiter = ',')]
        factors: Option<Vec<f64>>,
        /// Device to rescale (defaults to an informative inactive device).
        #[arg(long)]
        device: Option<usize>,
    },
    /// List registered presets.
    ListPresets,
}

/// Default configuration used when neither --config nor --preset is given.
const DEFAULT_CONFIG: &str = r#"
[instance]
cells = 3
n = [40]
k = [5]
l = 12

[run]
m = 128
trials = 10
solvers = ["asicd"]
"#;

struct Failure {
    code: u8,
    err: anyhow::Error,
}

fn config_err(err: anyhow::Error) -> Failure {
    Failure { code: 1, err }
}

fn numeric_err(err: anyhow::Error) -> Failure {
    Failure { code: 2, err }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}

fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = if let Some(name) = &cli.preset {
        presets::preset(name)?.1
    } else if let Some(path) = &cli.config {
        ExperimentConfig::load(path)?
    } else {
        ExperimentConfig::from_toml_str(DEFAULT_CONFIG)?
    };
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    if let Some(dir) = &cli.out_dir {
        cfg.run.out_dir = dir.clone();
    }
    if let Some(w) = cli.workers {
        cfg.run.workers = w.max(1);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> std::result::Result<(), Failure> {
    if matches!(cli.command, Command::ListPresets) {
        for (name, sub, desc) in presets::PRESET_SUMMARY {
            println!("{name:8} {sub:10} {desc}");
        }
        return Ok(());
    }
    let mut cfg = resolve_config(&cli).map_err(config_err)?;

    match &cli.command {
        Command::ListPresets => unreachable!(),
        Command::Simulate => {
            cfg.scenario = "simulate".into();
            let dir = cfg.run.out_dir.clone();
            cfg.write_echo(&dir).map_err(numeric_err)?;
            let icfg = cfg.instance_config(cfg.run.seed).map_err(config_err)?;
            let inst = SystemInstance::generate(&icfg)
                .map_err(|e| numeric_err(e.into()))?;
            snapshot::export(&inst, &dir.join("instance"))
                .map_err(|e| numeric_err(e.into()))?;
            println!(
                "instance with {} devices written to {:?}",
                inst.total_devices(),
                dir.join("instance")
            );
            Ok(())
        }
        Command::Detect { solver, m } => {
            cfg.scenario = "detect".into();
            if let Some(m) = m {
                cfg.run.m = *m;
            }
            let name = solver.clone().unwrap_or_else(|| cfg.run.solvers[0].clone());
            let scfg = solver_config_by_name(&name, &cfg.run).map_err(config_err)?;
            let dir = cfg.run.out_dir.clone();
            cfg.write_echo(&dir).map_err(numeric_err)?;
            let icfg = cfg.instance_config(cfg.run.seed).map_err(config_err)?;
            let inst = SystemInstance::generate(&icfg).map_err(|e| numeric_err(e.into()))?;
            let mut chan = inst.channel_rng();
            let covs =
                simulate_received(&inst, cfg.run.m, &mut chan).map_err(|e| numeric_err(e.into()))?;
            let mut state = SolverState::new(&inst, &covs);
            let sol = solve(&mut state, &scfg, &mut NoObserver)
                .map_err(|e| numeric_err(e.into()))?;
            write_solution_csvs(&sol, &scfg.active_set, &dir).map_err(numeric_err)?;
            println!(
                "{name}: converged={} sweeps={} objective={:.6}",
                sol.converged, sol.sweeps, sol.final_objective
            );
            Ok(())
        }
        Command::Phase {
            n,
            b,
            l_grid,
            k_grid,
            trials,
            seq_type,
            out,
        } => {
            cfg.scenario = "phase".into();
            let mut pcfg = PhaseConfig::new(
                n.unwrap_or(cfg.instance.n[0]),
                b.unwrap_or(cfg.instance.cells),
                l_grid.clone().unwrap_or_else(|| cfg.run.l_grid.clone()),
                k_grid.clone().unwrap_or_else(|| cfg.run.k_grid.clone()),
            );
            pcfg.trials = trials.unwrap_or(cfg.run.trials);
            pcfg.seq_type = seq_type
                .clone()
                .unwrap_or_else(|| cfg.instance.seq_type.clone())
                .parse()
                .map_err(|e: covdet_core::CoreError| config_err(e.into()))?;
            pcfg.layout_kind = cfg
                .instance
                .layout
                .parse()
                .map_err(|e: covdet_core::CoreError| config_err(e.into()))?;
            pcfg.radius_m = cfg.instance.radius_m;
            pcfg.seed = cfg.run.seed;
            pcfg.workers = cfg.run.workers;
            let dir = cfg.run.out_dir.clone();
            cfg.write_echo(&dir).map_err(numeric_err)?;
            let grid = phase_diagram(&pcfg).map_err(|e| numeric_err(e.into()))?;
            let rows: Vec<Vec<String>> = grid
                .iter()
                .map(|c| {
                    vec![
                        c.l.to_string(),
                        c.k.to_string(),
                        pcfg.b.to_string(),
                        pcfg.seq_type.to_string(),
                        c.trials.to_string(),
                        c.successes.to_string(),
                    ]
                })
                .collect();
            let path = out.clone().unwrap_or_else(|| dir.join("phase.csv"));
            write_csv(&path, &["L", "K", "B", "seq_type", "trials", "successes"], &rows)
                .map_err(numeric_err)?;
            println!("{} cells written to {path:?}", rows.len());
            Ok(())
        }
        Command::Errordist { m, samples } => {
            cfg.scenario = "errordist".into();
            if let Some(m) = m {
                cfg.run.m = *m;
            }
            if let Some(s) = samples {
                cfg.run.samples = *s;
            }
            let dir = cfg.run.out_dir.clone();
            cfg.write_echo(&dir).map_err(numeric_err)?;
            let icfg = cfg.instance_config(cfg.run.seed).map_err(config_err)?;
            let inst = SystemInstance::generate(&icfg).map_err(|e| numeric_err(e.into()))?;
            let mut rng = covdet_core::rng::substream(cfg.run.seed, 17);
            let pred = predicted_error_distribution(&inst, cfg.run.m, cfg.run.samples, &mut rng)
                .map_err(|e| numeric_err(e.into()))?;
            if !pred.consistent_truth {
                eprintln!(
                    "warning: consistency condition fails for this instance; \
                     the asymptotic prediction may not apply"
                );
            }
            let n_zero = pred.zero_errors.len() / cfg.run.samples;
            let n_one = pred.one_errors.len() / cfg.run.samples;
            let mut rows = Vec::new();
            for (i, e) in pred.zero_errors.iter().enumerate() {
                rows.push(vec![(i / n_zero.max(1)).to_string(), "zero".into(), fmt_f64(*e)]);
            }
            for (i, e) in pred.one_errors.iter().enumerate() {
                rows.push(vec![(i / n_one.max(1)).to_string(), "one".into(), fmt_f64(*e)]);
            }
            write_csv(
                &dir.join("errordist.csv"),
                &["sample_id", "coord_type", "error_value"],
                &rows,
            )
            .map_err(numeric_err)?;
            let rows: Vec<Vec<String>> = pred
                .thresholds
                .iter()
                .zip(pred.pm.iter().zip(&pred.pf))
                .map(|(t, (pm, pf))| vec![fmt_f64(*t), fmt_f64(*pm), fmt_f64(*pf)])
                .collect();
            write_csv(&dir.join("predicted_pmpf.csv"), &["threshold", "pm", "pf"], &rows)
                .map_err(numeric_err)?;
            println!("predicted distribution written to {dir:?}");
            Ok(())
        }
        Command::Mc => {
            cfg.scenario = "mc".into();
            let dir = cfg.run.out_dir.clone();
            cfg.write_echo(&dir).map_err(numeric_err)?;
            let out = montecarlo::run_monte_carlo(&cfg).map_err(numeric_err)?;
            montecarlo::write_outputs(&out, &dir).map_err(numeric_err)?;
            println!(
                "{} trials ({} failures) written to {dir:?}",
                out.records.len(),
                out.failures
            );
            Ok(())
        }
        Command::Bench => {
            cfg.scenario = "bench".into();
            let dir = cfg.run.out_dir.clone();
            cfg.write_echo(&dir).map_err(numeric_err)?;
            let out = bench::benchmark_solvers(&cfg).map_err(numeric_err)?;
            bench::write_outputs(&out, &dir).map_err(numeric_err)?;
            println!(
                "{} timing records written to {dir:?}",
                out.timings.len()
            );
            Ok(())
        }
        Command::CheckBound { gamma, seeds } => {
            cfg.scenario = "check-bound".into();
            let gamma = gamma.unwrap_or(cfg.run.gamma);
            let dir = cfg.run.out_dir.clone();
            cfg.write_echo(&dir).map_err(numeric_err)?;
            let icfg = cfg.instance_config(cfg.run.seed).map_err(config_err)?;
            let layout = covdet_core::system_model::build_cell_layout(
                icfg.layout_kind,
                icfg.cells,
                icfg.radius_m,
            )
            .map_err(|e| numeric_err(e.into()))?;
            let n_per_cell = vec![cfg.instance.n[0]; icfg.cells];
            let mut rows = Vec::new();
            let mut all_ok = true;
            for s in 0..*seeds {
                let mut rng = covdet_core::rng::substream(cfg.run.seed.wrapping_add(s as u64), 1);
                let pos = place_devices(&layout, &n_per_cell, cfg.instance.min_dist_m, &mut rng)
                    .map_err(|e| numeric_err(e.into()))?;
                let (lhs, c) =
                    interference_bound(&layout, &pos, &n_per_cell, gamma, cfg.run.p0, cfg.run.d0_m)
                        .map_err(|e| numeric_err(e.into()))?;
                for (b, &v) in lhs.iter().enumerate() {
                    let ok = v <= c;
                    all_ok &= ok;
                    rows.push(vec![
                        s.to_string(),
                        b.to_string(),
                        fmt_f64(v),
                        fmt_f64(c),
                        ok.to_string(),
                    ]);
                }
            }
            write_csv(
                &dir.join("bound.csv"),
                &["seed", "bs", "lhs", "bound_c", "holds"],
                &rows,
            )
            .map_err(numeric_err)?;
            if !all_ok {
                return Err(numeric_err(anyhow!("interference bound violated")));
            }
            println!("bound holds on all {} placements", seeds);
            Ok(())
        }
        Command::NormExp { factors, device } => {
            cfg.scenario = "norm-exp".into();
            if let Some(f) = factors {
                cfg.run.factors = f.clone();
            }
            if device.is_some() {
                cfg.run.device = *device;
            }
            let dir = cfg.run.out_dir.clone();
            cfg.write_echo(&dir).map_err(numeric_err)?;
            let icfg = cfg.instance_config(cfg.run.seed).map_err(config_err)?;
            let inst = SystemInstance::generate(&icfg).map_err(|e| numeric_err(e.into()))?;
            let scfg =
                solver_config_by_name(&cfg.run.solvers[0], &cfg.run).map_err(config_err)?;
            let device = match cfg.run.device {
                Some(d) if d < inst.total_devices() => d,
                Some(d) => {
                    return Err(config_err(anyhow!(
                        "device {d} out of range (instance has {})",
                        inst.total_devices()
                    )))
                }
                None => {
                    let picked = normexp::pick_inactive_device(&inst, cfg.run.m, &scfg, 0.2)
                        .map_err(numeric_err)?;
                    picked
                        .ok_or_else(|| {
                            numeric_err(anyhow!(
                                "no inactive device with a positive baseline estimate; \
                                 pass --device explicitly"
                            ))
                        })?
                        .0
                }
            };
            let rows = normexp::norm_rescale_experiment(
                &inst,
                cfg.run.m,
                device,
                &cfg.run.factors,
                &scfg,
            )
            .map_err(numeric_err)?;
            let csv_rows: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        device.to_string(),
                        (inst.a_true[device] as u8).to_string(),
                        fmt_f64(r.factor),
                        fmt_f64(r.estimate),
                    ]
                })
                .collect();
            write_csv(
                &dir.join("normexp.csv"),
                &["device", "active", "factor", "estimate"],
                &csv_rows,
            )
            .map_err(numeric_err)?;
            for r in &rows {
                println!("factor {:>5}: estimate {:.6}", r.factor, r.estimate);
            }
            Ok(())
        }
    }
}

/// Writes `solution.csv` (index, a_hat) and `trace.csv` (per-iteration
/// objective, violation, active-set size, cumulative updates, elapsed).
fn write_solution_csvs(sol: &Solution, active_set: &bool, dir: &PathBuf) -> Result<()> {
    let rows: Vec<Vec<String>> = sol
        .a_hat
        .iter()
        .enumerate()
        .map(|(i, v)| vec![i.to_string(), fmt_f64(*v)])
        .collect();
    write_csv(&dir.join("solution.csv"), &["index", "a_hat"], &rows)?;

    let mut rows = Vec::new();
    let mut cumulative = 0usize;
    for i in 0..sol.sweeps {
        cumulative += sol.coord_updates_per_sweep.get(i).copied().unwrap_or(0);
        // Violation measured at the boundary after this iteration: the
        // active-set trace also holds the initial point, so shift by one.
        let v_idx = if *active_set { i + 1 } else { i };
        let v = sol
            .v_inf_trace
            .get(v_idx)
            .or_else(|| sol.v_inf_trace.last())
            .copied()
            .unwrap_or(f64::NAN);
        rows.push(vec![
            (i + 1).to_string(),
            fmt_f64(sol.objective_trace[i + 1]),
            fmt_f64(v),
            sol.coord_updates_per_sweep.get(i).copied().unwrap_or(0).to_string(),
            cumulative.to_string(),
            fmt_f64(sol.sweep_elapsed.get(i).map(|d| d.as_secs_f64()).unwrap_or(f64::NAN)),
        ]);
    }
    write_csv(
        &dir.join("trace.csv"),
        &[
            "sweep",
            "objective",
            "v_inf",
            "active_set_size",
            "cumulative_updates",
            "elapsed_s",
        ],
        &rows,
    )?;
    Ok(())
}
