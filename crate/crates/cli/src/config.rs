//! Experiment configuration: a TOML-backed structure shared by every
//! subcommand, echoed back as `run.toml` next to the outputs.

use anyhow::{bail, Context, Result};
use covdet_core::solvers::{SolverConfig, SubproblemMode};
use covdet_core::system_model::{
    noise_variance_from_budget, InstanceConfig, LayoutKind, SequenceType,
};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Subcommand this configuration was written for (informational).
    #[serde(default)]
    pub scenario: String,
    pub instance: InstanceSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceSection {
    #[serde(default = "default_layout")]
    pub layout: String,
    pub cells: usize,
    #[serde(default = "default_radius")]
    pub radius_m: f64,
    /// Devices per cell; one entry broadcasts to all cells.
    pub n: Vec<usize>,
    /// Active devices per cell; one entry broadcasts to all cells.
    pub k: Vec<usize>,
    pub l: usize,
    #[serde(default = "default_seq")]
    pub seq_type: String,
    /// Explicit normalized noise variance; overrides the link budget.
    #[serde(default)]
    pub sigma2: Option<f64>,
    /// (tx dBm, noise dBm/Hz, bandwidth Hz); default 23 / -169 / 1e7.
    #[serde(default)]
    pub link_budget: Option<[f64; 3]>,
    #[serde(default = "default_min_dist")]
    pub min_dist_m: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSection {
    /// Antennas per base station.
    pub m: usize,
    pub trials: usize,
    pub seed: u64,
    /// Solver variants to run: cd, icd, ascd, asicd.
    pub solvers: Vec<String>,
    pub epsilon: f64,
    pub max_sweeps: usize,
    pub workers: usize,
    pub out_dir: PathBuf,
    /// Predicted-distribution sample count (errordist).
    pub samples: usize,
    /// Sequence rescale factors (norm-exp).
    pub factors: Vec<f64>,
    /// Device index to rescale (norm-exp); automatic pick when absent.
    pub device: Option<usize>,
    /// Sequence-length grid (phase).
    pub l_grid: Vec<usize>,
    /// Active-count grid (phase).
    pub k_grid: Vec<usize>,
    /// Path-loss exponent (check-bound).
    pub gamma: f64,
    /// Reference received power (check-bound).
    pub p0: f64,
    /// Reference distance in meters (check-bound).
    pub d0_m: f64,
}

fn default_layout() -> String {
    "hex".into()
}
fn default_radius() -> f64 {
    500.0
}
fn default_seq() -> String {
    "qpsk".into()
}
fn default_min_dist() -> f64 {
    10.0
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            m: 128,
            trials: 1,
            seed: 0,
            solvers: vec!["asicd".into()],
            epsilon: 1e-3,
            max_sweeps: 1000,
            workers: 1,
            out_dir: PathBuf::from("out"),
            samples: 10_000,
            factors: vec![1.0, 0.5, 2.0],
            device: None,
            l_grid: vec![6, 8, 10, 12, 14],
            k_grid: (2..=24).step_by(2).collect(),
            gamma: 3.76,
            // p0 (d0/D)^gamma with D in meters reproduces the dB path-loss
            // model: p0 = 10^(-1.53) at d0 = 1 m.
            p0: 0.029512092266663856,
            d0_m: 1.0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).context("parse experiment config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).with_context(|| format!("read {path:?}"))?;
        Self::from_toml_str(&s)
    }

    pub fn validate(&self) -> Result<()> {
        let i = &self.instance;
        if i.cells == 0 || i.l < 2 || i.n.iter().any(|&n| n == 0) {
            bail!("instance dimensions must be positive (cells, l >= 2, n)");
        }
        if i.n.len() != 1 && i.n.len() != i.cells {
            bail!("n must have 1 or {} entries", i.cells);
        }
        if i.k.len() != 1 && i.k.len() != i.cells {
            bail!("k must have 1 or {} entries", i.cells);
        }
        i.layout.parse::<LayoutKind>().map_err(anyhow::Error::from)?;
        i.seq_type
            .parse::<SequenceType>()
            .map_err(anyhow::Error::from)?;
        if self.run.trials == 0 {
            bail!("trials must be at least 1");
        }
        if self.run.m == 0 {
            bail!("antenna count must be at least 1");
        }
        for s in &self.run.solvers {
            solver_config_by_name(s, &self.run)?;
        }
        if self.run.solvers.is_empty() {
            bail!("at least one solver must be configured");
        }
        Ok(())
    }

    pub fn sigma2(&self) -> Result<f64> {
        if let Some(s2) = self.instance.sigma2 {
            if s2 <= 0.0 {
                bail!("sigma2 must be positive");
            }
            return Ok(s2);
        }
        let [tx, noise, bw] = self
            .instance
            .link_budget
            .unwrap_or([23.0, -169.0, 1e7]);
        Ok(noise_variance_from_budget(tx, noise, bw)?)
    }

    /// Core instance configuration for a given trial seed.
    pub fn instance_config(&self, seed: u64) -> Result<InstanceConfig> {
        let i = &self.instance;
        Ok(InstanceConfig {
            layout_kind: i.layout.parse()?,
            cells: i.cells,
            radius_m: i.radius_m,
            n_per_cell: i.n.clone(),
            k_per_cell: i.k.clone(),
            sequence_length: i.l,
            seq_type: i.seq_type.parse()?,
            sigma2: self.sigma2()?,
            min_dist_m: i.min_dist_m,
            seed,
        })
    }

    /// Echoes the resolved configuration as TOML.
    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn write_echo(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("run.toml"), self.to_toml()?)?;
        Ok(())
    }
}

/// Builds a solver configuration from its short name.
pub fn solver_config_by_name(name: &str, run: &RunSection) -> Result<SolverConfig> {
    let (mode, active_set) = match name {
        "cd" => (SubproblemMode::Exact, false),
        "icd" => (SubproblemMode::Inexact, false),
        "ascd" => (SubproblemMode::Exact, true),
        "asicd" => (SubproblemMode::Inexact, true),
        other => bail!("unknown solver '{other}' (expected cd, icd, ascd, asicd)"),
    };
    Ok(SolverConfig {
        mode,
        active_set,
        epsilon: run.epsilon,
        max_sweeps: run.max_sweeps,
        seed: run.seed,
        ..SolverConfig::default()
    })
}
