//! Named desk-scale experiment presets.
//!
//! Each preset resolves to a full configuration for one subcommand. The
//! dimensions are reduced from the headline experiments so a preset runs
//! in minutes on a laptop; the qualitative comparisons they exercise are
//! unchanged.

use crate::config::ExperimentConfig;
use anyhow::{bail, Result};

/// (name, subcommand, description) of every registered preset.
pub const PRESET_SUMMARY: &[(&str, &str, &str)] = &[
    ("fig1", "phase", "consistency phase diagram over (L, K), N=50, B=3"),
    ("fig2", "errordist", "predicted error distribution, B=3 N=40 K=5 L=12 M=256"),
    ("fig3", "errordist", "predicted vs simulated PM/PF, same instance at M=128"),
    ("fig4", "mc", "sequence-family detection comparison, B=3 N=60 K=6 L=12 M=128"),
    ("fig5a", "bench", "solver timing, homogeneous 7-cell hex, N=300 K=15 L=30 M=64"),
    ("fig5b", "bench", "solver timing, heterogeneous center-heavy hex"),
    ("fig5c", "bench", "solver timing, heterogeneous center-light hex"),
    ("fig6a", "bench", "solver timing, homogeneous 9-cell square grid"),
    ("fig6b", "bench", "solver timing, heterogeneous center-heavy square grid"),
    ("fig6c", "bench", "solver timing, heterogeneous center-light square grid"),
    ("fig7", "bench", "exact vs inexact subproblem cost at larger B (19 cells)"),
    ("fig8", "bench", "active-set benefit at larger N (single ring, N=600)"),
    ("fig9", "bench", "all four variants on the reference hex scenario"),
    ("fig10", "bench", "coordinate-update counts per iteration, vanilla vs active set"),
    ("table3", "norm-exp", "sequence-norm rescaling effect on the estimate"),
];

/// Resolves a preset name to (subcommand, configuration).
pub fn preset(name: &str) -> Result<(&'static str, ExperimentConfig)> {
    let toml = match name {
        "fig1" => {
            r#"
            scenario = "phase"
            [instance]
            cells = 3
            n = [50]
            k = [1]
            l = 8
            seq_type = "qpsk"
            [run]
            trials = 100
            l_grid = [6, 8, 10, 12, 14]
            k_grid = [2, 4, 6, 8, 10, 12, 16, 20, 24]
            "#
        }
        "fig2" => {
            r#"
            scenario = "errordist"
            [instance]
            cells = 3
            n = [40]
            k = [5]
            l = 12
            [run]
            m = 256
            samples = 10000
            "#
        }
        "fig3" => {
            r#"
            scenario = "errordist"
            [instance]
            cells = 3
            n = [40]
            k = [5]
            l = 12
            [run]
            m = 128
            samples = 10000
            "#
        }
        "fig4" => {
            r#"
            scenario = "mc"
            [instance]
            cells = 3
            n = [60]
            k = [6]
            l = 12
            [run]
            m = 128
            trials = 200
            solvers = ["asicd"]
            "#
        }
        "fig5a" | "fig9" => {
            r#"
            scenario = "bench"
            [instance]
            cells = 7
            n = [300]
            k = [15]
            l = 30
            [run]
            m = 64
            trials = 20
            solvers = ["cd", "icd", "ascd", "asicd"]
            "#
        }
        "fig5b" => {
            r#"
            scenario = "bench"
            [instance]
            cells = 7
            n = [480, 270, 270, 270, 270, 270, 270]
            k = [24, 13, 13, 13, 13, 13, 13]
            l = 30
            [run]
            m = 64
            trials = 20
            solvers = ["cd", "icd", "asicd"]
            "#
        }
        "fig5c" => {
            r#"
            scenario = "bench"
            [instance]
            cells = 7
            n = [120, 330, 330, 330, 330, 330, 330]
            k = [6, 16, 16, 16, 16, 16, 16]
            l = 30
            [run]
            m = 64
            trials = 20
            solvers = ["cd", "icd", "asicd"]
            "#
        }
        "fig6a" => {
            r#"
            scenario = "bench"
            [instance]
            layout = "square"
            cells = 9
            n = [300]
            k = [15]
            l = 30
            [run]
            m = 64
            trials = 20
            solvers = ["cd", "icd", "asicd"]
            "#
        }
        "fig6b" => {
            r#"
            scenario = "bench"
            [instance]
            layout = "square"
            cells = 9
            n = [270, 270, 270, 270, 540, 270, 270, 270, 270]
            k = [13, 13, 13, 13, 27, 13, 13, 13, 13]
            l = 30
            [run]
            m = 64
            trials = 20
            solvers = ["cd", "icd", "asicd"]
            "#
        }
        "fig6c" => {
            r#"
            scenario = "bench"
            [instance]
            layout = "square"
            cells = 9
            n = [330, 330, 330, 330, 60, 330, 330, 330, 330]
            k = [16, 16, 16, 16, 3, 16, 16, 16, 16]
            l = 30
            [run]
            m = 64
            trials = 20
            solvers = ["cd", "icd", "asicd"]
            "#
        }
        "fig7" => {
            r#"
            scenario = "bench"
            [instance]
            cells = 19
            n = [60]
            k = [6]
            l = 16
            [run]
            m = 64
            trials = 10
            solvers = ["cd", "icd", "asicd"]
            "#
        }
        "fig8" => {
            r#"
            scenario = "bench"
            [instance]
            cells = 7
            n = [600]
            k = [20]
            l = 24
            [run]
            m = 64
            trials = 10
            solvers = ["cd", "ascd", "asicd"]
            "#
        }
        "fig10" => {
            r#"
            scenario = "bench"
            [instance]
            cells = 7
            n = [300]
            k = [15]
            l = 30
            [run]
            m = 64
            trials = 1
            solvers = ["cd", "ascd"]
            "#
        }
        "table3" => {
            r#"
            scenario = "norm-exp"
            [instance]
            cells = 3
            n = [40]
            k = [5]
            l = 16
            seq_type = "sphere"
            [run]
            m = 256
            trials = 20
            solvers = ["asicd"]
            factors = [1.0, 0.5, 2.0]
            "#
        }
        other => bail!("unknown preset '{other}'"),
    };
    let cfg = ExperimentConfig::from_toml_str(toml)?;
    let sub = PRESET_SUMMARY
        .iter()
        .find(|(n, _, _)| *n == name)
        .map(|(_, s, _)| *s)
        .expect("preset registered");
    Ok((sub, cfg))
}
