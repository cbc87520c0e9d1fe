//! Instance snapshot export/import.
//!
//! A snapshot is a directory holding `meta.toml` (scalars, seed, sequence
//! type), `S.csv` (interleaved re/im, L rows x 2BN columns), `G.csv`
//! (B rows x BN columns), `a_true.csv` (one 0/1 entry per line), and
//! `positions.csv` (x,y per line, meters). Numbers are written in Rust's
//! shortest round-trip decimal form, so export/import is bit-exact.

use super::{build_cell_layout, CellLayout, LayoutKind, SequenceType, SystemInstance};
use crate::{CoreError, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotMeta {
    layout_kind: LayoutKind,
    cells: usize,
    radius_m: f64,
    sequence_length: usize,
    seq_type: SequenceType,
    sigma2: f64,
    seed: u64,
    n_per_cell: Vec<usize>,
    k_per_cell: Vec<usize>,
}

/// Writes `inst` into directory `dir` (created if missing).
pub fn export(inst: &SystemInstance, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let meta = SnapshotMeta {
        layout_kind: inst.layout.kind,
        cells: inst.cells(),
        radius_m: inst.layout.radius_m,
        sequence_length: inst.sequence_length(),
        seq_type: inst.seq_type,
        sigma2: inst.sigma2,
        seed: inst.seed,
        n_per_cell: inst.n_per_cell.clone(),
        k_per_cell: inst.k_per_cell.clone(),
    };
    let meta_str = toml::to_string(&meta)
        .map_err(|e| CoreError::SnapshotParse { file: "meta.toml".into(), message: e.to_string() })?;
    std::fs::write(dir.join("meta.toml"), meta_str)?;

    let total = inst.total_devices();
    let l = inst.sequence_length();
    let mut s_csv = String::new();
    for i in 0..l {
        for j in 0..total {
            if j > 0 {
                s_csv.push(',');
            }
            let z = inst.s[(i, j)];
            write!(s_csv, "{},{}", z.re, z.im).unwrap();
        }
        s_csv.push('\n');
    }
    std::fs::write(dir.join("S.csv"), s_csv)?;

    let mut g_csv = String::new();
    for g in &inst.gains {
        for (j, v) in g.iter().enumerate() {
            if j > 0 {
                g_csv.push(',');
            }
            write!(g_csv, "{v}").unwrap();
        }
        g_csv.push('\n');
    }
    std::fs::write(dir.join("G.csv"), g_csv)?;

    let mut a_csv = String::new();
    for v in inst.a_true.iter() {
        writeln!(a_csv, "{}", *v as u8).unwrap();
    }
    std::fs::write(dir.join("a_true.csv"), a_csv)?;

    let mut p_csv = String::new();
    for p in &inst.device_positions {
        writeln!(p_csv, "{},{}", p[0], p[1]).unwrap();
    }
    std::fs::write(dir.join("positions.csv"), p_csv)?;
    Ok(())
}

fn parse_f64(tok: &str, file: &str) -> Result<f64> {
    tok.trim().parse::<f64>().map_err(|e| CoreError::SnapshotParse {
        file: file.into(),
        message: format!("bad number '{tok}': {e}"),
    })
}

/// Reads a snapshot directory back into a [`SystemInstance`].
pub fn import(dir: &Path) -> Result<SystemInstance> {
    let meta_str = std::fs::read_to_string(dir.join("meta.toml"))?;
    let meta: SnapshotMeta = toml::from_str(&meta_str).map_err(|e| CoreError::SnapshotParse {
        file: "meta.toml".into(),
        message: e.to_string(),
    })?;
    let layout: CellLayout = build_cell_layout(meta.layout_kind, meta.cells, meta.radius_m)?;
    let total: usize = meta.n_per_cell.iter().sum();
    let l = meta.sequence_length;

    let s_str = std::fs::read_to_string(dir.join("S.csv"))?;
    let mut s = DMatrix::<Complex64>::zeros(l, total);
    for (i, line) in s_str.lines().enumerate() {
        let toks: Vec<&str> = line.split(',').collect();
        if toks.len() != 2 * total {
            return Err(CoreError::SnapshotParse {
                file: "S.csv".into(),
                message: format!("row {i}: expected {} fields, got {}", 2 * total, toks.len()),
            });
        }
        for j in 0..total {
            s[(i, j)] = Complex64::new(
                parse_f64(toks[2 * j], "S.csv")?,
                parse_f64(toks[2 * j + 1], "S.csv")?,
            );
        }
    }

    let g_str = std::fs::read_to_string(dir.join("G.csv"))?;
    let mut gains = Vec::with_capacity(meta.cells);
    for line in g_str.lines() {
        let vals: Result<Vec<f64>> = line.split(',').map(|t| parse_f64(t, "G.csv")).collect();
        gains.push(DVector::from_vec(vals?));
    }
    if gains.len() != meta.cells {
        return Err(CoreError::SnapshotParse {
            file: "G.csv".into(),
            message: format!("expected {} rows, got {}", meta.cells, gains.len()),
        });
    }

    let a_str = std::fs::read_to_string(dir.join("a_true.csv"))?;
    let a_vals: Result<Vec<f64>> = a_str.lines().map(|t| parse_f64(t, "a_true.csv")).collect();
    let a_true = DVector::from_vec(a_vals?);

    let p_str = std::fs::read_to_string(dir.join("positions.csv"))?;
    let mut device_positions = Vec::new();
    for line in p_str.lines() {
        let toks: Vec<&str> = line.split(',').collect();
        if toks.len() != 2 {
            return Err(CoreError::SnapshotParse {
                file: "positions.csv".into(),
                message: format!("expected x,y but got '{line}'"),
            });
        }
        device_positions.push([
            parse_f64(toks[0], "positions.csv")?,
            parse_f64(toks[1], "positions.csv")?,
        ]);
    }

    Ok(SystemInstance {
        layout,
        n_per_cell: meta.n_per_cell,
        k_per_cell: meta.k_per_cell,
        device_positions,
        s,
        seq_type: meta.seq_type,
        gains,
        sigma2: meta.sigma2,
        a_true,
        seed: meta.seed,
    })
}
