//! On-disk artifact formats and the run manifest.
//!
//! All floating-point output uses 17 significant digits so files round-trip
//! f64 values exactly. The manifest lists every artifact of a run with its
//! SHA-256 content hash, one `<hex>  <name>` line per file, sorted by name.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{DVector, Vector2};
use sha2::{Digest, Sha256};

use crate::adjoint::FdSample;
use crate::fem::Stress2d;
use crate::flow::FlowTrace;
use crate::mesh::fmt_g17;
use crate::weibull::{ObjectiveReport, WeibullParams};

/// Displacement field, optionally followed by per-node gradient rows.
pub fn write_field(
    path: &Path,
    u: &DVector<f64>,
    gradient: Option<&[Vector2<f64>]>,
) -> std::io::Result<()> {
    let n = u.len() / 2;
    let mut out = Vec::new();
    writeln!(out, "field2d v1 {n}")?;
    for node in 0..n {
        writeln!(out, "{} {}", fmt_g17(u[2 * node]), fmt_g17(u[2 * node + 1]))?;
    }
    if let Some(grad) = gradient {
        for g in grad {
            writeln!(out, "{} {}", fmt_g17(g.x), fmt_g17(g.y))?;
        }
    }
    fs::write(path, out)
}

/// Per-element stress rows `s11 s22 s12`, with the local failure-intensity
/// density appended as a fourth column when given.
pub fn write_stress(
    path: &Path,
    stresses: &[Stress2d],
    intensity: Option<&[f64]>,
) -> std::io::Result<()> {
    let mut out = Vec::new();
    for (el, s) in stresses.iter().enumerate() {
        match intensity {
            Some(d) => writeln!(
                out,
                "{} {} {} {}",
                fmt_g17(s.xx),
                fmt_g17(s.yy),
                fmt_g17(s.xy),
                fmt_g17(d[el])
            )?,
            None => writeln!(out, "{} {} {}", fmt_g17(s.xx), fmt_g17(s.yy), fmt_g17(s.xy))?,
        }
    }
    fs::write(path, out)
}

/// Survival curve as `F,p_survival,p_failure` rows.
pub fn write_survival_csv(path: &Path, samples: &[(f64, f64)]) -> std::io::Result<()> {
    let mut out = Vec::new();
    writeln!(out, "F,p_survival,p_failure")?;
    for &(load, p) in samples {
        writeln!(out, "{},{},{}", fmt_g17(load), fmt_g17(p), fmt_g17(1.0 - p))?;
    }
    fs::write(path, out)
}

/// Scalar summary of an objective evaluation.
pub fn write_objective_summary(
    path: &Path,
    report: &ObjectiveReport,
    params: &WeibullParams,
) -> std::io::Result<()> {
    let mut out = Vec::new();
    writeln!(out, "J = {}", fmt_g17(report.j))?;
    writeln!(out, "eta = {}", fmt_g17(report.eta))?;
    writeln!(out, "m = {}", fmt_g17(params.modulus))?;
    writeln!(out, "sigma0 = {}", fmt_g17(params.sigma0))?;
    writeln!(out, "n_angles = {}", params.n_angles)?;
    fs::write(path, out)
}

/// Finite-difference ratio table as `epsilon,ratio` rows, grouped by
/// direction in generation order.
pub fn write_ratio_csv(path: &Path, rows: &[FdSample]) -> std::io::Result<()> {
    let mut out = Vec::new();
    writeln!(out, "epsilon,ratio")?;
    for row in rows {
        writeln!(out, "{},{}", fmt_g17(row.epsilon), fmt_g17(row.ratio))?;
    }
    fs::write(path, out)
}

/// Flow trace as `iter,J,volume,grad_norm,alpha` rows.
pub fn write_trace_csv(path: &Path, trace: &FlowTrace) -> std::io::Result<()> {
    let mut out = Vec::new();
    writeln!(out, "iter,J,volume,grad_norm,alpha")?;
    for r in &trace.records {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.iter,
            fmt_g17(r.j),
            fmt_g17(r.volume),
            fmt_g17(r.grad_norm),
            fmt_g17(r.alpha)
        )?;
    }
    fs::write(path, out)
}

/// Write the `manifest` file: sorted `<sha256 hex>  <relative name>` lines
/// covering the given artifacts.
pub fn write_manifest(out_dir: &Path, artifacts: &[PathBuf]) -> std::io::Result<PathBuf> {
    let mut entries: Vec<(String, String)> = Vec::with_capacity(artifacts.len());
    for path in artifacts {
        let bytes = fs::read(path)?;
        let digest = Sha256::digest(&bytes);
        let mut hex = String::with_capacity(64);
        for b in digest {
            hex.push_str(&format!("{b:02x}"));
        }
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        entries.push((name, hex));
    }
    entries.sort();
    let mut out = Vec::new();
    for (name, hex) in entries {
        writeln!(out, "{hex}  {name}")?;
    }
    let manifest_path = out_dir.join("manifest");
    fs::write(&manifest_path, out)?;
    Ok(manifest_path)
}
