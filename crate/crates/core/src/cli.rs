//! Subcommand implementations behind the `ceramopt` binary.
//!
//! Every subcommand reads one configuration, writes its documented artifacts
//! into the output directory, and finishes with a `manifest` file hashing
//! each artifact. Identical config and seed produce identical manifests.

use std::fs;
use std::path::PathBuf;

use thiserror::Error;

use crate::adjoint::{shape_gradient, validate_fd, AdjointError};
use crate::config::{ConfigError, RunConfig};
use crate::export;
use crate::fem::{element_stress, solve_state, FemError};
use crate::flow::{run_flow, FlowError};
use crate::mesh::MeshError;
use crate::weibull::{evaluate_objective, WeibullError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("mesh: {0}")]
    Mesh(#[from] MeshError),
    #[error("fem: {0}")]
    Fem(#[from] FemError),
    #[error("weibull: {0}")]
    Weibull(#[from] WeibullError),
    #[error("adjoint: {0}")]
    Adjoint(#[from] AdjointError),
    #[error("flow: {0}")]
    Flow(#[from] FlowError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Mesh,
    Solve,
    Objective,
    Gradcheck,
    Flow,
}

/// Run one subcommand; returns the artifact paths including the manifest.
pub fn run_command(command: Command, config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(&config.out_dir)?;
    let artifacts = match command {
        Command::Mesh => cmd_mesh(config)?,
        Command::Solve => cmd_solve(config)?,
        Command::Objective => cmd_objective(config)?,
        Command::Gradcheck => cmd_gradcheck(config)?,
        Command::Flow => cmd_flow(config)?,
    };
    let manifest = export::write_manifest(&config.out_dir, &artifacts)?;
    let mut all = artifacts;
    all.push(manifest);
    Ok(all)
}

fn cmd_mesh(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let mesh = config.build_mesh()?;
    let path = config.out_dir.join("mesh.txt");
    mesh.write_file(&path)?;
    Ok(vec![path])
}

fn cmd_solve(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let mesh = config.build_mesh()?;
    let material = config.material()?;
    let load = config.load_case(&mesh)?;
    let state = solve_state(&mesh, &material, &load)?;
    let stresses: Result<Vec<_>, _> = (0..mesh.n_triangles())
        .map(|el| element_stress(&mesh, &state.u, &material, el))
        .collect();
    let mesh_path = config.out_dir.join("mesh.txt");
    let field_path = config.out_dir.join("field.txt");
    let stress_path = config.out_dir.join("stress.txt");
    mesh.write_file(&mesh_path)?;
    export::write_field(&field_path, &state.u, None)?;
    export::write_stress(&stress_path, &stresses?, None)?;
    Ok(vec![mesh_path, field_path, stress_path])
}

fn cmd_objective(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let mesh = config.build_mesh()?;
    let material = config.material()?;
    let load = config.load_case(&mesh)?;
    let params = config.weibull()?;
    let state = solve_state(&mesh, &material, &load)?;
    let report = evaluate_objective(&mesh, &state.u, &material, &params)?;
    let stresses: Result<Vec<_>, _> = (0..mesh.n_triangles())
        .map(|el| element_stress(&mesh, &state.u, &material, el))
        .collect();
    let loads = config.survival_grid(report.eta);
    let survival: Vec<(f64, f64)> = loads.iter().map(|&f| (f, report.survival(f))).collect();

    let mesh_path = config.out_dir.join("mesh.txt");
    let field_path = config.out_dir.join("field.txt");
    let stress_path = config.out_dir.join("stress.txt");
    let objective_path = config.out_dir.join("objective.txt");
    let survival_path = config.out_dir.join("survival.csv");
    mesh.write_file(&mesh_path)?;
    export::write_field(&field_path, &state.u, None)?;
    export::write_stress(&stress_path, &stresses?, Some(&report.per_element_intensity))?;
    export::write_objective_summary(&objective_path, &report, &params)?;
    export::write_survival_csv(&survival_path, &survival)?;
    Ok(vec![
        mesh_path,
        field_path,
        stress_path,
        objective_path,
        survival_path,
    ])
}

fn cmd_gradcheck(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let mesh = config.build_mesh()?;
    let material = config.material()?;
    let load = config.load_case(&mesh)?;
    let params = config.weibull()?;
    let rows = validate_fd(
        &mesh,
        &material,
        &load,
        &params,
        config.directions,
        &config.epsilons,
        config.seed,
    )?;
    let sg = shape_gradient(&mesh, &material, &load, &params)?;
    let csv_path = config.out_dir.join("gradcheck.csv");
    let field_path = config.out_dir.join("field.txt");
    export::write_ratio_csv(&csv_path, &rows)?;
    export::write_field(&field_path, &sg.state.u, Some(&sg.total))?;
    Ok(vec![csv_path, field_path])
}

fn cmd_flow(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let mesh = config.build_mesh()?;
    let material = config.material()?;
    let load = config.load_case(&mesh)?;
    let params = config.weibull()?;
    // anchor the survival grid at the initial Weibull scale
    let state = solve_state(&mesh, &material, &load)?;
    let report = evaluate_objective(&mesh, &state.u, &material, &params)?;
    let mut flow_cfg = config.flow();
    flow_cfg.survival_loads = Some(config.survival_grid(report.eta));

    let trace = run_flow(&mesh, &flow_cfg, &material, &load, &params)?;
    let mut artifacts = Vec::new();
    let trace_path = config.out_dir.join("trace.csv");
    export::write_trace_csv(&trace_path, &trace)?;
    artifacts.push(trace_path);
    for (iter, snapshot) in &trace.snapshots {
        let mesh_path = config.out_dir.join(format!("snapshot_{iter:06}.txt"));
        snapshot.write_file(&mesh_path)?;
        artifacts.push(mesh_path);
        if let Some(record) = trace.records.iter().find(|r| r.iter == *iter) {
            if !record.survival.is_empty() {
                let surv_path = config.out_dir.join(format!("survival_{iter:06}.csv"));
                export::write_survival_csv(&surv_path, &record.survival)?;
                artifacts.push(surv_path);
            }
        }
    }
    Ok(artifacts)
}
