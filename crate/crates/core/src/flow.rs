//! Volume-constrained gradient descent in the design parameters.
//!
//! Each step maps the shape gradient to design space through the morph
//! Jacobian, removes the volume-gradient component (or subtracts the raw
//! volume gradient in `literal` mode), updates the surface parameters with a
//! fixed step size, and morphs the mesh. The step size is halved on
//! triangle inversion, up to ten times.

use thiserror::Error;

use crate::adjoint::{shape_gradient, AdjointError};
use crate::fem::{LoadCase, Material};
use crate::mesh::{
    extract_theta, morph, morph_jacobian, volume, volume_gradient, DesignParams, Mesh, MeshError,
};
use crate::weibull::WeibullParams;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("volume gradient is zero; projection undefined")]
    ZeroVolumeGradient,
    #[error("design vectors disagree: gradient {grad} vs volume {vol}")]
    DimensionMismatch { grad: usize, vol: usize },
    #[error(
        "step at iteration {iter} kept inverting triangles after {attempts} halvings \
         (last alpha {alpha:e}): {reason}"
    )]
    StepFailed {
        iter: usize,
        attempts: usize,
        alpha: f64,
        reason: String,
    },
    #[error(transparent)]
    Adjoint(#[from] AdjointError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Interpretation of the step size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepMode {
    /// `step_alpha` is the largest node movement per step in meters; the
    /// projected direction is scaled to that length. Keeps steps uniformly
    /// small across the many decades the objective traverses.
    #[default]
    Normalized,
    /// `step_alpha` multiplies the raw projected gradient (meters per unit
    /// gradient), the literal printed update.
    PerUnitGradient,
}

/// How the volume constraint enters the update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VolumeMode {
    /// Orthogonal projection of the shape gradient against the volume
    /// gradient; keeps the volume stationary.
    #[default]
    Project,
    /// The printed update `theta - alpha (dJ/dtheta - dVol/dtheta)`,
    /// kept for reproduction runs.
    Literal,
}

#[derive(Debug, Clone)]
pub struct FlowConfig {
    /// Fixed step size; meaning depends on [`StepMode`].
    pub step_alpha: f64,
    pub step_mode: StepMode,
    pub max_iters: usize,
    pub volume_mode: VolumeMode,
    /// Stop when the relative J-decrease falls below this; zero disables
    /// early stopping.
    pub stop_tol: f64,
    /// Mesh snapshot cadence; zero keeps only the first and final mesh.
    pub snapshot_every: usize,
    /// Rescale column heights each step to restore the initial volume
    /// exactly.
    pub volume_rescale: bool,
    /// Load scales sampled for the survival curve of every record; when
    /// absent, a 20-point grid on [0.2, 2] times the initial Weibull scale
    /// is used.
    pub survival_loads: Option<Vec<f64>>,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            // every normalized step moves the fastest node exactly this far,
            // within the 1%-of-height cap of the reference rod
            step_alpha: 5.0e-4,
            step_mode: StepMode::Normalized,
            max_iters: 2_000,
            volume_mode: VolumeMode::Project,
            stop_tol: 1e-9,
            snapshot_every: 50,
            volume_rescale: false,
            survival_loads: None,
        }
    }
}

/// Per-iteration record of the flow.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowRecord {
    pub iter: usize,
    pub j: f64,
    pub volume: f64,
    /// Euclidean norm of the projected design-space gradient.
    pub grad_norm: f64,
    /// Step size actually applied leaving this iterate (zero on the final
    /// record).
    pub alpha: f64,
    pub theta: Vec<f64>,
    /// (load, survival probability) samples.
    pub survival: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct FlowTrace {
    pub records: Vec<FlowRecord>,
    /// (iteration, mesh) snapshots.
    pub snapshots: Vec<(usize, Mesh)>,
}

impl FlowTrace {
    pub fn initial(&self) -> &FlowRecord {
        self.records.first().expect("trace has records")
    }

    pub fn last(&self) -> &FlowRecord {
        self.records.last().expect("trace has records")
    }

    /// Largest relative volume deviation from the initial volume.
    pub fn max_volume_drift(&self) -> f64 {
        let v0 = self.initial().volume;
        self.records
            .iter()
            .map(|r| (r.volume - v0).abs() / v0)
            .fold(0.0, f64::max)
    }
}

/// Remove the `grad_v` component from `grad_j`; the result is orthogonal to
/// the volume gradient.
pub fn project_volume(grad_j: &[f64], grad_v: &[f64]) -> Result<Vec<f64>, FlowError> {
    if grad_j.len() != grad_v.len() {
        return Err(FlowError::DimensionMismatch {
            grad: grad_j.len(),
            vol: grad_v.len(),
        });
    }
    let vv: f64 = grad_v.iter().map(|v| v * v).sum();
    if vv == 0.0 {
        return Err(FlowError::ZeroVolumeGradient);
    }
    let jv: f64 = grad_j.iter().zip(grad_v).map(|(a, b)| a * b).sum();
    let beta = jv / vv;
    Ok(grad_j
        .iter()
        .zip(grad_v)
        .map(|(a, b)| a - beta * b)
        .collect())
}

/// Outcome of one flow step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub theta_new: DesignParams,
    pub mesh_new: Mesh,
    /// Values at the iterate the step departed from.
    pub record: FlowRecord,
}

fn survival_samples(
    report: &crate::weibull::ObjectiveReport,
    loads: &Option<Vec<f64>>,
) -> Vec<(f64, f64)> {
    match loads {
        Some(loads) => loads.iter().map(|&f| (f, report.survival(f))).collect(),
        None => Vec::new(),
    }
}

/// Default survival-curve grid: 20 loads spanning [0.2, 2] x eta.
pub fn default_survival_grid(eta: f64) -> Vec<f64> {
    if !eta.is_finite() {
        return Vec::new();
    }
    (0..20)
        .map(|k| eta * (0.2 + 1.8 * k as f64 / 19.0))
        .collect()
}

/// Uniformly rescale movable column heights about their midpoints so the
/// mesh volume returns to `target`.
fn rescale_theta_to_volume(mesh: &Mesh, theta: &DesignParams, target: f64) -> DesignParams {
    let (nx, ny) = mesh.structured_dims().expect("structured mesh");
    let dx = |i: usize| mesh.nodes()[(i + 1) * ny].x - mesh.nodes()[i * ny].x;
    let weight = |i: usize| {
        let left = if i > 0 { dx(i - 1) } else { 0.0 };
        let right = if i < nx - 1 { dx(i) } else { 0.0 };
        0.5 * (left + right)
    };
    let col_height = |i: usize| mesh.nodes()[i * ny + ny - 1].y - mesh.nodes()[i * ny].y;
    let fixed = weight(0) * col_height(0) + weight(nx - 1) * col_height(nx - 1);
    let movable: f64 = (1..nx - 1)
        .enumerate()
        .map(|(k, i)| weight(i) * (theta.top(k) - theta.bottom(k)))
        .sum();
    if movable <= 0.0 {
        return theta.clone();
    }
    let scale = (target - fixed) / movable;
    let mut out = theta.clone();
    for k in 0..theta.len() / 2 {
        let mid = 0.5 * (theta.top(k) + theta.bottom(k));
        let half = 0.5 * (theta.top(k) - theta.bottom(k)) * scale;
        out.theta[2 * k] = mid - half;
        out.theta[2 * k + 1] = mid + half;
    }
    out
}

/// One descent step with inversion backoff. The returned record holds the
/// objective, volume, and projected-gradient norm of the departed iterate.
pub fn flow_step(
    mesh: &Mesh,
    theta: &DesignParams,
    config: &FlowConfig,
    material: &Material,
    load: &LoadCase,
    params: &WeibullParams,
) -> Result<StepOutcome, FlowError> {
    flow_step_inner(mesh, theta, config, material, load, params, 0, None)
}

#[allow(clippy::too_many_arguments)]
fn flow_step_inner(
    mesh: &Mesh,
    theta: &DesignParams,
    config: &FlowConfig,
    material: &Material,
    load: &LoadCase,
    params: &WeibullParams,
    iter: usize,
    target_volume: Option<f64>,
) -> Result<StepOutcome, FlowError> {
    let current = morph(mesh, theta)?;
    let sg = shape_gradient(&current, material, load, params)?;
    let grad_theta = sg.theta.as_ref().expect("structured mesh has theta map");
    let vol_grad = morph_jacobian(&current)?.pullback(&volume_gradient(&current));
    let direction = match config.volume_mode {
        VolumeMode::Project => project_volume(grad_theta, &vol_grad)?,
        VolumeMode::Literal => grad_theta
            .iter()
            .zip(&vol_grad)
            .map(|(j, v)| j - v)
            .collect(),
    };
    let grad_norm: f64 = direction.iter().map(|d| d * d).sum::<f64>().sqrt();
    let vol = volume(&current);
    let record = FlowRecord {
        iter,
        j: sg.report.j,
        volume: vol,
        grad_norm,
        alpha: config.step_alpha,
        theta: theta.theta.clone(),
        survival: survival_samples(&sg.report, &config.survival_loads),
    };

    let grad_inf = direction.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
    if grad_inf == 0.0 {
        // stationary point: theta unchanged
        let mut record = record;
        record.alpha = 0.0;
        return Ok(StepOutcome {
            theta_new: theta.clone(),
            mesh_new: current,
            record,
        });
    }
    let mut alpha = config.step_alpha;
    let mut last_err = String::new();
    for _attempt in 0..=10 {
        let scale = match config.step_mode {
            StepMode::Normalized => alpha / grad_inf,
            StepMode::PerUnitGradient => alpha,
        };
        let candidate = DesignParams {
            theta: theta
                .theta
                .iter()
                .zip(&direction)
                .map(|(t, d)| t - scale * d)
                .collect(),
        };
        let candidate = match target_volume {
            Some(v0) if config.volume_rescale => {
                rescale_theta_to_volume(&current, &candidate, v0)
            }
            _ => candidate,
        };
        match morph(&current, &candidate) {
            Ok(mesh_new) => {
                let mut record = record;
                record.alpha = alpha;
                return Ok(StepOutcome {
                    theta_new: candidate,
                    mesh_new,
                    record,
                });
            }
            Err(e @ (MeshError::DegenerateColumn { .. } | MeshError::InvertedTriangle { .. })) => {
                last_err = e.to_string();
                alpha *= 0.5;
            }
            Err(e) => return Err(e.into()),
        }
    }
    Err(FlowError::StepFailed {
        iter,
        attempts: 10,
        alpha,
        reason: last_err,
    })
}

/// Run the descent until `max_iters` or until the relative J-decrease of a
/// step falls below `stop_tol`. The trace records every iterate including
/// the final one; meshes are snapshotted on the configured cadence.
pub fn run_flow(
    initial: &Mesh,
    config: &FlowConfig,
    material: &Material,
    load: &LoadCase,
    params: &WeibullParams,
) -> Result<FlowTrace, FlowError> {
    let mut mesh = initial.clone();
    let mut theta = extract_theta(&mesh)?;
    let vol0 = volume(&mesh);
    let mut config = config.clone();

    if config.survival_loads.is_none() {
        // fix the load grid from the initial Weibull scale so curves stay
        // comparable across iterations
        let state = crate::fem::solve_state(&mesh, material, load)
            .map_err(AdjointError::from)?;
        let report = crate::weibull::evaluate_objective(&mesh, &state.u, material, params)
            .map_err(AdjointError::from)?;
        config.survival_loads = Some(default_survival_grid(report.eta));
    }

    let mut records: Vec<FlowRecord> = Vec::new();
    let mut snapshots: Vec<(usize, Mesh)> = Vec::new();
    let mut final_iter = config.max_iters;
    let mut previous: Option<(Mesh, DesignParams)> = None;

    for iter in 0..=config.max_iters {
        if iter == config.max_iters {
            records.push(evaluate_record(
                &mesh, &theta, &config, material, load, params, iter,
            )?);
            break;
        }
        let outcome = flow_step_inner(
            &mesh,
            &theta,
            &config,
            material,
            load,
            params,
            iter,
            Some(vol0),
        )?;
        let stop = config.stop_tol > 0.0
            && records.last().is_some_and(|prev| {
                prev.j > 0.0 && (prev.j - outcome.record.j) / prev.j < config.stop_tol
            });
        if stop {
            // this iterate no longer improves on the previous one: end the
            // trace at the previous iterate and discard the probe
            let (prev_mesh, prev_theta) = previous.expect("stop needs a predecessor");
            mesh = prev_mesh;
            theta = prev_theta;
            if let Some(last) = records.last_mut() {
                last.alpha = 0.0;
            }
            final_iter = iter - 1;
            break;
        }
        if config.snapshot_every > 0 && iter % config.snapshot_every == 0 {
            snapshots.push((iter, mesh.clone()));
        }
        records.push(outcome.record);
        previous = Some((mesh, theta));
        theta = outcome.theta_new;
        mesh = outcome.mesh_new;
    }
    let _ = theta;

    if snapshots.last().map(|(it, _)| *it) != Some(final_iter) {
        snapshots.push((final_iter, mesh.clone()));
    }
    Ok(FlowTrace { records, snapshots })
}

/// Record of the current iterate without taking a step.
#[allow(clippy::too_many_arguments)]
fn evaluate_record(
    mesh: &Mesh,
    theta: &DesignParams,
    config: &FlowConfig,
    material: &Material,
    load: &LoadCase,
    params: &WeibullParams,
    iter: usize,
) -> Result<FlowRecord, FlowError> {
    let sg = shape_gradient(mesh, material, load, params)?;
    let grad_theta = sg.theta.as_ref().expect("structured mesh has theta map");
    let vol_grad = morph_jacobian(mesh)?.pullback(&volume_gradient(mesh));
    let direction = match config.volume_mode {
        VolumeMode::Project => project_volume(grad_theta, &vol_grad)?,
        VolumeMode::Literal => grad_theta
            .iter()
            .zip(&vol_grad)
            .map(|(j, v)| j - v)
            .collect(),
    };
    Ok(FlowRecord {
        iter,
        j: sg.report.j,
        volume: volume(mesh),
        grad_norm: direction.iter().map(|d| d * d).sum::<f64>().sqrt(),
        alpha: 0.0,
        theta: theta.theta.clone(),
        survival: survival_samples(&sg.report, &config.survival_loads),
    })
}
