//! Run configuration: a flat key-value text format with section headers.
//!
//! Grammar (line oriented):
//!
//! ```text
//! file     := line*
//! line     := blank | comment | section | pair
//! comment  := '#' ...
//! section  := '[' name ']'
//! pair     := key '=' value          # key and value trimmed
//! ```
//!
//! Sections and keys are fixed; unknown names are errors. Missing keys take
//! the documented defaults. Numbers use ordinary float/integer syntax,
//! booleans are `true`/`false`, lists are comma separated.
//!
//! Sections: `geometry` (kind, length, height, nx, ny, profile, amplitude,
//! center, width, offset, mesh_file), `material` (young_modulus,
//! poisson_ratio), `load` (traction_newtons, body_force_x, body_force_y,
//! load_scale, survival_min_scale, survival_max_scale, survival_points),
//! `weibull` (modulus, sigma0, n_angles), `flow` (step_alpha, max_iters,
//! volume_mode, stop_tol, snapshot_every, volume_rescale), `gradcheck`
//! (directions, epsilons), `output` (dir, seed).

use std::path::{Path, PathBuf};

use nalgebra::Vector2;
use thiserror::Error;

use crate::fem::{FemError, LoadCase, Material};
use crate::flow::{FlowConfig, StepMode, VolumeMode};
use crate::mesh::{generate_joint, generate_rod, Mesh, MeshError, Profile};
use crate::weibull::{WeibullError, WeibullParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("config line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("config line {line}: unknown section [{name}]")]
    UnknownSection { line: usize, name: String },
    #[error("config line {line}: unknown key `{key}` in section [{section}]")]
    UnknownKey {
        line: usize,
        section: String,
        key: String,
    },
    #[error("config line {line}: key `{key}` outside any section")]
    MissingSectionHeader { line: usize, key: String },
    #[error("config key `{section}.{key}`: {reason}")]
    InvalidValue {
        section: String,
        key: String,
        reason: String,
    },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Weibull(#[from] WeibullError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeometryKind {
    Rod,
    Joint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    Flat,
    Bump,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    // geometry
    pub kind: GeometryKind,
    pub length: f64,
    pub height: f64,
    pub nx: usize,
    pub ny: usize,
    pub profile: ProfileKind,
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
    pub offset: f64,
    pub mesh_file: Option<PathBuf>,
    // material
    pub young_modulus: f64,
    pub poisson_ratio: f64,
    // load
    pub traction_newtons: f64,
    pub body_force: Vector2<f64>,
    pub load_scale: f64,
    pub survival_min_scale: f64,
    pub survival_max_scale: f64,
    pub survival_points: usize,
    // weibull
    pub modulus: f64,
    pub sigma0: f64,
    pub n_angles: usize,
    // flow
    pub step_alpha: f64,
    pub step_mode: StepMode,
    pub max_iters: usize,
    pub volume_mode: VolumeMode,
    pub stop_tol: f64,
    pub snapshot_every: usize,
    pub volume_rescale: bool,
    // gradcheck
    pub directions: usize,
    pub epsilons: Vec<f64>,
    // output
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            kind: GeometryKind::Rod,
            length: 0.6,
            height: 0.1,
            nx: 61,
            ny: 9,
            profile: ProfileKind::Bump,
            amplitude: 0.05,
            center: 0.3,
            width: 0.2,
            offset: 0.2,
            mesh_file: None,
            young_modulus: 3.7e11,
            poisson_ratio: 0.22,
            traction_newtons: 1.0,
            body_force: Vector2::zeros(),
            load_scale: 1.0,
            survival_min_scale: 0.2,
            survival_max_scale: 2.0,
            survival_points: 20,
            modulus: 10.0,
            sigma0: 10.0,
            n_angles: 64,
            step_alpha: 5.0e-4,
            step_mode: StepMode::Normalized,
            max_iters: 2_000,
            volume_mode: VolumeMode::Project,
            stop_tol: 1e-9,
            snapshot_every: 50,
            volume_rescale: false,
            directions: 1,
            epsilons: vec![1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8],
            out_dir: PathBuf::from("out"),
            seed: 42,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        RunConfig::parse_str(&text)
    }

    pub fn parse_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut section: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let lno = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let Some(name) = name.strip_suffix(']') else {
                    return Err(ConfigError::Syntax {
                        line: lno,
                        reason: "unterminated section header".into(),
                    });
                };
                let name = name.trim();
                if !matches!(
                    name,
                    "geometry" | "material" | "load" | "weibull" | "flow" | "gradcheck" | "output"
                ) {
                    return Err(ConfigError::UnknownSection {
                        line: lno,
                        name: name.to_string(),
                    });
                }
                section = Some(name.to_string());
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: lno,
                    reason: format!("expected `key = value`, got `{line}`"),
                });
            };
            let key = key.trim();
            let value = value.trim();
            let Some(section) = section.as_deref() else {
                return Err(ConfigError::MissingSectionHeader {
                    line: lno,
                    key: key.to_string(),
                });
            };
            cfg.apply(section, key, value, lno)?;
        }
        Ok(cfg)
    }

    fn apply(&mut self, section: &str, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        let invalid = |reason: String| ConfigError::InvalidValue {
            section: section.to_string(),
            key: key.to_string(),
            reason,
        };
        let f64_val = || -> Result<f64, ConfigError> {
            value
                .parse::<f64>()
                .map_err(|_| invalid(format!("`{value}` is not a number")))
        };
        let usize_val = || -> Result<usize, ConfigError> {
            value
                .parse::<usize>()
                .map_err(|_| invalid(format!("`{value}` is not a non-negative integer")))
        };
        let bool_val = || -> Result<bool, ConfigError> {
            match value {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(invalid(format!("`{value}` is not `true` or `false`"))),
            }
        };
        match (section, key) {
            ("geometry", "kind") => {
                self.kind = match value {
                    "rod" => GeometryKind::Rod,
                    "joint" => GeometryKind::Joint,
                    _ => return Err(invalid(format!("`{value}` is not `rod` or `joint`"))),
                }
            }
            ("geometry", "length") => self.length = f64_val()?,
            ("geometry", "height") => self.height = f64_val()?,
            ("geometry", "nx") => self.nx = usize_val()?,
            ("geometry", "ny") => self.ny = usize_val()?,
            ("geometry", "profile") => {
                self.profile = match value {
                    "flat" => ProfileKind::Flat,
                    "bump" => ProfileKind::Bump,
                    _ => return Err(invalid(format!("`{value}` is not `flat` or `bump`"))),
                }
            }
            ("geometry", "amplitude") => self.amplitude = f64_val()?,
            ("geometry", "center") => self.center = f64_val()?,
            ("geometry", "width") => self.width = f64_val()?,
            ("geometry", "offset") => self.offset = f64_val()?,
            ("geometry", "mesh_file") => self.mesh_file = Some(PathBuf::from(value)),
            ("material", "young_modulus") => self.young_modulus = f64_val()?,
            ("material", "poisson_ratio") => self.poisson_ratio = f64_val()?,
            ("load", "traction_newtons") => self.traction_newtons = f64_val()?,
            ("load", "body_force_x") => self.body_force.x = f64_val()?,
            ("load", "body_force_y") => self.body_force.y = f64_val()?,
            ("load", "load_scale") => self.load_scale = f64_val()?,
            ("load", "survival_min_scale") => self.survival_min_scale = f64_val()?,
            ("load", "survival_max_scale") => self.survival_max_scale = f64_val()?,
            ("load", "survival_points") => self.survival_points = usize_val()?,
            ("weibull", "modulus") => self.modulus = f64_val()?,
            ("weibull", "sigma0") => self.sigma0 = f64_val()?,
            ("weibull", "n_angles") => self.n_angles = usize_val()?,
            ("flow", "step_alpha") => self.step_alpha = f64_val()?,
            ("flow", "step_mode") => {
                self.step_mode = match value {
                    "normalized" => StepMode::Normalized,
                    "fixed" => StepMode::PerUnitGradient,
                    _ => {
                        return Err(invalid(format!(
                            "`{value}` is not `normalized` or `fixed`"
                        )))
                    }
                }
            }
            ("flow", "max_iters") => self.max_iters = usize_val()?,
            ("flow", "volume_mode") => {
                self.volume_mode = match value {
                    "project" => VolumeMode::Project,
                    "literal" => VolumeMode::Literal,
                    _ => return Err(invalid(format!("`{value}` is not `project` or `literal`"))),
                }
            }
            ("flow", "stop_tol") => self.stop_tol = f64_val()?,
            ("flow", "snapshot_every") => self.snapshot_every = usize_val()?,
            ("flow", "volume_rescale") => self.volume_rescale = bool_val()?,
            ("gradcheck", "directions") => self.directions = usize_val()?,
            ("gradcheck", "epsilons") => {
                let mut eps = Vec::new();
                for part in value.split(',') {
                    let part = part.trim();
                    eps.push(
                        part.parse::<f64>()
                            .map_err(|_| invalid(format!("`{part}` is not a number")))?,
                    );
                }
                if eps.is_empty() {
                    return Err(invalid("needs at least one epsilon".into()));
                }
                self.epsilons = eps;
            }
            ("output", "dir") => self.out_dir = PathBuf::from(value),
            ("output", "seed") => {
                self.seed = value
                    .parse::<u64>()
                    .map_err(|_| invalid(format!("`{value}` is not a non-negative integer")))?
            }
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    section: section.to_string(),
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    /// Generate (or read, when `mesh_file` is set) the configured mesh.
    pub fn build_mesh(&self) -> Result<Mesh, ConfigError> {
        if let Some(path) = &self.mesh_file {
            return Ok(Mesh::read_file(path)?);
        }
        let mesh = match self.kind {
            GeometryKind::Rod => {
                let profile = match self.profile {
                    ProfileKind::Flat => Profile::Flat,
                    ProfileKind::Bump => Profile::CosineBump {
                        amplitude: self.amplitude,
                        center: self.center,
                        width: self.width,
                    },
                };
                generate_rod(self.length, self.height, self.nx, self.ny, &profile)?
            }
            GeometryKind::Joint => {
                generate_joint(self.length, self.height, self.nx, self.ny, self.offset)?
            }
        };
        Ok(mesh)
    }

    pub fn material(&self) -> Result<Material, ConfigError> {
        Ok(Material::new(self.young_modulus, self.poisson_ratio)?)
    }

    pub fn load_case(&self, mesh: &Mesh) -> Result<LoadCase, ConfigError> {
        let load = LoadCase::tensile(mesh, self.traction_newtons)?
            .with_body_force(self.body_force)
            .with_scale(self.load_scale);
        Ok(load)
    }

    pub fn weibull(&self) -> Result<WeibullParams, ConfigError> {
        Ok(WeibullParams::new(self.modulus, self.sigma0, self.n_angles)?)
    }

    pub fn flow(&self) -> FlowConfig {
        FlowConfig {
            step_alpha: self.step_alpha,
            step_mode: self.step_mode,
            max_iters: self.max_iters,
            volume_mode: self.volume_mode,
            stop_tol: self.stop_tol,
            snapshot_every: self.snapshot_every,
            volume_rescale: self.volume_rescale,
            survival_loads: None,
        }
    }

    /// Survival-curve load grid anchored at a Weibull scale.
    pub fn survival_grid(&self, eta: f64) -> Vec<f64> {
        if !eta.is_finite() || self.survival_points == 0 {
            return Vec::new();
        }
        if self.survival_points == 1 {
            return vec![eta * self.survival_min_scale];
        }
        (0..self.survival_points)
            .map(|k| {
                let t = k as f64 / (self.survival_points - 1) as f64;
                eta * (self.survival_min_scale
                    + (self.survival_max_scale - self.survival_min_scale) * t)
            })
            .collect()
    }
}
