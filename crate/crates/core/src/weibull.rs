//! Weibull-type failure intensity of a solved elastic state.
//!
//! For every element the tensile part of the normal stress is raised to the
//! Weibull modulus and integrated over all crack orientations with an
//! n-point trapezoidal rule (exponentially convergent for this periodic
//! integrand). Summed over elements with the element-area weight this gives
//! the failure intensity `J`; the survival probability under load scale `F`
//! is `exp(-J F^m)`.

use nalgebra::DVector;
use thiserror::Error;

use crate::fem::{element_displacements, stress_from_gradient, Material, Stress2d};
use crate::mesh::{ElementGeometry, Mesh, MeshError};

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Error)]
pub enum WeibullError {
    #[error("Weibull modulus must exceed 2, got {0}")]
    BadModulus(f64),
    #[error("scale stress sigma0 must be positive, got {0}")]
    BadScaleStress(f64),
    #[error("angle count must be even and at least 4, got {0}")]
    BadAngleCount(usize),
    #[error("negative load {0} in survival curve")]
    NegativeLoad(f64),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Parameters of the failure-intensity functional.
#[derive(Debug, Clone, Copy)]
pub struct WeibullParams {
    /// Weibull modulus m (stress exponent).
    pub modulus: f64,
    /// Scale stress sigma0 normalizing the tensile stress.
    pub sigma0: f64,
    /// Number of trapezoid angles on the unit circle.
    pub n_angles: usize,
    /// Orientation-measure prefactor, fixed to 1/(2 pi) in 2D.
    prefactor: f64,
}

impl WeibullParams {
    pub fn new(modulus: f64, sigma0: f64, n_angles: usize) -> Result<Self, WeibullError> {
        if !(modulus > 2.0) {
            return Err(WeibullError::BadModulus(modulus));
        }
        if !(sigma0 > 0.0) {
            return Err(WeibullError::BadScaleStress(sigma0));
        }
        if n_angles < 4 || n_angles % 2 != 0 {
            return Err(WeibullError::BadAngleCount(n_angles));
        }
        Ok(WeibullParams {
            modulus,
            sigma0,
            n_angles,
            prefactor: 1.0 / TWO_PI,
        })
    }

    pub fn prefactor(&self) -> f64 {
        self.prefactor
    }

    /// Combined constant in front of the element sum: `prefactor * sigma0^-m`.
    pub fn scale(&self) -> f64 {
        self.prefactor * self.sigma0.powf(-self.modulus)
    }
}

/// Precomputed unit directions of the trapezoid angles.
#[derive(Debug, Clone)]
pub struct AngleTable {
    dirs: Vec<(f64, f64)>,
}

impl AngleTable {
    pub fn new(n: usize) -> Self {
        let dirs = (0..n)
            .map(|i| {
                let phi = TWO_PI * i as f64 / n as f64;
                let (s, c) = phi.sin_cos();
                (c, s)
            })
            .collect();
        AngleTable { dirs }
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    /// Trapezoid value of the angular integral of `((n . sigma n)^+)^m`.
    pub fn integral(&self, sigma: &Stress2d, m: f64) -> f64 {
        let mut sum = 0.0;
        for &(c, s) in &self.dirs {
            let sn = sigma.normal_component(c, s);
            if sn > 0.0 {
                sum += sn.powf(m);
            }
        }
        TWO_PI / self.len() as f64 * sum
    }

    /// Gradient of [`AngleTable::integral`] with respect to the stress
    /// entries, returned as the triple (d/dxx, d/dyy, d/dxy); the xy slot is
    /// the derivative with respect to the single off-diagonal variable. The
    /// positive-part kink contributes zero exactly at zero.
    pub fn integral_gradient(&self, sigma: &Stress2d, m: f64) -> Stress2d {
        let mut g = Stress2d::zero();
        for &(c, s) in &self.dirs {
            let sn = sigma.normal_component(c, s);
            if sn > 0.0 {
                let w = m * sn.powf(m - 1.0);
                g.xx += w * c * c;
                g.yy += w * s * s;
                g.xy += w * 2.0 * c * s;
            }
        }
        let scale = TWO_PI / self.len() as f64;
        g.xx *= scale;
        g.yy *= scale;
        g.xy *= scale;
        g
    }
}

/// n-point trapezoid approximation of the angular tensile-stress integral.
pub fn angular_integral(sigma: &Stress2d, m: f64, n: usize) -> f64 {
    AngleTable::new(n).integral(sigma, m)
}

/// Failure intensity, its per-element density, and the derived Weibull scale.
#[derive(Debug, Clone)]
pub struct ObjectiveReport {
    /// Failure intensity at load scale F = 1.
    pub j: f64,
    /// Weibull scale: the load at which survival drops to 1/e.
    pub eta: f64,
    /// Weibull modulus used in the evaluation.
    pub modulus: f64,
    /// Local intensity density per element (the field practitioners plot).
    pub per_element_intensity: Vec<f64>,
}

impl ObjectiveReport {
    /// Survival probability at load scale `f >= 0`.
    pub fn survival(&self, f: f64) -> f64 {
        (-self.j * f.powf(self.modulus)).exp()
    }
}

/// Evaluate the discretized failure intensity for a displacement vector.
///
/// Stress is element-constant, so the single-point element rule with the
/// element-area weight integrates the angular density exactly in space.
pub fn evaluate_objective(
    mesh: &Mesh,
    u: &DVector<f64>,
    material: &Material,
    params: &WeibullParams,
) -> Result<ObjectiveReport, WeibullError> {
    let table = AngleTable::new(params.n_angles);
    let scale = params.scale();
    let mut j = 0.0;
    let mut per_element_intensity = Vec::with_capacity(mesh.n_triangles());
    for el in 0..mesh.n_triangles() {
        let geom = ElementGeometry::for_element(mesh, el)?;
        let disp = element_displacements(mesh, u, el);
        let sigma = stress_from_gradient(&geom, &disp, material);
        let density = scale * table.integral(&sigma, params.modulus);
        per_element_intensity.push(density);
        j += geom.signed_area * density;
    }
    let eta = if j > 0.0 {
        j.powf(-1.0 / params.modulus)
    } else {
        f64::INFINITY
    };
    Ok(ObjectiveReport {
        j,
        eta,
        modulus: params.modulus,
        per_element_intensity,
    })
}

/// Survival probabilities `exp(-J F^m)` for a list of load scales.
pub fn survival_curve(report: &ObjectiveReport, loads: &[f64]) -> Result<Vec<f64>, WeibullError> {
    loads
        .iter()
        .map(|&f| {
            if f < 0.0 {
                Err(WeibullError::NegativeLoad(f))
            } else {
                Ok(report.survival(f))
            }
        })
        .collect()
}
