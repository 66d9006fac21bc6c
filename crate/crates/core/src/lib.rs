//! 2D shape optimization of ceramic parts against Weibull-type failure.
//!
//! The toolkit assembles and solves the linear elasticity system on
//! structured triangular meshes, evaluates the failure-intensity functional
//! over all crack orientations, computes its exact discrete shape gradient
//! through the adjoint equation, and drives volume-constrained shape flows
//! over the movable surface of the part.
//!
//! Module map:
//! - [`mesh`]: structured meshes, morphing, design parameters, volume.
//! - [`quadrature`]: reference-element rules.
//! - [`band`]: banded SPD Cholesky used behind the solver contract.
//! - [`fem`]: stiffness/load assembly, direct solve, element stress.
//! - [`weibull`]: angular tensile integral, failure intensity, survival.
//! - [`adjoint`]: dJ/dU, dJ/dX, adjoint contraction, FD validation.
//! - [`flow`]: projected gradient descent with mesh morphing.
//! - [`config`], [`cli`], [`export`]: run configuration and artifacts.

pub mod adjoint;
pub mod band;
pub mod cli;
pub mod config;
pub mod export;
pub mod fem;
pub mod flow;
pub mod mesh;
pub mod quadrature;
pub mod weibull;

pub use adjoint::{shape_gradient, validate_fd, AdjointState, FdSample, ShapeGradient};
pub use fem::{
    assemble_load, assemble_stiffness, element_stress, solve_state, ElasticState, LoadCase,
    Material, Stress2d,
};
pub use flow::{flow_step, project_volume, run_flow, FlowConfig, FlowRecord, FlowTrace, VolumeMode};
pub use mesh::{
    extract_theta, generate_joint, generate_rod, morph, morph_jacobian, volume, volume_gradient,
    BoundaryTag, DesignParams, Mesh, Profile,
};
pub use weibull::{
    angular_integral, evaluate_objective, survival_curve, ObjectiveReport, WeibullParams,
};
