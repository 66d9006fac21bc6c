//! Discrete shape gradient of the failure intensity via the adjoint method.
//!
//! The total derivative with respect to node positions splits into the
//! partial geometric term and the adjoint contraction
//!
//! ```text
//! dJ/dX = dJ/dX|_U + Lambda^T [dF/dX - dB/dX U],   B^T Lambda = dJ/dU.
//! ```
//!
//! All element derivatives are closed-form for linear triangles: the hat
//! gradients obey `d(g_m)/d(X_p)_c = -(g_m)_c g_p` and the area derivative is
//! the usual corner formula. Contractions with the state and adjoint vectors
//! happen element-locally, so no derivative of the global stiffness is ever
//! stored.

use nalgebra::{DVector, Vector2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::fem::{
    displacement_gradient, dof, element_displacements, solve_state, stress_from_du, ElasticState,
    FemError, LoadCase, Material, Stress2d,
};
use crate::mesh::{morph_jacobian, BoundaryTag, ElementGeometry, Mesh, MeshError};
use crate::quadrature::{EdgeQuadrature, TriQuadrature};
use crate::weibull::{evaluate_objective, AngleTable, ObjectiveReport, WeibullError, WeibullParams};

#[derive(Debug, Error)]
pub enum AdjointError {
    #[error("finite-difference direction is zero")]
    DegenerateDirection,
    #[error("direction length {got} does not match node count {expected}")]
    DirectionLength { expected: usize, got: usize },
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Weibull(#[from] WeibullError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Solution of the adjoint equation, zero on Dirichlet nodes.
#[derive(Debug, Clone)]
pub struct AdjointState {
    pub lambda: DVector<f64>,
}

/// Exact derivative of the discretized objective with respect to the
/// displacement DOFs, zeroed on Dirichlet entries.
pub fn objective_grad_u(
    mesh: &Mesh,
    u: &DVector<f64>,
    material: &Material,
    params: &WeibullParams,
) -> Result<DVector<f64>, AdjointError> {
    let table = AngleTable::new(params.n_angles);
    let scale = params.scale();
    let (lambda_c, mu) = (material.lambda, material.mu);
    let mut grad = DVector::zeros(2 * mesh.n_nodes());
    for el in 0..mesh.n_triangles() {
        let geom = ElementGeometry::for_element(mesh, el)?;
        let disp = element_displacements(mesh, u, el);
        let sigma = stress_from_du(&displacement_gradient(&geom, &disp), material);
        let g = table.integral_gradient(&sigma, params.modulus);
        let weight = scale * geom.signed_area;
        let tri = mesh.triangles()[el];
        for m in 0..3 {
            let gm = geom.grads[m];
            // d sigma / d u_(m,x) and / d u_(m,y)
            let dsig_x = Stress2d {
                xx: (lambda_c + 2.0 * mu) * gm.x,
                yy: lambda_c * gm.x,
                xy: mu * gm.y,
            };
            let dsig_y = Stress2d {
                xx: lambda_c * gm.y,
                yy: (lambda_c + 2.0 * mu) * gm.y,
                xy: mu * gm.x,
            };
            grad[dof(tri[m], 0)] += weight * g.contract(&dsig_x);
            grad[dof(tri[m], 1)] += weight * g.contract(&dsig_y);
        }
    }
    for (node, tag) in mesh.tags().iter().enumerate() {
        if *tag == BoundaryTag::Dirichlet {
            grad[dof(node, 0)] = 0.0;
            grad[dof(node, 1)] = 0.0;
        }
    }
    Ok(grad)
}

/// Partial derivative of the objective with respect to node coordinates at
/// frozen displacements: the element-area term plus the stress dependence
/// through the reference-map inverse.
pub fn objective_grad_x_partial(
    mesh: &Mesh,
    u: &DVector<f64>,
    material: &Material,
    params: &WeibullParams,
) -> Result<Vec<Vector2<f64>>, AdjointError> {
    let table = AngleTable::new(params.n_angles);
    let scale = params.scale();
    let mut grad = vec![Vector2::zeros(); mesh.n_nodes()];
    for el in 0..mesh.n_triangles() {
        let geom = ElementGeometry::for_element(mesh, el)?;
        let disp = element_displacements(mesh, u, el);
        let du = displacement_gradient(&geom, &disp);
        let sigma = stress_from_du(&du, material);
        let t_val = table.integral(&sigma, params.modulus);
        let g = table.integral_gradient(&sigma, params.modulus);
        let area_grad = geom.area_grad();
        let tri = mesh.triangles()[el];
        for p in 0..3 {
            for c in 0..2 {
                // d(grad u) = -(grad u e_c) (x) g_p
                let gp = geom.grads[p];
                let col = [du[0][c], du[1][c]];
                let ddu = [
                    [-col[0] * gp.x, -col[0] * gp.y],
                    [-col[1] * gp.x, -col[1] * gp.y],
                ];
                let dsigma = stress_from_du(&ddu, material);
                let value = scale
                    * (area_grad[p][c] * t_val + geom.signed_area * g.contract(&dsigma));
                grad[tri[p]][c] += value;
            }
        }
    }
    Ok(grad)
}

/// `Lambda^T dF/dX` for the traction and body-force quadratures.
pub fn load_gradient_contraction(
    mesh: &Mesh,
    lambda: &DVector<f64>,
    load: &LoadCase,
) -> Result<Vec<Vector2<f64>>, AdjointError> {
    let mut out = vec![Vector2::zeros(); mesh.n_nodes()];

    if load.body_force != Vector2::zeros() {
        let rule = TriQuadrature::seven_point();
        for el in 0..mesh.n_triangles() {
            let geom = ElementGeometry::for_element(mesh, el)?;
            let tri = mesh.triangles()[el];
            // the integrand is constant in X up to the det factor
            let mut coeff = 0.0;
            for (&(xi, eta), &w) in rule.points.iter().zip(&rule.weights) {
                let shapes = TriQuadrature::shape_values(xi, eta);
                for m in 0..3 {
                    let lam = Vector2::new(lambda[dof(tri[m], 0)], lambda[dof(tri[m], 1)]);
                    coeff += w * shapes[m] * load.body_force.dot(&lam);
                }
            }
            let area_grad = geom.area_grad();
            for p in 0..3 {
                // d det / dX = 2 d area / dX
                out[tri[p]] += coeff * 2.0 * area_grad[p];
            }
        }
    }

    if load.traction != Vector2::zeros() {
        let rule = EdgeQuadrature::gauss_3();
        let g = load.traction * load.load_scale;
        for (a, b) in mesh.traction_edges() {
            let lam_a = Vector2::new(lambda[dof(a, 0)], lambda[dof(a, 1)]);
            let lam_b = Vector2::new(lambda[dof(b, 0)], lambda[dof(b, 1)]);
            let mut coeff = 0.0;
            for (&s, &w) in rule.points.iter().zip(&rule.weights) {
                let shapes = EdgeQuadrature::shape_values(s);
                coeff += w * (shapes[0] * g.dot(&lam_a) + shapes[1] * g.dot(&lam_b));
            }
            let tangent = mesh.nodes()[b] - mesh.nodes()[a];
            let unit = tangent / tangent.norm();
            // d |X_b - X_a| / dX_b = unit tangent, and the negative at a
            out[b] += coeff * unit;
            out[a] -= coeff * unit;
        }
    }

    Ok(out)
}

/// `Lambda^T dB/dX U`, assembled element-locally so the stiffness derivative
/// is never materialized.
pub fn stiffness_gradient_contraction(
    mesh: &Mesh,
    u: &DVector<f64>,
    lambda: &DVector<f64>,
    material: &Material,
) -> Result<Vec<Vector2<f64>>, AdjointError> {
    let (lambda_c, mu) = (material.lambda, material.mu);
    let mut out = vec![Vector2::zeros(); mesh.n_nodes()];
    let frob_sym = |a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]| {
        // sym(a) : sym(b)
        let axy = 0.5 * (a[0][1] + a[1][0]);
        let bxy = 0.5 * (b[0][1] + b[1][0]);
        a[0][0] * b[0][0] + a[1][1] * b[1][1] + 2.0 * axy * bxy
    };
    for el in 0..mesh.n_triangles() {
        let geom = ElementGeometry::for_element(mesh, el)?;
        let tri = mesh.triangles()[el];
        let u_el = element_displacements(mesh, u, el);
        let lam_el = element_displacements(mesh, lambda, el);
        let q = displacement_gradient(&geom, &u_el);
        let p_mat = displacement_gradient(&geom, &lam_el);
        let tr_q = q[0][0] + q[1][1];
        let tr_p = p_mat[0][0] + p_mat[1][1];
        let energy = lambda_c * tr_p * tr_q + 2.0 * mu * frob_sym(&p_mat, &q);
        let area_grad = geom.area_grad();
        for p in 0..3 {
            let gp = geom.grads[p];
            for c in 0..2 {
                let dq = [
                    [-q[0][c] * gp.x, -q[0][c] * gp.y],
                    [-q[1][c] * gp.x, -q[1][c] * gp.y],
                ];
                let dp = [
                    [-p_mat[0][c] * gp.x, -p_mat[0][c] * gp.y],
                    [-p_mat[1][c] * gp.x, -p_mat[1][c] * gp.y],
                ];
                let tr_dq = dq[0][0] + dq[1][1];
                let tr_dp = dp[0][0] + dp[1][1];
                let denergy = lambda_c * (tr_dp * tr_q + tr_p * tr_dq)
                    + 2.0 * mu * (frob_sym(&dp, &q) + frob_sym(&p_mat, &dq));
                out[tri[p]][c] += area_grad[p][c] * energy + geom.signed_area * denergy;
            }
        }
    }
    Ok(out)
}

/// `Lambda^T (dF/dX - dB/dX U)` per node.
pub fn adjoint_contraction(
    mesh: &Mesh,
    u: &DVector<f64>,
    lambda: &DVector<f64>,
    material: &Material,
    load: &LoadCase,
) -> Result<Vec<Vector2<f64>>, AdjointError> {
    let load_part = load_gradient_contraction(mesh, lambda, load)?;
    let stiff_part = stiffness_gradient_contraction(mesh, u, lambda, material)?;
    Ok(load_part
        .into_iter()
        .zip(stiff_part)
        .map(|(f, b)| f - b)
        .collect())
}

/// Complete shape-gradient bundle of one configuration.
#[derive(Debug, Clone)]
pub struct ShapeGradient {
    /// Total derivative dJ/dX per node; boundary-condition entries are
    /// reported but the design-space map masks them.
    pub total: Vec<Vector2<f64>>,
    /// Partial term dJ/dX at frozen displacements.
    pub partial_x: Vec<Vector2<f64>>,
    /// Adjoint term `Lambda^T (dF/dX - dB/dX U)`.
    pub adjoint_term: Vec<Vector2<f64>>,
    /// Design-space gradient dJ/dtheta (structured meshes only).
    pub theta: Option<Vec<f64>>,
    pub adjoint: AdjointState,
    pub report: ObjectiveReport,
    pub state: ElasticState,
}

/// Full pipeline: state solve, objective, adjoint solve, partials,
/// contraction, and the pullback to design space.
pub fn shape_gradient(
    mesh: &Mesh,
    material: &Material,
    load: &LoadCase,
    params: &WeibullParams,
) -> Result<ShapeGradient, AdjointError> {
    let state = solve_state(mesh, material, load)?;
    let report = evaluate_objective(mesh, &state.u, material, params)?;
    let grad_u = objective_grad_u(mesh, &state.u, material, params)?;
    // B is symmetric after elimination, so the adjoint reuses the
    // state factorization
    let lambda = state.factor.solve_full(&grad_u);
    let partial_x = objective_grad_x_partial(mesh, &state.u, material, params)?;
    let adjoint_term = adjoint_contraction(mesh, &state.u, &lambda, material, load)?;
    let total: Vec<Vector2<f64>> = partial_x
        .iter()
        .zip(&adjoint_term)
        .map(|(p, a)| p + a)
        .collect();
    let theta = match mesh.structured_dims() {
        Some(_) => Some(morph_jacobian(mesh)?.pullback(&total)),
        None => None,
    };
    Ok(ShapeGradient {
        total,
        partial_x,
        adjoint_term,
        theta,
        adjoint: AdjointState { lambda },
        report,
        state,
    })
}

/// One row of the finite-difference validation table.
#[derive(Debug, Clone, Copy)]
pub struct FdSample {
    pub direction: usize,
    pub epsilon: f64,
    /// Directional analytic derivative over the one-sided FD quotient.
    pub ratio: f64,
    /// Set when the quotient lost eight or more significant digits.
    pub cancellation: bool,
}

/// Node coordinates that are allowed to move: everything except the two
/// boundary-condition columns.
pub fn movable_coordinates(mesh: &Mesh) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (node, tag) in mesh.tags().iter().enumerate() {
        if matches!(tag, BoundaryTag::Free | BoundaryTag::Interior) {
            out.push((node, 0));
            out.push((node, 1));
        }
    }
    out
}

/// Ratio table for one explicit direction over a list of step sizes, each
/// with a full re-solve of the state at the perturbed geometry.
pub fn fd_ratio_for_direction(
    mesh: &Mesh,
    material: &Material,
    load: &LoadCase,
    params: &WeibullParams,
    direction: &[Vector2<f64>],
    epsilons: &[f64],
    direction_id: usize,
) -> Result<Vec<FdSample>, AdjointError> {
    if direction.len() != mesh.n_nodes() {
        return Err(AdjointError::DirectionLength {
            expected: mesh.n_nodes(),
            got: direction.len(),
        });
    }
    let norm: f64 = direction.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(AdjointError::DegenerateDirection);
    }
    let sg = shape_gradient(mesh, material, load, params)?;
    let d_analytic: f64 = sg
        .total
        .iter()
        .zip(direction)
        .map(|(g, v)| g.dot(v))
        .sum();
    let j0 = sg.report.j;
    let mut rows = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let nodes: Vec<Vector2<f64>> = mesh
            .nodes()
            .iter()
            .zip(direction)
            .map(|(p, v)| p + eps * v)
            .collect();
        let moved = mesh.with_nodes(nodes);
        moved.validate()?;
        let state = solve_state(&moved, material, load)?;
        let j_eps = evaluate_objective(&moved, &state.u, material, params)?.j;
        let quotient = (j_eps - j0) / eps;
        let cancellation = (j_eps - j0).abs() < 1e-8 * j0.abs().max(f64::MIN_POSITIVE);
        rows.push(FdSample {
            direction: direction_id,
            epsilon: eps,
            ratio: d_analytic / quotient,
            cancellation,
        });
    }
    Ok(rows)
}

/// Seeded random directions restricted to movable coordinates; emits the
/// ratio table for each direction and step size. Deterministic per seed.
pub fn validate_fd(
    mesh: &Mesh,
    material: &Material,
    load: &LoadCase,
    params: &WeibullParams,
    n_directions: usize,
    epsilons: &[f64],
    seed: u64,
) -> Result<Vec<FdSample>, AdjointError> {
    let movable = movable_coordinates(mesh);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for d in 0..n_directions {
        let mut direction = vec![Vector2::zeros(); mesh.n_nodes()];
        let mut norm_sq = 0.0;
        for &(node, c) in &movable {
            let v: f64 = rng.sample(rand::distributions::Standard);
            let v = 2.0 * v - 1.0;
            direction[node][c] = v;
            norm_sq += v * v;
        }
        let norm = norm_sq.sqrt();
        if norm == 0.0 {
            return Err(AdjointError::DegenerateDirection);
        }
        for v in &mut direction {
            *v /= norm;
        }
        rows.extend(fd_ratio_for_direction(
            mesh, material, load, params, &direction, epsilons, d,
        )?);
    }
    Ok(rows)
}
