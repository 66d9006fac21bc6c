//! Linear elasticity on linear Lagrange triangles.
//!
//! The bilinear form uses the 1-point centroid rule (exact: strain is
//! element-constant), the volume force the 7-point triangle rule, and the
//! traction term a 3-point Gauss rule on boundary edges with the edge Gram
//! determinant. Dirichlet conditions are removed by symmetric elimination so
//! the reduced stiffness stays symmetric positive definite and the adjoint
//! solve can reuse the same Cholesky factorization.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SMatrix, Vector2};
use thiserror::Error;

use crate::band::{BandedCholesky, BandedSpd};
use crate::mesh::{BoundaryTag, ElementGeometry, Mesh, MeshError};
use crate::quadrature::{EdgeQuadrature, TriQuadrature};

#[derive(Debug, Error)]
pub enum FemError {
    #[error("material: Young's modulus must be positive, got {0}")]
    BadYoungModulus(f64),
    #[error("material: Poisson's ratio must lie in (0, 0.5), got {0}")]
    BadPoissonRatio(f64),
    #[error("element {element} has a singular reference map (area {area:e})")]
    SingularElement { element: usize, area: f64 },
    #[error("load case applies traction but the mesh has no neumann_fixed boundary edges")]
    NoTractionBoundary,
    #[error(
        "stiffness factorization failed: matrix not positive definite \
         ({diagnosis})"
    )]
    NotPositiveDefinite { diagnosis: String },
    #[error("solve residual {residual:e} exceeds 1e-10 * |F|")]
    ResidualTooLarge { residual: f64 },
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Isotropic material with Lame constants derived from engineering moduli.
#[derive(Debug, Clone, Copy)]
pub struct Material {
    pub young_modulus: f64,
    pub poisson_ratio: f64,
    pub lambda: f64,
    pub mu: f64,
}

impl Material {
    pub fn new(young_modulus: f64, poisson_ratio: f64) -> Result<Self, FemError> {
        if !(young_modulus > 0.0) {
            return Err(FemError::BadYoungModulus(young_modulus));
        }
        if !(poisson_ratio > 0.0 && poisson_ratio < 0.5) {
            return Err(FemError::BadPoissonRatio(poisson_ratio));
        }
        let lambda =
            poisson_ratio * young_modulus / ((1.0 + poisson_ratio) * (1.0 - 2.0 * poisson_ratio));
        let mu = young_modulus / (2.0 * (1.0 + poisson_ratio));
        Ok(Material {
            young_modulus,
            poisson_ratio,
            lambda,
            mu,
        })
    }

    /// Typical alumina values; tests never assert literature numbers.
    pub fn alumina() -> Self {
        Material::new(3.7e11, 0.22).expect("valid constants")
    }
}

/// Symmetric 2x2 stress (or stress-like) tensor.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Stress2d {
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
}

impl Stress2d {
    pub fn zero() -> Self {
        Stress2d::default()
    }

    /// Normal component `n . sigma n` for the direction `(c, s)`.
    pub fn normal_component(&self, c: f64, s: f64) -> f64 {
        c * c * self.xx + 2.0 * c * s * self.xy + s * s * self.yy
    }

    /// Congruence transform `Q sigma Q^T` for a rotation by `angle`.
    pub fn rotate(&self, angle: f64) -> Stress2d {
        let (s, c) = angle.sin_cos();
        let xx = c * c * self.xx - 2.0 * s * c * self.xy + s * s * self.yy;
        let yy = s * s * self.xx + 2.0 * s * c * self.xy + c * c * self.yy;
        let xy = s * c * (self.xx - self.yy) + (c * c - s * s) * self.xy;
        Stress2d { xx, yy, xy }
    }

    /// Contraction of a gradient triple (d/dxx, d/dyy, d/dxy as a single
    /// off-diagonal variable) with a symmetric tensor increment.
    pub fn contract(&self, d: &Stress2d) -> f64 {
        self.xx * d.xx + self.yy * d.yy + self.xy * d.xy
    }
}

/// Loads: a constant body force density, a fixed traction density on the
/// neumann_fixed boundary, and a dimensionless multiplier on the traction.
#[derive(Debug, Clone, Copy)]
pub struct LoadCase {
    pub body_force: Vector2<f64>,
    pub traction: Vector2<f64>,
    pub load_scale: f64,
}

impl LoadCase {
    /// Tensile load normalized so that the total traction force at scale 1
    /// equals `total_newtons`, pulling in +x on the fixed Neumann boundary.
    pub fn tensile(mesh: &Mesh, total_newtons: f64) -> Result<Self, FemError> {
        let edges = mesh.traction_edges();
        if edges.is_empty() {
            return Err(FemError::NoTractionBoundary);
        }
        let total_len: f64 = edges
            .iter()
            .map(|&(a, b)| (mesh.nodes()[b] - mesh.nodes()[a]).norm())
            .sum();
        Ok(LoadCase {
            body_force: Vector2::zeros(),
            traction: Vector2::new(total_newtons / total_len, 0.0),
            load_scale: 1.0,
        })
    }

    pub fn with_body_force(mut self, f: Vector2<f64>) -> Self {
        self.body_force = f;
        self
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.load_scale = scale;
        self
    }
}

pub fn dof(node: usize, comp: usize) -> usize {
    2 * node + comp
}

/// Local 6x6 stiffness of a linear triangle (exact for constant strain).
pub fn element_stiffness(geom: &ElementGeometry, material: &Material) -> SMatrix<f64, 6, 6> {
    let mut k = SMatrix::<f64, 6, 6>::zeros();
    let area = geom.signed_area;
    let (lambda, mu) = (material.lambda, material.mu);
    for m in 0..3 {
        let a = geom.grads[m];
        for mp in 0..3 {
            let b = geom.grads[mp];
            let a_dot_b = a.dot(&b);
            for r in 0..2 {
                for s in 0..2 {
                    let delta = if r == s { 1.0 } else { 0.0 };
                    // grouping keeps the transposed entry bit-identical
                    k[(2 * m + r, 2 * mp + s)] =
                        area * (lambda * (a[r] * b[s]) + mu * (delta * a_dot_b + a[s] * b[r]));
                }
            }
        }
    }
    k
}

/// Full (unconstrained) global stiffness; mostly useful for verification.
pub fn assemble_full_stiffness(mesh: &Mesh, material: &Material) -> Result<DMatrix<f64>, FemError> {
    let n = 2 * mesh.n_nodes();
    let mut global = DMatrix::<f64>::zeros(n, n);
    for el in 0..mesh.n_triangles() {
        let geom = element_geometry(mesh, el)?;
        let k = element_stiffness(&geom, material);
        let tri = mesh.triangles()[el];
        for m in 0..3 {
            for r in 0..2 {
                let gi = dof(tri[m], r);
                for mp in 0..3 {
                    for s in 0..2 {
                        let gj = dof(tri[mp], s);
                        global[(gi, gj)] += k[(2 * m + r, 2 * mp + s)];
                    }
                }
            }
        }
    }
    Ok(global)
}

fn element_geometry(mesh: &Mesh, el: usize) -> Result<ElementGeometry, FemError> {
    ElementGeometry::for_element(mesh, el).map_err(|e| match e {
        MeshError::InvertedTriangle { element, area } => {
            FemError::SingularElement { element, area }
        }
        other => FemError::Mesh(other),
    })
}

/// Reduced stiffness after symmetric elimination of Dirichlet DOFs.
///
/// Structured meshes produce a small bandwidth, in which case the matrix is
/// held in band storage and factorized in O(n b^2); otherwise it falls back
/// to a dense factorization. Both live behind the same contract.
#[derive(Debug, Clone)]
pub struct Stiffness {
    storage: Storage,
    free: Vec<usize>,
    dof_index: Vec<Option<usize>>,
    n_dofs: usize,
}

#[derive(Debug, Clone)]
enum Storage {
    Dense(DMatrix<f64>),
    Banded(BandedSpd),
}

impl Stiffness {
    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn is_banded(&self) -> bool {
        matches!(self.storage, Storage::Banded(_))
    }

    /// Product with a reduced-space vector.
    pub fn apply(&self, reduced: &DVector<f64>) -> DVector<f64> {
        match &self.storage {
            Storage::Dense(m) => m * reduced,
            Storage::Banded(b) => b.apply(reduced),
        }
    }

    /// Expand the reduced operator to a dense matrix.
    pub fn dense(&self) -> DMatrix<f64> {
        match &self.storage {
            Storage::Dense(m) => m.clone(),
            Storage::Banded(b) => b.to_dense(),
        }
    }

    /// Restrict a full-length vector to the free DOFs.
    pub fn restrict(&self, full: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.free.len(), self.free.iter().map(|&g| full[g]))
    }

    /// Scatter a reduced vector back, zero on constrained DOFs.
    pub fn prolong(&self, reduced: &DVector<f64>) -> DVector<f64> {
        let mut full = DVector::zeros(self.n_dofs);
        for (k, &g) in self.free.iter().enumerate() {
            full[g] = reduced[k];
        }
        full
    }

    pub fn factorize(&self, mesh: &Mesh) -> Result<FactorizedStiffness, FemError> {
        let not_spd = || FemError::NotPositiveDefinite {
            diagnosis: diagnose_spd_failure(mesh),
        };
        let factor = match &self.storage {
            Storage::Dense(m) => Factor::Dense(Cholesky::new(m.clone()).ok_or_else(not_spd)?),
            Storage::Banded(b) => Factor::Banded(b.clone().cholesky().ok_or_else(not_spd)?),
        };
        Ok(FactorizedStiffness {
            factor,
            free: self.free.clone(),
            dof_index: self.dof_index.clone(),
            n_dofs: self.n_dofs,
        })
    }
}

fn diagnose_spd_failure(mesh: &Mesh) -> String {
    let inverted = (0..mesh.n_triangles()).find(|&el| mesh.signed_area(el) <= 0.0);
    if let Some(el) = inverted {
        return format!("mesh inversion at element {el}");
    }
    let n_dirichlet = mesh
        .tags()
        .iter()
        .filter(|t| **t == BoundaryTag::Dirichlet)
        .count();
    if n_dirichlet == 0 {
        return "no Dirichlet constraints: rigid modes present".into();
    }
    "unexpected indefiniteness".into()
}

/// Cholesky factorization of the reduced stiffness; reusable for the
/// adjoint solve since the matrix is symmetric.
#[derive(Debug, Clone)]
pub struct FactorizedStiffness {
    factor: Factor,
    free: Vec<usize>,
    dof_index: Vec<Option<usize>>,
    n_dofs: usize,
}

#[derive(Debug, Clone)]
enum Factor {
    Dense(Cholesky<f64, Dyn>),
    Banded(BandedCholesky),
}

impl FactorizedStiffness {
    /// Solve against a full-length right-hand side; the result is zero on
    /// constrained DOFs.
    pub fn solve_full(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let reduced_rhs =
            DVector::from_iterator(self.free.len(), self.free.iter().map(|&g| rhs[g]));
        let x = match &self.factor {
            Factor::Dense(chol) => chol.solve(&reduced_rhs),
            Factor::Banded(chol) => chol.solve(&reduced_rhs),
        };
        let mut full = DVector::zeros(self.n_dofs);
        for (k, &g) in self.free.iter().enumerate() {
            full[g] = x[k];
        }
        full
    }

    pub fn is_free(&self, global_dof: usize) -> bool {
        self.dof_index[global_dof].is_some()
    }
}

/// Assemble the Dirichlet-reduced stiffness matrix, picking band storage
/// when the free-DOF bandwidth is small.
pub fn assemble_stiffness(mesh: &Mesh, material: &Material) -> Result<Stiffness, FemError> {
    let n_dofs = 2 * mesh.n_nodes();
    let mut dof_index = vec![None; n_dofs];
    let mut free = Vec::new();
    for (node, tag) in mesh.tags().iter().enumerate() {
        if *tag != BoundaryTag::Dirichlet {
            for c in 0..2 {
                dof_index[dof(node, c)] = Some(free.len());
                free.push(dof(node, c));
            }
        }
    }

    let mut hbw = 0usize;
    for tri in mesh.triangles() {
        for m in 0..3 {
            for mp in 0..3 {
                for r in 0..2 {
                    for s in 0..2 {
                        if let (Some(gi), Some(gj)) =
                            (dof_index[dof(tri[m], r)], dof_index[dof(tri[mp], s)])
                        {
                            hbw = hbw.max(gi.abs_diff(gj));
                        }
                    }
                }
            }
        }
    }

    let banded = (hbw + 1) * 3 <= free.len().max(1);
    let mut storage = if banded {
        Storage::Banded(BandedSpd::zeros(free.len(), hbw))
    } else {
        Storage::Dense(DMatrix::zeros(free.len(), free.len()))
    };

    for el in 0..mesh.n_triangles() {
        let geom = element_geometry(mesh, el)?;
        let k = element_stiffness(&geom, material);
        let tri = mesh.triangles()[el];
        for m in 0..3 {
            for r in 0..2 {
                let Some(gi) = dof_index[dof(tri[m], r)] else {
                    continue;
                };
                for mp in 0..3 {
                    for s in 0..2 {
                        let Some(gj) = dof_index[dof(tri[mp], s)] else {
                            continue;
                        };
                        let value = k[(2 * m + r, 2 * mp + s)];
                        match &mut storage {
                            Storage::Dense(mat) => mat[(gi, gj)] += value,
                            // band stores each unordered pair once
                            Storage::Banded(band) if gi >= gj => band.add(gi, gj, value),
                            Storage::Banded(_) => {}
                        }
                    }
                }
            }
        }
    }
    Ok(Stiffness {
        storage,
        free,
        dof_index,
        n_dofs,
    })
}

/// Assemble the full-length load vector: volume term by the 7-point triangle
/// rule, traction term by 3-point Gauss with the edge Gram determinant.
pub fn assemble_load(mesh: &Mesh, load: &LoadCase) -> Result<DVector<f64>, FemError> {
    let mut f = DVector::zeros(2 * mesh.n_nodes());

    if load.body_force != Vector2::zeros() {
        let rule = TriQuadrature::seven_point();
        for el in 0..mesh.n_triangles() {
            let geom = element_geometry(mesh, el)?;
            let det = 2.0 * geom.signed_area;
            let tri = mesh.triangles()[el];
            for (&(xi, eta), &w) in rule.points.iter().zip(&rule.weights) {
                let shapes = TriQuadrature::shape_values(xi, eta);
                for m in 0..3 {
                    let scale = w * det * shapes[m];
                    f[dof(tri[m], 0)] += scale * load.body_force.x;
                    f[dof(tri[m], 1)] += scale * load.body_force.y;
                }
            }
        }
    }

    if load.traction != Vector2::zeros() {
        let edges = mesh.traction_edges();
        if edges.is_empty() {
            return Err(FemError::NoTractionBoundary);
        }
        let rule = EdgeQuadrature::gauss_3();
        let g = load.traction * load.load_scale;
        for (a, b) in edges {
            // square root of the edge Gram determinant = edge length
            let len = (mesh.nodes()[b] - mesh.nodes()[a]).norm();
            for (&s, &w) in rule.points.iter().zip(&rule.weights) {
                let shapes = EdgeQuadrature::shape_values(s);
                for (node, shape) in [(a, shapes[0]), (b, shapes[1])] {
                    f[dof(node, 0)] += w * len * shape * g.x;
                    f[dof(node, 1)] += w * len * shape * g.y;
                }
            }
        }
    }

    Ok(f)
}

/// Solved elastic state: displacements, the reduced operator and its
/// factorization, and the assembled load.
#[derive(Debug, Clone)]
pub struct ElasticState {
    /// Global displacement vector (2N), zero on Dirichlet nodes.
    pub u: DVector<f64>,
    /// Full-length assembled load vector.
    pub load_vector: DVector<f64>,
    pub stiffness: Stiffness,
    pub factor: FactorizedStiffness,
    /// `|B u - f| / |f|` on the free DOFs.
    pub residual_rel: f64,
}

/// Direct solve of `B(X) U = F(X)`.
pub fn solve_state(mesh: &Mesh, material: &Material, load: &LoadCase) -> Result<ElasticState, FemError> {
    let stiffness = assemble_stiffness(mesh, material)?;
    let load_vector = assemble_load(mesh, load)?;
    solve_with(mesh, stiffness, load_vector)
}

/// Solve with a pre-assembled system (used when the same operator serves
/// several right-hand sides).
pub fn solve_with(
    mesh: &Mesh,
    stiffness: Stiffness,
    load_vector: DVector<f64>,
) -> Result<ElasticState, FemError> {
    let factor = stiffness.factorize(mesh)?;
    let u = factor.solve_full(&load_vector);
    let fr = stiffness.restrict(&load_vector);
    let ur = stiffness.restrict(&u);
    let residual = (stiffness.apply(&ur) - &fr).norm();
    let f_norm = fr.norm();
    let residual_rel = if f_norm > 0.0 { residual / f_norm } else { residual };
    if f_norm > 0.0 && residual_rel > 1e-10 {
        return Err(FemError::ResidualTooLarge {
            residual: residual_rel,
        });
    }
    Ok(ElasticState {
        u,
        load_vector,
        stiffness,
        factor,
        residual_rel,
    })
}

/// Element displacement vectors from the global DOF vector.
pub fn element_displacements(mesh: &Mesh, u: &DVector<f64>, el: usize) -> [Vector2<f64>; 3] {
    let tri = mesh.triangles()[el];
    [
        Vector2::new(u[dof(tri[0], 0)], u[dof(tri[0], 1)]),
        Vector2::new(u[dof(tri[1], 0)], u[dof(tri[1], 1)]),
        Vector2::new(u[dof(tri[2], 0)], u[dof(tri[2], 1)]),
    ]
}

/// Constant stress of element `el`: `sigma = lambda tr(eps) I + 2 mu eps`.
pub fn element_stress(
    mesh: &Mesh,
    u: &DVector<f64>,
    material: &Material,
    el: usize,
) -> Result<Stress2d, FemError> {
    let geom = element_geometry(mesh, el)?;
    let disp = element_displacements(mesh, u, el);
    Ok(stress_from_gradient(&geom, &disp, material))
}

/// Displacement gradient `grad u = sum_m u_m (x) g_m` on an element.
pub fn displacement_gradient(geom: &ElementGeometry, disp: &[Vector2<f64>; 3]) -> [[f64; 2]; 2] {
    let mut du = [[0.0; 2]; 2];
    for m in 0..3 {
        for r in 0..2 {
            for s in 0..2 {
                du[r][s] += disp[m][r] * geom.grads[m][s];
            }
        }
    }
    du
}

/// Constitutive law applied to a displacement gradient.
pub fn stress_from_du(du: &[[f64; 2]; 2], material: &Material) -> Stress2d {
    let exx = du[0][0];
    let eyy = du[1][1];
    let exy = 0.5 * (du[0][1] + du[1][0]);
    let trace = exx + eyy;
    Stress2d {
        xx: material.lambda * trace + 2.0 * material.mu * exx,
        yy: material.lambda * trace + 2.0 * material.mu * eyy,
        xy: 2.0 * material.mu * exy,
    }
}

/// Stress from nodal displacements and element geometry.
pub fn stress_from_gradient(
    geom: &ElementGeometry,
    disp: &[Vector2<f64>; 3],
    material: &Material,
) -> Stress2d {
    stress_from_du(&displacement_gradient(geom, disp), material)
}
