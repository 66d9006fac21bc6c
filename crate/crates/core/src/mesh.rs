//! Structured triangular meshes of rectangular parts with tagged boundaries.
//!
//! Meshes are generated on an `nx` x `ny` grid of nodes (column-major: node
//! `i*ny + j` sits in column `i`, row `j`), each grid cell split into two
//! triangles along the lower-left to upper-right diagonal. The left column
//! carries Dirichlet boundary conditions, the right column carries the fixed
//! traction boundary, and the top/bottom rows in between are the free,
//! movable surface.
//!
//! Shape changes are expressed through [`DesignParams`]: the y-coordinates of
//! the movable surface nodes. [`morph`] redistributes interior nodes with
//! equal spacing between the surfaces and [`MorphJacobian`] provides the exact
//! linear map from design parameters to node coordinates.

use std::fmt;
use std::fs;
use std::path::Path;

use nalgebra::Vector2;
use thiserror::Error;

/// Classification of a mesh node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryTag {
    /// Clamped: zero displacement, shape fixed.
    Dirichlet,
    /// Traction-loaded boundary, shape fixed.
    NeumannFixed,
    /// Force-free, movable surface.
    Free,
    /// Interior node.
    Interior,
}

impl BoundaryTag {
    pub fn letter(self) -> char {
        match self {
            BoundaryTag::Dirichlet => 'D',
            BoundaryTag::NeumannFixed => 'N',
            BoundaryTag::Free => 'F',
            BoundaryTag::Interior => 'I',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        match c {
            'D' => Some(BoundaryTag::Dirichlet),
            'N' => Some(BoundaryTag::NeumannFixed),
            'F' => Some(BoundaryTag::Free),
            'I' => Some(BoundaryTag::Interior),
            _ => None,
        }
    }
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("triangle {element} has non-positive signed area {area:e}")]
    InvertedTriangle { element: usize, area: f64 },
    #[error("triangle {element} references node {node} out of range (N = {n_nodes})")]
    NodeIndexOutOfRange {
        element: usize,
        node: usize,
        n_nodes: usize,
    },
    #[error("non-finite coordinate at node {node}")]
    NonFiniteCoordinate { node: usize },
    #[error("grid dims must satisfy nx >= 3, ny >= 2, got {nx}x{ny}")]
    BadGridDims { nx: usize, ny: usize },
    #[error("length and height must be positive, got {length} x {height}")]
    BadExtent { length: f64, height: f64 },
    #[error("design vector has dimension {got}, mesh expects {expected}")]
    ThetaDimension { expected: usize, got: usize },
    #[error("column {column}: top surface y {top:e} does not exceed bottom y {bottom:e}")]
    DegenerateColumn { column: usize, top: f64, bottom: f64 },
    #[error("mesh is not a structured grid; operation needs structured dims")]
    NotStructured,
    #[error("tag list length {got} does not match node count {expected}")]
    TagCount { expected: usize, got: usize },
    #[error("mesh file parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("mesh i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// 2D triangle mesh with boundary tags.
///
/// Structured meshes additionally record the generating grid as
/// `(nx, ny)`; node `i*ny + j` is column `i`, row `j`.
#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Vec<Vector2<f64>>,
    triangles: Vec<[usize; 3]>,
    tags: Vec<BoundaryTag>,
    structured_dims: Option<(usize, usize)>,
}

impl Mesh {
    /// Assemble a mesh from raw parts and validate it.
    ///
    /// `structured_dims`, when given, promises the column-major node layout
    /// used by the morphing operations; the triangulation may be arbitrary.
    pub fn from_parts(
        nodes: Vec<Vector2<f64>>,
        triangles: Vec<[usize; 3]>,
        tags: Vec<BoundaryTag>,
        structured_dims: Option<(usize, usize)>,
    ) -> Result<Self, MeshError> {
        if tags.len() != nodes.len() {
            return Err(MeshError::TagCount {
                expected: nodes.len(),
                got: tags.len(),
            });
        }
        let mesh = Mesh {
            nodes,
            triangles,
            tags,
            structured_dims,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn nodes(&self) -> &[Vector2<f64>] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn tags(&self) -> &[BoundaryTag] {
        &self.tags
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn structured_dims(&self) -> Option<(usize, usize)> {
        self.structured_dims
    }

    fn grid_dims(&self) -> Result<(usize, usize), MeshError> {
        self.structured_dims.ok_or(MeshError::NotStructured)
    }

    /// Node index of column `i`, row `j` in a structured mesh.
    pub fn node_id(&self, i: usize, j: usize) -> usize {
        let (_, ny) = self.structured_dims.expect("structured mesh");
        i * ny + j
    }

    /// Positive-area and index-range validation.
    pub fn validate(&self) -> Result<(), MeshError> {
        for (id, p) in self.nodes.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite()) {
                return Err(MeshError::NonFiniteCoordinate { node: id });
            }
        }
        for (el, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                if v >= self.nodes.len() {
                    return Err(MeshError::NodeIndexOutOfRange {
                        element: el,
                        node: v,
                        n_nodes: self.nodes.len(),
                    });
                }
            }
            let area = self.signed_area(el);
            if !(area > 0.0) {
                return Err(MeshError::InvertedTriangle { element: el, area });
            }
        }
        Ok(())
    }

    /// Signed area of triangle `el` (positive for counterclockwise).
    pub fn signed_area(&self, el: usize) -> f64 {
        let [a, b, c] = self.triangles[el];
        let (p, q, r) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        0.5 * ((q.x - p.x) * (r.y - p.y) - (r.x - p.x) * (q.y - p.y))
    }

    /// Vertex coordinates of triangle `el`.
    pub fn triangle_coords(&self, el: usize) -> [Vector2<f64>; 3] {
        let [a, b, c] = self.triangles[el];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    /// Centroid of triangle `el`.
    pub fn centroid(&self, el: usize) -> Vector2<f64> {
        let [a, b, c] = self.triangles[el];
        (self.nodes[a] + self.nodes[b] + self.nodes[c]) / 3.0
    }

    /// Boundary edges as directed node pairs in triangle orientation,
    /// sorted by (first, second) index for determinism.
    pub fn boundary_edges(&self) -> Vec<(usize, usize)> {
        use std::collections::HashMap;
        let mut count: HashMap<(usize, usize), (usize, (usize, usize))> = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let a = tri[k];
                let b = tri[(k + 1) % 3];
                let key = (a.min(b), a.max(b));
                let entry = count.entry(key).or_insert((0, (a, b)));
                entry.0 += 1;
            }
        }
        let mut edges: Vec<(usize, usize)> = count
            .into_values()
            .filter_map(|(n, dir)| (n == 1).then_some(dir))
            .collect();
        edges.sort_unstable();
        edges
    }

    /// Boundary edges whose endpoints are both tagged [`BoundaryTag::NeumannFixed`].
    pub fn traction_edges(&self) -> Vec<(usize, usize)> {
        self.boundary_edges()
            .into_iter()
            .filter(|&(a, b)| {
                self.tags[a] == BoundaryTag::NeumannFixed
                    && self.tags[b] == BoundaryTag::NeumannFixed
            })
            .collect()
    }

    /// Columns whose surface y-coordinates are design parameters
    /// (all columns except the two boundary-condition columns).
    pub fn movable_columns(&self) -> Result<std::ops::Range<usize>, MeshError> {
        let (nx, _) = self.grid_dims()?;
        Ok(1..nx - 1)
    }

    /// Number of design parameters: two surface nodes per movable column.
    pub fn theta_len(&self) -> Result<usize, MeshError> {
        let (nx, _) = self.grid_dims()?;
        Ok(2 * (nx - 2))
    }

    /// Replace node coordinates wholesale; used by finite-difference probes.
    pub fn with_nodes(&self, nodes: Vec<Vector2<f64>>) -> Mesh {
        assert_eq!(nodes.len(), self.nodes.len());
        Mesh {
            nodes,
            triangles: self.triangles.clone(),
            tags: self.tags.clone(),
            structured_dims: self.structured_dims,
        }
    }

    /// Serialize in the `mesh2d v1` text format (17 significant digits).
    pub fn write_text<W: std::io::Write>(&self, mut w: W) -> Result<(), MeshError> {
        let (nx, ny) = self.structured_dims.unwrap_or((0, 0));
        writeln!(
            w,
            "mesh2d v1 {} {} {} {}",
            self.n_nodes(),
            self.n_triangles(),
            nx,
            ny
        )?;
        for (p, tag) in self.nodes.iter().zip(&self.tags) {
            writeln!(w, "{} {} {}", fmt_g17(p.x), fmt_g17(p.y), tag.letter())?;
        }
        for tri in &self.triangles {
            writeln!(w, "{} {} {}", tri[0], tri[1], tri[2])?;
        }
        Ok(())
    }

    pub fn write_file(&self, path: &Path) -> Result<(), MeshError> {
        let mut buf = Vec::new();
        self.write_text(&mut buf)?;
        fs::write(path, buf)?;
        Ok(())
    }

    /// Parse the `mesh2d v1` text format.
    pub fn read_text(text: &str) -> Result<Mesh, MeshError> {
        let mut lines = text.lines().enumerate();
        let (lno, header) = lines.next().ok_or_else(|| MeshError::Parse {
            line: 1,
            reason: "empty file".into(),
        })?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 6 || parts[0] != "mesh2d" || parts[1] != "v1" {
            return Err(MeshError::Parse {
                line: lno + 1,
                reason: "expected header `mesh2d v1 <N> <T> <nx> <ny>`".into(),
            });
        }
        let parse_usize = |s: &str, line: usize| -> Result<usize, MeshError> {
            s.parse().map_err(|_| MeshError::Parse {
                line,
                reason: format!("bad integer `{s}`"),
            })
        };
        let n = parse_usize(parts[2], lno + 1)?;
        let t = parse_usize(parts[3], lno + 1)?;
        let nx = parse_usize(parts[4], lno + 1)?;
        let ny = parse_usize(parts[5], lno + 1)?;

        let mut nodes = Vec::with_capacity(n);
        let mut tags = Vec::with_capacity(n);
        for _ in 0..n {
            let (lno, line) = lines.next().ok_or_else(|| MeshError::Parse {
                line: 0,
                reason: "unexpected end of file in node block".into(),
            })?;
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 3 {
                return Err(MeshError::Parse {
                    line: lno + 1,
                    reason: "expected `x y tag`".into(),
                });
            }
            let x: f64 = cols[0].parse().map_err(|_| MeshError::Parse {
                line: lno + 1,
                reason: format!("bad float `{}`", cols[0]),
            })?;
            let y: f64 = cols[1].parse().map_err(|_| MeshError::Parse {
                line: lno + 1,
                reason: format!("bad float `{}`", cols[1]),
            })?;
            let tag = cols[2]
                .chars()
                .next()
                .and_then(BoundaryTag::from_letter)
                .ok_or_else(|| MeshError::Parse {
                    line: lno + 1,
                    reason: format!("unknown tag `{}`", cols[2]),
                })?;
            nodes.push(Vector2::new(x, y));
            tags.push(tag);
        }
        let mut triangles = Vec::with_capacity(t);
        for _ in 0..t {
            let (lno, line) = lines.next().ok_or_else(|| MeshError::Parse {
                line: 0,
                reason: "unexpected end of file in triangle block".into(),
            })?;
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 3 {
                return Err(MeshError::Parse {
                    line: lno + 1,
                    reason: "expected `i j k`".into(),
                });
            }
            let mut tri = [0usize; 3];
            for (slot, s) in tri.iter_mut().zip(&cols) {
                *slot = parse_usize(s, lno + 1)?;
            }
            triangles.push(tri);
        }
        let dims = (nx >= 3 && ny >= 2 && nx * ny == n).then_some((nx, ny));
        Mesh::from_parts(nodes, triangles, tags, dims)
    }

    pub fn read_file(path: &Path) -> Result<Mesh, MeshError> {
        let text = fs::read_to_string(path)?;
        Mesh::read_text(&text)
    }
}

/// Format with 17 significant digits; round-trips any f64 exactly.
pub fn fmt_g17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Vertical offset profile applied per column when generating a rod.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    /// Straight rod.
    Flat,
    /// Smooth cosine bump `a*(1 - cos(2*pi*(x - x0)/w))/2` supported on
    /// `[x0, x0 + w]` with `x0 = center - w/2`.
    CosineBump {
        amplitude: f64,
        center: f64,
        width: f64,
    },
}

impl Profile {
    pub fn offset(&self, x: f64) -> f64 {
        match *self {
            Profile::Flat => 0.0,
            Profile::CosineBump {
                amplitude,
                center,
                width,
            } => {
                let x0 = center - 0.5 * width;
                if x <= x0 || x >= x0 + width {
                    0.0
                } else {
                    0.5 * amplitude * (1.0 - (2.0 * std::f64::consts::PI * (x - x0) / width).cos())
                }
            }
        }
    }

    /// Default bend of the reference rod: amplitude 0.05 m over the middle
    /// third of a rod of length `length`.
    pub fn default_bump(length: f64) -> Profile {
        Profile::CosineBump {
            amplitude: 0.05,
            center: 0.5 * length,
            width: length / 3.0,
        }
    }
}

fn check_grid(length: f64, height: f64, nx: usize, ny: usize) -> Result<(), MeshError> {
    // nx = 2 is allowed: the mesh is valid, it merely has an empty design space
    if nx < 2 || ny < 2 {
        return Err(MeshError::BadGridDims { nx, ny });
    }
    if !(length > 0.0 && height > 0.0) {
        return Err(MeshError::BadExtent { length, height });
    }
    Ok(())
}

fn structured_mesh<F>(
    length: f64,
    height: f64,
    nx: usize,
    ny: usize,
    column_shift: F,
) -> Result<Mesh, MeshError>
where
    F: Fn(f64) -> f64,
{
    check_grid(length, height, nx, ny)?;
    let dx = length / (nx - 1) as f64;
    let dy = height / (ny - 1) as f64;
    let mut nodes = Vec::with_capacity(nx * ny);
    let mut tags = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        let x = i as f64 * dx;
        let shift = column_shift(x);
        for j in 0..ny {
            nodes.push(Vector2::new(x, j as f64 * dy + shift));
            let tag = if i == 0 {
                BoundaryTag::Dirichlet
            } else if i == nx - 1 {
                BoundaryTag::NeumannFixed
            } else if j == 0 || j == ny - 1 {
                BoundaryTag::Free
            } else {
                BoundaryTag::Interior
            };
            tags.push(tag);
        }
    }
    let mut triangles = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
    for i in 0..nx - 1 {
        for j in 0..ny - 1 {
            let a = i * ny + j;
            let b = (i + 1) * ny + j;
            let c = (i + 1) * ny + j + 1;
            let d = i * ny + j + 1;
            // split along the lower-left to upper-right diagonal
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    Mesh::from_parts(nodes, triangles, tags, Some((nx, ny)))
}

/// Structured rod mesh over `[0, length] x [0, height]` with every column
/// shifted vertically by the profile offset at its x-coordinate.
pub fn generate_rod(
    length: f64,
    height: f64,
    nx: usize,
    ny: usize,
    profile: &Profile,
) -> Result<Mesh, MeshError> {
    structured_mesh(length, height, nx, ny, |x| profile.offset(x))
}

/// Rod variant whose triangulation is itself y-mirror-symmetric: cell rows
/// below the midline split along the lower-left diagonal, rows above along
/// the upper-left diagonal. Needs an even number of cell rows (odd `ny`).
/// Useful where exact discrete mirror symmetry matters; the node grid is
/// identical to [`generate_rod`], so morphing works unchanged.
pub fn generate_rod_mirrored(
    length: f64,
    height: f64,
    nx: usize,
    ny: usize,
    profile: &Profile,
) -> Result<Mesh, MeshError> {
    check_grid(length, height, nx, ny)?;
    if (ny - 1) % 2 != 0 {
        return Err(MeshError::BadGridDims { nx, ny });
    }
    let straight = generate_rod(length, height, nx, ny, profile)?;
    let mut triangles = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
    for i in 0..nx - 1 {
        for j in 0..ny - 1 {
            let a = i * ny + j;
            let b = (i + 1) * ny + j;
            let c = (i + 1) * ny + j + 1;
            let d = i * ny + j + 1;
            if j < (ny - 1) / 2 {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            } else {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            }
        }
    }
    Mesh::from_parts(
        straight.nodes.clone(),
        triangles,
        straight.tags.clone(),
        Some((nx, ny)),
    )
}

/// S-shaped joint: the column midline ramps smoothly from level 0 to
/// `offset` via `offset*(1 - cos(pi*x/length))/2`.
pub fn generate_joint(
    length: f64,
    height: f64,
    nx: usize,
    ny: usize,
    offset: f64,
) -> Result<Mesh, MeshError> {
    structured_mesh(length, height, nx, ny, |x| {
        0.5 * offset * (1.0 - (std::f64::consts::PI * x / length).cos())
    })
}

/// Design parameters: y-coordinates of the movable surface nodes.
///
/// Layout: for movable column `i` (grid columns `1..nx-1`), entry `2*(i-1)`
/// is the bottom surface y and `2*(i-1)+1` the top surface y.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignParams {
    pub theta: Vec<f64>,
}

impl DesignParams {
    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn bottom(&self, movable_col: usize) -> f64 {
        self.theta[2 * movable_col]
    }

    pub fn top(&self, movable_col: usize) -> f64 {
        self.theta[2 * movable_col + 1]
    }
}

/// Read the current design parameters off a structured mesh.
pub fn extract_theta(mesh: &Mesh) -> Result<DesignParams, MeshError> {
    let (nx, ny) = mesh.grid_dims()?;
    let mut theta = Vec::with_capacity(2 * (nx - 2));
    for i in 1..nx - 1 {
        theta.push(mesh.nodes[i * ny].y);
        theta.push(mesh.nodes[i * ny + ny - 1].y);
    }
    Ok(DesignParams { theta })
}

/// Rebuild a structured mesh from design parameters: surface nodes take the
/// given y-values and interior nodes are spaced equally in between;
/// x-coordinates and the two boundary-condition columns stay untouched.
pub fn morph(mesh: &Mesh, params: &DesignParams) -> Result<Mesh, MeshError> {
    let (nx, ny) = mesh.grid_dims()?;
    let expected = 2 * (nx - 2);
    if params.theta.len() != expected {
        return Err(MeshError::ThetaDimension {
            expected,
            got: params.theta.len(),
        });
    }
    let mut nodes = mesh.nodes.clone();
    for (k, i) in (1..nx - 1).enumerate() {
        let bottom = params.bottom(k);
        let top = params.top(k);
        if !(top > bottom) {
            return Err(MeshError::DegenerateColumn {
                column: i,
                top,
                bottom,
            });
        }
        for j in 0..ny {
            let frac = j as f64 / (ny - 1) as f64;
            nodes[i * ny + j].y = bottom + frac * (top - bottom);
        }
    }
    let out = mesh.with_nodes(nodes);
    out.validate()?;
    Ok(out)
}

/// Exact linear map from design parameters to node coordinates.
///
/// Row `j` of column `i` depends on that column's (bottom, top) design
/// entries with coefficients `(1 - j/(ny-1), j/(ny-1))`; all x-coordinate
/// rows are zero.
#[derive(Debug, Clone, Copy)]
pub struct MorphJacobian {
    nx: usize,
    ny: usize,
}

/// Build the morph Jacobian `dX/dtheta` of a structured mesh.
pub fn morph_jacobian(mesh: &Mesh) -> Result<MorphJacobian, MeshError> {
    let (nx, ny) = mesh.grid_dims()?;
    Ok(MorphJacobian { nx, ny })
}

impl MorphJacobian {
    pub fn theta_len(&self) -> usize {
        2 * (self.nx - 2)
    }

    fn row_fraction(&self, j: usize) -> f64 {
        j as f64 / (self.ny - 1) as f64
    }

    /// Apply the map: a design-space velocity becomes per-node displacement.
    pub fn apply(&self, dtheta: &[f64]) -> Vec<Vector2<f64>> {
        assert_eq!(dtheta.len(), self.theta_len());
        let mut out = vec![Vector2::zeros(); self.nx * self.ny];
        for (k, i) in (1..self.nx - 1).enumerate() {
            let db = dtheta[2 * k];
            let dt = dtheta[2 * k + 1];
            for j in 0..self.ny {
                let r = self.row_fraction(j);
                out[i * self.ny + j].y = (1.0 - r) * db + r * dt;
            }
        }
        out
    }

    /// Pull a per-node gradient back to design space: `dJ/dtheta = dJ/dX * dX/dtheta`.
    pub fn pullback(&self, per_node: &[Vector2<f64>]) -> Vec<f64> {
        assert_eq!(per_node.len(), self.nx * self.ny);
        let mut out = vec![0.0; self.theta_len()];
        for (k, i) in (1..self.nx - 1).enumerate() {
            let mut bottom = 0.0;
            let mut top = 0.0;
            for j in 0..self.ny {
                let r = self.row_fraction(j);
                let gy = per_node[i * self.ny + j].y;
                bottom += (1.0 - r) * gy;
                top += r * gy;
            }
            out[2 * k] = bottom;
            out[2 * k + 1] = top;
        }
        out
    }
}

/// Sum of signed triangle areas.
pub fn volume(mesh: &Mesh) -> f64 {
    (0..mesh.n_triangles()).map(|el| mesh.signed_area(el)).sum()
}

/// Exact derivative of [`volume`] with respect to every node coordinate.
pub fn volume_gradient(mesh: &Mesh) -> Vec<Vector2<f64>> {
    let mut grad = vec![Vector2::zeros(); mesh.n_nodes()];
    for tri in mesh.triangles() {
        let [a, b, c] = *tri;
        let (p, q, r) = (mesh.nodes[a], mesh.nodes[b], mesh.nodes[c]);
        grad[a] += 0.5 * Vector2::new(q.y - r.y, r.x - q.x);
        grad[b] += 0.5 * Vector2::new(r.y - p.y, p.x - r.x);
        grad[c] += 0.5 * Vector2::new(p.y - q.y, q.x - p.x);
    }
    grad
}

/// Per-element geometry of a linear triangle: physical shape-function
/// gradients and their closed-form sensitivities to vertex motion.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub verts: [Vector2<f64>; 3],
    pub signed_area: f64,
    /// Physical gradients of the three hat functions (constant on the element).
    pub grads: [Vector2<f64>; 3],
}

impl ElementGeometry {
    pub fn new(verts: [Vector2<f64>; 3]) -> Result<Self, MeshError> {
        let [p, q, r] = verts;
        let det = (q.x - p.x) * (r.y - p.y) - (r.x - p.x) * (q.y - p.y);
        if det == 0.0 || !det.is_finite() {
            return Err(MeshError::InvertedTriangle {
                element: usize::MAX,
                area: 0.5 * det,
            });
        }
        let grads = [
            Vector2::new(q.y - r.y, r.x - q.x) / det,
            Vector2::new(r.y - p.y, p.x - r.x) / det,
            Vector2::new(p.y - q.y, q.x - p.x) / det,
        ];
        Ok(ElementGeometry {
            verts,
            signed_area: 0.5 * det,
            grads,
        })
    }

    pub fn for_element(mesh: &Mesh, el: usize) -> Result<Self, MeshError> {
        ElementGeometry::new(mesh.triangle_coords(el)).map_err(|e| match e {
            MeshError::InvertedTriangle { area, .. } => {
                MeshError::InvertedTriangle { element: el, area }
            }
            other => other,
        })
    }

    /// Exact gradients of the signed area with respect to each vertex.
    pub fn area_grad(&self) -> [Vector2<f64>; 3] {
        let [p, q, r] = self.verts;
        [
            0.5 * Vector2::new(q.y - r.y, r.x - q.x),
            0.5 * Vector2::new(r.y - p.y, p.x - r.x),
            0.5 * Vector2::new(p.y - q.y, q.x - p.x),
        ]
    }

    /// Derivative of every hat gradient with respect to coordinate `c` of
    /// vertex `p`: `d(g_m)/d(X_p)_c = -(g_m)_c * g_p`.
    pub fn grad_sensitivity(&self, p: usize, c: usize) -> [Vector2<f64>; 3] {
        let gp = self.grads[p];
        [
            -self.grads[0][c] * gp,
            -self.grads[1][c] * gp,
            -self.grads[2][c] * gp,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn brute_force_area(mesh: &Mesh) -> f64 {
        let mut total = 0.0;
        for el in 0..mesh.n_triangles() {
            let [p, q, r] = mesh.triangle_coords(el);
            total += 0.5 * ((q.x - p.x) * (r.y - p.y) - (r.x - p.x) * (q.y - p.y));
        }
        total
    }

    #[test]
    fn rod_counts_match_grid_arithmetic() {
        let mesh = generate_rod(0.6, 0.1, 61, 9, &Profile::Flat).unwrap();
        assert_eq!(mesh.n_nodes(), 549);
        assert_eq!(mesh.n_triangles(), 960);
        assert_eq!(mesh.structured_dims(), Some((61, 9)));
        for el in 0..mesh.n_triangles() {
            assert!(mesh.signed_area(el) > 0.0);
        }
    }

    #[test]
    fn unit_square_splits_into_two_half_triangles() {
        let mesh = generate_rod(1.0, 1.0, 2, 2, &Profile::Flat).unwrap();
        assert_eq!(mesh.n_nodes(), 4);
        assert_eq!(mesh.n_triangles(), 2);
        assert_relative_eq!(mesh.signed_area(0), 0.5);
        assert_relative_eq!(mesh.signed_area(1), 0.5);
        assert_eq!(mesh.theta_len().unwrap(), 0);
        assert!(matches!(
            generate_rod(1.0, 1.0, 1, 2, &Profile::Flat),
            Err(MeshError::BadGridDims { .. })
        ));
        assert!(matches!(
            generate_rod(-1.0, 1.0, 3, 2, &Profile::Flat),
            Err(MeshError::BadExtent { .. })
        ));
    }

    #[test]
    fn bump_profile_preserves_total_area() {
        let profile = Profile::CosineBump {
            amplitude: 0.05,
            center: 0.3,
            width: 0.2,
        };
        let mesh = generate_rod(0.6, 0.1, 61, 9, &profile).unwrap();
        for el in 0..mesh.n_triangles() {
            assert!(mesh.signed_area(el) > 0.0);
        }
        assert_relative_eq!(brute_force_area(&mesh), 0.06, epsilon = 1e-14);
        assert_relative_eq!(volume(&mesh), 0.06, epsilon = 1e-14);
    }

    #[test]
    fn joint_with_zero_offset_is_the_straight_rod() {
        let rod = generate_rod(0.6, 0.1, 61, 17, &Profile::Flat).unwrap();
        let joint = generate_joint(0.6, 0.1, 61, 17, 0.0).unwrap();
        for (a, b) in rod.nodes().iter().zip(joint.nodes()) {
            assert_eq!(a, b);
        }
        assert_eq!(rod.triangles(), joint.triangles());
    }

    #[test]
    fn joint_counts_and_area() {
        let joint = generate_joint(0.6, 0.1, 61, 17, 0.2).unwrap();
        assert_eq!(joint.n_nodes(), 1037);
        assert_eq!(joint.n_triangles(), 1920);
        for el in 0..joint.n_triangles() {
            assert!(joint.signed_area(el) > 0.0);
        }
        assert_relative_eq!(brute_force_area(&joint), 0.06, epsilon = 1e-14);
    }

    #[test]
    fn rod_nodes_symmetric_under_y_reflection() {
        let mesh = generate_rod(0.6, 0.1, 13, 5, &Profile::Flat).unwrap();
        let (_, ny) = mesh.structured_dims().unwrap();
        for i in 0..13 {
            for j in 0..ny {
                let a = mesh.nodes()[mesh.node_id(i, j)];
                let b = mesh.nodes()[mesh.node_id(i, ny - 1 - j)];
                assert_relative_eq!(a.y, 0.1 - b.y, epsilon = 1e-15);
                assert_relative_eq!(a.x, b.x);
            }
        }
    }

    #[test]
    fn joint_midline_is_antisymmetric() {
        let offset = 0.2;
        let mesh = generate_joint(0.6, 0.1, 13, 5, offset).unwrap();
        let (nx, ny) = mesh.structured_dims().unwrap();
        // node (i,j) maps to (nx-1-i, ny-1-j) under the point reflection
        // (x, y) -> (L - x, offset + height - y)
        for i in 0..nx {
            for j in 0..ny {
                let a = mesh.nodes()[mesh.node_id(i, j)];
                let b = mesh.nodes()[mesh.node_id(nx - 1 - i, ny - 1 - j)];
                assert_relative_eq!(a.x, 0.6 - b.x, epsilon = 1e-15);
                assert_relative_eq!(a.y, offset + 0.1 - b.y, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn non_finite_profiles_are_rejected() {
        let profile = Profile::CosineBump {
            amplitude: f64::NAN,
            center: 0.3,
            width: 0.2,
        };
        assert!(matches!(
            generate_rod(0.6, 0.1, 9, 4, &profile),
            Err(MeshError::NonFiniteCoordinate { .. })
        ));
    }

    #[test]
    fn morph_identity_on_current_theta() {
        let profile = Profile::default_bump(0.6);
        let mesh = generate_rod(0.6, 0.1, 21, 5, &profile).unwrap();
        let theta = extract_theta(&mesh).unwrap();
        assert_eq!(theta.len(), 2 * 19);
        let morphed = morph(&mesh, &theta).unwrap();
        for (a, b) in mesh.nodes().iter().zip(morphed.nodes()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn morph_translates_single_column_rigidly() {
        let mesh = generate_rod(0.6, 0.1, 9, 5, &Profile::Flat).unwrap();
        let mut theta = extract_theta(&mesh).unwrap();
        theta.theta[2 * 3] += 0.01; // bottom of movable column 3 (grid col 4)
        theta.theta[2 * 3 + 1] += 0.01;
        let morphed = morph(&mesh, &theta).unwrap();
        let (_, ny) = mesh.structured_dims().unwrap();
        for i in 0..9 {
            for j in 0..ny {
                let before = mesh.nodes()[mesh.node_id(i, j)];
                let after = morphed.nodes()[mesh.node_id(i, j)];
                let expected_shift = if i == 4 { 0.01 } else { 0.0 };
                assert_relative_eq!(after.y - before.y, expected_shift, epsilon = 1e-15);
                assert_eq!(after.x, before.x);
            }
        }
    }

    #[test]
    fn morph_spans_the_structured_family() {
        let bent = generate_rod(0.6, 0.1, 21, 5, &Profile::default_bump(0.6)).unwrap();
        let straight = generate_rod(0.6, 0.1, 21, 5, &Profile::Flat).unwrap();
        let theta = extract_theta(&straight).unwrap();
        let unbent = morph(&bent, &theta).unwrap();
        for (a, b) in unbent.nodes().iter().zip(straight.nodes()) {
            assert_relative_eq!(a.y, b.y, epsilon = 1e-15);
            assert_eq!(a.x, b.x);
        }
    }

    #[test]
    fn morph_rejects_bad_theta() {
        let mesh = generate_rod(0.6, 0.1, 9, 5, &Profile::Flat).unwrap();
        let short = DesignParams { theta: vec![0.0; 3] };
        assert!(matches!(
            morph(&mesh, &short),
            Err(MeshError::ThetaDimension { expected: 14, got: 3 })
        ));
        let mut degenerate = extract_theta(&mesh).unwrap();
        degenerate.theta[1] = degenerate.theta[0] - 0.01; // top below bottom
        assert!(matches!(
            morph(&mesh, &degenerate),
            Err(MeshError::DegenerateColumn { column: 1, .. })
        ));
    }

    #[test]
    fn morph_jacobian_midpoint_coefficients() {
        let mesh = generate_rod(1.0, 1.0, 5, 3, &Profile::Flat).unwrap();
        let jac = morph_jacobian(&mesh).unwrap();
        let mut v = vec![0.0; jac.theta_len()];
        v[0] = 1.0; // bottom of first movable column
        let disp = jac.apply(&v);
        let ny = 3;
        assert_relative_eq!(disp[ny].y, 1.0); // j = 0
        assert_relative_eq!(disp[ny + 1].y, 0.5); // middle row
        assert_relative_eq!(disp[ny + 2].y, 0.0); // top row
        for d in &disp {
            assert_eq!(d.x, 0.0);
        }
    }

    #[test]
    fn morph_jacobian_is_identity_embedding_for_two_rows() {
        let mesh = generate_rod(1.0, 0.5, 4, 2, &Profile::Flat).unwrap();
        let jac = morph_jacobian(&mesh).unwrap();
        for k in 0..jac.theta_len() {
            let mut v = vec![0.0; jac.theta_len()];
            v[k] = 1.0;
            let disp = jac.apply(&v);
            let hits: Vec<usize> = disp
                .iter()
                .enumerate()
                .filter_map(|(id, d)| (d.y != 0.0).then_some(id))
                .collect();
            assert_eq!(hits.len(), 1);
            assert_eq!(disp[hits[0]].y, 1.0);
        }
    }

    #[test]
    fn morph_jacobian_matches_finite_differences() {
        let mesh = generate_rod(0.6, 0.1, 9, 4, &Profile::default_bump(0.6)).unwrap();
        let jac = morph_jacobian(&mesh).unwrap();
        let theta0 = extract_theta(&mesh).unwrap();
        let base = morph(&mesh, &theta0).unwrap();
        let eps = 1e-8;
        for k in 0..theta0.len() {
            let mut theta = theta0.clone();
            theta.theta[k] += eps;
            let moved = morph(&mesh, &theta).unwrap();
            let mut v = vec![0.0; theta0.len()];
            v[k] = 1.0;
            let expected = jac.apply(&v);
            for (id, (a, b)) in base.nodes().iter().zip(moved.nodes()).enumerate() {
                let fd = (b.y - a.y) / eps;
                assert!(
                    (fd - expected[id].y).abs() <= 1e-6 * (1.0 + expected[id].y.abs()),
                    "node {id} component y: fd {fd} vs analytic {}",
                    expected[id].y
                );
                assert_eq!(b.x, a.x);
            }
        }
    }

    #[test]
    fn volume_of_rectangles() {
        let rod = generate_rod(0.6, 0.1, 61, 9, &Profile::Flat).unwrap();
        assert_relative_eq!(volume(&rod), 0.06, epsilon = 1e-15);
        let square = structured_mesh(1.0, 1.0, 3, 3, |_| 0.0).unwrap();
        assert_relative_eq!(volume(&square), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn volume_gradient_matches_central_differences() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let base = generate_rod(0.6, 0.1, 7, 4, &Profile::Flat).unwrap();
        // jitter nodes to break structure while keeping orientation
        let nodes: Vec<Vector2<f64>> = base
            .nodes()
            .iter()
            .map(|p| {
                let jx: f64 = rng.gen_range(-1.0..1.0);
                let jy: f64 = rng.gen_range(-1.0..1.0);
                p + Vector2::new(jx, jy) * 0.004
            })
            .collect();
        let mesh = base.with_nodes(nodes);
        mesh.validate().unwrap();
        let grad = volume_gradient(&mesh);
        let eps = 1e-7;
        for id in 0..mesh.n_nodes() {
            for c in 0..2 {
                let mut plus = mesh.nodes().to_vec();
                let mut minus = mesh.nodes().to_vec();
                plus[id][c] += eps;
                minus[id][c] -= eps;
                let fd = (volume(&mesh.with_nodes(plus)) - volume(&mesh.with_nodes(minus)))
                    / (2.0 * eps);
                assert!(
                    (fd - grad[id][c]).abs() <= 1e-6 * (1.0 + grad[id][c].abs()),
                    "node {id} comp {c}: fd {fd} vs analytic {}",
                    grad[id][c]
                );
            }
        }
    }

    #[test]
    fn volume_gradient_composed_with_morph_jacobian() {
        let mesh = generate_rod(0.6, 0.1, 9, 5, &Profile::default_bump(0.6)).unwrap();
        let jac = morph_jacobian(&mesh).unwrap();
        let grad_theta = jac.pullback(&volume_gradient(&mesh));
        let theta0 = extract_theta(&mesh).unwrap();
        let eps = 1e-7;
        for k in 0..theta0.len() {
            let mut theta = theta0.clone();
            theta.theta[k] += eps;
            let fd = (volume(&morph(&mesh, &theta).unwrap()) - volume(&mesh)) / eps;
            assert!(
                (fd - grad_theta[k]).abs() <= 1e-6 * (1.0 + grad_theta[k].abs()),
                "theta {k}: fd {fd} vs analytic {}",
                grad_theta[k]
            );
        }
    }

    #[test]
    fn element_geometry_gradients_sum_to_zero() {
        let geom = ElementGeometry::new([
            Vector2::new(0.1, 0.2),
            Vector2::new(0.9, 0.3),
            Vector2::new(0.4, 1.1),
        ])
        .unwrap();
        let sum = geom.grads[0] + geom.grads[1] + geom.grads[2];
        assert_relative_eq!(sum.norm(), 0.0, epsilon = 1e-14);
        // hat m is 1 at vertex m, 0 at the others; gradients reproduce that
        for m in 0..3 {
            for p in 0..3 {
                let lin = geom.grads[m].dot(&(geom.verts[p] - geom.verts[m]));
                let expected = if m == p { 0.0 } else { -1.0 };
                assert_relative_eq!(lin, expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn grad_sensitivity_matches_finite_differences() {
        let verts = [
            Vector2::new(0.1, 0.2),
            Vector2::new(0.9, 0.3),
            Vector2::new(0.4, 1.1),
        ];
        let geom = ElementGeometry::new(verts).unwrap();
        let eps = 1e-7;
        for p in 0..3 {
            for c in 0..2 {
                let sens = geom.grad_sensitivity(p, c);
                let mut moved = verts;
                moved[p][c] += eps;
                let geom2 = ElementGeometry::new(moved).unwrap();
                for m in 0..3 {
                    let fd = (geom2.grads[m] - geom.grads[m]) / eps;
                    assert!(
                        (fd - sens[m]).norm() <= 1e-5 * (1.0 + sens[m].norm()),
                        "p={p} c={c} m={m}: fd {fd:?} vs {:?}",
                        sens[m]
                    );
                }
            }
        }
    }

    #[test]
    fn mesh_text_round_trip_is_exact() {
        let mesh = generate_rod(0.6, 0.1, 9, 4, &Profile::default_bump(0.6)).unwrap();
        let mut buf = Vec::new();
        mesh.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("mesh2d v1 36 48 9 4\n"));
        let back = Mesh::read_text(&text).unwrap();
        assert_eq!(back.n_nodes(), mesh.n_nodes());
        assert_eq!(back.structured_dims(), mesh.structured_dims());
        for (a, b) in mesh.nodes().iter().zip(back.nodes()) {
            assert_eq!(a, b, "coordinates must round-trip bit-exactly");
        }
        assert_eq!(mesh.triangles(), back.triangles());
        assert_eq!(mesh.tags(), back.tags());
    }

    #[test]
    fn read_rejects_malformed_input() {
        assert!(Mesh::read_text("").is_err());
        assert!(Mesh::read_text("mesh2d v2 1 0 0 0\n0 0 D\n").is_err());
        let bad_tag = "mesh2d v1 3 1 0 0\n0 0 D\n1 0 Q\n0 1 F\n0 1 2\n";
        assert!(matches!(
            Mesh::read_text(bad_tag),
            Err(MeshError::Parse { line: 3, .. })
        ));
        let inverted = "mesh2d v1 3 1 0 0\n0 0 D\n1 0 F\n0 1 F\n0 2 1\n";
        assert!(matches!(
            Mesh::read_text(inverted),
            Err(MeshError::InvertedTriangle { element: 0, .. })
        ));
    }

    #[test]
    fn unstructured_meshes_reject_morph_operations() {
        let mesh = Mesh::from_parts(
            vec![
                Vector2::new(0.0, 0.0),
                Vector2::new(1.0, 0.0),
                Vector2::new(0.0, 1.0),
            ],
            vec![[0, 1, 2]],
            vec![BoundaryTag::Free; 3],
            None,
        )
        .unwrap();
        assert!(matches!(extract_theta(&mesh), Err(MeshError::NotStructured)));
        assert!(matches!(morph_jacobian(&mesh), Err(MeshError::NotStructured)));
        assert!(matches!(mesh.theta_len(), Err(MeshError::NotStructured)));
        // the text format round-trips the missing grid dims
        let mut buf = Vec::new();
        mesh.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("mesh2d v1 3 1 0 0\n"));
        let back = Mesh::read_text(&text).unwrap();
        assert_eq!(back.structured_dims(), None);
    }

    #[test]
    fn mirrored_rod_needs_an_even_number_of_cell_rows() {
        assert!(generate_rod_mirrored(0.6, 0.1, 9, 4, &Profile::Flat).is_err());
        let mesh = generate_rod_mirrored(0.6, 0.1, 9, 5, &Profile::Flat).unwrap();
        assert_eq!(mesh.n_triangles(), 64);
        mesh.validate().unwrap();
        // triangulation maps onto itself under the row mirror
        let (_, ny) = mesh.structured_dims().unwrap();
        let mirror = |id: usize| {
            let (i, j) = (id / ny, id % ny);
            i * ny + (ny - 1 - j)
        };
        let canon = |t: &[usize; 3]| {
            let mut v = *t;
            v.sort_unstable();
            v
        };
        let mut original: Vec<[usize; 3]> = mesh.triangles().iter().map(|t| canon(t)).collect();
        let mut mirrored: Vec<[usize; 3]> = mesh
            .triangles()
            .iter()
            .map(|t| canon(&[mirror(t[0]), mirror(t[1]), mirror(t[2])]))
            .collect();
        original.sort_unstable();
        mirrored.sort_unstable();
        assert_eq!(original, mirrored);
    }

    #[test]
    fn boundary_and_traction_edges_of_rod() {
        let mesh = generate_rod(0.6, 0.1, 5, 3, &Profile::Flat).unwrap();
        let edges = mesh.boundary_edges();
        // perimeter of a 5x3 grid: 2*(4 + 2) cells = 12 edges
        assert_eq!(edges.len(), 12);
        let traction = mesh.traction_edges();
        assert_eq!(traction.len(), 2);
        for (a, b) in traction {
            assert_eq!(mesh.tags()[a], BoundaryTag::NeumannFixed);
            assert_eq!(mesh.tags()[b], BoundaryTag::NeumannFixed);
        }
    }
}
