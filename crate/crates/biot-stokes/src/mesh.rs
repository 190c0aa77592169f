//! Structured grid for the two stacked boxes: the poroelastic box occupies
//! `x_d in (0,1)` and the fluid box `x_d in (-1,0)`, where `x_d` is the last
//! coordinate. Lateral directions are 1-periodic. Both boxes carry `n` cells
//! per unit edge on a single conforming grid, so the interface at `x_d = 0`
//! is matched cell-by-cell.

use crate::error::MeshError;

/// Subdomain tag for cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// Poroelastic box, `x_d in (0,1)`.
    Biot,
    /// Free-fluid box, `x_d in (-1,0)`.
    Fluid,
}

/// Classification of boundary faces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceTag {
    /// Top of the poroelastic box, `x_d = 1`.
    GammaB,
    /// Bottom of the fluid box, `x_d = -1`.
    GammaF,
    /// Shared interface, `x_d = 0`.
    GammaI,
    /// Periodically identified lateral faces.
    Lateral,
}

/// Grid resolution request. `dim = 2` is the fast-test analog with one
/// periodic lateral direction; `dim = 3` is the fidelity mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub dim: usize,
    pub n: usize,
}

impl GridSpec {
    pub fn new(dim: usize, n: usize) -> Result<Self, MeshError> {
        if !(dim == 2 || dim == 3) {
            return Err(MeshError::InvalidSpec(format!("dim must be 2 or 3, got {dim}")));
        }
        if n == 0 {
            return Err(MeshError::InvalidSpec("n must be >= 1".into()));
        }
        Ok(Self { dim, n })
    }

    /// Cell edge length.
    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Index of the vertical coordinate (the last one).
    pub fn vertical_axis(&self) -> usize {
        self.dim - 1
    }

    /// Lateral (periodic, tangential) coordinate axes.
    pub fn tangent_axes(&self) -> &'static [usize] {
        if self.dim == 2 {
            &[0]
        } else {
            &[0, 1]
        }
    }
}

/// One cell of the structured grid, identified by its lattice origin.
/// `lat` are the lateral cell indices in `0..n` (second entry unused in 2D)
/// and `vert` is the vertical cell index in `0..2n` counted from `x_d = -1`.
#[derive(Debug, Clone, Copy)]
pub struct Cell {
    pub lat: [usize; 2],
    pub vert: usize,
    pub domain: Domain,
}

/// Boundary face, stored as owning cell plus tag.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryFace {
    pub cell: usize,
    pub tag: FaceTag,
    /// Axis normal to the face.
    pub axis: usize,
    /// True if the face sits on the upper side of the cell along `axis`.
    pub upper: bool,
}

/// Interface face with the fixed orientation `n_f = -n_b = e_d`.
#[derive(Debug, Clone, Copy)]
pub struct InterfaceFace {
    /// Cell on the poroelastic side (above).
    pub b_cell: usize,
    /// Cell on the fluid side (below).
    pub f_cell: usize,
    /// Lateral lattice position shared by both cells.
    pub lat: [usize; 2],
}

/// Immutable topology of the stacked-box grid.
#[derive(Debug, Clone)]
pub struct MeshTopology {
    pub spec: GridSpec,
    pub vertices: Vec<[f64; 3]>,
    pub cells: Vec<Cell>,
    pub boundary_faces: Vec<BoundaryFace>,
    pub interface_faces: Vec<InterfaceFace>,
}

/// Number of lateral lattice positions per direction for `n` cells.
fn lat_count(dim: usize, n: usize) -> [usize; 2] {
    if dim == 2 {
        [n, 1]
    } else {
        [n, n]
    }
}

/// Builds the conforming stacked-box grid with tagged boundary and
/// interface faces.
pub fn build_mesh(spec: GridSpec) -> Result<MeshTopology, MeshError> {
    GridSpec::new(spec.dim, spec.n)?;
    let n = spec.n;
    let h = spec.h();
    let [l1, l2] = lat_count(spec.dim, n);

    // Vertex lattice: lateral 0..=n per direction, vertical 0..=2n.
    let mut vertices = Vec::new();
    for k in 0..=(2 * n) {
        for j in 0..=(if spec.dim == 3 { n } else { 0 }) {
            for i in 0..=n {
                let mut v = [0.0f64; 3];
                v[0] = i as f64 * h;
                if spec.dim == 3 {
                    v[1] = j as f64 * h;
                }
                v[spec.vertical_axis()] = -1.0 + k as f64 * h;
                vertices.push(v);
            }
        }
    }

    let mut cells = Vec::with_capacity(2 * n * l1 * l2);
    for k in 0..(2 * n) {
        for j in 0..l2 {
            for i in 0..l1 {
                cells.push(Cell {
                    lat: [i, j],
                    vert: k,
                    domain: if k < n { Domain::Fluid } else { Domain::Biot },
                });
            }
        }
    }
    let cell_index = |i: usize, j: usize, k: usize| -> usize { (k * l2 + j) * l1 + i };

    let vert_axis = spec.vertical_axis();
    let mut boundary_faces = Vec::new();
    let mut interface_faces = Vec::new();
    for (ci, c) in cells.iter().enumerate() {
        // Vertical faces.
        if c.vert == 0 {
            boundary_faces.push(BoundaryFace { cell: ci, tag: FaceTag::GammaF, axis: vert_axis, upper: false });
        }
        if c.vert == 2 * n - 1 {
            boundary_faces.push(BoundaryFace { cell: ci, tag: FaceTag::GammaB, axis: vert_axis, upper: true });
        }
        if c.vert == n {
            // Interface recorded once, from the Biot side.
            let f_cell = cell_index(c.lat[0], c.lat[1], n - 1);
            boundary_faces.push(BoundaryFace { cell: ci, tag: FaceTag::GammaI, axis: vert_axis, upper: false });
            interface_faces.push(InterfaceFace { b_cell: ci, f_cell, lat: c.lat });
        }
        // Lateral faces.
        for (ax, &len) in [l1, l2].iter().enumerate().take(spec.dim - 1) {
            if c.lat[ax] == 0 {
                boundary_faces.push(BoundaryFace { cell: ci, tag: FaceTag::Lateral, axis: ax, upper: false });
            }
            if c.lat[ax] == len - 1 {
                boundary_faces.push(BoundaryFace { cell: ci, tag: FaceTag::Lateral, axis: ax, upper: true });
            }
        }
    }

    Ok(MeshTopology { spec, vertices, cells, boundary_faces, interface_faces })
}

impl MeshTopology {
    /// Lower corner of a cell in physical coordinates.
    pub fn cell_origin(&self, cell: &Cell) -> [f64; 3] {
        let h = self.spec.h();
        let mut x = [0.0f64; 3];
        x[0] = cell.lat[0] as f64 * h;
        if self.spec.dim == 3 {
            x[1] = cell.lat[1] as f64 * h;
        }
        x[self.spec.vertical_axis()] = -1.0 + cell.vert as f64 * h;
        x
    }

    /// Volume of any cell (uniform grid).
    pub fn cell_volume(&self) -> f64 {
        self.spec.h().powi(self.spec.dim as i32)
    }

    /// Area (length in 2D) of any interface face.
    pub fn face_area(&self) -> f64 {
        self.spec.h().powi(self.spec.dim as i32 - 1)
    }
}

/// Master-slave identification of lattice vertices across the periodic
/// lateral faces. Every vertex with a lateral coordinate equal to 1 resolves
/// to the vertex with that coordinate set to 0; corners resolve to a single
/// master in one application.
pub fn lateral_pairs(mesh: &MeshTopology) -> Vec<(usize, usize)> {
    let n = mesh.spec.n;
    let dim = mesh.spec.dim;
    let cols = n + 1;
    let rows = if dim == 3 { n + 1 } else { 1 };
    let idx = |i: usize, j: usize, k: usize| (k * rows + j) * cols + i;
    let mut pairs = Vec::new();
    for k in 0..=(2 * n) {
        for j in 0..rows {
            for i in 0..cols {
                let (mi, mj) = (if i == n { 0 } else { i }, if dim == 3 && j == n { 0 } else { j });
                if (mi, mj) != (i, j) {
                    pairs.push((idx(i, j, k), idx(mi, mj, k)));
                }
            }
        }
    }
    pairs
}

/// Gauss-Legendre rule with 3 points on [0,1], exact through degree 5.
pub const GAUSS3: [(f64, f64); 3] = [
    (0.112701665379258311, 0.277777777777777778),
    (0.5, 0.444444444444444444),
    (0.887298334620741689, 0.277777777777777778),
];

/// Gauss-Legendre rule with 5 points on [0,1], exact through degree 9.
/// Used by refined-quadrature oracles in tests.
pub const GAUSS5: [(f64, f64); 5] = [
    (0.046910077030668004, 0.118463442528094544),
    (0.230765344947158454, 0.239314335249683234),
    (0.5, 0.284444444444444444),
    (0.769234655052841546, 0.239314335249683234),
    (0.953089922969331996, 0.118463442528094544),
];

/// Tensor quadrature over one cell: physical points and weights summing to
/// the cell volume.
pub fn cell_quadrature(mesh: &MeshTopology, cell: usize) -> Vec<([f64; 3], f64)> {
    let c = &mesh.cells[cell];
    let origin = mesh.cell_origin(c);
    let h = mesh.spec.h();
    tensor_rule(&GAUSS3, mesh.spec.dim, &origin, h)
}

/// Tensor quadrature over one interface face (a `(dim-1)`-cube at `x_d = 0`):
/// physical points and weights summing to the face area.
pub fn face_quadrature(mesh: &MeshTopology, face: &InterfaceFace) -> Vec<([f64; 3], f64)> {
    let h = mesh.spec.h();
    let mut origin = [0.0f64; 3];
    origin[0] = face.lat[0] as f64 * h;
    if mesh.spec.dim == 3 {
        origin[1] = face.lat[1] as f64 * h;
    }
    origin[mesh.spec.vertical_axis()] = 0.0;
    tensor_rule(&GAUSS3, mesh.spec.dim - 1, &origin, h)
}

fn tensor_rule(rule: &[(f64, f64)], ndirs: usize, origin: &[f64; 3], h: f64) -> Vec<([f64; 3], f64)> {
    let mut out = vec![(*origin, 1.0)];
    for d in 0..ndirs {
        let mut next = Vec::with_capacity(out.len() * rule.len());
        for (x, w) in &out {
            for &(q, qw) in rule {
                let mut y = *x;
                y[d] = origin[d] + q * h;
                next.push((y, w * qw * h));
            }
        }
        out = next;
    }
    out
}
