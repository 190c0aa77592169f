//! Discrete spaces: continuous tensor-product Lagrange elements of degree 1
//! or 2 on one of the two boxes, with lateral periodicity realized by
//! master-slave elimination and homogeneous Dirichlet pinning on the
//! non-interface top/bottom faces.
//!
//! The five physical fields use the Taylor-Hood style pairing: displacement
//! `u`, elastic velocity `w` and fluid velocity `v` are vector-valued degree
//! 2; Biot pressure `p` and Stokes pressure `pf` are scalar degree 1.

use crate::error::SpaceError;
use crate::mesh::{Cell, Domain, GridSpec, MeshTopology};

/// Which top/bottom faces carry homogeneous Dirichlet conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirichletSpec {
    None,
    /// Vertical top of the box (`x_d = 1` for the Biot box).
    Top,
    /// Vertical bottom of the box (`x_d = -1` for the fluid box).
    Bottom,
    TopAndBottom,
}

/// The five fields of the coupled system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldName {
    U,
    W,
    P,
    V,
    Pf,
}

/// Descriptor of one discrete space.
#[derive(Debug, Clone, Copy)]
pub struct SpaceSpec {
    pub field: FieldName,
    pub degree: usize,
    pub components: usize,
    pub domain: Domain,
    pub dirichlet: DirichletSpec,
}

impl SpaceSpec {
    /// Standard space for a field: `u`, `w` vector degree 2 on the Biot box
    /// (zero on GammaB), `p` scalar degree 1 on the Biot box (zero on
    /// GammaB), `v` vector degree 2 on the fluid box (zero on GammaF),
    /// `pf` scalar degree 1 on the fluid box (unconstrained).
    pub fn standard(field: FieldName, dim: usize) -> Self {
        match field {
            FieldName::U | FieldName::W => SpaceSpec {
                field,
                degree: 2,
                components: dim,
                domain: Domain::Biot,
                dirichlet: DirichletSpec::Top,
            },
            FieldName::P => SpaceSpec {
                field,
                degree: 1,
                components: 1,
                domain: Domain::Biot,
                dirichlet: DirichletSpec::Top,
            },
            FieldName::V => SpaceSpec {
                field,
                degree: 2,
                components: dim,
                domain: Domain::Fluid,
                dirichlet: DirichletSpec::Bottom,
            },
            FieldName::Pf => SpaceSpec {
                field,
                degree: 1,
                components: 1,
                domain: Domain::Fluid,
                dirichlet: DirichletSpec::None,
            },
        }
    }
}

/// Constraint status of a single global DOF.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofStatus {
    /// Unconstrained; payload is the index into the free-DOF vector.
    Free(usize),
    /// Periodic slave; payload is the master DOF.
    Slave(usize),
    /// Pinned to zero by a Dirichlet condition.
    Fixed,
}

/// Global DOF map for one space on the structured grid.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub spec: SpaceSpec,
    pub dim: usize,
    pub n: usize,
    /// Lattice intervals per unit length (`degree * n`).
    pub m: usize,
    lat_nodes: usize,
    row_nodes: usize,
    vert_nodes: usize,
    pub total_dofs: usize,
    pub free_count: usize,
    status: Vec<DofStatus>,
}

/// 1D Lagrange shape values at `t` in [0,1]; returns (values, derivatives).
pub fn shape_1d(degree: usize, t: f64) -> ([f64; 3], [f64; 3]) {
    match degree {
        1 => ([1.0 - t, t, 0.0], [-1.0, 1.0, 0.0]),
        2 => (
            [2.0 * (t - 0.5) * (t - 1.0), 4.0 * t * (1.0 - t), 2.0 * t * (t - 0.5)],
            [4.0 * t - 3.0, 4.0 - 8.0 * t, 4.0 * t - 1.0],
        ),
        _ => panic!("unsupported degree {degree}"),
    }
}

/// Values and reference gradients of all `(degree+1)^dim` tensor basis
/// functions at a reference point (coordinates in [0,1]).
pub fn tensor_shape(degree: usize, dim: usize, r: &[f64; 3]) -> (Vec<f64>, Vec<[f64; 3]>) {
    let per = degree + 1;
    let (nx, dx) = shape_1d(degree, r[0]);
    let (ny, dy) = if dim == 3 { shape_1d(degree, r[1]) } else { ([1.0, 0.0, 0.0], [0.0; 3]) };
    let (nz, dz) = shape_1d(degree, r[dim - 1]);
    let nyc = if dim == 3 { per } else { 1 };
    let mut vals = Vec::with_capacity(per * nyc * per);
    let mut grads = Vec::with_capacity(per * nyc * per);
    for lc in 0..per {
        for lb in 0..nyc {
            for la in 0..per {
                let v = nx[la] * ny[lb] * nz[lc];
                let mut g = [0.0f64; 3];
                g[0] = dx[la] * ny[lb] * nz[lc];
                if dim == 3 {
                    g[1] = nx[la] * dy[lb] * nz[lc];
                }
                g[dim - 1] = nx[la] * ny[lb] * dz[lc];
                vals.push(v);
                grads.push(g);
            }
        }
    }
    (vals, grads)
}

/// Builds the DOF map for `spec` on `mesh`, applying periodic master-slave
/// identification and Dirichlet pinning (a periodic class containing a
/// Dirichlet DOF is pinned entirely).
pub fn build_dofmap(mesh: &MeshTopology, spec: SpaceSpec) -> Result<DofMap, SpaceError> {
    if !(spec.degree == 1 || spec.degree == 2) {
        return Err(SpaceError::BadDegree(spec.degree));
    }
    let dim = mesh.spec.dim;
    let n = mesh.spec.n;
    let m = spec.degree * n;
    let lat_nodes = m + 1;
    let row_nodes = if dim == 3 { m + 1 } else { 1 };
    let vert_nodes = m + 1;
    let n_nodes = lat_nodes * row_nodes * vert_nodes;
    let total_dofs = n_nodes * spec.components;

    let node_id = |a: usize, b: usize, c: usize| (c * row_nodes + b) * lat_nodes + a;

    // Pass 1: master node of each node (periodic wrap of lateral indices).
    let mut master_node = vec![0usize; n_nodes];
    for c in 0..vert_nodes {
        for b in 0..row_nodes {
            for a in 0..lat_nodes {
                let ma = if a == m { 0 } else { a };
                let mb = if dim == 3 && b == m { 0 } else { b };
                master_node[node_id(a, b, c)] = node_id(ma, mb, c);
            }
        }
    }

    // Pass 2: a class is fixed if any of its members sits on a Dirichlet face.
    let dirichlet_at = |c: usize| -> bool {
        match spec.dirichlet {
            DirichletSpec::None => false,
            DirichletSpec::Top => c == m,
            DirichletSpec::Bottom => c == 0,
            DirichletSpec::TopAndBottom => c == 0 || c == m,
        }
    };
    let mut class_fixed = vec![false; n_nodes];
    for c in 0..vert_nodes {
        for b in 0..row_nodes {
            for a in 0..lat_nodes {
                if dirichlet_at(c) {
                    class_fixed[master_node[node_id(a, b, c)]] = true;
                }
            }
        }
    }

    // Pass 3: assign statuses, numbering free DOFs in lexicographic order.
    let mut status = vec![DofStatus::Fixed; total_dofs];
    let mut free_count = 0usize;
    for node in 0..n_nodes {
        let master = master_node[node];
        for comp in 0..spec.components {
            let dof = node * spec.components + comp;
            if class_fixed[master] {
                status[dof] = DofStatus::Fixed;
            } else if master != node {
                status[dof] = DofStatus::Slave(master * spec.components + comp);
            } else {
                status[dof] = DofStatus::Free(free_count);
                free_count += 1;
            }
        }
    }

    Ok(DofMap {
        spec,
        dim,
        n,
        m,
        lat_nodes,
        row_nodes,
        vert_nodes,
        total_dofs,
        free_count,
        status,
    })
}

impl DofMap {
    pub fn n_nodes(&self) -> usize {
        self.lat_nodes * self.row_nodes * self.vert_nodes
    }

    pub fn status(&self, dof: usize) -> DofStatus {
        self.status[dof]
    }

    pub fn dof(&self, node: usize, comp: usize) -> usize {
        node * self.spec.components + comp
    }

    /// Free index of a DOF after resolving one level of slaving, if the
    /// class is not fixed.
    pub fn free_index(&self, dof: usize) -> Option<usize> {
        match self.status[dof] {
            DofStatus::Free(fi) => Some(fi),
            DofStatus::Slave(mdof) => match self.status[mdof] {
                DofStatus::Free(fi) => Some(fi),
                _ => None,
            },
            DofStatus::Fixed => None,
        }
    }

    /// Vertical box range of the space's domain.
    fn z_lo(&self) -> f64 {
        match self.spec.domain {
            Domain::Biot => 0.0,
            Domain::Fluid => -1.0,
        }
    }

    /// Physical coordinates of a lattice node.
    pub fn node_coord(&self, node: usize) -> [f64; 3] {
        let a = node % self.lat_nodes;
        let rest = node / self.lat_nodes;
        let b = rest % self.row_nodes;
        let c = rest / self.row_nodes;
        let s = 1.0 / self.m as f64;
        let mut x = [0.0f64; 3];
        x[0] = a as f64 * s;
        if self.dim == 3 {
            x[1] = b as f64 * s;
        }
        x[self.dim - 1] = self.z_lo() + c as f64 * s;
        x
    }

    /// Global lattice nodes of one cell, in tensor order (lateral fastest).
    /// The cell must belong to this space's domain.
    pub fn cell_nodes(&self, cell: &Cell) -> Vec<usize> {
        debug_assert_eq!(cell.domain, self.spec.domain);
        let g = self.spec.degree;
        let jloc = match self.spec.domain {
            Domain::Fluid => cell.vert,
            Domain::Biot => cell.vert - self.n,
        };
        let per = g + 1;
        let nyc = if self.dim == 3 { per } else { 1 };
        let mut out = Vec::with_capacity(per * nyc * per);
        for lc in 0..per {
            for lb in 0..nyc {
                for la in 0..per {
                    let a = g * cell.lat[0] + la;
                    let b = if self.dim == 3 { g * cell.lat[1] + lb } else { 0 };
                    let c = g * jloc + lc;
                    out.push((c * self.row_nodes + b) * self.lat_nodes + a);
                }
            }
        }
        out
    }

    /// Extracts the free coefficients from a full-length vector.
    pub fn gather_free(&self, full: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.free_count];
        for (dof, st) in self.status.iter().enumerate() {
            if let DofStatus::Free(fi) = st {
                out[*fi] = full[dof];
            }
        }
        out
    }

    /// Expands free coefficients to a full-length vector, mirroring slaves
    /// from masters and zeroing fixed DOFs.
    pub fn scatter_free(&self, free: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.total_dofs];
        for (dof, st) in self.status.iter().enumerate() {
            match st {
                DofStatus::Free(fi) => full[dof] = free[*fi],
                DofStatus::Slave(_) | DofStatus::Fixed => {}
            }
        }
        for (dof, st) in self.status.iter().enumerate() {
            if let DofStatus::Slave(mdof) = st {
                full[dof] = full[*mdof];
            }
        }
        full
    }

    /// Nodal interpolation of a closed-form field. The function is sampled
    /// per component at every master node; slaves mirror masters. Errors if
    /// the field violates a Dirichlet condition or lateral periodicity
    /// beyond `1e-12`.
    pub fn interpolate(&self, f: &dyn Fn(&[f64; 3], usize) -> f64) -> Result<Vec<f64>, SpaceError> {
        let tol = 1e-12;
        let mut full = vec![0.0; self.total_dofs];
        for node in 0..self.n_nodes() {
            let x = self.node_coord(node);
            for comp in 0..self.spec.components {
                let dof = self.dof(node, comp);
                match self.status[dof] {
                    DofStatus::Fixed => {
                        let val = f(&x, comp);
                        if val.abs() > tol {
                            return Err(SpaceError::BcViolation(format!(
                                "nonzero value {val:e} at Dirichlet node {x:?} (component {comp})"
                            )));
                        }
                    }
                    DofStatus::Slave(mdof) => {
                        let mnode = mdof / self.spec.components;
                        let mval = f(&self.node_coord(mnode), comp);
                        let sval = f(&x, comp);
                        if (mval - sval).abs() > tol {
                            return Err(SpaceError::BcViolation(format!(
                                "field not 1-periodic at {x:?}: {sval:e} vs {mval:e}"
                            )));
                        }
                        full[dof] = mval;
                    }
                    DofStatus::Free(_) => full[dof] = f(&x, comp),
                }
            }
        }
        Ok(full)
    }

    /// Locates the cell-local reference coordinates of `point`. Cells are
    /// half-open boxes; points on the topmost boundary resolve to the last
    /// cell. Errors if the point is outside the space's box.
    fn locate(&self, point: &[f64; 3]) -> Result<(usize, [usize; 2], [f64; 3]), SpaceError> {
        let tol = 1e-12;
        let z = point[self.dim - 1];
        let (z_lo, z_hi) = (self.z_lo(), self.z_lo() + 1.0);
        if z < z_lo - tol || z > z_hi + tol {
            return Err(SpaceError::OutOfDomain(*point));
        }
        for ax in 0..self.dim - 1 {
            if point[ax] < -tol || point[ax] > 1.0 + tol {
                return Err(SpaceError::OutOfDomain(*point));
            }
        }
        let nf = self.n as f64;
        let clamp = |i: f64| -> usize { (i.max(0.0) as usize).min(self.n - 1) };
        let i1 = clamp((point[0] * nf).floor());
        let i2 = if self.dim == 3 { clamp((point[1] * nf).floor()) } else { 0 };
        let jz = clamp(((z - z_lo) * nf).floor());
        let h = 1.0 / nf;
        let mut r = [0.0f64; 3];
        r[0] = (point[0] - i1 as f64 * h) / h;
        if self.dim == 3 {
            r[1] = (point[1] - i2 as f64 * h) / h;
        }
        r[self.dim - 1] = (z - (z_lo + jz as f64 * h)) / h;
        Ok((jz, [i1, i2], r))
    }

    fn located_cell(&self, jloc: usize, lat: [usize; 2]) -> Cell {
        Cell {
            lat,
            vert: match self.spec.domain {
                Domain::Fluid => jloc,
                Domain::Biot => jloc + self.n,
            },
            domain: self.spec.domain,
        }
    }

    /// Evaluates all components of the field at a point.
    pub fn eval(&self, coefs: &[f64], point: &[f64; 3]) -> Result<Vec<f64>, SpaceError> {
        let (jloc, lat, r) = self.locate(point)?;
        let cell = self.located_cell(jloc, lat);
        let nodes = self.cell_nodes(&cell);
        let (vals, _) = tensor_shape(self.spec.degree, self.dim, &r);
        let mut out = vec![0.0; self.spec.components];
        for (l, node) in nodes.iter().enumerate() {
            for comp in 0..self.spec.components {
                out[comp] += coefs[self.dof(*node, comp)] * vals[l];
            }
        }
        Ok(out)
    }

    /// Evaluates per-component physical gradients at a point; rows are
    /// components, columns spatial directions.
    pub fn eval_grad(&self, coefs: &[f64], point: &[f64; 3]) -> Result<Vec<[f64; 3]>, SpaceError> {
        let (jloc, lat, r) = self.locate(point)?;
        let cell = self.located_cell(jloc, lat);
        let nodes = self.cell_nodes(&cell);
        let (_, grads) = tensor_shape(self.spec.degree, self.dim, &r);
        let inv_h = self.n as f64;
        let mut out = vec![[0.0f64; 3]; self.spec.components];
        for (l, node) in nodes.iter().enumerate() {
            for comp in 0..self.spec.components {
                let c = coefs[self.dof(*node, comp)];
                for d in 0..self.dim {
                    out[comp][d] += c * grads[l][d] * inv_h;
                }
            }
        }
        Ok(out)
    }

    /// Divergence of a vector field at a point.
    pub fn eval_div(&self, coefs: &[f64], point: &[f64; 3]) -> Result<f64, SpaceError> {
        let g = self.eval_grad(coefs, point)?;
        Ok((0..self.dim).map(|d| g[d][d]).sum())
    }
}

/// DOF map without periodic or Dirichlet constraints (every DOF free), used
/// to verify that constrained assembly equals condensation of the raw
/// operator.
pub fn build_dofmap_unconstrained(mesh: &MeshTopology, spec: SpaceSpec) -> DofMap {
    let mut map = build_dofmap(mesh, spec).expect("valid spec");
    let mut free = 0usize;
    for st in map.status.iter_mut() {
        *st = DofStatus::Free(free);
        free += 1;
    }
    map.free_count = free;
    map
}

/// Builds the standard maps for all five fields. `u` and `w` share a map.
pub struct FieldMaps {
    pub u: DofMap,
    pub p: DofMap,
    pub v: DofMap,
    pub pf: DofMap,
}

impl FieldMaps {
    pub fn build(mesh: &MeshTopology) -> Result<Self, SpaceError> {
        let dim = mesh.spec.dim;
        Ok(FieldMaps {
            u: build_dofmap(mesh, SpaceSpec::standard(FieldName::U, dim))?,
            p: build_dofmap(mesh, SpaceSpec::standard(FieldName::P, dim))?,
            v: build_dofmap(mesh, SpaceSpec::standard(FieldName::V, dim))?,
            pf: build_dofmap(mesh, SpaceSpec::standard(FieldName::Pf, dim))?,
        })
    }
}

/// Mesh plus all standard DOF maps.
pub struct Discretization {
    pub mesh: MeshTopology,
    pub maps: FieldMaps,
}

impl Discretization {
    pub fn build(spec: GridSpec) -> Result<Self, crate::error::ScenarioError> {
        let mesh = crate::mesh::build_mesh(spec)?;
        let maps = FieldMaps::build(&mesh)?;
        Ok(Discretization { mesh, maps })
    }
}
