//! Assembly of every bilinear form of the coupled weak formulation as sparse
//! blocks over free DOFs, plus load functionals. Interior blocks integrate
//! over one of the boxes; interface blocks pair traces from both sides of
//! the shared face at `x_d = 0` with the orientation `n_f = -n_b = e_d`.
//!
//! All cells are congruent axis-aligned boxes, so each constant-coefficient
//! local matrix is computed once on the reference element and scattered per
//! cell. The 3-point tensor Gauss rule is exact for every product of the
//! degree-2 bases and their gradients that occurs here.

use crate::error::ParamError;
use crate::linalg::{Coo, Csr};
use crate::mesh::{cell_quadrature, face_quadrature, Domain, InterfaceFace, MeshTopology, GAUSS3};
use crate::spaces::{tensor_shape, Discretization, DofMap};

/// Physical coefficients of the coupled system, nondimensional.
#[derive(Debug, Clone, Copy)]
pub struct MaterialParams {
    pub rho_b: f64,
    pub rho_f: f64,
    pub lambda: f64,
    pub mu: f64,
    pub alpha: f64,
    pub c0: f64,
    pub k: f64,
    pub nu: f64,
    pub beta: f64,
}

impl MaterialParams {
    /// Validates the sign constraints: `rho_b, rho_f, nu, alpha, mu, k, beta`
    /// strictly positive, `lambda, c0` nonnegative.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        rho_b: f64,
        rho_f: f64,
        lambda: f64,
        mu: f64,
        alpha: f64,
        c0: f64,
        k: f64,
        nu: f64,
        beta: f64,
    ) -> Result<Self, ParamError> {
        let strict = [
            ("rho_b", rho_b),
            ("rho_f", rho_f),
            ("mu", mu),
            ("alpha", alpha),
            ("k", k),
            ("nu", nu),
            ("beta", beta),
        ];
        for (name, v) in strict {
            if !(v > 0.0) {
                return Err(ParamError::Constraint(format!("{name} must be > 0, got {v}")));
            }
        }
        for (name, v) in [("lambda", lambda), ("c0", c0)] {
            if !(v >= 0.0) {
                return Err(ParamError::Constraint(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(MaterialParams { rho_b, rho_f, lambda, mu, alpha, c0, k, nu, beta })
    }

    pub fn unit() -> Self {
        MaterialParams {
            rho_b: 1.0,
            rho_f: 1.0,
            lambda: 1.0,
            mu: 1.0,
            alpha: 1.0,
            c0: 1.0,
            k: 1.0,
            nu: 1.0,
            beta: 1.0,
        }
    }
}

/// All assembled blocks of the coupled system on free DOFs.
///
/// Row x column spaces are written as (test, trial). Blocks named with a
/// `*_t`-style inverted pair (`grad_up`, `tn_up`, `tv_vp`, `bjs_vw`) are
/// assembled independently rather than transposed; the operator lab checks
/// the resulting duality entrywise.
pub struct BlockSystem {
    /// (u,u): elastic energy form `2mu (D u, D xi) + lambda (div u, div xi)`.
    pub a_e: Csr,
    /// (u,u): `rho_b (w, xi)`.
    pub mass_w: Csr,
    /// (p,p): `c0 (p, q)`.
    pub mass_p: Csr,
    /// (p,p): unweighted `(p, q)` for reporting.
    pub mass_p_unit: Csr,
    /// (p,u): `alpha (div u, q)`; carries a time derivative.
    pub div_pu: Csr,
    /// (u,p): `alpha (p, div xi)`.
    pub grad_up: Csr,
    /// (p,p): `k (grad p, grad q)`.
    pub darcy: Csr,
    /// (v,v): `rho_f (v, zeta)`.
    pub mass_v: Csr,
    /// (v,v): `2 nu (D v, D zeta)`.
    pub visc: Csr,
    /// (pf,v): `(div v, q)`, the incompressibility constraint.
    pub div_fv: Csr,
    /// (p,u): interface normal trace `(u . e_d, q)`; carries a time derivative.
    pub tn_pu: Csr,
    /// (u,p): interface pressure coupling `(p, xi . e_d)`.
    pub tn_up: Csr,
    /// (p,v): interface normal flux `(v . e_d, q)`.
    pub tv_pv: Csr,
    /// (v,p): interface pressure coupling `(p, zeta . e_d)`.
    pub tv_vp: Csr,
    /// (u,u): slip form `beta sum_tau (w . tau, xi . tau)`.
    pub bjs_ww: Csr,
    /// (u,v): `beta sum_tau (v . tau, xi . tau)`.
    pub bjs_wv: Csr,
    /// (v,u): `beta sum_tau (w . tau, zeta . tau)`.
    pub bjs_vw: Csr,
    /// (v,v): `beta sum_tau (v . tau, zeta . tau)`.
    pub bjs_vv: Csr,
}

impl BlockSystem {
    fn empty(disc: &Discretization) -> Self {
        let nu_ = disc.maps.u.free_count;
        let np = disc.maps.p.free_count;
        let nv = disc.maps.v.free_count;
        let npf = disc.maps.pf.free_count;
        BlockSystem {
            a_e: Csr::zeros(nu_, nu_),
            mass_w: Csr::zeros(nu_, nu_),
            mass_p: Csr::zeros(np, np),
            mass_p_unit: Csr::zeros(np, np),
            div_pu: Csr::zeros(np, nu_),
            grad_up: Csr::zeros(nu_, np),
            darcy: Csr::zeros(np, np),
            mass_v: Csr::zeros(nv, nv),
            visc: Csr::zeros(nv, nv),
            div_fv: Csr::zeros(npf, nv),
            tn_pu: Csr::zeros(np, nu_),
            tn_up: Csr::zeros(nu_, np),
            tv_pv: Csr::zeros(np, nv),
            tv_vp: Csr::zeros(nv, np),
            bjs_ww: Csr::zeros(nu_, nu_),
            bjs_wv: Csr::zeros(nu_, nv),
            bjs_vw: Csr::zeros(nv, nu_),
            bjs_vv: Csr::zeros(nv, nv),
        }
    }
}

/// Reference-element tables at the tensor Gauss points: basis values,
/// physical gradients (uniform grid), and physical weights.
struct RefTables {
    weights: Vec<f64>,
    /// Per space degree in use: vals[q][local], grads[q][local][3].
    vals: Vec<Vec<f64>>,
    grads: Vec<Vec<[f64; 3]>>,
}

fn cell_tables(degree: usize, dim: usize, h: f64) -> RefTables {
    let pts = ref_points(dim);
    let inv_h = 1.0 / h;
    let mut vals = Vec::new();
    let mut grads = Vec::new();
    let mut weights = Vec::new();
    for (r, w) in pts {
        let (v, g) = tensor_shape(degree, dim, &r);
        let gphys = g
            .iter()
            .map(|gr| {
                let mut out = [0.0; 3];
                for d in 0..dim {
                    out[d] = gr[d] * inv_h;
                }
                out
            })
            .collect();
        vals.push(v);
        grads.push(gphys);
        weights.push(w * h.powi(dim as i32));
    }
    RefTables { weights, vals, grads }
}

/// Reference quadrature points over the unit dim-cube with unit weights sum.
fn ref_points(ndirs: usize) -> Vec<([f64; 3], f64)> {
    let mut out = vec![([0.0f64; 3], 1.0f64)];
    for d in 0..ndirs {
        let mut next = Vec::new();
        for (x, w) in &out {
            for &(q, qw) in &GAUSS3 {
                let mut y = *x;
                y[d] = q;
                next.push((y, w * qw));
            }
        }
        out = next;
    }
    out
}

/// Scatters a dense local matrix into a COO buffer through two DOF maps.
fn scatter(
    coo: &mut Coo,
    test: &DofMap,
    trial: &DofMap,
    test_nodes: &[usize],
    trial_nodes: &[usize],
    local: &[Vec<f64>],
) {
    let tc = test.spec.components;
    let rc = trial.spec.components;
    for (la, node_a) in test_nodes.iter().enumerate() {
        for ca in 0..tc {
            let Some(ri) = test.free_index(test.dof(*node_a, ca)) else { continue };
            let row_local = la * tc + ca;
            for (lb, node_b) in trial_nodes.iter().enumerate() {
                for cb in 0..rc {
                    let Some(ci) = trial.free_index(trial.dof(*node_b, cb)) else { continue };
                    let v = local[row_local][lb * rc + cb];
                    if v != 0.0 {
                        coo.push(ri, ci, v);
                    }
                }
            }
        }
    }
}

fn assemble_cellwise(
    mesh: &MeshTopology,
    test: &DofMap,
    trial: &DofMap,
    domain: Domain,
    local: &[Vec<f64>],
) -> Csr {
    let mut coo = Coo::new(test.free_count, trial.free_count);
    for cell in mesh.cells.iter().filter(|c| c.domain == domain) {
        let tn = test.cell_nodes(cell);
        let rn = trial.cell_nodes(cell);
        scatter(&mut coo, test, trial, &tn, &rn, local);
    }
    coo.to_csr()
}

/// Local elastic/viscous matrix: `c2 (2 D:D) + cdiv (div)(div)` where the
/// symmetric-gradient product expands to
/// `c2 [delta_cacb grad.grad + dNa_cb dNb_ca]`.
fn local_sym_grad(tbl: &RefTables, dim: usize, c2: f64, cdiv: f64) -> Vec<Vec<f64>> {
    let nl = tbl.vals[0].len();
    let size = nl * dim;
    let mut m = vec![vec![0.0; size]; size];
    for q in 0..tbl.weights.len() {
        let w = tbl.weights[q];
        let g = &tbl.grads[q];
        for a in 0..nl {
            for ca in 0..dim {
                for b in 0..nl {
                    for cb in 0..dim {
                        let mut val = 0.0;
                        if c2 != 0.0 {
                            let mut dot = 0.0;
                            if ca == cb {
                                for d in 0..dim {
                                    dot += g[a][d] * g[b][d];
                                }
                            }
                            val += c2 * (dot + g[b][ca] * g[a][cb]);
                        }
                        if cdiv != 0.0 {
                            val += cdiv * (g[b][cb] * g[a][ca]);
                        }
                        m[a * dim + ca][b * dim + cb] += w * val;
                    }
                }
            }
        }
    }
    m
}

fn local_vector_mass(tbl: &RefTables, dim: usize, coef: f64) -> Vec<Vec<f64>> {
    let nl = tbl.vals[0].len();
    let size = nl * dim;
    let mut m = vec![vec![0.0; size]; size];
    for q in 0..tbl.weights.len() {
        let w = tbl.weights[q];
        for a in 0..nl {
            for b in 0..nl {
                let v = coef * w * (tbl.vals[q][a] * tbl.vals[q][b]);
                for c in 0..dim {
                    m[a * dim + c][b * dim + c] += v;
                }
            }
        }
    }
    m
}

fn local_scalar_mass(tbl: &RefTables, coef: f64) -> Vec<Vec<f64>> {
    let nl = tbl.vals[0].len();
    let mut m = vec![vec![0.0; nl]; nl];
    for q in 0..tbl.weights.len() {
        let w = tbl.weights[q];
        for a in 0..nl {
            for b in 0..nl {
                m[a][b] += coef * w * (tbl.vals[q][a] * tbl.vals[q][b]);
            }
        }
    }
    m
}

fn local_stiffness(tbl: &RefTables, dim: usize, coef: f64) -> Vec<Vec<f64>> {
    let nl = tbl.vals[0].len();
    let mut m = vec![vec![0.0; nl]; nl];
    for q in 0..tbl.weights.len() {
        let w = tbl.weights[q];
        for a in 0..nl {
            for b in 0..nl {
                let mut dot = 0.0;
                for d in 0..dim {
                    dot += tbl.grads[q][a][d] * tbl.grads[q][b][d];
                }
                m[a][b] += coef * w * dot;
            }
        }
    }
    m
}

/// `coef (div trial_vec, test_scalar)`: rows scalar, cols vector.
fn local_div(scalar: &RefTables, vector: &RefTables, dim: usize, coef: f64) -> Vec<Vec<f64>> {
    let ns = scalar.vals[0].len();
    let nv = vector.vals[0].len();
    let mut m = vec![vec![0.0; nv * dim]; ns];
    for q in 0..scalar.weights.len() {
        let w = scalar.weights[q];
        for a in 0..ns {
            for b in 0..nv {
                for cb in 0..dim {
                    m[a][b * dim + cb] += coef * w * (vector.grads[q][b][cb] * scalar.vals[q][a]);
                }
            }
        }
    }
    m
}

/// `coef (trial_scalar, div test_vec)`: rows vector, cols scalar.
fn local_grad(vector: &RefTables, scalar: &RefTables, dim: usize, coef: f64) -> Vec<Vec<f64>> {
    let ns = scalar.vals[0].len();
    let nv = vector.vals[0].len();
    let mut m = vec![vec![0.0; ns]; nv * dim];
    for q in 0..scalar.weights.len() {
        let w = scalar.weights[q];
        for a in 0..nv {
            for ca in 0..dim {
                for b in 0..ns {
                    m[a * dim + ca][b] += coef * w * (vector.grads[q][a][ca] * scalar.vals[q][b]);
                }
            }
        }
    }
    m
}

/// Assembles the interior blocks of the weak form.
pub fn assemble_interior(params: &MaterialParams, disc: &Discretization) -> BlockSystem {
    let mut sys = BlockSystem::empty(disc);
    fill_interior(&mut sys, params, disc);
    sys
}

fn fill_interior(sys: &mut BlockSystem, params: &MaterialParams, disc: &Discretization) {
    let mesh = &disc.mesh;
    let dim = mesh.spec.dim;
    let h = mesh.spec.h();
    let q2 = cell_tables(2, dim, h);
    let q1 = cell_tables(1, dim, h);
    let maps = &disc.maps;

    let l = local_sym_grad(&q2, dim, params.mu, params.lambda);
    sys.a_e = assemble_cellwise(mesh, &maps.u, &maps.u, Domain::Biot, &l);
    let l = local_vector_mass(&q2, dim, params.rho_b);
    sys.mass_w = assemble_cellwise(mesh, &maps.u, &maps.u, Domain::Biot, &l);
    let l = local_scalar_mass(&q1, params.c0);
    sys.mass_p = assemble_cellwise(mesh, &maps.p, &maps.p, Domain::Biot, &l);
    let l = local_scalar_mass(&q1, 1.0);
    sys.mass_p_unit = assemble_cellwise(mesh, &maps.p, &maps.p, Domain::Biot, &l);
    let l = local_div(&q1, &q2, dim, params.alpha);
    sys.div_pu = assemble_cellwise(mesh, &maps.p, &maps.u, Domain::Biot, &l);
    let l = local_grad(&q2, &q1, dim, params.alpha);
    sys.grad_up = assemble_cellwise(mesh, &maps.u, &maps.p, Domain::Biot, &l);
    let l = local_stiffness(&q1, dim, params.k);
    sys.darcy = assemble_cellwise(mesh, &maps.p, &maps.p, Domain::Biot, &l);
    let l = local_vector_mass(&q2, dim, params.rho_f);
    sys.mass_v = assemble_cellwise(mesh, &maps.v, &maps.v, Domain::Fluid, &l);
    let l = local_sym_grad(&q2, dim, params.nu, 0.0);
    sys.visc = assemble_cellwise(mesh, &maps.v, &maps.v, Domain::Fluid, &l);
    let l = local_div(&q1, &q2, dim, 1.0);
    sys.div_fv = assemble_cellwise(mesh, &maps.pf, &maps.v, Domain::Fluid, &l);
}

/// Face-restricted basis tables at the lateral Gauss points of an interface
/// face. The Biot side evaluates at vertical reference coordinate 0 (its
/// bottom face); the fluid side at 1 (its top face).
struct FaceTables {
    weights: Vec<f64>,
    vals: Vec<Vec<f64>>,
}

fn face_tables(degree: usize, dim: usize, h: f64, fluid_side: bool) -> FaceTables {
    let pts = ref_points(dim - 1);
    let mut weights = Vec::new();
    let mut vals = Vec::new();
    for (mut r, w) in pts {
        r[dim - 1] = if fluid_side { 1.0 } else { 0.0 };
        let (v, _) = tensor_shape(degree, dim, &r);
        vals.push(v);
        weights.push(w * h.powi(dim as i32 - 1));
    }
    FaceTables { weights, vals }
}

/// Component mask describing which (test component, trial component) pairs a
/// face block couples: the vertical normal only, or every tangent.
enum FaceCoupling {
    NormalOnly,
    Tangents,
}

fn local_face(
    test: &FaceTables,
    trial: &FaceTables,
    test_comps: usize,
    trial_comps: usize,
    dim: usize,
    coupling: FaceCoupling,
    coef: f64,
) -> Vec<Vec<f64>> {
    let na = test.vals[0].len();
    let nb = trial.vals[0].len();
    let mut m = vec![vec![0.0; nb * trial_comps]; na * test_comps];
    let pairs: Vec<(usize, usize)> = match coupling {
        FaceCoupling::NormalOnly => {
            let d = dim - 1;
            vec![(
                if test_comps == 1 { 0 } else { d },
                if trial_comps == 1 { 0 } else { d },
            )]
        }
        FaceCoupling::Tangents => (0..dim - 1).map(|t| (t, t)).collect(),
    };
    for q in 0..test.weights.len() {
        let w = test.weights[q];
        for a in 0..na {
            for b in 0..nb {
                let v = coef * w * (test.vals[q][a] * trial.vals[q][b]);
                for &(ca, cb) in &pairs {
                    m[a * test_comps + ca][b * trial_comps + cb] += v;
                }
            }
        }
    }
    m
}

fn assemble_facewise(
    mesh: &MeshTopology,
    test: &DofMap,
    trial: &DofMap,
    local: &[Vec<f64>],
) -> Csr {
    let mut coo = Coo::new(test.free_count, trial.free_count);
    for face in &mesh.interface_faces {
        let tcell = match test.spec.domain {
            Domain::Biot => &mesh.cells[face.b_cell],
            Domain::Fluid => &mesh.cells[face.f_cell],
        };
        let rcell = match trial.spec.domain {
            Domain::Biot => &mesh.cells[face.b_cell],
            Domain::Fluid => &mesh.cells[face.f_cell],
        };
        let tn = test.cell_nodes(tcell);
        let rn = trial.cell_nodes(rcell);
        scatter(&mut coo, test, trial, &tn, &rn, local);
    }
    coo.to_csr()
}

/// Assembles the interface blocks of the weak form.
pub fn assemble_interface(params: &MaterialParams, disc: &Discretization) -> BlockSystem {
    let mut sys = BlockSystem::empty(disc);
    fill_interface(&mut sys, params, disc);
    sys
}

fn fill_interface(sys: &mut BlockSystem, params: &MaterialParams, disc: &Discretization) {
    let mesh = &disc.mesh;
    let dim = mesh.spec.dim;
    let h = mesh.spec.h();
    let maps = &disc.maps;
    let q2b = face_tables(2, dim, h, false);
    let q2f = face_tables(2, dim, h, true);
    let q1b = face_tables(1, dim, h, false);
    let beta = params.beta;

    let l = local_face(&q1b, &q2b, 1, dim, dim, FaceCoupling::NormalOnly, 1.0);
    sys.tn_pu = assemble_facewise(mesh, &maps.p, &maps.u, &l);
    let l = local_face(&q2b, &q1b, dim, 1, dim, FaceCoupling::NormalOnly, 1.0);
    sys.tn_up = assemble_facewise(mesh, &maps.u, &maps.p, &l);
    let l = local_face(&q1b, &q2f, 1, dim, dim, FaceCoupling::NormalOnly, 1.0);
    sys.tv_pv = assemble_facewise(mesh, &maps.p, &maps.v, &l);
    let l = local_face(&q2f, &q1b, dim, 1, dim, FaceCoupling::NormalOnly, 1.0);
    sys.tv_vp = assemble_facewise(mesh, &maps.v, &maps.p, &l);
    let l = local_face(&q2b, &q2b, dim, dim, dim, FaceCoupling::Tangents, beta);
    sys.bjs_ww = assemble_facewise(mesh, &maps.u, &maps.u, &l);
    let l = local_face(&q2b, &q2f, dim, dim, dim, FaceCoupling::Tangents, beta);
    sys.bjs_wv = assemble_facewise(mesh, &maps.u, &maps.v, &l);
    let l = local_face(&q2f, &q2b, dim, dim, dim, FaceCoupling::Tangents, beta);
    sys.bjs_vw = assemble_facewise(mesh, &maps.v, &maps.u, &l);
    let l = local_face(&q2f, &q2f, dim, dim, dim, FaceCoupling::Tangents, beta);
    sys.bjs_vv = assemble_facewise(mesh, &maps.v, &maps.v, &l);
}

/// Assembles the complete block system.
pub fn assemble(params: &MaterialParams, disc: &Discretization) -> BlockSystem {
    let mut sys = BlockSystem::empty(disc);
    fill_interior(&mut sys, params, disc);
    fill_interface(&mut sys, params, disc);
    sys
}

/// Volume load `(f, phi)` against every free test function of `map`.
/// The closure receives the physical point and the component index.
pub fn assemble_load(
    mesh: &MeshTopology,
    map: &DofMap,
    f: &dyn Fn(&[f64; 3], usize) -> f64,
) -> Vec<f64> {
    let dim = mesh.spec.dim;
    let mut out = vec![0.0; map.free_count];
    let pts = ref_points(dim);
    let h = mesh.spec.h();
    let vol = h.powi(dim as i32);
    for cell in mesh.cells.iter().filter(|c| c.domain == map.spec.domain) {
        let origin = mesh.cell_origin(cell);
        let nodes = map.cell_nodes(cell);
        for (r, w) in &pts {
            let mut x = origin;
            for d in 0..dim {
                x[d] += r[d] * h;
            }
            let (vals, _) = tensor_shape(map.spec.degree, dim, r);
            for (l, node) in nodes.iter().enumerate() {
                for comp in 0..map.spec.components {
                    if let Some(fi) = map.free_index(map.dof(*node, comp)) {
                        out[fi] += w * vol * f(&x, comp) * vals[l];
                    }
                }
            }
        }
    }
    out
}

/// Which component pairing an interface load uses.
pub enum FaceLoadKind {
    /// `(g, phi . e_d)` with scalar g.
    Normal,
    /// `sum_tau (g_tau, phi . tau)`; the closure's component is the tangent axis.
    Tangential,
    /// `(g, phi)` with vector g; the closure's component is the axis.
    FullVector,
    /// `(g, q)` against a scalar space.
    Scalar,
}

/// Interface load against every free test function of `map` (evaluated on
/// the side of the interface where `map` lives).
pub fn assemble_interface_load(
    mesh: &MeshTopology,
    map: &DofMap,
    kind: FaceLoadKind,
    g: &dyn Fn(&[f64; 3], usize) -> f64,
) -> Vec<f64> {
    let dim = mesh.spec.dim;
    let h = mesh.spec.h();
    let mut out = vec![0.0; map.free_count];
    let fluid_side = map.spec.domain == Domain::Fluid;
    let pts = ref_points(dim - 1);
    let area = h.powi(dim as i32 - 1);
    for face in &mesh.interface_faces {
        let cell = match map.spec.domain {
            Domain::Biot => &mesh.cells[face.b_cell],
            Domain::Fluid => &mesh.cells[face.f_cell],
        };
        let nodes = map.cell_nodes(cell);
        for (r0, w) in &pts {
            let mut r = *r0;
            r[dim - 1] = if fluid_side { 1.0 } else { 0.0 };
            let (vals, _) = tensor_shape(map.spec.degree, dim, &r);
            let mut x = [0.0f64; 3];
            x[0] = (face.lat[0] as f64 + r0[0]) * h;
            if dim == 3 {
                x[1] = (face.lat[1] as f64 + r0[1]) * h;
            }
            x[dim - 1] = 0.0;
            let wq = w * area;
            for (l, node) in nodes.iter().enumerate() {
                match kind {
                    FaceLoadKind::Scalar => {
                        if let Some(fi) = map.free_index(map.dof(*node, 0)) {
                            out[fi] += wq * g(&x, 0) * vals[l];
                        }
                    }
                    FaceLoadKind::Normal => {
                        let d = dim - 1;
                        if let Some(fi) = map.free_index(map.dof(*node, d)) {
                            out[fi] += wq * g(&x, 0) * vals[l];
                        }
                    }
                    FaceLoadKind::Tangential => {
                        for t in 0..dim - 1 {
                            if let Some(fi) = map.free_index(map.dof(*node, t)) {
                                out[fi] += wq * g(&x, t) * vals[l];
                            }
                        }
                    }
                    FaceLoadKind::FullVector => {
                        for c in 0..dim {
                            if let Some(fi) = map.free_index(map.dof(*node, c)) {
                                out[fi] += wq * g(&x, c) * vals[l];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Nodal interpolant of the fluid content `c0 p + alpha div u` on the
/// Biot-pressure space. The divergence of the degree-2 displacement is
/// evaluated pointwise at each pressure node (half-open cell convention);
/// slaves mirror masters.
pub fn fluid_content(
    params: &MaterialParams,
    maps: &crate::spaces::FieldMaps,
    u_full: &[f64],
    p_full: &[f64],
) -> Vec<f64> {
    let pmap = &maps.p;
    let umap = &maps.u;
    let mut out = vec![0.0; pmap.total_dofs];
    for node in 0..pmap.n_nodes() {
        let dof = pmap.dof(node, 0);
        if let crate::spaces::DofStatus::Slave(_) = pmap.status(dof) {
            continue;
        }
        let x = pmap.node_coord(node);
        let divu = umap.eval_div(u_full, &x).expect("pressure node inside Biot box");
        out[dof] = params.c0 * p_full[dof] + params.alpha * divu;
    }
    for node in 0..pmap.n_nodes() {
        let dof = pmap.dof(node, 0);
        if let crate::spaces::DofStatus::Slave(m) = pmap.status(dof) {
            out[dof] = out[m];
        }
    }
    out
}

/// Quadrature points of an interface face with physical coordinates,
/// shared by diagnostics and tests.
pub fn interface_quadrature(mesh: &MeshTopology, face: &InterfaceFace) -> Vec<([f64; 3], f64)> {
    face_quadrature(mesh, face)
}

/// L2-norm-squared of a finite element field computed by per-cell
/// quadrature with the 3-point rule (exact for the spaces in use).
pub fn l2_norm_sq(mesh: &MeshTopology, map: &DofMap, full: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (ci, cell) in mesh.cells.iter().enumerate() {
        if cell.domain != map.spec.domain {
            continue;
        }
        for (x, w) in cell_quadrature(mesh, ci) {
            let vals = map.eval(full, &x).unwrap();
            acc += w * vals.iter().map(|v| v * v).sum::<f64>();
        }
    }
    acc
}
