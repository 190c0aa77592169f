//! Dense operator lab for the nondegenerate case `c0 > 0`: builds the
//! first-order generator pencil `M_X dy/dt = J y` on the reduced state
//! `(u, w, p, vhat)` with the fluid velocity expanded in an orthonormal
//! basis of the discretely divergence-free subspace, assembles the adjoint
//! system independently from the sign-flipped interface conditions, and
//! verifies dissipativity and resolvent solvability.
//!
//! Forward generator rows (free DOFs, Galerkin form):
//!
//! - `a_E du/dt = a_E w`
//! - `rho_b M dw/dt = -a_E u + alpha (p, div .) + (p, . e_d)_I
//!    + beta([v - w].tau, . tau)_I`
//! - `c0 M dp/dt  = -alpha (div w, .) - (w.e_d, .)_I - k(grad p, grad .)
//!    + (v.e_d, .)_I`
//! - `rho_f Z^T M Z dvhat/dt = Z^T [ -2nu(D v, D .) - (p, . e_d)_I
//!    - beta([v - w].tau, . tau)_I ]`
//!
//! The adjoint rows flip the kinematic sign, the elastic/pressure gradient
//! signs, the normal-flux condition and the stress conditions while leaving
//! the slip pairing unchanged; assembling them independently must reproduce
//! the matrix transpose `Jt = J^T` entrywise.

use crate::error::SolveError;
use crate::forms::{BlockSystem, MaterialParams};
use crate::linalg::Csr;
use crate::spaces::Discretization;
use crate::timestepper::StateVector;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Largest reduced state the dense lab accepts.
pub const DENSE_CAP: usize = 3000;

/// Orthonormal basis of the null space of the discrete divergence
/// constraint on free fluid-velocity DOFs.
pub struct DivFreeBasis {
    pub z: DMatrix<f64>,
    /// Rank of the constraint block, for reporting.
    pub constraint_rank: usize,
}

/// Null space of `div_fv` via the spectral decomposition of `B^T B`;
/// eigenvectors are orthonormal and the zero/nonzero eigenvalue split is
/// far above roundoff at the grid sizes the lab accepts.
pub fn build_divfree_basis(sys: &BlockSystem, _disc: &Discretization) -> Result<DivFreeBasis, SolveError> {
    let b = sys.div_fv.to_dense();
    let nv = b.ncols();
    if nv > DENSE_CAP {
        return Err(SolveError::DenseCapExceeded { size: nv, cap: DENSE_CAP });
    }
    let btb = b.transpose() * &b;
    let eig = nalgebra::SymmetricEigen::new(btb);
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let tol = 1e-10 * lmax.max(1e-300);
    let mut cols = Vec::new();
    for (i, lam) in eig.eigenvalues.iter().enumerate() {
        if *lam <= tol {
            cols.push(eig.eigenvectors.column(i).clone_owned());
        }
    }
    let mut z = DMatrix::zeros(nv, cols.len());
    for (j, c) in cols.iter().enumerate() {
        z.set_column(j, c);
    }
    let rank = nv - z.ncols();
    Ok(DivFreeBasis { z, constraint_rank: rank })
}

/// Generator pencil `M_X dy/dt = J y` plus the basis that reduced it.
pub struct OperatorBundle {
    pub m_x: DMatrix<f64>,
    pub j: DMatrix<f64>,
    pub z: DMatrix<f64>,
    /// Block sizes (u, w, p, vhat).
    pub sizes: [usize; 4],
}

impl OperatorBundle {
    pub fn dim(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn offsets(&self) -> [usize; 5] {
        let mut off = [0usize; 5];
        for i in 0..4 {
            off[i + 1] = off[i] + self.sizes[i];
        }
        off
    }
}

fn dense(b: &Csr) -> DMatrix<f64> {
    b.to_dense()
}

fn check_cap(sizes: &[usize; 4]) -> Result<(), SolveError> {
    let total: usize = sizes.iter().sum();
    if total > DENSE_CAP {
        return Err(SolveError::DenseCapExceeded { size: total, cap: DENSE_CAP });
    }
    Ok(())
}

/// Assembles the Gram matrix of the energy inner product and the forward
/// generator. Requires `c0 > 0` so that the pressure carries mass.
pub fn build_generator(
    params: &MaterialParams,
    sys: &BlockSystem,
    basis: &DivFreeBasis,
    disc: &Discretization,
) -> Result<OperatorBundle, SolveError> {
    if params.c0 == 0.0 {
        return Err(SolveError::DegenerateStorage);
    }
    let z = &basis.z;
    let nu_ = disc.maps.u.free_count;
    let np = disc.maps.p.free_count;
    let nvh = z.ncols();
    let sizes = [nu_, nu_, np, nvh];
    check_cap(&sizes)?;
    let n = nu_ + nu_ + np + nvh;

    let mut m_x = DMatrix::zeros(n, n);
    let off = [0, nu_, 2 * nu_, 2 * nu_ + np];
    m_x.view_mut((off[0], off[0]), (nu_, nu_)).copy_from(&dense(&sys.a_e));
    m_x.view_mut((off[1], off[1]), (nu_, nu_)).copy_from(&dense(&sys.mass_w));
    m_x.view_mut((off[2], off[2]), (np, np)).copy_from(&dense(&sys.mass_p));
    let mvz = z.transpose() * dense(&sys.mass_v) * z;
    m_x.view_mut((off[3], off[3]), (nvh, nvh)).copy_from(&mvz);

    let mut j = DMatrix::zeros(n, n);
    // Kinematic row: a_E du/dt = a_E w.
    j.view_mut((off[0], off[1]), (nu_, nu_)).copy_from(&dense(&sys.a_e));
    // Elastic momentum row; the interface stress trace resolves through the
    // matching conditions into the pressure pull and the slip force.
    j.view_mut((off[1], off[0]), (nu_, nu_)).copy_from(&(-dense(&sys.a_e)));
    j.view_mut((off[1], off[1]), (nu_, nu_)).copy_from(&(-dense(&sys.bjs_ww)));
    j.view_mut((off[1], off[2]), (nu_, np))
        .copy_from(&(dense(&sys.grad_up) + dense(&sys.tn_up)));
    j.view_mut((off[1], off[3]), (nu_, nvh)).copy_from(&(dense(&sys.bjs_wv) * z));
    // Content row; the Darcy flux trace resolves into the normal-velocity
    // exchange.
    j.view_mut((off[2], off[1]), (np, nu_))
        .copy_from(&(-(dense(&sys.div_pu) + dense(&sys.tn_pu))));
    j.view_mut((off[2], off[2]), (np, np)).copy_from(&(-dense(&sys.darcy)));
    j.view_mut((off[2], off[3]), (np, nvh)).copy_from(&(dense(&sys.tv_pv) * z));
    // Fluid row, reduced by Z (the Stokes pressure gradient annihilates).
    j.view_mut((off[3], off[1]), (nvh, nu_)).copy_from(&(z.transpose() * dense(&sys.bjs_vw)));
    j.view_mut((off[3], off[2]), (nvh, np)).copy_from(&(-(z.transpose() * dense(&sys.tv_vp))));
    j.view_mut((off[3], off[3]), (nvh, nvh))
        .copy_from(&(-(z.transpose() * (dense(&sys.visc) + dense(&sys.bjs_vv)) * z)));

    Ok(OperatorBundle { m_x, j, z: z.clone(), sizes })
}

/// Assembles the adjoint system matrix independently from the adjoint
/// action and the sign-flipped interface conditions: the normal flux flips
/// (`k grad p~ . e_d = (v~ - w~) . e_d`), the stress matching flips
/// (`sigma_f e_d = -sigma_b e_d`), the pressure matching flips
/// (`p~ = +e_d . sigma_f e_d`), and the slip pairing is unchanged.
pub fn build_adjoint_system(
    params: &MaterialParams,
    sys: &BlockSystem,
    basis: &DivFreeBasis,
    disc: &Discretization,
) -> Result<DMatrix<f64>, SolveError> {
    if params.c0 == 0.0 {
        return Err(SolveError::DegenerateStorage);
    }
    let z = &basis.z;
    let nu_ = disc.maps.u.free_count;
    let np = disc.maps.p.free_count;
    let nvh = z.ncols();
    check_cap(&[nu_, nu_, np, nvh])?;
    let n = 2 * nu_ + np + nvh;
    let off = [0, nu_, 2 * nu_, 2 * nu_ + np];

    let mut jt = DMatrix::zeros(n, n);
    // Adjoint kinematic row: du~/dt = -w~.
    jt.view_mut((off[0], off[1]), (nu_, nu_)).copy_from(&(-dense(&sys.a_e)));
    // Adjoint momentum row: +E_0 u~ + alpha grad p~ in the interior; the
    // flipped stress and pressure matching turn the interface stress trace
    // into -(p~, xi.e_d) while the slip force keeps its sign.
    jt.view_mut((off[1], off[0]), (nu_, nu_)).copy_from(&dense(&sys.a_e));
    jt.view_mut((off[1], off[1]), (nu_, nu_)).copy_from(&(-dense(&sys.bjs_ww)));
    jt.view_mut((off[1], off[2]), (nu_, np))
        .copy_from(&(-(dense(&sys.grad_up) + dense(&sys.tn_up))));
    jt.view_mut((off[1], off[3]), (nu_, nvh)).copy_from(&(dense(&sys.bjs_wv) * z));
    // Adjoint content row: +alpha div w~ in the interior; the flipped normal
    // flux turns k<grad p~ . n, q> into +(w~.e_d, q) - (v~.e_d, q).
    jt.view_mut((off[2], off[1]), (np, nu_))
        .copy_from(&(dense(&sys.div_pu) + dense(&sys.tn_pu)));
    jt.view_mut((off[2], off[2]), (np, np)).copy_from(&(-dense(&sys.darcy)));
    jt.view_mut((off[2], off[3]), (np, nvh)).copy_from(&(-(dense(&sys.tv_pv) * z)));
    // Adjoint fluid row: the flipped pressure matching turns the normal
    // stress trace into +(p~, zeta.e_d); slip unchanged.
    jt.view_mut((off[3], off[1]), (nvh, nu_)).copy_from(&(z.transpose() * dense(&sys.bjs_vw)));
    jt.view_mut((off[3], off[2]), (nvh, np)).copy_from(&(z.transpose() * dense(&sys.tv_vp)));
    jt.view_mut((off[3], off[3]), (nvh, nvh))
        .copy_from(&(-(z.transpose() * (dense(&sys.visc) + dense(&sys.bjs_vv)) * z)));

    Ok(jt)
}

/// Outcome of the dissipativity check over random states.
#[derive(Debug, Clone, Copy)]
pub struct DissipativityReport {
    pub samples: usize,
    pub max_quadform: f64,
    pub max_identity_error: f64,
}

/// For random reduced states verifies `y^T J y <= tol * scale` and the
/// exact dissipation identity `-y^T J y = k||grad p||^2 + 2nu||D v||^2 +
/// beta||(v - w).tau||^2`, the right side assembled independently from the
/// Darcy, viscous and slip blocks.
pub fn check_dissipativity(
    bundle: &OperatorBundle,
    sys: &BlockSystem,
    samples: usize,
    seed: u64,
) -> Result<DissipativityReport, SolveError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = bundle.dim();
    let off = bundle.offsets();
    let jmax = bundle.j.amax();
    let mut max_q = f64::NEG_INFINITY;
    let mut max_err = 0.0f64;
    for sample in 0..samples {
        let y = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let q = (y.transpose() * &bundle.j * &y)[(0, 0)];
        let scale = jmax * y.norm_squared();
        if q > 1e-10 * scale {
            return Err(SolveError::ReportsViolation { sample, value: q, bound: 1e-10 * scale });
        }
        max_q = max_q.max(q);

        let w: Vec<f64> = y.as_slice()[off[1]..off[2]].to_vec();
        let p: Vec<f64> = y.as_slice()[off[2]..off[3]].to_vec();
        let vh = DVector::from_column_slice(&y.as_slice()[off[3]..off[4]]);
        let v_free = (&bundle.z * vh).as_slice().to_vec();
        let slip = sys.bjs_vv.quadform(&v_free, &v_free) - sys.bjs_vw.quadform(&v_free, &w)
            - sys.bjs_wv.quadform(&w, &v_free)
            + sys.bjs_ww.quadform(&w, &w);
        let dissipator =
            sys.darcy.quadform(&p, &p) + sys.visc.quadform(&v_free, &v_free) + slip;
        let err = (q + dissipator).abs();
        let rel = err / dissipator.abs().max(scale * 1e-14).max(1e-300);
        if rel > 1e-10 {
            return Err(SolveError::ReportsViolation { sample, value: rel, bound: 1e-10 });
        }
        max_err = max_err.max(rel);
    }
    Ok(DissipativityReport { samples, max_quadform: max_q, max_identity_error: max_err })
}

/// Solves the stationary adjoint problem `J^T y = M_X y*` (the discrete
/// resolvent equation at zero) and verifies the forward matrix is
/// nonsingular as well. Returns the solution with its relative residual
/// checked against `tol`.
pub fn solve_resolvent(
    bundle: &OperatorBundle,
    y_star: &DVector<f64>,
    tol: f64,
) -> Result<DVector<f64>, SolveError> {
    let jt = bundle.j.transpose();
    let rhs = &bundle.m_x * y_star;
    let lu = jt.clone().lu();
    let y = lu
        .solve(&rhs)
        .ok_or_else(|| SolveError::SingularSystem("adjoint system matrix".into()))?;
    let resid = (&jt * &y - &rhs).norm();
    let rel = resid / rhs.norm().max(1e-300);
    if !(rel.is_finite()) || (rhs.norm() > 0.0 && rel > tol) {
        return Err(SolveError::SolverFailure { residual: rel, tol });
    }
    // Forward invertibility, used at the closing step of the argument.
    if !bundle.j.clone().lu().is_invertible() {
        return Err(SolveError::SingularSystem("forward system matrix".into()));
    }
    Ok(y)
}

/// Packs a full state into reduced coordinates `(u, w, p, Z^T v)`. Exact
/// when the fluid block lies in the divergence-free subspace.
pub fn reduced_from_state(
    bundle: &OperatorBundle,
    disc: &Discretization,
    state: &StateVector,
) -> DVector<f64> {
    let off = bundle.offsets();
    let mut y = DVector::zeros(bundle.dim());
    let u = disc.maps.u.gather_free(&state.u);
    let w = disc.maps.u.gather_free(&state.w);
    let p = disc.maps.p.gather_free(&state.p);
    let v = DVector::from_column_slice(&disc.maps.v.gather_free(&state.v));
    y.as_mut_slice()[off[0]..off[1]].copy_from_slice(&u);
    y.as_mut_slice()[off[1]..off[2]].copy_from_slice(&w);
    y.as_mut_slice()[off[2]..off[3]].copy_from_slice(&p);
    let vh = bundle.z.transpose() * v;
    y.as_mut_slice()[off[3]..off[4]].copy_from_slice(vh.as_slice());
    y
}

/// Expands reduced coordinates to a full state (`pf = 0`).
pub fn state_from_reduced(
    bundle: &OperatorBundle,
    disc: &Discretization,
    y: &DVector<f64>,
    t: f64,
) -> StateVector {
    let off = bundle.offsets();
    let v = &bundle.z * DVector::from_column_slice(&y.as_slice()[off[3]..off[4]]);
    StateVector {
        t,
        u: disc.maps.u.scatter_free(&y.as_slice()[off[0]..off[1]]),
        w: disc.maps.u.scatter_free(&y.as_slice()[off[1]..off[2]]),
        p: disc.maps.p.scatter_free(&y.as_slice()[off[2]..off[3]]),
        v: disc.maps.v.scatter_free(v.as_slice()),
        pf: vec![0.0; disc.maps.pf.total_dofs],
    }
}

/// Dense matrix exponential propagation `y(t) = exp(t M_X^{-1} J) y0`.
pub fn propagate_expm(bundle: &OperatorBundle, y0: &DVector<f64>, t: f64) -> DVector<f64> {
    let lu = bundle.m_x.clone().lu();
    let a = lu.solve(&bundle.j).expect("M_X is SPD");
    let e = (a * t).exp();
    e * y0
}

/// Energy norm of a reduced state.
pub fn x_norm(bundle: &OperatorBundle, y: &DVector<f64>) -> f64 {
    ((y.transpose() * &bundle.m_x * y)[(0, 0)]).max(0.0).sqrt()
}
