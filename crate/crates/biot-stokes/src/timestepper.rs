//! Monolithic theta-scheme time integration of the coupled semi-discrete
//! system. One sparse saddle-point solve advances all five blocks
//! `(u, w, p, v, pf)` per step.
//!
//! Scheme layout, with `g^t = theta g^{n+1} + (1-theta) g^n`:
//!
//! - kinematic row (tested in the elastic-energy inner product):
//!   `a_E((u' - u)/dt, .) = a_E(w^t, .)`;
//! - elastic momentum: `rho_b (dw/dt, xi) + a_E(u^t, xi) - alpha (p^s, div xi)
//!   - (p^s, xi.e_d)_I - beta([v - w]^t.tau, xi.tau)_I = loads`;
//! - content: `(c0 dp/dt + alpha div du/dt, q) + (du/dt . e_d, q)_I
//!   + k (grad p^s, grad q) - (v^t . e_d, q)_I = loads`;
//! - fluid momentum: `rho_f (dv/dt, zeta) + 2 nu (D v^t, D zeta) - (pf', div zeta)
//!   + (p^s, zeta.e_d)_I + beta([v - w]^t.tau, zeta.tau)_I = loads`;
//! - constraint: `(div v', q) = 0`.
//!
//! The pressure weight `s` equals `theta` when `c0 > 0`. In the degenerate
//! case `c0 = 0` the Biot pressure is algebraic and every pressure term is
//! taken fully implicit (`s = 1`), which suppresses the midpoint ringing of
//! the differential-algebraic structure while the summed-by-parts pairing of
//! the remaining couplings keeps the discrete energy identity exact.

use crate::error::{ScenarioError, SolveError};
use crate::forms::{
    assemble_interface_load, assemble_load, BlockSystem, FaceLoadKind, MaterialParams,
};
use crate::linalg::{BlockCompose, Csr, SparseLu};
use crate::spaces::Discretization;

pub use crate::linalg::solve_saddle;

/// Time-discretization parameters. `theta` is 1 (backward Euler) or 1/2
/// (Crank-Nicolson); the solver tolerance is a relative residual bound.
#[derive(Debug, Clone, Copy)]
pub struct SchemeConfig {
    pub theta: f64,
    pub dt: f64,
    pub steps: usize,
    pub tol: f64,
}

impl SchemeConfig {
    pub fn new(theta: f64, dt: f64, steps: usize, tol: f64) -> Result<Self, ScenarioError> {
        if !(theta == 1.0 || theta == 0.5) {
            return Err(ScenarioError::InconsistentData(format!(
                "theta must be 1 or 1/2, got {theta}"
            )));
        }
        if !(dt > 0.0) {
            return Err(ScenarioError::InconsistentData(format!("dt must be > 0, got {dt}")));
        }
        Ok(SchemeConfig { theta, dt, steps, tol })
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.steps as f64
    }
}

/// Coefficient blocks of one time level, stored full-length with all
/// constraints satisfied (slaves mirror masters, Dirichlet DOFs zero).
#[derive(Debug, Clone)]
pub struct StateVector {
    pub t: f64,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub p: Vec<f64>,
    pub v: Vec<f64>,
    pub pf: Vec<f64>,
}

impl StateVector {
    pub fn zero(disc: &Discretization) -> Self {
        StateVector {
            t: 0.0,
            u: vec![0.0; disc.maps.u.total_dofs],
            w: vec![0.0; disc.maps.u.total_dofs],
            p: vec![0.0; disc.maps.p.total_dofs],
            v: vec![0.0; disc.maps.v.total_dofs],
            pf: vec![0.0; disc.maps.pf.total_dofs],
        }
    }

    /// Verifies the constraint invariants: slaves mirror masters and
    /// Dirichlet DOFs are zero, in every block.
    pub fn constraints_ok(&self, disc: &Discretization) -> bool {
        use crate::spaces::DofStatus;
        let check = |map: &crate::spaces::DofMap, full: &[f64]| -> bool {
            (0..map.total_dofs).all(|d| match map.status(d) {
                DofStatus::Free(_) => true,
                DofStatus::Slave(m) => full[d] == full[m],
                DofStatus::Fixed => full[d] == 0.0,
            })
        };
        check(&disc.maps.u, &self.u)
            && check(&disc.maps.u, &self.w)
            && check(&disc.maps.p, &self.p)
            && check(&disc.maps.v, &self.v)
            && check(&disc.maps.pf, &self.pf)
    }
}

/// Time-dependent source field: `(point, component, time) -> value`.
pub type TimeField = std::sync::Arc<dyn Fn(&[f64; 3], usize, f64) -> f64 + Send + Sync>;

/// Interface corrections for manufactured solutions, one per interface
/// condition: `g1` enters the content row, `g2` (per tangent axis) the slip
/// pairing, `g3` (vector) the stress matching and `g4` the normal-stress /
/// pressure matching.
#[derive(Clone)]
pub struct InterfaceSources {
    pub g1: TimeField,
    pub g2: TimeField,
    pub g3: TimeField,
    pub g4: TimeField,
}

/// Volume sources plus optional interface corrections.
#[derive(Clone, Default)]
pub struct Sources {
    pub f_b: Option<TimeField>,
    pub s: Option<TimeField>,
    pub f_f: Option<TimeField>,
    pub interface: Option<InterfaceSources>,
}

impl Sources {
    pub fn none() -> Self {
        Sources::default()
    }

    pub fn is_zero(&self) -> bool {
        self.f_b.is_none() && self.s.is_none() && self.f_f.is_none() && self.interface.is_none()
    }
}

/// Assembled load vectors (free DOFs) of the three sourced equations at one
/// time instant.
#[derive(Debug, Clone)]
pub struct Loads {
    pub momentum: Vec<f64>,
    pub content: Vec<f64>,
    pub fluid: Vec<f64>,
}

/// Evaluates the right-hand-side functionals at time `t`, including the
/// interface corrections with the signs they acquire in the weak form.
pub fn assemble_loads(disc: &Discretization, sources: &Sources, t: f64) -> Loads {
    let mesh = &disc.mesh;
    let maps = &disc.maps;
    let mut momentum = vec![0.0; maps.u.free_count];
    let mut content = vec![0.0; maps.p.free_count];
    let mut fluid = vec![0.0; maps.v.free_count];

    if let Some(f) = &sources.f_b {
        momentum = assemble_load(mesh, &maps.u, &|x, c| f(x, c, t));
    }
    if let Some(s) = &sources.s {
        content = assemble_load(mesh, &maps.p, &|x, c| s(x, c, t));
    }
    if let Some(f) = &sources.f_f {
        fluid = assemble_load(mesh, &maps.v, &|x, c| f(x, c, t));
    }
    if let Some(g) = &sources.interface {
        let add = |dst: &mut Vec<f64>, src: Vec<f64>, sgn: f64| {
            for (d, s) in dst.iter_mut().zip(src.iter()) {
                *d += sgn * s;
            }
        };
        // Momentum: + (g3, xi) - (g4, xi.e_d) - sum_tau (g2, xi.tau).
        add(
            &mut momentum,
            assemble_interface_load(mesh, &maps.u, FaceLoadKind::FullVector, &|x, c| (g.g3)(x, c, t)),
            1.0,
        );
        add(
            &mut momentum,
            assemble_interface_load(mesh, &maps.u, FaceLoadKind::Normal, &|x, c| (g.g4)(x, c, t)),
            -1.0,
        );
        add(
            &mut momentum,
            assemble_interface_load(mesh, &maps.u, FaceLoadKind::Tangential, &|x, c| (g.g2)(x, c, t)),
            -1.0,
        );
        // Content: + (g1, q).
        add(
            &mut content,
            assemble_interface_load(mesh, &maps.p, FaceLoadKind::Scalar, &|x, c| (g.g1)(x, c, t)),
            1.0,
        );
        // Fluid: + (g4, zeta.e_d) + sum_tau (g2, zeta.tau).
        add(
            &mut fluid,
            assemble_interface_load(mesh, &maps.v, FaceLoadKind::Normal, &|x, c| (g.g4)(x, c, t)),
            1.0,
        );
        add(
            &mut fluid,
            assemble_interface_load(mesh, &maps.v, FaceLoadKind::Tangential, &|x, c| (g.g2)(x, c, t)),
            1.0,
        );
    }
    Loads { momentum, content, fluid }
}

/// Block order of the monolithic per-step system.
const BU: usize = 0;
const BW: usize = 1;
const BP: usize = 2;
const BV: usize = 3;
const BPF: usize = 4;

/// Factored per-step operator. The matrix depends only on `(dt, theta)` and
/// the assembled blocks, so one factorization serves the whole trajectory.
pub struct Stepper<'a> {
    pub disc: &'a Discretization,
    pub sys: &'a BlockSystem,
    pub params: MaterialParams,
    pub scheme: SchemeConfig,
    matrix: Csr,
    lu: SparseLu,
    sizes: [usize; 5],
}

/// Pressure weight: fully implicit in the degenerate case.
pub fn pressure_weight(theta: f64, c0: f64) -> f64 {
    if c0 == 0.0 {
        1.0
    } else {
        theta
    }
}

impl<'a> Stepper<'a> {
    pub fn new(
        disc: &'a Discretization,
        sys: &'a BlockSystem,
        params: MaterialParams,
        scheme: SchemeConfig,
    ) -> Result<Self, SolveError> {
        let matrix = build_step_matrix(disc, sys, &params, &scheme);
        let lu = SparseLu::factor(&matrix)?;
        let sizes = block_sizes(disc);
        Ok(Stepper { disc, sys, params, scheme, matrix, lu, sizes })
    }

    pub fn monolithic_matrix(&self) -> &Csr {
        &self.matrix
    }

    pub fn sigma(&self) -> f64 {
        pressure_weight(self.scheme.theta, self.params.c0)
    }

    /// Right-hand side of the per-step system from the previous state and
    /// the theta-averaged loads.
    pub fn step_rhs(&self, state: &StateVector, loads_n: &Loads, loads_np1: &Loads) -> Vec<f64> {
        let maps = &self.disc.maps;
        let sys = self.sys;
        let dt = self.scheme.dt;
        let th = self.scheme.theta;
        let sg = self.sigma();
        let u = maps.u.gather_free(&state.u);
        let w = maps.u.gather_free(&state.w);
        let p = maps.p.gather_free(&state.p);
        let v = maps.v.gather_free(&state.v);

        let avg = |a: &[f64], b: &[f64], weight: f64| -> Vec<f64> {
            a.iter().zip(b.iter()).map(|(x, y)| weight * y + (1.0 - weight) * x).collect()
        };
        let lm = avg(&loads_n.momentum, &loads_np1.momentum, th);
        let lc = avg(&loads_n.content, &loads_np1.content, sg);
        let lf = avg(&loads_n.fluid, &loads_np1.fluid, th);

        let mut rhs = vec![0.0; self.matrix.nrows];
        let off = offsets(&self.sizes);

        // Kinematic row: a_E u + dt (1 - theta) a_E w.
        let mut r = sys.a_e.matvec(&u);
        for (ri, wi) in r.iter_mut().zip(sys.a_e.matvec(&w)) {
            *ri += dt * (1.0 - th) * wi;
        }
        rhs[off[BU]..off[BU] + self.sizes[BU]].copy_from_slice(&r);

        // Momentum row.
        let mut r = sys.mass_w.matvec(&w);
        let accum = |r: &mut Vec<f64>, v: Vec<f64>, s: f64| {
            for (ri, vi) in r.iter_mut().zip(v) {
                *ri += s * vi;
            }
        };
        accum(&mut r, sys.a_e.matvec(&u), -dt * (1.0 - th));
        accum(&mut r, sys.grad_up.matvec(&p), dt * (1.0 - sg));
        accum(&mut r, sys.tn_up.matvec(&p), dt * (1.0 - sg));
        accum(&mut r, sys.bjs_wv.matvec(&v), dt * (1.0 - th));
        accum(&mut r, sys.bjs_ww.matvec(&w), -dt * (1.0 - th));
        accum(&mut r, lm, dt);
        rhs[off[BW]..off[BW] + self.sizes[BW]].copy_from_slice(&r);

        // Content row.
        let mut r = sys.mass_p.matvec(&p);
        accum(&mut r, sys.div_pu.matvec(&u), 1.0);
        accum(&mut r, sys.tn_pu.matvec(&u), 1.0);
        accum(&mut r, sys.darcy.matvec(&p), -dt * (1.0 - sg));
        accum(&mut r, sys.tv_pv.matvec(&v), dt * (1.0 - th));
        accum(&mut r, lc, dt);
        rhs[off[BP]..off[BP] + self.sizes[BP]].copy_from_slice(&r);

        // Fluid row.
        let mut r = sys.mass_v.matvec(&v);
        accum(&mut r, sys.visc.matvec(&v), -dt * (1.0 - th));
        accum(&mut r, sys.bjs_vv.matvec(&v), -dt * (1.0 - th));
        accum(&mut r, sys.bjs_vw.matvec(&w), dt * (1.0 - th));
        accum(&mut r, sys.tv_vp.matvec(&p), -dt * (1.0 - sg));
        accum(&mut r, lf, dt);
        rhs[off[BV]..off[BV] + self.sizes[BV]].copy_from_slice(&r);

        // Constraint row stays zero.
        rhs
    }

    /// Advances one step. `loads_n` and `loads_np1` are the load vectors at
    /// the old and new time levels.
    pub fn step(
        &self,
        state: &StateVector,
        loads_n: &Loads,
        loads_np1: &Loads,
    ) -> Result<StateVector, SolveError> {
        let rhs = self.step_rhs(state, loads_n, loads_np1);
        let sol = self.lu.solve(&rhs, self.scheme.tol)?;
        Ok(self.unpack(state.t + self.scheme.dt, &sol))
    }

    /// Splits a monolithic free-DOF solution into a full state.
    pub fn unpack(&self, t: f64, sol: &[f64]) -> StateVector {
        let maps = &self.disc.maps;
        let off = offsets(&self.sizes);
        StateVector {
            t,
            u: maps.u.scatter_free(&sol[off[BU]..off[BU] + self.sizes[BU]]),
            w: maps.u.scatter_free(&sol[off[BW]..off[BW] + self.sizes[BW]]),
            p: maps.p.scatter_free(&sol[off[BP]..off[BP] + self.sizes[BP]]),
            v: maps.v.scatter_free(&sol[off[BV]..off[BV] + self.sizes[BV]]),
            pf: maps.pf.scatter_free(&sol[off[BPF]..off[BPF] + self.sizes[BPF]]),
        }
    }

    /// Source-work increment of one step, using the same theta averages as
    /// the scheme so the discrete balance closes exactly.
    pub fn work_increment(
        &self,
        state_n: &StateVector,
        state_np1: &StateVector,
        loads_n: &Loads,
        loads_np1: &Loads,
    ) -> f64 {
        let maps = &self.disc.maps;
        let th = self.scheme.theta;
        let sg = self.sigma();
        let dt = self.scheme.dt;
        let avg_state = |a: &[f64], b: &[f64], weight: f64| -> Vec<f64> {
            a.iter().zip(b.iter()).map(|(x, y)| weight * y + (1.0 - weight) * x).collect()
        };
        let wth = avg_state(&maps.u.gather_free(&state_n.w), &maps.u.gather_free(&state_np1.w), th);
        let psg = avg_state(&maps.p.gather_free(&state_n.p), &maps.p.gather_free(&state_np1.p), sg);
        let vth = avg_state(&maps.v.gather_free(&state_n.v), &maps.v.gather_free(&state_np1.v), th);
        let lm: Vec<f64> = loads_n
            .momentum
            .iter()
            .zip(&loads_np1.momentum)
            .map(|(a, b)| th * b + (1.0 - th) * a)
            .collect();
        let lc: Vec<f64> = loads_n
            .content
            .iter()
            .zip(&loads_np1.content)
            .map(|(a, b)| sg * b + (1.0 - sg) * a)
            .collect();
        let lf: Vec<f64> = loads_n
            .fluid
            .iter()
            .zip(&loads_np1.fluid)
            .map(|(a, b)| th * b + (1.0 - th) * a)
            .collect();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        dt * (dot(&lm, &wth) + dot(&lc, &psg) + dot(&lf, &vth))
    }
}

fn block_sizes(disc: &Discretization) -> [usize; 5] {
    [
        disc.maps.u.free_count,
        disc.maps.u.free_count,
        disc.maps.p.free_count,
        disc.maps.v.free_count,
        disc.maps.pf.free_count,
    ]
}

fn offsets(sizes: &[usize; 5]) -> [usize; 6] {
    let mut off = [0usize; 6];
    for i in 0..5 {
        off[i + 1] = off[i] + sizes[i];
    }
    off
}

/// Assembles the monolithic per-step matrix. The momentum, content and
/// fluid rows are scaled by `dt`.
pub fn build_step_matrix(
    disc: &Discretization,
    sys: &BlockSystem,
    params: &MaterialParams,
    scheme: &SchemeConfig,
) -> Csr {
    let sizes = block_sizes(disc);
    let dt = scheme.dt;
    let th = scheme.theta;
    let sg = pressure_weight(th, params.c0);
    let mut b = BlockCompose::new(&sizes, &sizes);

    // Kinematic row.
    b.add(BU, BU, &sys.a_e, 1.0);
    b.add(BU, BW, &sys.a_e, -dt * th);
    // Momentum row.
    b.add(BW, BU, &sys.a_e, dt * th);
    b.add(BW, BW, &sys.mass_w, 1.0);
    b.add(BW, BW, &sys.bjs_ww, dt * th);
    b.add(BW, BP, &sys.grad_up, -dt * sg);
    b.add(BW, BP, &sys.tn_up, -dt * sg);
    b.add(BW, BV, &sys.bjs_wv, -dt * th);
    // Content row.
    b.add(BP, BU, &sys.div_pu, 1.0);
    b.add(BP, BU, &sys.tn_pu, 1.0);
    b.add(BP, BP, &sys.mass_p, 1.0);
    b.add(BP, BP, &sys.darcy, dt * sg);
    b.add(BP, BV, &sys.tv_pv, -dt * th);
    // Fluid row.
    b.add(BV, BW, &sys.bjs_vw, -dt * th);
    b.add(BV, BP, &sys.tv_vp, dt * sg);
    b.add(BV, BV, &sys.mass_v, 1.0);
    b.add(BV, BV, &sys.visc, dt * th);
    b.add(BV, BV, &sys.bjs_vv, dt * th);
    b.add_t(BV, BPF, &sys.div_fv, -dt);
    // Constraint row.
    b.add(BPF, BV, &sys.div_fv, 1.0);

    b.finish()
}

/// States plus per-step cumulative source work of one run.
pub struct Trajectory {
    pub states: Vec<StateVector>,
    /// Cumulative source work; `work[i]` corresponds to `states[i]`.
    pub work: Vec<f64>,
}

/// Integrates `steps` steps from `initial` under the given sources.
pub fn run(
    stepper: &Stepper,
    initial: StateVector,
    sources: &Sources,
) -> Result<Trajectory, SolveError> {
    let mut states = Vec::with_capacity(stepper.scheme.steps + 1);
    let mut work = Vec::with_capacity(stepper.scheme.steps + 1);
    let mut loads_n = assemble_loads(stepper.disc, sources, initial.t);
    states.push(initial);
    work.push(0.0);
    for _ in 0..stepper.scheme.steps {
        let prev = states.last().unwrap();
        let loads_np1 = assemble_loads(stepper.disc, sources, prev.t + stepper.scheme.dt);
        let next = stepper.step(prev, &loads_n, &loads_np1)?;
        let dw = stepper.work_increment(prev, &next, &loads_n, &loads_np1);
        work.push(work.last().unwrap() + dw);
        states.push(next);
        loads_n = loads_np1;
    }
    Ok(Trajectory { states, work })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::assemble;
    use crate::mesh::GridSpec;
    use crate::spaces::Discretization;

    fn setup(dim: usize, n: usize, c0: f64) -> (Discretization, BlockSystem, MaterialParams) {
        let disc = Discretization::build(GridSpec { dim, n }).unwrap();
        let mut params = MaterialParams::unit();
        params.c0 = c0;
        let sys = assemble(&params, &disc);
        (disc, sys, params)
    }

    fn random_state(disc: &Discretization, seed: u64) -> StateVector {
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let maps = &disc.maps;
        let fill = |map: &crate::spaces::DofMap, next: &mut dyn FnMut() -> f64| {
            let free: Vec<f64> = (0..map.free_count).map(|_| next()).collect();
            map.scatter_free(&free)
        };
        StateVector {
            t: 0.0,
            u: fill(&maps.u, &mut next),
            w: fill(&maps.u, &mut next),
            p: fill(&maps.p, &mut next),
            v: fill(&maps.v, &mut next),
            pf: fill(&maps.pf, &mut next),
        }
    }

    #[test]
    fn zero_state_stays_zero() {
        let (disc, sys, params) = setup(2, 2, 1.0);
        let scheme = SchemeConfig::new(1.0, 0.1, 5, 1e-12).unwrap();
        let stepper = Stepper::new(&disc, &sys, params, scheme).unwrap();
        let traj = run(&stepper, StateVector::zero(&disc), &Sources::none()).unwrap();
        for s in &traj.states {
            assert!(s.u.iter().all(|v| *v == 0.0));
            assert!(s.pf.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn trajectory_scales_linearly() {
        let (disc, sys, params) = setup(2, 2, 1.0);
        let scheme = SchemeConfig::new(0.5, 0.05, 4, 1e-12).unwrap();
        let stepper = Stepper::new(&disc, &sys, params, scheme).unwrap();
        let base = random_state(&disc, 7);
        let mut scaled = base.clone();
        let s = 3.5;
        for blk in [&mut scaled.u, &mut scaled.w, &mut scaled.p, &mut scaled.v, &mut scaled.pf] {
            for x in blk.iter_mut() {
                *x *= s;
            }
        }
        let t1 = run(&stepper, base, &Sources::none()).unwrap();
        let t2 = run(&stepper, scaled, &Sources::none()).unwrap();
        for (a, b) in t1.states.iter().zip(&t2.states) {
            for (blk_a, blk_b) in [(&a.u, &b.u), (&a.w, &b.w), (&a.p, &b.p), (&a.v, &b.v)] {
                let err = blk_a
                    .iter()
                    .zip(blk_b.iter())
                    .map(|(x, y)| (s * x - y).abs())
                    .fold(0.0f64, f64::max);
                let scale = blk_b.iter().map(|x| x.abs()).fold(0.0f64, f64::max).max(1e-30);
                assert!(err <= 1e-10 * scale.max(1.0), "linearity violated: {err} vs {scale}");
            }
        }
    }

    #[test]
    fn step_matches_dense_lu_oracle() {
        let (disc, sys, params) = setup(2, 2, 1.0);
        let scheme = SchemeConfig::new(1.0, 0.07, 1, 1e-12).unwrap();
        let stepper = Stepper::new(&disc, &sys, params, scheme).unwrap();
        let state = random_state(&disc, 99);
        let loads = assemble_loads(&disc, &Sources::none(), 0.0);
        let next = stepper.step(&state, &loads, &loads).unwrap();

        let rhs = stepper.step_rhs(&state, &loads, &loads);
        let dense = stepper.monolithic_matrix().to_dense();
        let sol = dense.lu().solve(&nalgebra::DVector::from_column_slice(&rhs)).unwrap();
        let oracle = stepper.unpack(scheme.dt, sol.as_slice());
        for (a, b) in [
            (&next.u, &oracle.u),
            (&next.w, &oracle.w),
            (&next.p, &oracle.p),
            (&next.v, &oracle.v),
            (&next.pf, &oracle.pf),
        ] {
            let scale = b.iter().map(|x| x.abs()).fold(0.0f64, f64::max).max(1.0);
            let err = a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0f64, f64::max);
            assert!(err <= 1e-10 * scale, "{err} vs scale {scale}");
        }
    }

    #[test]
    fn kinematic_row_is_coefficient_identity() {
        // After a step, (u' - u)/dt equals the theta average of w.
        let (disc, sys, params) = setup(2, 2, 1.0);
        for theta in [1.0, 0.5] {
            let scheme = SchemeConfig::new(theta, 0.03, 1, 1e-12).unwrap();
            let stepper = Stepper::new(&disc, &sys, params, scheme).unwrap();
            let state = random_state(&disc, 3);
            let loads = assemble_loads(&disc, &Sources::none(), 0.0);
            let next = stepper.step(&state, &loads, &loads).unwrap();
            for i in 0..disc.maps.u.total_dofs {
                let du = (next.u[i] - state.u[i]) / scheme.dt;
                let wavg = theta * next.w[i] + (1.0 - theta) * state.w[i];
                assert!((du - wavg).abs() < 1e-9, "dof {i}: {du} vs {wavg}");
            }
        }
    }

    #[test]
    fn degenerate_storage_systems_remain_solvable() {
        for (dim, n) in [(2, 1), (2, 2), (3, 1)] {
            let (disc, sys, params) = setup(dim, n, 0.0);
            for (theta, dt) in [(1.0, 0.1), (0.5, 0.02), (1.0, 0.5)] {
                let scheme = SchemeConfig::new(theta, dt, 2, 1e-11).unwrap();
                let stepper = Stepper::new(&disc, &sys, params, scheme).unwrap();
                let state = random_state(&disc, 11);
                let traj = run(&stepper, state, &Sources::none());
                assert!(traj.is_ok(), "dim={dim} n={n} theta={theta} dt={dt}");
            }
        }
    }

    #[test]
    fn states_satisfy_constraints_after_stepping() {
        let (disc, sys, params) = setup(2, 2, 1.0);
        let scheme = SchemeConfig::new(0.5, 0.05, 4, 1e-12).unwrap();
        let stepper = Stepper::new(&disc, &sys, params, scheme).unwrap();
        let init = random_state(&disc, 17);
        assert!(init.constraints_ok(&disc));
        let traj = run(&stepper, init, &Sources::none()).unwrap();
        for s in &traj.states {
            assert!(s.constraints_ok(&disc));
            assert_eq!(s.u.len(), disc.maps.u.total_dofs);
            assert_eq!(s.p.len(), disc.maps.p.total_dofs);
            assert_eq!(s.pf.len(), disc.maps.pf.total_dofs);
        }
    }

    #[test]
    fn divergence_constraint_is_enforced() {
        let (disc, sys, params) = setup(2, 2, 1.0);
        let scheme = SchemeConfig::new(0.5, 0.05, 3, 1e-12).unwrap();
        let stepper = Stepper::new(&disc, &sys, params, scheme).unwrap();
        let traj = run(&stepper, random_state(&disc, 21), &Sources::none()).unwrap();
        for s in traj.states.iter().skip(1) {
            let vfree = disc.maps.v.gather_free(&s.v);
            let c = sys.div_fv.matvec(&vfree);
            let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(norm < 1e-10, "constraint residual {norm}");
        }
    }

    #[test]
    fn deterministic_reruns_bit_for_bit() {
        let (disc, sys, params) = setup(2, 2, 1.0);
        let scheme = SchemeConfig::new(0.5, 0.05, 5, 1e-12).unwrap();
        let stepper = Stepper::new(&disc, &sys, params, scheme).unwrap();
        let t1 = run(&stepper, random_state(&disc, 5), &Sources::none()).unwrap();
        let t2 = run(&stepper, random_state(&disc, 5), &Sources::none()).unwrap();
        for (a, b) in t1.states.iter().zip(&t2.states) {
            assert!(a.u == b.u && a.w == b.w && a.p == b.p && a.v == b.v && a.pf == b.pf);
        }
    }

    #[test]
    fn saddle_point_inertia_on_fluid_block() {
        // The symmetric fluid sub-system [[A, B^T], [B, 0]] has inertia
        // (n_v, n_pf, 0) for SPD A and full-rank B.
        let (disc, sys, _params) = setup(2, 1, 1.0);
        let nv = disc.maps.v.free_count;
        let npf = disc.maps.pf.free_count;
        let mut m = nalgebra::DMatrix::<f64>::zeros(nv + npf, nv + npf);
        let a = sys.mass_v.to_dense() + sys.visc.to_dense();
        m.view_mut((0, 0), (nv, nv)).copy_from(&a);
        let bt = sys.div_fv.to_dense().transpose();
        m.view_mut((0, nv), (nv, npf)).copy_from(&bt);
        m.view_mut((nv, 0), (npf, nv)).copy_from(&sys.div_fv.to_dense());
        let eig = nalgebra::SymmetricEigen::new(m);
        let pos = eig.eigenvalues.iter().filter(|e| **e > 1e-12).count();
        let neg = eig.eigenvalues.iter().filter(|e| **e < -1e-12).count();
        assert_eq!(pos, nv);
        assert_eq!(neg, npf);
    }
}
