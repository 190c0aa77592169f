//! Reproducible experiments: manufactured-solution convergence studies, the
//! vanishing-storage limit, zero-data and permuted-assembly uniqueness
//! probes, and stock decaying initial-value runs.

use crate::diagnostics::{energy_reports, x_norm_sq, EnergyReport};
use crate::error::ScenarioError;
use crate::forms::{assemble, BlockSystem, MaterialParams};
use crate::linalg::{BlockCompose, Csr, SparseLu};
use crate::mesh::{cell_quadrature, Domain, GridSpec};
use crate::spaces::Discretization;
use crate::timestepper::{
    assemble_loads, run, InterfaceSources, SchemeConfig, Sources, StateVector, Stepper, TimeField,
    Trajectory,
};
use std::sync::Arc;

/// Spatial part of a closed-form solution with the analytic derivatives the
/// source generation needs.
pub struct SpatialFields {
    pub u: Arc<dyn Fn(&[f64; 3]) -> [f64; 3] + Send + Sync>,
    /// Rows are components, columns derivatives.
    pub grad_u: Arc<dyn Fn(&[f64; 3]) -> [[f64; 3]; 3] + Send + Sync>,
    pub lap_u: Arc<dyn Fn(&[f64; 3]) -> [f64; 3] + Send + Sync>,
    pub grad_div_u: Arc<dyn Fn(&[f64; 3]) -> [f64; 3] + Send + Sync>,
    pub div_u: Arc<dyn Fn(&[f64; 3]) -> f64 + Send + Sync>,
    pub p: Arc<dyn Fn(&[f64; 3]) -> f64 + Send + Sync>,
    pub grad_p: Arc<dyn Fn(&[f64; 3]) -> [f64; 3] + Send + Sync>,
    pub lap_p: Arc<dyn Fn(&[f64; 3]) -> f64 + Send + Sync>,
    pub v: Arc<dyn Fn(&[f64; 3]) -> [f64; 3] + Send + Sync>,
    pub grad_v: Arc<dyn Fn(&[f64; 3]) -> [[f64; 3]; 3] + Send + Sync>,
    pub lap_v: Arc<dyn Fn(&[f64; 3]) -> [f64; 3] + Send + Sync>,
    pub pf: Arc<dyn Fn(&[f64; 3]) -> f64 + Send + Sync>,
    pub grad_pf: Arc<dyn Fn(&[f64; 3]) -> [f64; 3] + Send + Sync>,
}

/// Separable time factor with two derivatives.
#[derive(Clone, Copy)]
pub struct TimeFactor {
    pub value: fn(f64) -> f64,
    pub dt: fn(f64) -> f64,
    pub dtt: fn(f64) -> f64,
}

impl TimeFactor {
    pub fn cosine() -> Self {
        TimeFactor { value: |t| t.cos(), dt: |t| -t.sin(), dtt: |t| -t.cos() }
    }

    pub fn constant() -> Self {
        TimeFactor { value: |_| 1.0, dt: |_| 0.0, dtt: |_| 0.0 }
    }
}

/// Manufactured exact solution: separable `field(x, t) = tau(t) F(x)`.
pub struct ExactSolution {
    pub dim: usize,
    pub fields: SpatialFields,
    pub tau: TimeFactor,
}

impl ExactSolution {
    pub fn u(&self, x: &[f64; 3], t: f64) -> [f64; 3] {
        scale3((self.fields.u)(x), (self.tau.value)(t))
    }

    pub fn w(&self, x: &[f64; 3], t: f64) -> [f64; 3] {
        scale3((self.fields.u)(x), (self.tau.dt)(t))
    }

    pub fn p(&self, x: &[f64; 3], t: f64) -> f64 {
        (self.tau.value)(t) * (self.fields.p)(x)
    }

    pub fn v(&self, x: &[f64; 3], t: f64) -> [f64; 3] {
        scale3((self.fields.v)(x), (self.tau.value)(t))
    }

    pub fn pf(&self, x: &[f64; 3], t: f64) -> f64 {
        (self.tau.value)(t) * (self.fields.pf)(x)
    }

    /// Fluid content at `t = 0`: `c0 p0 + alpha div u0`.
    pub fn d0(&self, params: &MaterialParams, x: &[f64; 3]) -> f64 {
        (self.tau.value)(0.0) * (params.c0 * (self.fields.p)(x) + params.alpha * (self.fields.div_u)(x))
    }

    /// Volume and interface sources that make the exact fields solve the
    /// coupled system. Interior sources come from the strong equations;
    /// the four interface corrections absorb the mismatch of the exact
    /// fields in the interface conditions.
    pub fn sources(self: &Arc<Self>, params: &MaterialParams) -> Sources {
        let pr = *params;
        let me = self.clone();
        let f_b: TimeField = Arc::new(move |x, c, t| {
            let f = &me.fields;
            let tau = (me.tau.value)(t);
            let tau_tt = (me.tau.dtt)(t);
            let uu = (f.u)(x);
            let lap = (f.lap_u)(x);
            let gd = (f.grad_div_u)(x);
            let gp = (f.grad_p)(x);
            pr.rho_b * tau_tt * uu[c] - tau * (pr.mu * lap[c] + (pr.mu + pr.lambda) * gd[c])
                + pr.alpha * tau * gp[c]
        });
        let me = self.clone();
        let s: TimeField = Arc::new(move |x, _c, t| {
            let f = &me.fields;
            let tau = (me.tau.value)(t);
            let tau_t = (me.tau.dt)(t);
            tau_t * (pr.c0 * (f.p)(x) + pr.alpha * (f.div_u)(x)) - tau * pr.k * (f.lap_p)(x)
        });
        let me = self.clone();
        let f_f: TimeField = Arc::new(move |x, c, t| {
            let f = &me.fields;
            let tau = (me.tau.value)(t);
            let tau_t = (me.tau.dt)(t);
            let vv = (f.v)(x);
            let lap = (f.lap_v)(x);
            let gpf = (f.grad_pf)(x);
            pr.rho_f * tau_t * vv[c] - tau * pr.nu * lap[c] + tau * gpf[c]
        });
        Sources {
            f_b: Some(f_b),
            s: Some(s),
            f_f: Some(f_f),
            interface: Some(self.interface_sources(params)),
        }
    }

    /// Traces of the fluid stress `sigma_f e_d = 2 nu D(v) e_d - pf e_d`
    /// and the poroelastic stress `sigma_b e_d = sigma_E(u) e_d - alpha p e_d`
    /// from the exact spatial parts.
    fn stress_traces(&self, params: &MaterialParams, x: &[f64; 3]) -> ([f64; 3], [f64; 3]) {
        let d = self.dim - 1;
        let gu = (self.fields.grad_u)(x);
        let gv = (self.fields.grad_v)(x);
        let mut sig_b = [0.0f64; 3];
        let mut sig_f = [0.0f64; 3];
        for i in 0..self.dim {
            sig_b[i] = params.mu * (gu[i][d] + gu[d][i]);
            sig_f[i] = params.nu * (gv[i][d] + gv[d][i]);
        }
        sig_b[d] += params.lambda * (self.fields.div_u)(x) - params.alpha * (self.fields.p)(x);
        sig_f[d] -= (self.fields.pf)(x);
        (sig_b, sig_f)
    }

    fn interface_sources(self: &Arc<Self>, params: &MaterialParams) -> InterfaceSources {
        let pr = *params;
        let me = self.clone();
        // g1 = -k grad p . e_d - (v - u_t) . e_d.
        let g1: TimeField = Arc::new(move |x, _c, t| {
            let d = me.dim - 1;
            let tau = (me.tau.value)(t);
            let tau_t = (me.tau.dt)(t);
            let gp = (me.fields.grad_p)(x);
            let vv = (me.fields.v)(x);
            let uu = (me.fields.u)(x);
            -pr.k * tau * gp[d] - (tau * vv[d] - tau_t * uu[d])
        });
        let me = self.clone();
        // g2_tau = beta (v - u_t) . tau + tau . sigma_f e_d.
        let g2: TimeField = Arc::new(move |x, c, t| {
            let tau = (me.tau.value)(t);
            let tau_t = (me.tau.dt)(t);
            let vv = (me.fields.v)(x);
            let uu = (me.fields.u)(x);
            let (_, sig_f) = me.stress_traces(&pr, x);
            pr.beta * (tau * vv[c] - tau_t * uu[c]) + tau * sig_f[c]
        });
        let me = self.clone();
        // g3 = sigma_f e_d - sigma_b e_d.
        let g3: TimeField = Arc::new(move |x, c, t| {
            let tau = (me.tau.value)(t);
            let (sig_b, sig_f) = me.stress_traces(&pr, x);
            tau * (sig_f[c] - sig_b[c])
        });
        let me = self.clone();
        // g4 = p + e_d . sigma_f e_d.
        let g4: TimeField = Arc::new(move |x, _c, t| {
            let d = me.dim - 1;
            let tau = (me.tau.value)(t);
            let (_, sig_f) = me.stress_traces(&pr, x);
            tau * ((me.fields.p)(x) + sig_f[d])
        });
        InterfaceSources { g1, g2, g3, g4 }
    }
}

fn scale3(v: [f64; 3], s: f64) -> [f64; 3] {
    [s * v[0], s * v[1], s * v[2]]
}

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Trigonometric manufactured case: 1-periodic in the lateral directions,
/// polynomial cutoffs in the vertical so the essential conditions hold
/// exactly, `cos(t)` in time, and an exactly divergence-free fluid field.
///
/// The pressure amplitudes are kept small relative to the kinematic fields
/// so that, at the study resolutions, each field's error reflects its own
/// approximation order rather than the lower-order pressure error fed back
/// through the O(1) interface traction coupling (see the convergence study
/// notes in the README).
pub fn manufactured_case(dim: usize) -> ExactSolution {
    let fields = if dim == 2 { trig_fields_2d(0.06) } else { trig_fields_3d(0.06) };
    ExactSolution { dim, fields, tau: TimeFactor::cosine() }
}

fn trig_fields_2d(eps_p: f64) -> SpatialFields {
    let a = TWO_PI;
    SpatialFields {
        u: Arc::new(move |x| {
            let (s, c, z) = ((a * x[0]).sin(), (a * x[0]).cos(), x[1]);
            [s * (1.0 - z), c * (1.0 - z) * (1.0 - z), 0.0]
        }),
        grad_u: Arc::new(move |x| {
            let (s, c, z) = ((a * x[0]).sin(), (a * x[0]).cos(), x[1]);
            let mz = 1.0 - z;
            [
                [a * c * mz, -s, 0.0],
                [-a * s * mz * mz, -2.0 * c * mz, 0.0],
                [0.0; 3],
            ]
        }),
        lap_u: Arc::new(move |x| {
            let (s, c, z) = ((a * x[0]).sin(), (a * x[0]).cos(), x[1]);
            let mz = 1.0 - z;
            [-a * a * s * mz, -a * a * c * mz * mz + 2.0 * c, 0.0]
        }),
        grad_div_u: Arc::new(move |x| {
            let (s, c, z) = ((a * x[0]).sin(), (a * x[0]).cos(), x[1]);
            [-a * s * (1.0 - z) * (a - 2.0), -c * (a - 2.0), 0.0]
        }),
        div_u: Arc::new(move |x| {
            let (c, z) = ((a * x[0]).cos(), x[1]);
            c * (1.0 - z) * (a - 2.0)
        }),
        p: Arc::new(move |x| eps_p * (a * x[0]).cos() * (1.0 - x[1])),
        grad_p: Arc::new(move |x| {
            [-eps_p * a * (a * x[0]).sin() * (1.0 - x[1]), -eps_p * (a * x[0]).cos(), 0.0]
        }),
        lap_p: Arc::new(move |x| -eps_p * a * a * (a * x[0]).cos() * (1.0 - x[1])),
        v: Arc::new(move |x| {
            let (s, c, z) = ((a * x[0]).sin(), (a * x[0]).cos(), x[1]);
            let pz = 1.0 + z;
            [2.0 * s * pz, -a * c * pz * pz, 0.0]
        }),
        grad_v: Arc::new(move |x| {
            let (s, c, z) = ((a * x[0]).sin(), (a * x[0]).cos(), x[1]);
            let pz = 1.0 + z;
            [
                [2.0 * a * c * pz, 2.0 * s, 0.0],
                [a * a * s * pz * pz, -2.0 * a * c * pz, 0.0],
                [0.0; 3],
            ]
        }),
        lap_v: Arc::new(move |x| {
            let (s, c, z) = ((a * x[0]).sin(), (a * x[0]).cos(), x[1]);
            let pz = 1.0 + z;
            [-2.0 * a * a * s * pz, a * a * a * c * pz * pz - 2.0 * a * c, 0.0]
        }),
        pf: Arc::new(move |x| eps_p * (a * x[0]).cos() * (1.0 + x[1])),
        grad_pf: Arc::new(move |x| {
            [-eps_p * a * (a * x[0]).sin() * (1.0 + x[1]), eps_p * (a * x[0]).cos(), 0.0]
        }),
    }
}

fn trig_fields_3d(eps_p: f64) -> SpatialFields {
    let a = TWO_PI;
    let sc = move |x: &[f64; 3]| {
        ((a * x[0]).sin(), (a * x[0]).cos(), (a * x[1]).sin(), (a * x[1]).cos(), x[2])
    };
    SpatialFields {
        u: Arc::new(move |x| {
            let (sx, cx, sy, cy, z) = sc(x);
            let mz = 1.0 - z;
            [sx * mz, sy * mz, cx * cy * mz * mz]
        }),
        grad_u: Arc::new(move |x| {
            let (sx, cx, sy, cy, z) = sc(x);
            let mz = 1.0 - z;
            [
                [a * cx * mz, 0.0, -sx],
                [0.0, a * cy * mz, -sy],
                [-a * sx * cy * mz * mz, -a * cx * sy * mz * mz, -2.0 * cx * cy * mz],
            ]
        }),
        lap_u: Arc::new(move |x| {
            let (sx, cx, sy, cy, z) = sc(x);
            let mz = 1.0 - z;
            [
                -a * a * sx * mz,
                -a * a * sy * mz,
                -2.0 * a * a * cx * cy * mz * mz + 2.0 * cx * cy,
            ]
        }),
        grad_div_u: Arc::new(move |x| {
            let (sx, cx, sy, cy, z) = sc(x);
            let mz = 1.0 - z;
            [
                mz * a * sx * (2.0 * cy - a),
                mz * a * sy * (2.0 * cx - a),
                -(a * (cx + cy) - 2.0 * cx * cy),
            ]
        }),
        div_u: Arc::new(move |x| {
            let (_sx, cx, _sy, cy, z) = sc(x);
            (1.0 - z) * (a * (cx + cy) - 2.0 * cx * cy)
        }),
        p: Arc::new(move |x| {
            let (_sx, cx, sy, _cy, z) = sc(x);
            eps_p * cx * sy * (1.0 - z)
        }),
        grad_p: Arc::new(move |x| {
            let (sx, cx, sy, cy, z) = sc(x);
            let mz = 1.0 - z;
            [-eps_p * a * sx * sy * mz, eps_p * a * cx * cy * mz, -eps_p * cx * sy]
        }),
        lap_p: Arc::new(move |x| {
            let (_sx, cx, sy, _cy, z) = sc(x);
            -2.0 * eps_p * a * a * cx * sy * (1.0 - z)
        }),
        v: Arc::new(move |x| {
            let (sx, cx, sy, cy, z) = sc(x);
            let pz = 1.0 + z;
            [2.0 * sx * cy * pz, 2.0 * cx * sy * pz, -2.0 * a * cx * cy * pz * pz]
        }),
        grad_v: Arc::new(move |x| {
            let (sx, cx, sy, cy, z) = sc(x);
            let pz = 1.0 + z;
            [
                [2.0 * a * cx * cy * pz, -2.0 * a * sx * sy * pz, 2.0 * sx * cy],
                [-2.0 * a * sx * sy * pz, 2.0 * a * cx * cy * pz, 2.0 * cx * sy],
                [2.0 * a * a * sx * cy * pz * pz, 2.0 * a * a * cx * sy * pz * pz, -4.0 * a * cx * cy * pz],
            ]
        }),
        lap_v: Arc::new(move |x| {
            let (sx, cx, sy, cy, z) = sc(x);
            let pz = 1.0 + z;
            [
                -4.0 * a * a * sx * cy * pz,
                -4.0 * a * a * cx * sy * pz,
                4.0 * a * a * a * cx * cy * pz * pz - 4.0 * a * cx * cy,
            ]
        }),
        pf: Arc::new(move |x| {
            let (_sx, cx, _sy, cy, z) = sc(x);
            eps_p * cx * cy * (1.0 + z)
        }),
        grad_pf: Arc::new(move |x| {
            let (sx, cx, sy, cy, z) = sc(x);
            let pz = 1.0 + z;
            [-eps_p * a * sx * cy * pz, -eps_p * a * cx * sy * pz, eps_p * cx * cy]
        }),
    }
}

/// Time-constant polynomial case whose fields lie in the discrete spaces:
/// the discrete solution must reproduce it to solver tolerance.
pub fn polynomial_case(dim: usize) -> ExactSolution {
    let fields = if dim == 2 {
        SpatialFields {
            u: Arc::new(|x| [0.4 * (1.0 - x[1] * x[1]), 0.3 * (1.0 - x[1]), 0.0]),
            grad_u: Arc::new(|x| [[0.0, -0.8 * x[1], 0.0], [0.0, -0.3, 0.0], [0.0; 3]]),
            lap_u: Arc::new(|_| [-0.8, 0.0, 0.0]),
            grad_div_u: Arc::new(|_| [0.0; 3]),
            div_u: Arc::new(|_| -0.3),
            p: Arc::new(|x| 0.5 * (1.0 - x[1])),
            grad_p: Arc::new(|_| [0.0, -0.5, 0.0]),
            lap_p: Arc::new(|_| 0.0),
            v: Arc::new(|x| [0.6 * (1.0 + x[1]), 0.0, 0.0]),
            grad_v: Arc::new(|_| [[0.0, 0.6, 0.0], [0.0; 3], [0.0; 3]]),
            lap_v: Arc::new(|_| [0.0; 3]),
            pf: Arc::new(|x| 0.2 * (1.0 + x[1])),
            grad_pf: Arc::new(|_| [0.0, 0.2, 0.0]),
        }
    } else {
        SpatialFields {
            u: Arc::new(|x| [0.4 * (1.0 - x[2] * x[2]), 0.2 * (1.0 - x[2]), 0.3 * (1.0 - x[2])]),
            grad_u: Arc::new(|x| {
                [[0.0, 0.0, -0.8 * x[2]], [0.0, 0.0, -0.2], [0.0, 0.0, -0.3]]
            }),
            lap_u: Arc::new(|_| [-0.8, 0.0, 0.0]),
            grad_div_u: Arc::new(|_| [0.0; 3]),
            div_u: Arc::new(|_| -0.3),
            p: Arc::new(|x| 0.5 * (1.0 - x[2])),
            grad_p: Arc::new(|_| [0.0, 0.0, -0.5]),
            lap_p: Arc::new(|_| 0.0),
            v: Arc::new(|x| [0.6 * (1.0 + x[2]), 0.5 * (1.0 + x[2]), 0.0]),
            grad_v: Arc::new(|_| [[0.0, 0.0, 0.6], [0.0, 0.0, 0.5], [0.0; 3]]),
            lap_v: Arc::new(|_| [0.0; 3]),
            pf: Arc::new(|x| 0.2 * (1.0 + x[2])),
            grad_pf: Arc::new(|_| [0.0, 0.0, 0.2]),
        }
    };
    ExactSolution { dim, fields, tau: TimeFactor::constant() }
}

/// Kinds of packaged runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    /// Zero data, zero sources.
    Zero,
    /// Stock decaying initial data, no sources.
    Decay,
    /// Trigonometric manufactured solution with interface sources.
    Mms,
    /// Time-constant polynomial manufactured solution (space-exact).
    MmsPolynomial,
}

/// Full description of one reproducible experiment.
#[derive(Debug, Clone, Copy)]
pub struct ScenarioConfig {
    pub grid: GridSpec,
    pub params: MaterialParams,
    pub scheme: SchemeConfig,
    pub kind: ScenarioKind,
}

/// Assembled spaces, system and results of one run.
pub struct ScenarioRun {
    pub disc: Discretization,
    pub sys: BlockSystem,
    pub config: ScenarioConfig,
    pub trajectory: Trajectory,
    pub reports: Vec<EnergyReport>,
    pub exact: Option<Arc<ExactSolution>>,
    /// L2 defect of the initial Leray projection of `v0`.
    pub projection_defect: f64,
}

/// Projects fluid-velocity coefficients onto the discretely divergence-free
/// subspace (mass-orthogonal), returning the projection and its L2 defect.
pub fn leray_project(
    disc: &Discretization,
    sys: &BlockSystem,
    params: &MaterialParams,
    v_full: &[f64],
) -> Result<(Vec<f64>, f64), ScenarioError> {
    let nv = disc.maps.v.free_count;
    let npf = disc.maps.pf.free_count;
    let vfree = disc.maps.v.gather_free(v_full);
    let mut b = BlockCompose::new(&[nv, npf], &[nv, npf]);
    b.add(0, 0, &sys.mass_v, 1.0);
    b.add_t(0, 1, &sys.div_fv, 1.0);
    b.add(1, 0, &sys.div_fv, 1.0);
    let saddle = b.finish();
    let mut rhs = vec![0.0; nv + npf];
    rhs[..nv].copy_from_slice(&sys.mass_v.matvec(&vfree));
    let sol = crate::linalg::solve_saddle(&saddle, &rhs, 1e-10)?;
    let proj = sol[..nv].to_vec();
    let diff: Vec<f64> = vfree.iter().zip(&proj).map(|(a, b)| a - b).collect();
    let defect = (sys.mass_v.quadform(&diff, &diff) / params.rho_f).max(0.0).sqrt();
    Ok((disc.maps.v.scatter_free(&proj), defect))
}

/// Stock decaying initial data: smooth periodic fields in every block.
fn decay_initial(
    disc: &Discretization,
    params: &MaterialParams,
) -> Result<StateVector, ScenarioError> {
    let dim = disc.mesh.spec.dim;
    let zax = dim - 1;
    let mut state = StateVector::zero(disc);
    state.u = disc.maps.u.interpolate(&|x, c| {
        let lat = (TWO_PI * x[0]).sin() + if dim == 3 { (TWO_PI * x[1]).cos() } else { 0.0 };
        if c == 0 {
            0.3 * lat * (1.0 - x[zax])
        } else if c == zax {
            0.2 * (TWO_PI * x[0]).cos() * (1.0 - x[zax]) * (1.0 - x[zax])
        } else {
            0.1 * (TWO_PI * x[1]).sin() * (1.0 - x[zax])
        }
    })?;
    state.w = disc.maps.u.interpolate(&|x, c| {
        if c == 0 {
            0.25 * (TWO_PI * x[0]).cos() * (1.0 - x[zax])
        } else {
            0.0
        }
    })?;
    if params.c0 > 0.0 {
        state.p = disc.maps.p.interpolate(&|x, _| {
            0.4 * (TWO_PI * x[0]).cos() * (1.0 - x[zax])
                * if dim == 3 { 1.0 + 0.5 * (TWO_PI * x[1]).sin() } else { 1.0 }
        })?;
    }
    state.v = disc.maps.v.interpolate(&|x, c| {
        if c == 0 {
            0.3 * (TWO_PI * x[0]).sin() * (1.0 + x[zax])
        } else if c == zax {
            0.0
        } else {
            0.2 * (TWO_PI * x[1]).cos() * (1.0 + x[zax])
        }
    })?;
    Ok(state)
}

/// Builds discretization, system, initial data and sources for a scenario
/// and integrates it.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioRun, ScenarioError> {
    let disc = Discretization::build(config.grid)?;
    let sys = assemble(&config.params, &disc);
    let (mut initial, sources, exact) = match config.kind {
        ScenarioKind::Zero => (StateVector::zero(&disc), Sources::none(), None),
        ScenarioKind::Decay => (decay_initial(&disc, &config.params)?, Sources::none(), None),
        ScenarioKind::Mms | ScenarioKind::MmsPolynomial => {
            let exact = Arc::new(if config.kind == ScenarioKind::Mms {
                manufactured_case(config.grid.dim)
            } else {
                polynomial_case(config.grid.dim)
            });
            let mut init = StateVector::zero(&disc);
            init.u = disc.maps.u.interpolate(&|x, c| exact.u(x, 0.0)[c])?;
            init.w = disc.maps.u.interpolate(&|x, c| exact.w(x, 0.0)[c])?;
            init.v = disc.maps.v.interpolate(&|x, c| exact.v(x, 0.0)[c])?;
            if config.params.c0 > 0.0 {
                init.p = disc.maps.p.interpolate(&|x, _| exact.p(x, 0.0))?;
            }
            let sources = exact.sources(&config.params);
            (init, sources, Some(exact))
        }
    };
    // Degenerate consistency: with c0 = 0 the initial content must equal
    // alpha div u0; with the content built from the same displacement this
    // is automatic, but scenario-supplied d0 is verified pointwise.
    if config.params.c0 == 0.0 {
        if let Some(exact) = &exact {
            let pts = sample_points(config.grid.dim, 20);
            for x in &pts {
                let d0 = exact.d0(&config.params, x);
                let expect = (exact.tau.value)(0.0) * config.params.alpha * (exact.fields.div_u)(x);
                if (d0 - expect).abs() > 1e-10 {
                    return Err(ScenarioError::InconsistentData(format!(
                        "d0 != alpha div u0 at {x:?}: {d0} vs {expect}"
                    )));
                }
            }
        }
    }
    // The constraint row demands a discretely divergence-free start.
    let (vproj, projection_defect) = leray_project(&disc, &sys, &config.params, &initial.v)?;
    initial.v = vproj;

    let stepper = Stepper::new(&disc, &sys, config.params, config.scheme)?;
    let trajectory = run(&stepper, initial, &sources)?;
    let reports = energy_reports(&sys, &disc, &config.params, &config.scheme, &trajectory);
    Ok(ScenarioRun { disc, sys, config: *config, trajectory, reports, exact, projection_defect })
}

fn sample_points(dim: usize, count: usize) -> Vec<[f64; 3]> {
    let mut pts = Vec::with_capacity(count);
    let mut state = 0x5deece66du64;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for _ in 0..count {
        let mut x = [0.0f64; 3];
        x[0] = next();
        if dim == 3 {
            x[1] = next();
        }
        x[dim - 1] = next();
        pts.push(x);
    }
    pts
}

/// L2 errors of `(u, w, p, v)` against the exact solution at time `t`,
/// integrated with the scheme's quadrature.
pub fn l2_errors(run: &ScenarioRun, t: f64) -> [f64; 4] {
    let exact = run.exact.as_ref().expect("errors need an exact solution");
    let state = run
        .trajectory
        .states
        .iter()
        .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
        .unwrap();
    let disc = &run.disc;
    let dim = disc.mesh.spec.dim;
    let mut acc = [0.0f64; 4];
    for (ci, cell) in disc.mesh.cells.iter().enumerate() {
        for (x, wq) in cell_quadrature(&disc.mesh, ci) {
            match cell.domain {
                Domain::Biot => {
                    let uh = disc.maps.u.eval(&state.u, &x).unwrap();
                    let wh = disc.maps.u.eval(&state.w, &x).unwrap();
                    let ph = disc.maps.p.eval(&state.p, &x).unwrap()[0];
                    let ue = exact.u(&x, state.t);
                    let we = exact.w(&x, state.t);
                    let pe = exact.p(&x, state.t);
                    for c in 0..dim {
                        acc[0] += wq * (uh[c] - ue[c]) * (uh[c] - ue[c]);
                        acc[1] += wq * (wh[c] - we[c]) * (wh[c] - we[c]);
                    }
                    acc[2] += wq * (ph - pe) * (ph - pe);
                }
                Domain::Fluid => {
                    let vh = disc.maps.v.eval(&state.v, &x).unwrap();
                    let ve = exact.v(&x, state.t);
                    for c in 0..dim {
                        acc[3] += wq * (vh[c] - ve[c]) * (vh[c] - ve[c]);
                    }
                }
            }
        }
    }
    [acc[0].sqrt(), acc[1].sqrt(), acc[2].sqrt(), acc[3].sqrt()]
}

/// One refinement level of a convergence study.
#[derive(Debug, Clone, Copy)]
pub struct ErrorRow {
    pub n: usize,
    pub h: f64,
    pub errors: [f64; 4],
}

/// Refinement table with observed orders between consecutive rows,
/// ordered coarse to fine.
#[derive(Debug, Clone)]
pub struct ErrorTable {
    pub rows: Vec<ErrorRow>,
    /// `orders[i]` compares rows `i` and `i+1`.
    pub orders: Vec<[f64; 4]>,
}

/// Manufactured-solution convergence study: Crank-Nicolson with `dt`
/// proportional to `h^2` isolates the spatial order.
pub fn convergence_study(
    dim: usize,
    levels: &[usize],
    params: &MaterialParams,
    t_final: f64,
) -> Result<ErrorTable, ScenarioError> {
    let mut rows = Vec::new();
    for &n in levels {
        let h = 1.0 / n as f64;
        let steps = (t_final / (h * h)).ceil().max(2.0) as usize;
        let dt = t_final / steps as f64;
        let config = ScenarioConfig {
            grid: GridSpec { dim, n },
            params: *params,
            scheme: SchemeConfig::new(0.5, dt, steps, 1e-12)?,
            kind: ScenarioKind::Mms,
        };
        let run = run_scenario(&config)?;
        rows.push(ErrorRow { n, h, errors: l2_errors(&run, t_final) });
    }
    let mut orders = Vec::new();
    for pair in rows.windows(2) {
        let mut o = [0.0f64; 4];
        for i in 0..4 {
            o[i] = (pair[0].errors[i] / pair[1].errors[i]).log2()
                / (pair[1].n as f64 / pair[0].n as f64).log2();
        }
        orders.push(o);
    }
    Ok(ErrorTable { rows, orders })
}

/// Distance entry of the vanishing-storage study.
#[derive(Debug, Clone, Copy)]
pub struct StorageRow {
    pub c0: f64,
    /// Distance to the degenerate trajectory at final time in the energy
    /// norm of the limit system (no storage term).
    pub distance: f64,
    /// Unweighted L2 distance of the Biot pressure, reported alongside.
    pub p_distance: f64,
}

/// Runs the same initial-value problem for each storage coefficient and the
/// degenerate limit, reporting final-time distances to the limit run. The
/// initial pressure is zero so the fixed initial content `alpha div u0` is
/// shared by every run.
pub fn vanishing_storage_study(
    grid: GridSpec,
    base: &MaterialParams,
    scheme: SchemeConfig,
    c0_list: &[f64],
) -> Result<Vec<StorageRow>, ScenarioError> {
    let run_c0 = |c0: f64| -> Result<ScenarioRun, ScenarioError> {
        let mut params = *base;
        params.c0 = c0;
        let config = ScenarioConfig { grid, params, scheme, kind: ScenarioKind::Decay };
        run_scenario(&config)
    };
    let reference = run_c0(0.0)?;
    let ref_state = reference.trajectory.states.last().unwrap();
    let mut rows = Vec::new();
    for &c0 in c0_list {
        let run = run_c0(c0)?;
        let state = run.trajectory.states.last().unwrap();
        let u = reference.disc.maps.u.gather_free(&sub(&state.u, &ref_state.u));
        let w = reference.disc.maps.u.gather_free(&sub(&state.w, &ref_state.w));
        let v = reference.disc.maps.v.gather_free(&sub(&state.v, &ref_state.v));
        let p = reference.disc.maps.p.gather_free(&sub(&state.p, &ref_state.p));
        let dist2 = reference.sys.a_e.quadform(&u, &u)
            + reference.sys.mass_w.quadform(&w, &w)
            + reference.sys.mass_v.quadform(&v, &v);
        let pdist2 = reference.sys.mass_p_unit.quadform(&p, &p);
        rows.push(StorageRow { c0, distance: dist2.max(0.0).sqrt(), p_distance: pdist2.max(0.0).sqrt() });
    }
    Ok(rows)
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Result of the uniqueness probe.
#[derive(Debug, Clone, Copy)]
pub struct UniquenessReport {
    /// Largest state X-norm over the zero-data run.
    pub max_zero_norm: f64,
    /// Largest blockwise difference between the plain and the
    /// permuted-unknown-order solve of the same trajectory.
    pub max_permutation_diff: f64,
}

/// (a) Zero data must stay exactly zero; (b) solving every step after a
/// symmetric random permutation of the monolithic unknown order must
/// reproduce the trajectory to solver accuracy.
pub fn uniqueness_probe(config: &ScenarioConfig, seed: u64) -> Result<UniquenessReport, ScenarioError> {
    // (a) zero data.
    let zero_cfg = ScenarioConfig { kind: ScenarioKind::Zero, ..*config };
    let zero_run = run_scenario(&zero_cfg)?;
    let mut max_zero = 0.0f64;
    for s in &zero_run.trajectory.states {
        max_zero = max_zero.max(x_norm_sq(&zero_run.sys, &zero_run.disc, s).sqrt());
    }

    // (b) permuted assembly ordering.
    let disc = Discretization::build(config.grid)?;
    let sys = assemble(&config.params, &disc);
    let stepper = Stepper::new(&disc, &sys, config.params, config.scheme)?;
    let matrix = stepper.monolithic_matrix();
    let perm = random_permutation(matrix.nrows, seed);
    let permuted = permute_symmetric(matrix, &perm);
    let plu = SparseLu::factor(&permuted)?;

    let initial = decay_initial(&disc, &config.params)?;
    let (vproj, _) = leray_project(&disc, &sys, &config.params, &initial.v)?;
    let mut base_state = initial.clone();
    base_state.v = vproj;
    let mut perm_state = base_state.clone();

    let loads = assemble_loads(&disc, &Sources::none(), 0.0);
    let mut max_diff = 0.0f64;
    for _ in 0..config.scheme.steps {
        let next = stepper.step(&base_state, &loads, &loads)?;
        // Permuted path: P A P^T (P x) = P b.
        let rhs = stepper.step_rhs(&perm_state, &loads, &loads);
        let mut prhs = vec![0.0; rhs.len()];
        for (i, &pi) in perm.iter().enumerate() {
            prhs[i] = rhs[pi];
        }
        let psol = plu.solve(&prhs, config.scheme.tol)?;
        let mut sol = vec![0.0; rhs.len()];
        for (i, &pi) in perm.iter().enumerate() {
            sol[pi] = psol[i];
        }
        let pnext = stepper.unpack(perm_state.t + config.scheme.dt, &sol);
        for (a, b) in [
            (&next.u, &pnext.u),
            (&next.w, &pnext.w),
            (&next.p, &pnext.p),
            (&next.v, &pnext.v),
            (&next.pf, &pnext.pf),
        ] {
            for (x, y) in a.iter().zip(b.iter()) {
                max_diff = max_diff.max((x - y).abs());
            }
        }
        base_state = next;
        perm_state = pnext;
    }
    Ok(UniquenessReport { max_zero_norm: max_zero, max_permutation_diff: max_diff })
}

fn random_permutation(n: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    use rand_chacha::rand_core::SeedableRng;
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    perm.shuffle(&mut rng);
    perm
}

fn permute_symmetric(m: &Csr, perm: &[usize]) -> Csr {
    // inv[old] = new.
    let mut inv = vec![0usize; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    let mut coo = crate::linalg::Coo::new(m.nrows, m.ncols);
    for r in 0..m.nrows {
        for k in m.row_ptr[r]..m.row_ptr[r + 1] {
            coo.push(inv[r], inv[m.cols[k]], m.vals[k]);
        }
    }
    coo.to_csr()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_grad(f: &dyn Fn(&[f64; 3]) -> f64, x: &[f64; 3], dim: usize) -> [f64; 3] {
        // Fourth-order central differences.
        let h = 1e-3;
        let mut g = [0.0f64; 3];
        for d in 0..dim {
            let mut xp = *x;
            let mut xm = *x;
            let mut xpp = *x;
            let mut xmm = *x;
            xp[d] += h;
            xm[d] -= h;
            xpp[d] += 2.0 * h;
            xmm[d] -= 2.0 * h;
            g[d] = (8.0 * (f(&xp) - f(&xm)) - (f(&xpp) - f(&xmm))) / (12.0 * h);
        }
        g
    }

    fn fd_lap(f: &dyn Fn(&[f64; 3]) -> f64, x: &[f64; 3], dim: usize) -> f64 {
        let h = 1e-3;
        let mut acc = 0.0;
        for d in 0..dim {
            let mut xp = *x;
            let mut xm = *x;
            let mut xpp = *x;
            let mut xmm = *x;
            xp[d] += h;
            xm[d] -= h;
            xpp[d] += 2.0 * h;
            xmm[d] -= 2.0 * h;
            acc += (-f(&xpp) + 16.0 * f(&xp) - 30.0 * f(x) + 16.0 * f(&xm) - f(&xmm))
                / (12.0 * h * h);
        }
        acc
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        for dim in [2usize, 3] {
            let ex = manufactured_case(dim);
            let f = &ex.fields;
            for x in sample_points(dim, 12) {
                // Keep away from the box edges so stencils stay inside.
                let mut xb = x;
                let mut xf = x;
                xb[dim - 1] = 0.1 + 0.8 * x[dim - 1];
                xf[dim - 1] = -0.9 + 0.8 * x[dim - 1];
                for c in 0..dim {
                    let uc = {
                        let u = f.u.clone();
                        move |y: &[f64; 3]| (u)(y)[c]
                    };
                    let g = fd_grad(&uc, &xb, dim);
                    let ga = (f.grad_u)(&xb);
                    for d in 0..dim {
                        assert!((g[d] - ga[c][d]).abs() < 1e-6, "grad_u[{c}][{d}]");
                    }
                    let l = fd_lap(&uc, &xb, dim);
                    assert!((l - (f.lap_u)(&xb)[c]).abs() < 2e-4, "lap_u[{c}]");

                    let vc = {
                        let v = f.v.clone();
                        move |y: &[f64; 3]| (v)(y)[c]
                    };
                    let g = fd_grad(&vc, &xf, dim);
                    let ga = (f.grad_v)(&xf);
                    for d in 0..dim {
                        assert!((g[d] - ga[c][d]).abs() < 1e-5, "grad_v[{c}][{d}]");
                    }
                    let l = fd_lap(&vc, &xf, dim);
                    assert!((l - (f.lap_v)(&xf)[c]).abs() < 2e-3, "lap_v[{c}]");
                }
                let g = fd_grad(f.p.as_ref(), &xb, dim);
                let ga = (f.grad_p)(&xb);
                for d in 0..dim {
                    assert!((g[d] - ga[d]).abs() < 1e-6, "grad_p[{d}]");
                }
                assert!((fd_lap(f.p.as_ref(), &xb, dim) - (f.lap_p)(&xb)).abs() < 2e-4);
                let g = fd_grad(f.pf.as_ref(), &xf, dim);
                let ga = (f.grad_pf)(&xf);
                for d in 0..dim {
                    assert!((g[d] - ga[d]).abs() < 1e-6, "grad_pf[{d}]");
                }
                // div u from the gradient; div v must vanish identically.
                let gu = (f.grad_u)(&xb);
                let div: f64 = (0..dim).map(|d| gu[d][d]).sum();
                assert!((div - (f.div_u)(&xb)).abs() < 1e-12);
                let gv = (f.grad_v)(&xf);
                let divv: f64 = (0..dim).map(|d| gv[d][d]).sum();
                assert!(divv.abs() < 1e-12, "manufactured v not divergence-free: {divv}");
                // grad(div u) against finite differences of the analytic div.
                let gd = fd_grad(f.div_u.as_ref(), &xb, dim);
                let gda = (f.grad_div_u)(&xb);
                for d in 0..dim {
                    assert!((gd[d] - gda[d]).abs() < 1e-6, "grad_div_u[{d}]");
                }
            }
        }
    }

    #[test]
    fn exact_fields_satisfy_continuum_equations_with_generated_sources() {
        for dim in [2usize, 3] {
            let ex = Arc::new(manufactured_case(dim));
            let params = MaterialParams::new(1.1, 0.9, 0.6, 1.3, 0.8, 0.7, 1.2, 1.4, 0.5).unwrap();
            let sources = ex.sources(&params);
            let f = &ex.fields;
            for (i, x) in sample_points(dim, 50).iter().enumerate() {
                let t = 0.1 + 0.02 * i as f64;
                let mut xb = *x;
                xb[dim - 1] = 0.05 + 0.9 * x[dim - 1];
                let mut xf = *x;
                xf[dim - 1] = -0.95 + 0.9 * x[dim - 1];
                let tau = (ex.tau.value)(t);
                let tau_t = (ex.tau.dt)(t);
                let tau_tt = (ex.tau.dtt)(t);
                // Biot momentum: rho_b u_tt - div sigma_E + alpha grad p = F_b,
                // with div sigma_E = mu lap u + (mu + lambda) grad div u.
                for c in 0..dim {
                    let lhs = params.rho_b * tau_tt * (f.u)(&xb)[c]
                        - tau * (params.mu * (f.lap_u)(&xb)[c]
                            + (params.mu + params.lambda) * (f.grad_div_u)(&xb)[c])
                        + params.alpha * tau * (f.grad_p)(&xb)[c];
                    let rhs = (sources.f_b.as_ref().unwrap())(&xb, c, t);
                    assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0), "F_b[{c}]");
                }
                // Content: (c0 p + alpha div u)_t - k lap p = S.
                let lhs = tau_t * (params.c0 * (f.p)(&xb) + params.alpha * (f.div_u)(&xb))
                    - tau * params.k * (f.lap_p)(&xb);
                let rhs = (sources.s.as_ref().unwrap())(&xb, 0, t);
                assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0), "S");
                // Fluid momentum: rho_f v_t - nu lap v + grad pf = F_f.
                for c in 0..dim {
                    let lhs = params.rho_f * tau_t * (f.v)(&xf)[c]
                        - tau * params.nu * (f.lap_v)(&xf)[c]
                        + tau * (f.grad_pf)(&xf)[c];
                    let rhs = (sources.f_f.as_ref().unwrap())(&xf, c, t);
                    assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0), "F_f[{c}]");
                }
            }
        }
    }

    #[test]
    fn sources_match_finite_difference_residual_oracle() {
        // Independent route: residuals evaluated with fourth-order finite
        // differences of the primal fields only.
        let dim = 2;
        let ex = Arc::new(manufactured_case(dim));
        let params = MaterialParams::unit();
        let sources = ex.sources(&params);
        let f = &ex.fields;
        for (i, x) in sample_points(dim, 10).iter().enumerate() {
            let t = 0.15 + 0.05 * i as f64;
            let mut xb = *x;
            xb[dim - 1] = 0.1 + 0.8 * x[dim - 1];
            let tau = (ex.tau.value)(t);
            let tau_tt = (ex.tau.dtt)(t);
            for c in 0..dim {
                let uc = {
                    let u = f.u.clone();
                    move |y: &[f64; 3]| (u)(y)[c]
                };
                let lap = fd_lap(&uc, &xb, dim);
                let gdiv = fd_grad(f.div_u.as_ref(), &xb, dim);
                let gp = fd_grad(f.p.as_ref(), &xb, dim);
                let lhs = params.rho_b * tau_tt * (f.u)(&xb)[c]
                    - tau * (params.mu * lap + (params.mu + params.lambda) * gdiv[c])
                    + params.alpha * tau * gp[c];
                let rhs = (sources.f_b.as_ref().unwrap())(&xb, c, t);
                assert!((lhs - rhs).abs() < 3e-4, "FD residual F_b[{c}]: {}", lhs - rhs);
            }
        }
    }

    #[test]
    fn d0_equals_initial_content() {
        let ex = Arc::new(manufactured_case(2));
        let params = MaterialParams::unit();
        for x in sample_points(2, 10) {
            let mut xb = x;
            xb[1] = 0.5 * (x[1] + 1.0).min(1.0);
            let d0 = ex.d0(&params, &xb);
            let direct = params.c0 * ex.p(&xb, 0.0)
                + params.alpha * (ex.tau.value)(0.0) * (ex.fields.div_u)(&xb);
            assert!((d0 - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn exact_fields_pass_bc_interpolation() {
        for dim in [2, 3] {
            let disc = Discretization::build(GridSpec { dim, n: 2 }).unwrap();
            let ex = manufactured_case(dim);
            assert!(disc.maps.u.interpolate(&|x, c| ex.u(x, 0.0)[c]).is_ok());
            assert!(disc.maps.p.interpolate(&|x, _| ex.p(x, 0.0)).is_ok());
            assert!(disc.maps.v.interpolate(&|x, c| ex.v(x, 0.0)[c]).is_ok());
        }
    }

    #[test]
    fn polynomial_case_is_reproduced_to_solver_tolerance() {
        for theta in [1.0, 0.5] {
            let config = ScenarioConfig {
                grid: GridSpec { dim: 2, n: 2 },
                params: MaterialParams::unit(),
                scheme: SchemeConfig::new(theta, 0.05, 4, 1e-12).unwrap(),
                kind: ScenarioKind::MmsPolynomial,
            };
            let run = run_scenario(&config).unwrap();
            assert!(run.projection_defect < 1e-9, "projection defect {}", run.projection_defect);
            let errs = l2_errors(&run, run.config.scheme.horizon());
            for (i, e) in errs.iter().enumerate() {
                assert!(*e < 1e-9, "theta={theta} field {i}: error {e}");
            }
        }
    }

    #[test]
    fn zero_scenario_stays_zero() {
        let config = ScenarioConfig {
            grid: GridSpec { dim: 2, n: 2 },
            params: MaterialParams::unit(),
            scheme: SchemeConfig::new(0.5, 0.1, 5, 1e-12).unwrap(),
            kind: ScenarioKind::Zero,
        };
        let run = run_scenario(&config).unwrap();
        for r in &run.reports {
            assert!(r.energy() < 1e-24);
        }
    }

    #[test]
    fn leray_projection_is_idempotent_and_reduces_divergence() {
        let disc = Discretization::build(GridSpec { dim: 2, n: 2 }).unwrap();
        let params = MaterialParams::unit();
        let sys = assemble(&params, &disc);
        let v = disc
            .maps
            .v
            .interpolate(&|x, c| if c == 0 { (TWO_PI * x[0]).sin() * (1.0 + x[1]) } else { 0.1 * (1.0 + x[1]) })
            .unwrap();
        let (proj, defect) = leray_project(&disc, &sys, &params, &v).unwrap();
        assert!(defect > 0.0);
        let pfree = disc.maps.v.gather_free(&proj);
        let c = sys.div_fv.matvec(&pfree);
        assert!(c.iter().map(|x| x * x).sum::<f64>().sqrt() < 1e-10);
        let (proj2, defect2) = leray_project(&disc, &sys, &params, &proj).unwrap();
        assert!(defect2 < 1e-10);
        let diff = proj.iter().zip(&proj2).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
        assert!(diff < 1e-10);
    }

    #[test]
    fn uniqueness_probe_zero_and_permutation() {
        for c0 in [0.0, 1.0] {
            let mut params = MaterialParams::unit();
            params.c0 = c0;
            let config = ScenarioConfig {
                grid: GridSpec { dim: 2, n: 2 },
                params,
                scheme: SchemeConfig::new(1.0, 0.05, 6, 1e-11).unwrap(),
                kind: ScenarioKind::Decay,
            };
            let rep = uniqueness_probe(&config, 99).unwrap();
            assert!(rep.max_zero_norm <= 1e-12, "zero-data norm {}", rep.max_zero_norm);
            assert!(rep.max_permutation_diff <= 1e-10, "perm diff {}", rep.max_permutation_diff);
        }
    }

    #[test]
    fn vanishing_storage_distances_decrease() {
        let grid = GridSpec { dim: 2, n: 2 };
        let scheme = SchemeConfig::new(1.0, 0.05, 10, 1e-11).unwrap();
        let rows =
            vanishing_storage_study(grid, &MaterialParams::unit(), scheme, &[1e-1, 1e-2, 1e-3, 0.0])
                .unwrap();
        for pair in rows.windows(2) {
            assert!(
                pair[1].distance < pair[0].distance || pair[1].c0 == 0.0,
                "distances not decreasing: {rows:?}"
            );
        }
        // The degenerate entry is compared against itself.
        let last = rows.last().unwrap();
        assert_eq!(last.c0, 0.0);
        assert_eq!(last.distance, 0.0);
        assert_eq!(last.p_distance, 0.0);
    }

    #[test]
    fn halving_dt_leaves_spatial_error_dominant() {
        // At fixed n the error is spatial: doubling the step count changes
        // the measured errors by less than 10 percent.
        let params = MaterialParams::unit();
        let mut errs = Vec::new();
        // Baseline is the step count the convergence study itself uses at
        // this resolution (dt ~ h^2), then halved.
        for steps in [16usize, 32] {
            let cfg = ScenarioConfig {
                grid: GridSpec { dim: 2, n: 8 },
                params,
                scheme: SchemeConfig::new(0.5, 0.25 / steps as f64, steps, 1e-12).unwrap(),
                kind: ScenarioKind::Mms,
            };
            let run = run_scenario(&cfg).unwrap();
            errs.push(l2_errors(&run, 0.25));
        }
        for i in 0..4 {
            let rel = (errs[0][i] - errs[1][i]).abs() / errs[1][i];
            assert!(rel < 0.10, "field {i}: dt-halving changed error by {:.1}%", 100.0 * rel);
        }
    }
}
