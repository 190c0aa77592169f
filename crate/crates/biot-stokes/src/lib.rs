//! Monolithic finite-element solver for the coupled dynamics of a poroelastic
//! box stacked on an incompressible viscous fluid box, joined across a flat
//! interface by normal-flux, stress-matching and tangential-slip conditions,
//! with periodic lateral boundaries.
//!
//! The crate provides:
//! - a structured conforming grid over both boxes ([`mesh`]),
//! - Taylor-Hood style Lagrange spaces with periodic and Dirichlet
//!   constraint maps ([`spaces`]),
//! - sparse assembly of every interior and interface form ([`forms`]),
//! - a monolithic theta-scheme time integrator ([`timestepper`]),
//! - energy, dissipation and interface-residual reporting ([`diagnostics`]),
//! - a dense operator lab that builds the first-order generator pencil, its
//!   independently assembled adjoint, and verifies dissipativity and
//!   resolvent solvability ([`operator_lab`]),
//! - reproducible experiments: manufactured-solution convergence, the
//!   vanishing-storage limit, uniqueness probes ([`scenarios`]),
//! - config parsing and CSV/field writers ([`config`], [`io`]).

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod forms;
pub mod io;
pub mod linalg;
pub mod mesh;
pub mod operator_lab;
pub mod scenarios;
pub mod spaces;
pub mod timestepper;
