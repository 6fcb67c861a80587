//! Simulation and verification toolkit for a Timoshenko beam coupled to
//! type III thermoelasticity, with viscoelastic memory and frictional damping.
//!
//! The crate is organised bottom-up: [`grid`] (finite differences and
//! quadrature), [`model`] (parameters and hypothesis checks), [`memory`]
//! (history convolution), [`integrator`] (Crank–Nicolson time stepping),
//! [`diagnostics`] (energy, Lyapunov functionals, decay fits), [`generator`]
//! (the discrete semigroup generator, its spectrum and resolvent) and
//! [`config`] (the `key = value` configuration format).

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod banded;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod generator;
pub mod grid;
pub mod integrator;
pub mod memory;
pub mod model;
pub mod operator;

pub use nalgebra;

pub use error::{Error, Result};
pub use grid::{Boundary, Field, Grid};
pub use integrator::{run, State, Trajectory};
pub use model::SimConfig;
