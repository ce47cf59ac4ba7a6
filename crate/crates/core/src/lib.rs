//! Isentropic compressible Navier-Stokes on a rectangular MAC grid with
//! no-slip walls, together with the functionals used to verify exponential
//! decay toward the constant equilibrium: a discrete Bogovskii operator, the
//! relative-entropy integrand, the corrected Lyapunov functional and its
//! dissipation, and decay-rate fitting.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bogovskii;
pub mod dense;
pub mod error;
pub mod fluid;
pub mod grid;
pub mod lyapunov;
pub mod poisson;
pub mod quadrature;
pub mod solver;

pub use error::{Error, Result};
pub use fluid::{EquilibriumState, FluidParams, State};
pub use grid::{GridSpec, ScalarField, TensorFieldNorms, VectorField, VelocityGradient};
