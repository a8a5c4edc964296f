//! Fourth-order compact finite differences for the Heston stochastic
//! volatility PDE.
//!
//! The crate is organised along the pipeline: [`model`] (parameters and
//! transformations), [`stencil`] (nine-point weights), [`grid`], [`solver`]
//! (assembly, linear algebra and the time loop), [`analytic`] (Fourier and
//! Monte Carlo reference prices), [`stability`] (von Neumann analysis),
//! [`harness`] (convergence studies and stability maps) and [`cli`].

pub mod analytic;
pub mod cli;
pub mod error;
pub mod model;
pub mod grid;
pub mod harness;
pub mod solver;
pub mod stability;
pub mod stencil;

pub use error::{Error, Result};

