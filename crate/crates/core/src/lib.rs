//! Numerical kernel for spacetime-harmonic functions on initial data sets
//! whose asymptotic end is a cylinder over a flat torus.
//!
//! Data live on a lattice in the chart `(r, ξ, θ)`; see [`grid::Grid`].
//! The cosmological constant is fixed at `Λ = −3`.

pub mod data;
pub mod dual;
pub mod error;
pub mod fd;
pub mod field;
pub mod geometry;
pub mod grid;
pub mod levelset;
pub mod models;
pub mod quadrature;
pub mod solver;
pub mod tensor;
pub mod tuner;
pub mod verify;

pub use data::{BoundaryComponent, BoundaryKind, DerivativeMode, InitialDataSet};
pub use error::{Error, Result};
pub use grid::{Backend, Excision, Grid};
pub use models::{build_model, ModelKind, ModelSpec};
pub use tensor::{Sym2, Sym3};
