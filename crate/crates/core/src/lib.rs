//! Numerical index theory on model domains.
//!
//! The crate computes boundary symbols of elliptic operators on the unit
//! disc and on the interval, the projector onto decaying solutions of the
//! boundary ODE (by a Riesz projector and by residue calculus), Green's
//! formula boundary matrices, orthonormal bases of `Ker D_max`, Toeplitz
//! compressions and their Fredholm indices, and the winding-number side of
//! the boundary index formula. A small finite-matrix laboratory checks the
//! bounded-transform algebra used to build K-homology cycles.
//!
//! Symbol convention used everywhere: `D_x = -i ∂_x`, so an operator with
//! coefficients `c_α` in front of `D^α` has full symbol `Σ c_α ξ^α`.

pub mod bergman;
pub mod calderon;
pub mod cli;
pub mod error;
pub mod greens;
pub mod linalg;
pub mod poly;
pub mod quadrature;
pub mod symbolcore;
pub mod tolerances;
pub mod topoindex;
pub mod transformlab;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Dense complex matrix used throughout.
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVec = nalgebra::DVector<C64>;
