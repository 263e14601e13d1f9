//! Numerical laboratory for concave nonlocal elliptic equations of order
//! `σ ∈ (0, 2)` with rough kernels in one dimension.
//!
//! The crate covers operator evaluation with exact tail quadrature, monotone
//! Dirichlet solvers (linear, Bellman and extremal), Hölder seminorm
//! diagnostics, Liouville-hypothesis checkers and the oscillating-data
//! counterexamples to interior `C^{σ+α}` estimates.
#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod counterexamples;
pub mod error;
pub mod grid;
pub mod holder;
pub mod kernels;
pub mod liouville;
pub mod operators;
pub mod par;
pub mod params;
pub mod quad;
pub mod solver;

pub use error::{Error, Result};
pub use grid::{GridFunction, Interpolation, TailFormula, TailPiece, TailSpec};
pub use params::{EllipticityParams, HolderExponents};
