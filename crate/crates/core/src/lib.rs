//! Conservative and dissipative (contact) mechanics on Lie algebroids.
//!
//! An algebroid is given in coordinates by its anchor `rho^i_a(q)` and
//! structure functions `C^d_ab(q)`. From that data the crate evaluates the
//! linear Poisson bracket on `A*`, the Jacobi bracket on `A* x R`, Hamiltonian
//! and contact Hamiltonian vector fields, and the Herglotz equations on
//! `A x R`, and integrates them with per-sample dissipation diagnostics.

#![allow(
    clippy::needless_range_loop,
    clippy::neg_cmp_op_on_partial_ord,
    clippy::suspicious_arithmetic_impl
)]

pub mod algebroid;
pub mod catalog;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod expr;
pub mod integrate;
pub mod jacobi;
pub mod linalg;

pub use error::{Error, Result};
