//! Certified bounds for the Lyapunov exponent of i.i.d. random products of
//! matrices.
//!
//! For nonnegative families the [`bounds`] module gives a sandwich
//! `beta_k <= lambda <= alpha_k` computed exactly over all products of
//! length `k`. Signed families get the semidefinite upper bound from
//! [`lifting`]. [`structure`] decides which bounds apply and
//! [`montecarlo`] gives an independent estimate.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod corpus;
pub mod ensemble;
pub mod error;
pub mod family;
pub mod lifting;
pub mod montecarlo;
pub mod optim;
pub mod structure;

pub use bounds::{BoundKind, BoundReport, BoundValue, Certificate};
pub use error::{Error, Result};
pub use family::{MatrixFamily, ProductIndex};
pub use montecarlo::{monte_carlo_lambda, McEstimate};
pub use nalgebra;
