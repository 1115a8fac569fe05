//! Iterative soft-thresholding and the generalized gradient projection
//! method for ℓ¹-regularized linear inverse problems on finite truncations
//! of ℓ², together with the quantities needed to certify their convergence:
//! descent values, Bregman and Taylor distances, support analysis, fitted
//! rates and closed-form linear rate certificates.
//!
//! ```
//! use ista_core::operators::DenseOperator;
//! use ista_core::prox::{Penalty, Weights};
//! use ista_core::solvers::{solve, Problem, StepSizeRule, StoppingRule};
//!
//! let problem = Problem::new(
//!     DenseOperator::identity(2),
//!     vec![2.0, 0.25],
//!     Penalty::WeightedL1(Weights::constant(2, 0.5).unwrap()),
//! )
//! .unwrap();
//! let out = solve(&problem, None, &StepSizeRule::Constant(1.0), &StoppingRule::default()).unwrap();
//! assert_eq!(out.state.iterate, vec![1.5, 0.0]);
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod io;
pub mod operators;
pub mod oracle;
pub mod prox;
pub mod serde_ext;
pub mod solvers;
pub mod vecops;

pub use error::{Error, Result};
