//! Recursive dynamics of serial chains of flexible Euler–Bernoulli links.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod error;
pub mod integrator;
pub mod joints;
pub mod linalg;
pub mod link;
pub mod modal;
pub mod quadrature;
pub mod scenario;
pub mod screw;
pub mod validation;

pub use error::{ConfigIssue, Error, Result};
