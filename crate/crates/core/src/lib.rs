//! Numerical tools for variable-exponent Lebesgue spaces: modulars and
//! Luxemburg norms, non-increasing rearrangements, generalized Cantor sets,
//! and certificates for (almost-)compact embeddings.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cantor;
pub mod certifier;
pub mod domain;
pub mod error;
pub mod exponent;
pub mod expr;
pub mod grid;
pub mod modular;
pub mod numerics;
pub mod rearrangement;
pub mod report;
pub mod sobolev;

pub use domain::Domain;
pub use error::{Error, Result};
pub use exponent::ExponentField;
pub use expr::Expr;
pub use grid::{GridFunction, Partition};
pub use report::{Evidence, Real, Verdict};
