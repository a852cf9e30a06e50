//! Delay-coordinates dynamic mode decomposition with geometric order
//! detection.
//!
//! The pipeline is: synthesize or load samples ([`signal`]), embed and
//! decompose them ([`dmd`]), score every computed mode ([`selection`]) and
//! split the scores into true and spurious groups. [`companion`] holds the
//! block-companion least-squares operator used to cross-check the residual
//! identities, and [`harness`] runs seeded Monte-Carlo sweeps over all of it.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod companion;
pub mod dmd;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod seed;
pub mod selection;
pub mod signal;

pub use error::{Error, Result};
