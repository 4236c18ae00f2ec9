#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod couplings;
pub mod cumulant;
pub mod ensemble;
pub mod error;
pub mod lattice;
pub mod observables;
pub mod oracle;
pub mod ode;
pub mod output;
pub mod rng;

pub use error::{Error, Result};
