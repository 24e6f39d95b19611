#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classical;
pub mod eigen;
pub mod error;
pub mod fields;
pub mod lattice;
pub mod pauli;
pub mod potential;
pub mod quadrature;
pub mod reference;
pub mod scenario;
pub mod schrodinger;
pub mod transform;

pub use error::{Error, Result};
