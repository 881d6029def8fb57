//! q-deformed Kogut-Susskind SU(2)_k lattice gauge theory.

pub mod circuit;
pub mod error;
pub mod linalg;
pub mod qalgebra;
pub mod sparse;
pub mod spinnet;
pub mod variational;

pub use error::{Error, Result};
