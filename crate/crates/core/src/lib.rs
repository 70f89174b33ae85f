//! Scaling-invariant Besov norms `B^s_{n/s,q}` of grid-sampled planar
//! functions, the bump and condenser constructions built from them, condenser
//! capacities, and composition-operator experiments for planar homeomorphisms.

pub mod error;
pub mod besov;
pub mod capacity;
pub mod cli;
pub mod constructions;
pub mod grid;
pub mod homeo;

pub use error::{Error, Result};
