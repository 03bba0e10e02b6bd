//! Persistence-based topological optimization.
//!
//! Filtrations on simplicial complexes, persistence computation, diagram
//! distances and losses, and gradient schemes for minimizing topological
//! losses over point clouds or raw filtration values.

pub mod complex;
pub mod error;
pub mod experiments;
pub mod filtrations;
pub mod losses;
pub mod metrics;
pub mod optimizer;
pub mod persistence;
pub mod schemes;
pub mod validation;

pub use complex::{Filtration, OrderingSignature, Simplex, SimplicialComplex};
pub use error::{Result, TopoError};
