//! Boundary matrix reduction, persistence pairs and diagrams, and vineyard
//! updates.

pub mod diagram;
pub mod pairing;
pub mod partial;
pub mod reduction;

pub use diagram::{diagram, DiagramPoint, PersistenceDiagram};
pub use pairing::{pairs_for_order, persistence_pairs, PersistencePairing};
pub use partial::{PartialReduction, URow};
pub use reduction::{reduce, reduce_dual, transpose_adjacent, ReducedDecomposition};
