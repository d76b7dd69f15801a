//! Pullback random attractors of monotone evolution equations with additive
//! noise: discrete Gelfand triples, monotone drifts and their structural
//! conditions, stationary-increment noise paths, an implicit pathwise flow
//! solver, and pullback/contraction experiments.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Stencil loops index several arrays by node.
#![allow(clippy::needless_range_loop)]

pub mod attractor;
pub mod drift;
pub mod error;
pub mod field_space;
pub mod flow;
pub mod noise;
pub mod rng;
pub mod stats;
pub mod tridiag;

pub use error::{Error, Result};
pub use field_space::{Field, SpatialGrid, TripleKind, TripleSpec};
