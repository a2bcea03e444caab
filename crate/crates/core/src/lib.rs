//! Cramér transforms, body families, half-space depth and random-polytope
//! experiments for concrete log-concave measures.

pub mod bodies;
pub mod claims;
pub mod cramer;
pub mod depth;
pub mod error;
pub mod floating;
pub mod measures;
pub mod moments;
pub mod polytopes;
pub mod quad;
pub mod rng;
pub mod sphere;
pub mod stats;

pub use error::{Error, Result};
pub use measures::{AffineMap, DirectionalMarginal, Factor, MeasureModel, ModelDescriptor, ModelKind, Point, Zoo};
pub use rng::SeedStream;
