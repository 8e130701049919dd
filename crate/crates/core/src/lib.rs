//! Kolmogorov widths, approximation radii and minimax risk certificates for
//! centrally symmetric convex bodies, with truncated series estimators for
//! the Gaussian sequence model `y = x + w`, `w ~ N(0, sigma^2 I)`.

pub mod bodies;
pub mod bounds;
pub mod duality;
pub mod estimators;
mod error;
pub mod numerics;
pub mod par;
pub mod search;
pub mod widths;

pub use bodies::{Body, BodySpec, BoxBody, Ellipsoid, PolytopeH, PolytopeV};
pub use error::{Error, Result};
pub use numerics::{SeedSpec, Subspace};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
