//! Numerical laboratory for almost Hermitian geometry.
//!
//! Charts carry a metric `g` and an almost complex structure `J`; from those the
//! crate builds unitary frames, the canonical connection with vanishing
//! (1,1)-torsion, curvature in the unitary frame, distance Hessians with their
//! Riccati comparison bounds, tamed exhaustion certificates and Schwarz-type
//! checks for almost holomorphic maps.

pub mod catalog;
pub mod config;
pub mod connection;
pub mod curvature;
pub mod distance;
pub mod error;
pub mod exhaustion;
pub mod growth;
pub mod identities;
pub mod manifold;
pub mod maps;
pub mod numeric;
pub mod output;
pub mod run;

pub use error::{GeometryError, Result};
