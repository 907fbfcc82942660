//! Cubic first integrals of two-dimensional conservative potentials.
//!
//! Killing-tensor constructions on the Euclidean plane, the linear condition
//! systems a cubic first integral must satisfy, a nullspace search over finite
//! ansätze, trajectory-based verification, and a catalog of known cases.

pub mod catalog;
pub mod conditions;
pub mod dynamics;
pub mod expr;
pub mod geometry;
pub mod linalg;
pub mod search;
