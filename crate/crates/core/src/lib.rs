//! Dirichlet energy of a planar disk with a dihedral-symmetric obstacle.
//!
//! The library solves the Laplace problem on the region between a star-shaped
//! obstacle (zero boundary value) and an enclosing disk (constant datum) with
//! P1 finite elements on a structured polar mesh, evaluates the Dirichlet
//! energy by volume and boundary routes, and differentiates it with respect to
//! rotation, translation and scaling of the obstacle via boundary integrals of
//! the recovered flux. A sweep harness reproduces energy tables over those
//! parameters and validates the derivatives against finite differences.

pub mod error;
pub mod fem;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod mesh;
pub mod shape;

pub use error::{Error, Result};
pub use geometry::{Configuration, ObstacleSpec, OrientationClass, Placement};
pub use mesh::{AnnularMesh, Resolution};
pub use shape::{PerturbationField, SolvedCase};
