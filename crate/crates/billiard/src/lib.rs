//! Numerical laboratory for open billiard flows: billiard dynamics in the
//! exterior of finitely many disjoint strictly convex obstacles, curvature
//! evolution of unstable fronts, expansion-rate certificates, symplectic
//! non-integrability checks, and Ruelle transfer-operator spectra with
//! periodic-orbit counting.
//!
//! The crate is organized around the pipeline
//! geometry -> dynamics -> symbolic/orbits -> curvature -> certify/transfer/counting.
//! All scenes are unions of quadrics (spheres and ellipsoids), which keeps ray
//! intersections and boundary curvature exact.

pub mod certify;
pub mod counting;
pub mod curvature;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod orbits;
pub mod scenes;
pub mod symbolic;
pub mod transfer;

pub use error::{Error, Result};
