//! Numerical laboratory for the Lagrange top near gyroscopic stabilization.
//!
//! The crate simulates the reduced top on the manifold `{u.u = 1, u.v = a}`
//! and its weak coupling to a quasi-periodic oscillator, locates the 1:-1
//! eigenvalue collision of the vertical rotations, computes resonant Birkhoff
//! normal forms and the swallowtail stratification of the torus bundle, scans
//! Diophantine parameter sets, detects persisting invariant tori by frequency
//! analysis, and extracts the integer monodromy around the singular thread.

pub mod dioph;
pub mod error;
pub mod freqmap;
pub mod integrator;
pub mod linstab;
pub mod models;
pub mod monodromy;
pub mod normalform;
pub mod strata;

pub use error::{Error, Result};
