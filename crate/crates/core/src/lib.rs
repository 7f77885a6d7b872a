//! Finite-volume multiscale analysis for the lattice Anderson model
//! `H = -Δ + λ V_ω` on `ℓ²(ℤ^d)`.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: lattice boxes, boundary belts, cell grids and overlap tests.
//! * [`ensemble`]: the i.i.d. random environment and finite-volume Hamiltonians.
//! * [`spectral`]: spectra, Green's-function blocks, eigenvectors and time evolution.
//! * [`msa`]: regularity predicates, Monte Carlo probability estimates, scale
//!   schedules and the staged bootstrap.
//! * [`diagnostics`]: empirical checks of the structural hypotheses (SLI, EDI,
//!   Wegner, NE) and of the localization conclusions.
//! * [`runner`]: configuration, experiment dispatch and reproducible output.

pub mod diagnostics;
pub mod ensemble;
pub mod error;
pub mod geometry;
pub mod msa;
pub mod runner;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
