//! Numerical probes of the hypotheses the multiscale analysis consumes and of
//! the localization it concludes: SLI and EDI ratios, Wegner and `N_E`
//! scans, eigenfunction decay, dynamical moments, correlators and Lyapunov
//! exponents.

mod hypotheses;
mod localization;
mod lyapunov;

pub use hypotheses::*;
pub use localization::*;
pub use lyapunov::*;
