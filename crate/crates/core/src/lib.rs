//! Finite frames with prescribed frame-operator spectrum and vector norms.
//!
//! Frames are built from eigenstep tables (chains of interlacing spectra),
//! checked against them, analysed for the reconstruction error of their
//! canonical duals under additive noise, and completed by appending vectors of
//! prescribed norm so that this error is as small as possible.

pub mod error;
pub mod numerics;
pub mod report;
pub mod eigensteps;
pub mod synthesis;
pub mod analysis;
pub mod completion;
pub mod io;
pub mod cli;

pub use error::{Error, Result};
pub use numerics::{Matrix, Spectrum};
pub use report::ValidationReport;
