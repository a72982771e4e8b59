//! Quantum-noise spectra of a cavity coupled to several localized mechanical
//! modes: closed-form output spectra, exact and stochastic oracles, trace
//! fitting and parameter sweeps.
//!
//! Rates are angular (rad/s) everywhere inside the crate; Hz appears only in
//! configuration files, trace files and the [`units`] conversions.

pub mod cli;
pub mod error;
pub mod fitting;
pub mod io;
pub mod model;
pub mod oracle;
pub mod presets;
pub mod spectra;
pub mod sweeps;
pub mod units;

pub use error::{Error, Result};
pub use model::{CavityParams, MechanicalMode, SystemModel};
pub use spectra::{ComponentSpectra, QuadratureAngle, Quantity, SpectrumEvaluator, SpectrumTrace, Stage};
