//! Exact diagonalisation of a harmonic oscillator linearly coupled to a continuum
//! of harmonic bath modes, at arbitrary coupling strength.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod fano;
pub mod groundstate;
pub mod measure;
pub mod oracle;
pub mod quadrature;
pub mod spectra;
pub mod weakcoupling;

pub use error::{DoscError, Result};
pub use fano::{compute_pi, FanoOptions, SpectralSolution};
pub use measure::FrequencyMeasure;
pub use spectra::{CouplingFamily, CouplingSpectrum, PositivityReport, UnitSystem};
