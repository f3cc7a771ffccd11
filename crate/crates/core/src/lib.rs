//! Jump superoperator of a single-photon detector modelled as a two-level
//! sensor coupled to a field mode and drained by a thermal amplifier.
//!
//! Rates are in units of the coupling `g`; times are dimensionless
//! (`u = gamma t`) unless stated otherwise.

pub mod analytic;
pub mod characterization;
pub mod cli;
pub mod error;
pub mod field_state;
pub mod ode;
pub mod oracle;
pub mod params;
pub mod propagator;
pub mod quad;
pub mod special;

pub use analytic::{bright_coeff, dark_coeff, emission_coeff, qjs, qjs_with_emission, QjsCoefficients};
pub use error::{QjsError, Result};
pub use field_state::{apply_jump, click_probability, FockDistribution, JumpModel};
pub use params::{spectral_terms, DetectorParams, SpectralTerms};
