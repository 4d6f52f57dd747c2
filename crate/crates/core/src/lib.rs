//! Monte-Carlo simulation of ghost imaging and ghost diffraction with
//! parametric twin beams.
//!
//! The pipeline per pulse: vacuum noise ([`engine`]) through the crystal
//! ([`gain`], [`engine`]), lens systems and object ([`optics`]), detectors and
//! correlation statistics ([`correlator`]). [`reference`] holds quadrature
//! oracles and the classical mixture sources; [`config`] and [`runner`] drive
//! complete experiments.

pub mod config;
pub mod correlator;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod gain;
pub mod grid;
pub mod optics;
pub mod photon;
pub mod reference;
pub mod runner;

pub use error::{Error, Result};
