//! Output regulation for diagonal (Riesz-spectral) plants driven by periodic
//! signal generators with infinitely many harmonics.
//!
//! Everything is computed in modal coordinates: the plant generator is a
//! sequence of eigenvalues, inputs and outputs are coefficient sequences, and
//! the exosystem is a weighted Fourier space.

pub mod cli;
pub mod config;
pub mod error;
pub mod exosystem;
pub mod io;
pub mod regulator;
pub mod scenarios;
pub mod simulator;
pub mod spectral;
pub mod sylvester;
pub mod tolerances;

pub use error::{Error, Result};
pub use exosystem::{ExoSpace, ExoState};
pub use regulator::{FeedforwardGain, ModalCoupling, SylvesterSolution};
pub use scenarios::{Scenario, ScenarioConfig, ScenarioKind};
pub use simulator::SimulationResult;
pub use spectral::{DiagonalGenerator, ModeRange, SpectralVector};
