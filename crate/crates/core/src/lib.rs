//! Quantum (Bohmian) and classical chaos in a perturbed 2D harmonic
//! oscillator.

pub mod basis;
pub mod bohm;
pub mod classical;
pub mod error;
pub mod field;
pub mod grid;
pub mod hermite;
pub mod io;
pub mod nodes;
pub mod ode;
pub mod params;
pub mod spectral;
pub mod state;

pub use error::{Error, Result};
pub use params::OscillatorParams;
