//! Semiclassical moment dynamics of anharmonic oscillators.

pub mod adiabatic;
pub mod cli;
pub mod coefficients;
pub mod config;
pub mod effective;
pub mod error;
pub mod hierarchy;
pub mod model;
pub mod ode;
pub mod taylor;
pub mod trajectory;

pub use error::{Error, Result};
pub use model::{Jet, OscillatorModel};
