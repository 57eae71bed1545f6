//! Movable-antenna integrated sensing and communication for roadside units.

pub mod error;
pub mod fim;
pub mod linalg;
pub mod model;
pub mod tracking;
pub mod objective;
pub mod solver;
pub mod power;
pub mod beamforming;
pub mod antenna;
pub mod pso;

pub use error::{Error, Result};
pub mod orchestrator;
pub mod config;
pub mod output;
