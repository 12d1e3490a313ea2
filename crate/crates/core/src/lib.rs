//! Interacting particle systems with common noise: simulation, exact optimal
//! transport, stochastic characteristics and mean-field diagnostics.

pub mod characteristics;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod kernels;
pub mod measure;
pub mod noise;
pub mod sampling;
pub mod stats;
pub mod transport;

pub use error::{Error, Result};
