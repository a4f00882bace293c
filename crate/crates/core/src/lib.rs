//! Behavioral simulator for training MTJ crossbar neural networks in place
//! with stochastic spin-transfer-torque switching.

pub mod crossbar;
pub mod datasets;
pub mod device;
pub mod error;
pub mod harness;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
