//! Event-level simulation of correlated photon streams from spontaneous and
//! stimulated parametric down-conversion, an analog photodetector model, and
//! correlation-based absolute quantum-efficiency calibration.
//!
//! The pipeline is
//! [`stream_gen`] → [`detector`] → [`correlator`] → [`calibration`],
//! orchestrated by [`pipeline`] and driven from the command line through
//! [`cli`] with a [`config::RunConfig`].

pub mod calibration;
pub mod cli;
pub mod config;
pub mod correlator;
pub mod detector;
mod error;
pub mod pipeline;
pub mod rng;
pub mod stream_gen;

pub use error::{Error, Result};
