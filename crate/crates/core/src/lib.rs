//! Modelling, simulation and analysis of a ppKTP photon-pair source:
//! quasi-phase-matching and bandwidth, focusing, detector-limited rate
//! prediction, Monte Carlo timestamp streams, coincidence analysis and
//! polarization entanglement.

// NaN-rejecting guards are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod config;
pub mod detection;
pub mod dispersion;
pub mod error;
pub mod focusing;
pub mod phasematch;
pub mod polarization;
pub mod sim;
pub mod stream;
pub mod units;

pub use error::{Error, Result};
