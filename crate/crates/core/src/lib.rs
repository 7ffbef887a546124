//! Globally optimal pulse excitations for linear multi-port
//! electromagnetic systems.

pub mod codesign;
pub mod error;
pub mod operator_assembly;
pub mod pipeline;
pub mod qcqp;
pub mod quadrature;
pub mod selftest;
pub mod spectral_basis;
pub mod synthetic;
pub mod transfer_data;
pub mod waveform;
pub mod wire_mom;

pub use error::{Error, Result};
