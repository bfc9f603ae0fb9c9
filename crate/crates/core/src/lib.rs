//! Shortcut-to-adiabaticity pulse design from dynamical invariants.
//!
//! Ancillary angle functions are inverted into physical controls, scored by
//! their systematic-error sensitivity, optimized, and checked against direct
//! simulation of the perturbed Schrödinger equation.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ancillary;
pub mod cli;
pub mod descriptor;
pub mod dynamics;
pub mod error;
pub mod optimize;
pub mod quadrature;
pub mod sensitivity;
pub mod synthesis;
pub mod table;
pub mod tables;

pub use ancillary::{AncillaryScheme, SchemeKind, Target};
pub use error::{Result, StaError};
pub use synthesis::{AlphaMode, Pulse, PulseMetrics, PulseThreeLevel, PulseTwoLevel};

/// Crate version, stamped into every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
