//! Vacuum-induced transparency in a cold atomic ensemble inside a
//! high-finesse optical cavity: linear-response model, an independent
//! amplitude-equation solver, spatial and spectral averaging, pulse
//! propagation, synthetic photon counting and fitting.

// `!(x > 0.0)` guards are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimation;
pub mod io;
pub mod model;
pub mod oracle;
pub mod physics;
pub mod pulse;
pub mod recipes;
pub mod spatial;
pub mod synth;
pub mod units;

pub use error::{Result, VitError};
pub use model::{Corrections, VitModel};
pub use physics::{CavityGeometry, Detunings, PhysicalConfig, Susceptibility};
