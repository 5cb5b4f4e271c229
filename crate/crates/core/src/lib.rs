//! Steady-state, small-signal and time-domain models of a three-phase
//! voltage-fed inverter connected to a balanced grid through series inductors.

pub mod cli;
pub mod error;
pub mod frames;
pub mod ode;
pub mod params;
pub mod rational;
pub mod sim_avg;
pub mod sim_switched;
pub mod smallsignal;
pub mod steady_state;
pub mod svm;
pub mod trace;

pub use error::{Error, Result};
pub use params::ConverterParams;
pub use steady_state::OperatingPoint;
