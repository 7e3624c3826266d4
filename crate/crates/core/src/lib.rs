//! Behavioral simulator for ferroelectric-FET NAND strings.

pub mod electrostatics;
pub mod array;
pub mod cell;
pub mod config;
pub mod error;
pub mod experiments;
pub mod kinetics;
pub mod string;
pub mod units;
pub mod waveform;

pub use error::{Error, Result};
