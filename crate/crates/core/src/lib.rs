//! Two-dimensional TM-mode FDTD on staggered grids with summation-by-parts
//! operators, weakly imposed boundary conditions and energy-stable subgridding.

pub mod boundary;
pub mod cli;
pub mod config;
pub mod error;
pub mod format;
pub mod grid;
pub mod integrator;
pub mod interface;
pub mod runner;
pub mod sbp;
pub mod scenario;
pub mod source;
pub mod stability;
pub mod system;

pub use error::{Error, Result};
