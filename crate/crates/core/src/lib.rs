//! Generalized CFFV and Foldy-Wouthuysen transformations for scalar particles
//! in stationary electromagnetic fields, on periodic spectral grids.

pub mod cffv;
pub mod config;
pub mod dkp;
pub mod error;
pub mod exec;
pub mod fields;
pub mod fw;
pub mod operator;
pub mod packet;
pub mod semiclassical;

pub use error::{Error, Result};
pub use faer::c64;
