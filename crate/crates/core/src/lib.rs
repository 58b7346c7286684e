//! Periodic homogenization of perforated elastic layers coupled to Stokes flow.

pub mod cell;
pub mod correctors;
pub mod error;
pub mod fem;
pub mod forcing;
pub mod geometry;
pub mod io;
pub mod macro_fsi;
pub mod micro;
pub mod tensors;

pub use error::{Error, Result};
