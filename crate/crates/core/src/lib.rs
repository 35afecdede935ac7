pub mod cli;
pub mod dual;
pub mod error;
pub mod fourier;
pub mod group;
pub mod io;
pub mod linalg;
pub mod operators;
pub mod padic;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
