pub mod cli;
pub mod error;
pub mod fit;
pub mod lattice;
pub mod linalg;
pub mod sim;
pub mod spectral;
pub mod wave;

pub use error::{Error, Result};
