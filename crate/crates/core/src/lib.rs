pub mod cli;
pub mod error;
pub mod eval;
pub mod io;
pub mod model;
pub mod nn;
pub mod sim;
pub mod tensor;

pub use error::{Error, Result};
