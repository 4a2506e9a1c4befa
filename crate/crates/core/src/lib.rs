pub mod cli;
pub mod constants;
pub mod error;
pub mod mellin;
pub mod quad;
pub mod sim;
pub mod specfun;
pub mod symbol;

pub use error::{Error, Result};
