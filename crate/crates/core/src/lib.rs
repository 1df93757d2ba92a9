pub mod cli;
pub mod connection;
pub mod error;
pub mod expr;
pub mod lie;
pub mod normal_form;
pub mod numeric;
pub mod sim;
pub mod system;
pub mod zerodyn;

pub use error::{Error, Result};
