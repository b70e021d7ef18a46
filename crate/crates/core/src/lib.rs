pub mod components;
pub mod cycle;
pub mod designloop;
pub mod error;
pub mod presets;
pub mod transcriber;
pub mod validator;

pub use error::{Error, Infeasibility, Result};
