pub mod amr;
pub mod config;
pub mod error;
pub mod grid;
pub mod io;
pub mod riemann;
pub mod solver;
pub mod sources;
pub mod storm;

pub use error::{Result, SurgeError};
