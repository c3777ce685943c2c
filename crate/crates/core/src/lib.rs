pub mod error;
pub mod ergodic;
pub mod cli;
pub mod coupling;
pub mod diagnostics;
pub mod discounted;
pub mod linearized;
pub mod noise;
pub mod solver;
pub mod torus;

pub use error::{MfgError, Result};
