//! Global optimization of drive parameters and landscape scans.

mod annealing;
mod cost;
mod landscape;
mod local;

pub use annealing::*;
pub use cost::*;
pub use landscape::*;
pub use local::{nelder_mead, LocalResult, NelderMeadConfig};
