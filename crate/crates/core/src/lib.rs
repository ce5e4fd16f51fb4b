pub mod cli;
pub mod criticality;
pub mod error;
pub mod fdcheck;
mod json;
pub mod numerics;
pub mod penalty;
pub mod problem;
pub mod solver;

pub use error::{Error, Result};
