pub mod cli;
pub mod dilated;
pub mod error;
pub mod parallel;
pub mod rng;
pub mod scaling;
pub mod sff;
pub mod stochastic;
pub mod tmat;
pub mod weyl;

pub use error::{Error, Result};
