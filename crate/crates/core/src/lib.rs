pub mod ar;
pub mod calibration;
pub mod error;
pub mod estimators;
pub mod hermite;
pub mod inference;
pub mod optim;
pub mod rng;
pub mod skewnormal;

pub use error::{Error, Result};
