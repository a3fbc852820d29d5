//! Information-bottleneck odometry on a synthetic multi-sensor world.

pub mod autodiff;
pub mod blob;
pub mod error;
pub mod eval;
pub mod info;
pub mod model;
pub mod rng;
pub mod run;
pub mod se3;
pub mod train;
pub mod world;

pub use error::{Error, Result};
