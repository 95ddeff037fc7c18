pub mod channel;
pub mod codec;
pub mod config;
pub mod error;
pub mod metrics;
pub mod pipeline;
pub mod protocol;
pub mod rng;
pub mod simkit;
pub mod tensor;

pub use error::{Error, Result};
