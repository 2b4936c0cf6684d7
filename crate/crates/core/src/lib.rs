pub mod builder;
pub mod cli;
pub mod config;
pub mod error;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod model;
pub mod sampler;
pub mod synth;
pub mod train;
pub mod vip;

pub use error::{Error, Result};
