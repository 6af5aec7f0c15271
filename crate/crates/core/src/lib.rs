pub mod baselines;
pub mod corpus;
pub mod diffkit;
pub mod encoder;
pub mod error;
pub mod experiment;
pub mod glc;
pub mod hydra;
pub mod model;
pub mod train;
pub mod weaklabel;

pub use error::{Error, Result};
