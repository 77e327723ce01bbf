//! Registration of football broadcast frames to a top-view pitch model by
//! nearest-neighbour search over a dictionary of synthetic edge maps.

pub mod cli;
pub mod dictionary;
pub mod edgemap;
pub mod error;
pub mod evalharness;
pub mod features;
pub mod geometry;
pub mod matcher;
pub mod pitch_model;
pub mod preprocess;
pub mod temporal;

pub use error::{Error, Result};
