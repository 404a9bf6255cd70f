pub mod caps;
pub mod error;
pub mod experiments;
pub mod fixtures;
pub mod json;
pub mod matching;
pub mod osp;
pub mod mechanisms;
pub mod protocol;
pub mod rational;
pub mod rng;
pub mod valuations;
pub mod welfare;

pub use error::{Error, Result};
pub use rational::{int, rat, Rational};
