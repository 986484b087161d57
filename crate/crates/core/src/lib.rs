//! Growth estimates for subharmonic functions near singular sets, with a
//! discrete Perron oracle to check them against.

pub mod bound;
pub mod domar;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod measure;
pub mod monotone;
pub mod perron;
pub mod quad;
pub mod rng;
pub mod selfimprove;

pub use error::{Error, Result};
