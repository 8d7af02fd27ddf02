//! Numerical toolkit for the L-KS kernel and the SPDEs it drives.

pub mod config;
pub mod detsolver;
pub mod error;
pub mod fieldio;
pub mod girsanov;
pub mod grid;
pub mod kernel;
pub mod noise;
pub mod parallel;
pub mod quad;
pub mod regularity;
pub mod spdesim;
pub mod special;
pub mod spectral;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
