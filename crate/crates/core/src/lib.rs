pub mod error;
pub mod approx;
pub mod cell;
pub mod corrector;
pub mod fem;
pub mod fit;
pub mod geometry;
pub mod rough;
pub mod study;

pub use error::{Error, Result};
