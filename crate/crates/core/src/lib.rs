//! Attribute manipulation of real images from synthetic demonstration
//! triplets, with a built-in procedural glyph data source, training loop,
//! and attribute-isolation metrics.

pub mod domains;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod util;

pub use error::{Error, Result};
