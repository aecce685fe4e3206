//! File formats, dataset I/O, rendering and the `nastar` command line on top
//! of `nastar-core`.

pub mod bench;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod formats;
pub mod render;
pub mod results;

pub use error::{Error, Result};
pub use nastar_core as core;
