//! Differentiable A* search over eight-connected grid worlds.
//!
//! The crate is `no_std` (with `alloc`) and holds every algorithmic piece:
//!
//! - [`grid`]: map and instance types, the Chebyshev heuristic, and classical
//!   planners (A*, weighted A*, best-first, Dijkstra) used as baselines and oracles.
//! - [`autodiff`]: a small reverse-mode tape over dense `f64` arrays.
//! - [`diff_astar`]: the matrix-form A* search recorded on the tape, plus a
//!   priority-queue fast path with identical forward behaviour.
//! - [`encoder`]: a compact U-Net that turns an instance into a guidance map.
//! - [`train`]: closed-list L1 loss, RMSProp, and the training loop.
//! - [`datagen`]: synthetic maps, start/goal sampling, and labelling.
//! - [`metrics`]: Opt / Exp / Hmean, path-length ratio, chamfer distance, bootstrap.
//!
//! IO, file formats, and the command-line tool live in the `nastar` crate.

#![no_std]

extern crate alloc;

pub mod autodiff;
pub mod datagen;
pub mod diff_astar;
pub mod encoder;
mod error;
pub mod grid;
mod math;
pub mod metrics;
pub mod planner;
pub mod train;

pub use error::{Error, Result};
pub use grid::{GridMap, MapKind, NodeIndex, NodeMask, ProblemInstance, ScalarField, SearchResult};
