//! Adaptive multiresolution finite-volume solver for evolutionary PDEs in
//! one and two space dimensions, with scale-dependent local time-stepping
//! synchronized by natural continuous extensions of Runge-Kutta methods.
//!
//! The crate provides:
//! - a dynamic graded dyadic tree with leaf/internal/virtual-leaf
//!   bookkeeping ([`tree`]),
//! - the cell-average multiresolution transform, thresholding and grid
//!   adaptation ([`mr`]),
//! - compact RK2/RK3 stages with NERK dense output ([`time`]),
//! - the local time-stepping scheduler with all stage-wise synchronization
//!   paths ([`lt`]),
//! - the built-in PDE models and numerical fluxes ([`models`]),
//! - a flat uniform-grid solver used for baselines and references
//!   ([`uniform`]),
//! - diagnostics including the exact-rational interface stability harness
//!   ([`diagnostics`]),
//! - the batch runner, config parsing and the fixed-two-grid convergence
//!   study ([`runner`]).
//!
//! See the examples directory for one runnable program per capability.

pub mod diagnostics;
pub mod error;
pub mod lt;
pub mod models;
pub mod mr;
pub mod runner;
pub mod state;
pub mod time;
pub mod tree;
pub mod uniform;

pub use error::{Error, Result};
pub use models::{builtin_problems, ModelKind, ModelSpec};
pub use runner::{parse_config, run, RunConfig};
pub use time::SchemeKind;
pub use tree::{CellIndex, GradedTree, NodeKind};
