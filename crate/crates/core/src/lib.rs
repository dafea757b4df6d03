//! Forward-motion tracking and rigid-body formation control for unicycle
//! vehicles on SE(2).
//!
//! - [`se2`]: planar Lie-group arithmetic.
//! - [`kinematics`]: the unicycle plant and leader speed profiles.
//! - [`tracking`]: the two-stage tracking controller and its Lyapunov monitor.
//! - [`geometry`]: heading offsets, adjoint orbits and formation classes.
//! - [`network`]: directed-tree formations and the per-follower law.
//! - [`sim`]: scenarios, closed-loop runs, metrics and file output.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod kinematics;
pub mod network;
pub mod se2;
pub mod sim;
pub mod tracking;

pub use error::{Error, Result};
