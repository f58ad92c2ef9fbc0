//! Recover a 3D landmark shape, up to scale, from its 2D landmarks in a
//! single view.
//!
//! The pipeline standardizes 2D landmark coordinates so the unknown
//! weak-perspective camera cancels, regresses per-landmark depth with a small
//! feed-forward tanh network trained on rotation-augmented shapes, and stacks
//! the standardized image coordinates on top of the predicted depths. A
//! recurrent single-layer imputer fills in missing landmarks before the
//! depth network runs, and reconstruction quality is scored as the mean
//! per-landmark distance after similarity alignment.

mod error;

pub mod augment;
pub mod dataset;
pub mod geometry;
pub mod imputer;
pub mod net;
pub mod pipeline;
pub mod rng;
pub mod synth;
mod textio;

pub use error::{Error, Result};
