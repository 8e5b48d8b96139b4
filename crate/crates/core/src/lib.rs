//! softshift: softmax regression with certified induced target shifts.
//!
//! The crate computes, for a softmax-regression problem, how much the model
//! prediction moves when either the weight vector or the data matrix takes a
//! small step — read as a shift of the regression target — and certifies
//! the move against a family of log-space Lipschitz bounds, up to the
//! theorem-level constant `M = n^1.5 exp(10 R^2)`. A property harness
//! samples the hypothesis region, a trajectory simulator compares
//! gradient-descent-induced and attention-induced shifts, and a CLI binds
//! everything to files on disk.
//!
//! Layer map:
//! - [`numkit`]: dense vectors/matrices, spectral norm, seeded RNG streams
//! - [`softmax`]: prediction, loss, closed-form gradient
//! - [`shift`]: exact `delta_b`, its split, and all log-space bounds
//! - [`harness`]: samplers, independent oracles, suite runner, reports
//! - [`icl`]: gradient-descent and attention-layer trajectories
//! - [`plot`]: deterministic SVG scatter of actual vs bound
//! - [`cli`]: the `softshift` binary

pub mod cli;
pub mod error;
pub mod harness;
pub mod icl;
pub mod numkit;
pub mod plot;
pub mod shift;
pub mod softmax;

pub use error::{Error, Precondition, Result};
