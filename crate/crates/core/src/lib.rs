//! Dictionary learning directly from compressive samples, and sparse recovery
//! against the learned dictionary.
//!
//! The pipeline frames a signal, senses each frame with a random measurement
//! operator, extracts intrinsic mode functions from the (interpolated)
//! measurements with ensemble EMD, clusters them level by level into dictionary
//! atoms, and finally recovers the frames by basis pursuit denoising against
//! the effective dictionary `D = Φ Ψ`.
//!
//! This crate is `no_std` (it needs `alloc`). File formats, audio I/O and the
//! command line live in the `csemd` crate.

#![no_std]
// `!(x > 0.0)` is how NaN gets rejected here
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
pub mod linalg;
pub mod rng;

pub mod dictionary;
pub mod emd;
pub mod framing;
pub mod metrics;
pub mod recovery;
pub mod sensing;

pub use error::{Error, Result};
pub use linalg::Matrix;
