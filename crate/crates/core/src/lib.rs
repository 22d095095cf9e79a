//! Counting statistics of photon clicks from open quantum systems and the
//! timing error of clocks that read those clicks.
//!
//! The two-level atom driven at Rabi frequency Ω and decaying at rate γ is
//! the reference model; general finite-dimensional Lindblad models work
//! through the same spectral and trajectory code paths.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod format;
pub mod ldp;
pub mod linalg;
pub mod lindblad;
pub mod qjmc;
pub mod range;
pub mod wtd;
