//! Blind decoding of real MIMO channels with hypercubic constellations.
//!
//! The receiver sees `Y = A X + E` for an unknown square channel `A` and
//! recovers both `A⁻¹` (up to a signed permutation) and `X` by fitting a
//! minimum-volume parallelepiped around the samples.
//!
//! * [`linalg`]: small dense kernels and the seeded RNG.
//! * [`model`]: constellations, channels and transmission.
//! * [`solver`]: the interior-point parallelepiped fit and vertex walk.
//! * [`theory`]: exact success predictions and combinatorial certificates.
//! * [`eval`]: ZF/ML baselines, ATM alignment and error metrics.
//! * [`experiment`]: the Monte Carlo harness behind the CLI.

// `!(x > y)` comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod eval;
pub mod experiment;
pub mod linalg;
pub mod model;
pub mod solver;
pub mod theory;
