//! Hysteretic ferroelectric and magneto-electric media coupled
//! self-consistently to Maxwell's equations.
//!
//! The crate is organised bottom-up:
//!
//! - [`point`]: the zero-dimensional four-channel hysteresis model, its
//!   branch-wise closed-form solution and loop descriptors.
//! - [`grid`]: the staggered (Yee) lattice, discrete curl/divergence
//!   operators and the perfectly conducting wall condition.
//! - [`rotating`]: the constitutive kernel for a ferroelectric cylinder
//!   rotating rigidly about its soft (z) axis.
//! - [`cavity`]: the driven-cavity time loop, sources, probes and the
//!   validation experiments.
//! - [`config`]: the dotted `key = value` run configuration format.

pub mod cavity;
pub mod config;
pub mod constants;
pub mod error;
pub mod grid;
pub mod point;
pub mod rotating;

mod numeric;

pub use constants::PhysicalConstants;
pub use error::{Error, Result};
