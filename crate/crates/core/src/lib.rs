//! Simulation and verification lab for the random-addition urn on ℤ^d.
//!
//! An urn holds integer-labelled balls. Each step draws `k` balls uniformly
//! with replacement (k = 2 by default) and adds a new ball whose label is the
//! coordinate-wise sum of the drawn labels. The crate provides:
//!
//! - [`urn`]: the exact, overflow-checked urn dynamics;
//! - [`oracle`]: closed-form annealed moments and the limit laws;
//! - [`fixedpoint`]: population dynamics for the recursive distributional
//!   equations whose fixed points are the exponential and Gamma(2) laws;
//! - [`analysis`]: estimators and goodness-of-fit statistics on urn output;
//! - [`harness`]: configuration, experiment commands and CSV emission.

pub mod analysis;
pub mod fixedpoint;
pub mod harness;
pub mod oracle;
pub mod rng;
pub mod urn;

pub use rng::{IndexSource, RngStream};
pub use urn::{Coord, Label, UrnError, UrnState};
