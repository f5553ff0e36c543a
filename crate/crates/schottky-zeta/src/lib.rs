//! Numerical toolkit for convex co-compact Schottky surfaces and their
//! random permutation covers: word combinatorics and nested-interval
//! partitions, twisted transfer operators on Bergman spaces, Selberg and
//! dynamical zeta functions with zero counting, and seeded Monte-Carlo
//! experiment pipelines.

pub mod error;
pub mod experiments;
pub mod linalg;
pub mod par;
pub mod permrep;
pub mod schottky;
pub mod util;
pub mod zeta;
pub mod transfer;
pub mod words;

pub use error::{Error, Result};
pub use num_complex::Complex64;
