//! Finite-time Lyapunov analysis of two-dimensional flows.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the numerics:
//! charts and metric representations, velocity fields and trajectory
//! integration, flow-map and deformation-gradient grids, closed-form SVD
//! fields with forward/backward FTLE, and the line-field / Lie-derivative
//! machinery used to extract and classify hyperbolic coherent structures.
//!
//! IO, configuration and parallel execution live in the companion `lcsk`
//! crate. Grid-wide operations take an [`Executor`] so callers can plug in a
//! thread pool; [`Serial`] is the built-in single-threaded one.

#![no_std]

extern crate alloc;

pub mod deformation;
pub mod dynamics;
mod error;
mod exec;
pub mod flowmap;
pub mod geometry;
pub mod lcs;
pub mod linalg;

pub use error::{Error, Result};
pub use exec::{Executor, Serial};
pub use linalg::{Mat2, Point2, Sym2, Vec2};
