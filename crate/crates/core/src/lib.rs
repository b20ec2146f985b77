//! Abstraction-based synthesis of symbolic controllers for perturbed
//! nonlinear sampled systems.
//!
//! The pipeline has three stages. [`abstraction`] turns a sampled
//! continuous-time plant into a finite transition system over a uniform grid
//! cover of the state space, using a numerically integrated nominal flow and
//! a growth bound from [`odeint`] to over-approximate attainable sets.
//! [`synthesis`] solves safety, reach-avoid and recurrence problems on the
//! finite system by fixed-point iteration and extracts a controller.
//! [`runtime`] refines that controller through a static quantizer and drives
//! the perturbed closed loop.
//!
//! The [`relations`] module is the semantic backbone: full set-valued
//! systems, serial and feedback composition, behavior enumeration and the
//! refinement-relation checks that the rest of the crate is tested against.
//!
//! The crate is `no_std`-compatible (`alloc` is required); disable default
//! features and enable `libm` for builds without the standard library.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

#[cfg(not(any(feature = "std", feature = "libm")))]
compile_error!("symcon-core needs either the `std` or the `libm` feature for f64 math");

pub mod abstraction;
pub mod grid;
pub(crate) mod math;
pub mod odeint;
pub mod plants;
pub mod relations;
pub mod runtime;
pub mod synthesis;
pub mod system;

pub use grid::{CellId, HyperInterval, LatticeBox, Quantized, SuccessorBox, UniformGridCover};
pub use system::{ControlProblem, FiniteSystem, InputId, SpecKind};
