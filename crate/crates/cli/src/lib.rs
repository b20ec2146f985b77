//! Batch front end for the symbolic controller synthesis pipeline: problem
//! files, on-disk artifact formats and the commands behind the `symcon`
//! binary.

pub mod commands;
pub mod format;
pub mod problem;
