//! File formats, experiment suites and the command-line driver on top of
//! `matweight-core`.

// parameter validation writes `!(x > 0.0)` so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod experiments;
pub mod io;
pub mod report;
