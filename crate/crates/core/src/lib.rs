//! Numerical core for matrix-weighted dyadic harmonic analysis on the line.
//!
//! Everything here is `no_std` + `alloc`; file formats, the CLI and the
//! experiment harnesses live in the `matweight` crate.

#![no_std]
#![warn(missing_debug_implementations, rust_2018_idioms)]
#![deny(unsafe_code)]
// `!(x > 0.0)` is how parameter checks reject NaN along with the range
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![cfg_attr(test, allow(unused_imports))]

extern crate alloc;

pub mod characteristics;
pub mod dyadic;
pub mod error;
pub mod extrapolation;
pub mod geometry;
pub mod hermitian;
pub mod sparse;
pub mod weight;

pub use error::{Error, Result};
pub use hermitian::{CMatrix, CVector, PdMatrix, C64};

/// Conjugate exponent `x' = x/(x-1)`, with `1' = inf` and `inf' = 1`.
pub fn conj_exp(x: f64) -> f64 {
    if x == 1.0 {
        f64::INFINITY
    } else if x.is_infinite() {
        1.0
    } else {
        x / (x - 1.0)
    }
}

/// `(n/d)' = n/(n-d)` without forming `n/d - 1`, which loses digits when
/// `n/d` is near 1.
pub fn conj_of_ratio(n: f64, d: f64) -> f64 {
    if n.is_infinite() {
        1.0
    } else {
        n / (n - d)
    }
}
