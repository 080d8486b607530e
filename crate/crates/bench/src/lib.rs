//! Benchmark harness and command-line front end for `bcfb`.

// negated comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod harness;
pub mod imageio;
pub mod io;
pub mod synth;

pub use error::{BenchError, Result};
