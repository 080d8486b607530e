//! Multiresolution block-coordinate forward-backward solvers for
//! wavelet-domain image deblurring.
//!
//! The problem solved is
//!
//! ```text
//! min_w  1/2 ||A W^T w - y||^2 + lambda * sum_{i >= 1} ||w_i||_1
//! ```
//!
//! where `W` is an orthonormal periodic 2D wavelet transform whose coefficient
//! vector is partitioned into one approximation block and one detail block per
//! level, and `A` is a circular Gaussian blur. At every iteration a
//! [`selection::SelectionPolicy`] decides which blocks receive a proximal
//! gradient update.

// negated comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod degradation;
pub mod error;
mod filters;
pub mod metrics;
pub mod problem;
pub mod proximal;
pub mod selection;
pub mod solver;
pub mod wavelet;

pub use degradation::{degrade, degrade_with, gaussian_kernel, operator_norm, DegradationSpec, GaussianBlur};
pub use error::{Error, Result};
pub use metrics::{activation_heatmap, coarse_dominance, performance_profile, psnr, ActivationHeatmap, ProfileCurve};
pub use problem::{build_problem, DenseOracle, Problem, DEFAULT_STEP_FACTOR};
pub use proximal::{prox_block, regularizer_value, soft_threshold, RegularizerSpec};
pub use selection::{candidate_updates, select, ActivationMask, BlockUpdates, Selection, SelectionPolicy};
pub use solver::{run, update_work, IterationRecord, RunStatus, RunTrace, SolverConfig, SolverState};
pub use wavelet::{
    embed_block, forward_dwt2, inverse_dwt2, make_filter_bank, project_block, BlockLayout, CoeffVector, FilterBank,
    WaveletFamily,
};
