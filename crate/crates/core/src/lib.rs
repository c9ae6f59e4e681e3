//! Truncated variation of sampled paths and Brownian motion with drift.
//!
//! The crate computes upward, downward and total truncated variation of a
//! path in linear time, evaluates the closed-form functionals of the
//! drawdown time `T_c` of `W_t = B_t + mu t`, estimates the same quantities
//! by simulation and checks the known two-sided bounds on `E UTV^c(W, T)`.

// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closed_form;
pub mod error;
pub mod harness;
pub mod montecarlo;
pub mod oracle;
pub mod path;
pub mod quad;
pub mod roots;
pub mod sum;
pub mod trading;
pub mod variation;

pub use error::{Error, Result};
pub use path::{ModelParams, Path, SimConfig};
pub use variation::VariationKind;
