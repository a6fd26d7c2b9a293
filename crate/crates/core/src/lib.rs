//! Kernel three-pass regression filter (k3PRF) forecasting toolkit.
//!
//! The estimator works entirely through kernel Gram matrices, so the
//! nonlinear feature map never has to be built. Around it sit automatic
//! proxy construction, a set of factor-model baselines, a rolling-window
//! out-of-sample harness and a Monte Carlo laboratory for convergence
//! rates.

pub mod autoproxy;
pub mod baselines;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod estimator;
pub mod evaluation;
pub mod kernel;
pub mod linalg;
pub mod simulation;
pub mod tuning;

pub use error::{Error, ErrorKind, Result};
pub use estimator::{fit, fit_explicit_passes, K3prfFit, ProxyProvenance, ProxySet};
pub use kernel::KernelSpec;
