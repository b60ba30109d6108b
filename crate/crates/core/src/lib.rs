//! Epsilon-greedy Thompson sampling for maximizing noisy black-box functions
//! over a box domain under a Gaussian-process prior.
//!
//! The crate is organised bottom-up:
//!
//! * [`kernel`]: RBF kernel, Gram matrices and truncated feature maps
//!   (Nyström, random Fourier, analytic).
//! * [`posterior`]: Bayesian linear model over feature weights, exact
//!   posterior draws and incremental rank-one updates.
//! * [`hyperfit`]: MAP fitting of kernel and noise hyperparameters from the
//!   log marginal likelihood.
//! * [`engine`]: the sampling loop itself, including the inner maximization
//!   of sampled functions and the stopping rule.
//! * [`bench`]: synthetic objectives, metrics, replica campaigns and
//!   empirical verifiers.

pub mod bench;
pub mod engine;
pub mod error;
pub mod exec;
pub mod hyperfit;
pub mod kernel;
pub mod posterior;
pub mod qmc;

pub use error::{Error, Result};
pub use kernel::{Domain, FeatureMap, HyperParams};
