//! Perception-oriented post-processing for image restoration outputs.
//!
//! A restoration model's outputs are pushed toward the statistics of natural
//! images by a closed-form Gaussian optimal-transport map that acts on every
//! overlapping `(c, p, p)` patch of an autoencoder latent. The transported
//! estimate can then be blended with the original one to walk the
//! perception/distortion tradeoff.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg`]: symmetric-matrix primitives, the deterministic and stochastic
//!   Gaussian transport operators and the Gelbrich distance.
//! - [`stats`]: a mergeable streaming mean/covariance accumulator.
//! - [`patch`]: stride-1 unfold of latent tensors and averaging fold.
//! - [`pipeline`]: fit statistics, build a [`pipeline::FittedTransport`],
//!   transport latents, interpolate and sweep the tradeoff curve.
//! - [`metrics`]: MSE, PSNR, Gaussian fits and exact discrete W2 via optimal
//!   assignment.
//! - [`gmm`]: a two-dimensional Gaussian-mixture denoising experiment where
//!   the MMSE estimator and the posterior are known in closed form.
//! - [`io`]: `.npy` tensors, binary statistics/operator containers and
//!   manifests.
//! - [`cli`]: the `patch-ot` command-line tool.
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod cli;
pub mod error;
pub mod gmm;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod patch;
pub mod pipeline;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use linalg::{SymMatrix, TransportKind, TransportOperator};
pub use metrics::SampleCloud;
pub use patch::{LatentTensor, PatchBatch};
pub use pipeline::{DPPoint, FittedTransport, ImageTensor};
pub use stats::{GaussianStats, StatsAccumulator};
