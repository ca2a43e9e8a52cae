//! Plug-and-play restoration for high-count Poisson-Gaussian imaging.
//!
//! The crate is organized bottom-up:
//!
//! - [`grid`], [`fft`], [`kernel`], [`conv`]: images and circular convolution.
//! - [`forward`]: the degradation operator `A = D(h * .)` and noise samplers.
//! - [`fidelity`]: the heteroscedastic likelihood and its proximal solvers.
//! - [`schedule`], [`solvers`]: the HQS outer loop and the baselines.
//! - [`denoise`]: built-in denoisers and the external process protocol.
//! - [`metrics`], [`io`], [`synth`], [`ablation`]: evaluation utilities.

pub mod ablation;
pub mod conv;
pub mod denoise;
pub mod error;
pub mod fft;
pub mod fidelity;
pub mod forward;
pub mod grid;
pub mod interp;
pub mod io;
pub mod kernel;
pub mod metrics;
pub mod schedule;
pub mod solvers;
pub mod synth;

pub use denoise::{Denoiser, DenoiserSpec};
pub use error::{Error, Result};
pub use fidelity::{InnerDescent, ProxProblem, ProxReport, StepRule};
pub use forward::{DegradationOp, NoiseParams};
pub use grid::{reduce_mean, ImageGrid};
pub use kernel::BlurKernel;
pub use schedule::{make_schedule, Schedule};
pub use solvers::{Method, RunTrace, SolverConfig};
