//! Gaussian denoisers used as the prior step of the plug-and-play solvers.
//!
//! Every denoiser takes an image and a noise level `σ_d` (normalized units)
//! and returns an image of the same shape. Built-ins are deterministic and
//! pure; [`ExternalDenoiser`] forwards requests to a child process.

mod external;
pub mod protocol;
pub mod tv;

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::conv::CircularConv;
use crate::error::{Error, Result};
use crate::grid::ImageGrid;
use crate::kernel::BlurKernel;

pub use external::{ExternalDenoiser, DEFAULT_TIMEOUT};

/// Largest `σ_d` handed to a built-in; larger requests are clamped.
pub const MAX_BUILTIN_SIGMA: f64 = 0.5;

pub trait Denoiser: Send {
    fn denoise(&mut self, x: &ImageGrid, sigma_d: f64) -> Result<ImageGrid>;

    fn name(&self) -> String;
}

/// Which denoiser to build, with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DenoiserSpec {
    Identity,
    /// Circular Gaussian blur with std `strength·σ_d` pixels.
    GaussianSmooth {
        #[serde(default = "default_strength")]
        strength: f64,
    },
    /// ROF total variation with weight `weight_scale·σ_d²`.
    Tv {
        #[serde(default = "default_tv_scale")]
        weight_scale: f64,
        #[serde(default = "default_tv_iters")]
        iterations: usize,
        #[serde(default = "default_tv_tol")]
        tolerance: f64,
    },
    /// 3x3 median, independent of `σ_d`.
    Median,
    External {
        command: String,
        #[serde(default = "default_timeout_secs")]
        timeout_secs: f64,
    },
}

fn default_strength() -> f64 {
    20.0
}
fn default_tv_scale() -> f64 {
    8.0
}
fn default_tv_iters() -> usize {
    50
}
fn default_tv_tol() -> f64 {
    1e-5
}
fn default_timeout_secs() -> f64 {
    DEFAULT_TIMEOUT.as_secs_f64()
}

impl DenoiserSpec {
    pub fn gaussian_smooth() -> Self {
        DenoiserSpec::GaussianSmooth { strength: default_strength() }
    }

    pub fn tv() -> Self {
        DenoiserSpec::Tv {
            weight_scale: default_tv_scale(),
            iterations: default_tv_iters(),
            tolerance: default_tv_tol(),
        }
    }

    pub fn external(command: impl Into<String>) -> Self {
        DenoiserSpec::External { command: command.into(), timeout_secs: default_timeout_secs() }
    }

    /// Parses `identity`, `gaussian`, `tv`, `median` or `external:CMD`.
    pub fn parse(s: &str) -> Result<Self> {
        if let Some(cmd) = s.strip_prefix("external:") {
            let spec = Self::external(cmd);
            spec.validate()?;
            return Ok(spec);
        }
        match s {
            "identity" => Ok(DenoiserSpec::Identity),
            "gaussian" | "gaussian_smooth" | "gaussian-smooth" => Ok(Self::gaussian_smooth()),
            "tv" => Ok(Self::tv()),
            "median" => Ok(DenoiserSpec::Median),
            other => Err(Error::param(format!("unknown denoiser `{other}`"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DenoiserSpec::GaussianSmooth { strength } if !(*strength >= 0.0) => {
                Err(Error::param("gaussian strength must be >= 0"))
            }
            DenoiserSpec::Tv { weight_scale, iterations, tolerance } => {
                if !(*weight_scale >= 0.0) || *iterations == 0 || !(*tolerance >= 0.0) {
                    Err(Error::param("tv needs weight_scale >= 0, iterations > 0, tolerance >= 0"))
                } else {
                    Ok(())
                }
            }
            DenoiserSpec::External { command, timeout_secs } => {
                if command.trim().is_empty() {
                    Err(Error::param("external denoiser needs a command"))
                } else if !(*timeout_secs > 0.0) {
                    Err(Error::param("external timeout must be positive"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Instantiates the denoiser; external kinds launch their process here.
    pub fn build(&self) -> Result<Box<dyn Denoiser>> {
        self.validate()?;
        match self {
            DenoiserSpec::External { command, timeout_secs } => Ok(Box::new(ExternalDenoiser::spawn(
                command,
                Duration::from_secs_f64(*timeout_secs),
            )?)),
            builtin => Ok(Box::new(BuiltinDenoiser { spec: builtin.clone() })),
        }
    }
}

/// The classical in-process denoisers.
#[derive(Debug, Clone)]
pub struct BuiltinDenoiser {
    spec: DenoiserSpec,
}

impl BuiltinDenoiser {
    pub fn new(spec: DenoiserSpec) -> Result<Self> {
        spec.validate()?;
        if matches!(spec, DenoiserSpec::External { .. }) {
            return Err(Error::param("external denoisers are not built in"));
        }
        Ok(Self { spec })
    }
}

impl Denoiser for BuiltinDenoiser {
    fn denoise(&mut self, x: &ImageGrid, sigma_d: f64) -> Result<ImageGrid> {
        if !(sigma_d > 0.0) || !sigma_d.is_finite() {
            return Err(Error::param(format!("denoiser strength must be positive, got {sigma_d}")));
        }
        let sigma = if sigma_d > MAX_BUILTIN_SIGMA {
            log::warn!("sigma_d {sigma_d} above {MAX_BUILTIN_SIGMA}, clamping");
            MAX_BUILTIN_SIGMA
        } else {
            sigma_d
        };
        match &self.spec {
            DenoiserSpec::Identity => Ok(x.clone()),
            DenoiserSpec::GaussianSmooth { strength } => gaussian_smooth(x, strength * sigma),
            DenoiserSpec::Tv { weight_scale, iterations, tolerance } => {
                Ok(tv::tv_denoise(x, weight_scale * sigma * sigma, *iterations, *tolerance).image)
            }
            DenoiserSpec::Median => Ok(median3(x)),
            DenoiserSpec::External { .. } => unreachable!("rejected at construction"),
        }
    }

    fn name(&self) -> String {
        match &self.spec {
            DenoiserSpec::Identity => "identity".into(),
            DenoiserSpec::GaussianSmooth { .. } => "gaussian_smooth".into(),
            DenoiserSpec::Tv { .. } => "tv".into(),
            DenoiserSpec::Median => "median".into(),
            DenoiserSpec::External { .. } => unreachable!(),
        }
    }
}

/// One-shot convenience around [`DenoiserSpec::build`].
pub fn denoise(x: &ImageGrid, sigma_d: f64, spec: &DenoiserSpec) -> Result<ImageGrid> {
    spec.build()?.denoise(x, sigma_d)
}

/// Odd kernel size used for a Gaussian of `std` pixels: `2·ceil(3·std) + 1`,
/// capped to the largest odd size fitting `limit`.
pub fn gaussian_support(std: f64, limit: usize) -> usize {
    let size = 2 * (3.0 * std).ceil() as usize + 1;
    let cap = if limit % 2 == 1 { limit } else { limit.saturating_sub(1) };
    size.min(cap.max(1))
}

/// Circular Gaussian smoothing with std `std_px` pixels. Below 1e-3 pixels the
/// input is returned unchanged.
pub fn gaussian_smooth(x: &ImageGrid, std_px: f64) -> Result<ImageGrid> {
    if std_px < 1e-3 {
        return Ok(x.clone());
    }
    let (h, w) = x.dims();
    let size = gaussian_support(std_px, h.min(w));
    let kernel = BlurKernel::gaussian(std_px, size)?;
    CircularConv::new(&kernel, h, w)?.convolve(x)
}

/// 3x3 median filter with periodic boundaries.
pub fn median3(x: &ImageGrid) -> ImageGrid {
    let mut window = [0.0f64; 9];
    ImageGrid::from_fn(x.height(), x.width(), |r, c| {
        let mut k = 0;
        for dr in -1..=1isize {
            for dc in -1..=1isize {
                window[k] = x.get_wrapped(r as isize + dr, c as isize + dc);
                k += 1;
            }
        }
        window.sort_by(|a, b| a.total_cmp(b));
        window[4]
    })
}
