//! Degradation operator `A = D(h * .)`, its adjoint, and the noise models.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::conv::CircularConv;
use crate::error::{Error, Result};
use crate::grid::ImageGrid;
use crate::kernel::BlurKernel;

/// Lower bound on any per-pixel variance, in normalized units squared.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Blur followed by keeping every `decimation`-th row and column,
/// starting at `phase`.
#[derive(Debug, Clone, PartialEq)]
pub struct DegradationOp {
    pub kernel: BlurKernel,
    pub decimation: usize,
    pub phase: (usize, usize),
}

impl DegradationOp {
    pub fn new(kernel: BlurKernel, decimation: usize) -> Result<Self> {
        if decimation == 0 {
            return Err(Error::param("decimation factor must be >= 1"));
        }
        Ok(Self { kernel, decimation, phase: (0, 0) })
    }

    pub fn identity() -> Self {
        Self { kernel: BlurKernel::delta(), decimation: 1, phase: (0, 0) }
    }

    pub fn with_phase(mut self, row: usize, col: usize) -> Result<Self> {
        if row >= self.decimation || col >= self.decimation {
            return Err(Error::param("phase must be smaller than the decimation factor"));
        }
        self.phase = (row, col);
        Ok(self)
    }

    /// Measurement dims produced from a `height`x`width` target.
    pub fn output_dims(&self, height: usize, width: usize) -> Result<(usize, usize)> {
        let s = self.decimation;
        if height % s != 0 || width % s != 0 {
            return Err(Error::shape(format!(
                "{height}x{width} is not divisible by decimation {s}"
            )));
        }
        Ok((height / s, width / s))
    }

    /// Precomputes the kernel transfer function for a target size.
    pub fn prepare(&self, height: usize, width: usize) -> Result<PreparedOp> {
        if self.decimation == 0 {
            return Err(Error::param("decimation factor must be >= 1"));
        }
        let low = self.output_dims(height, width)?;
        let conv = CircularConv::new(&self.kernel, height, width)?;
        Ok(PreparedOp { op: self.clone(), conv, high: (height, width), low })
    }

    /// Prepared operator for a measurement of the given dims.
    pub fn prepare_for_measurement(&self, y: &ImageGrid) -> Result<PreparedOp> {
        let s = self.decimation;
        self.prepare(y.height() * s, y.width() * s)
    }
}

/// A [`DegradationOp`] bound to a target image size.
#[derive(Debug, Clone)]
pub struct PreparedOp {
    op: DegradationOp,
    conv: CircularConv,
    high: (usize, usize),
    low: (usize, usize),
}

impl PreparedOp {
    pub fn op(&self) -> &DegradationOp {
        &self.op
    }

    pub fn conv(&self) -> &CircularConv {
        &self.conv
    }

    /// Target (high resolution) dims.
    pub fn target_dims(&self) -> (usize, usize) {
        self.high
    }

    /// Measurement (low resolution) dims.
    pub fn measurement_dims(&self) -> (usize, usize) {
        self.low
    }

    pub fn decimation(&self) -> usize {
        self.op.decimation
    }

    fn check(&self, x: &ImageGrid, expect: (usize, usize), what: &str) -> Result<()> {
        if x.dims() != expect {
            return Err(Error::shape(format!(
                "{what} is {}x{}, expected {}x{}",
                x.height(),
                x.width(),
                expect.0,
                expect.1
            )));
        }
        Ok(())
    }

    pub fn decimate(&self, x: &ImageGrid) -> ImageGrid {
        let s = self.op.decimation;
        if s == 1 {
            return x.clone();
        }
        let (pr, pc) = self.op.phase;
        ImageGrid::from_fn(self.low.0, self.low.1, |r, c| x.get(r * s + pr, c * s + pc))
    }

    /// Zero-filled upsampling, the adjoint of [`decimate`](Self::decimate).
    pub fn zero_fill(&self, y: &ImageGrid) -> ImageGrid {
        let s = self.op.decimation;
        if s == 1 {
            return y.clone();
        }
        let (pr, pc) = self.op.phase;
        let mut out = ImageGrid::zeros(self.high.0, self.high.1);
        for r in 0..self.low.0 {
            for c in 0..self.low.1 {
                out[(r * s + pr, c * s + pc)] = y.get(r, c);
            }
        }
        out
    }

    pub fn apply(&self, x: &ImageGrid) -> Result<ImageGrid> {
        self.check(x, self.high, "target")?;
        Ok(self.decimate(&self.conv.convolve(x)?))
    }

    pub fn adjoint(&self, y: &ImageGrid) -> Result<ImageGrid> {
        self.check(y, self.low, "measurement")?;
        self.conv.correlate(&self.zero_fill(y))
    }
}

/// `A x`: circular blur then decimation.
pub fn apply_a(x: &ImageGrid, op: &DegradationOp) -> Result<ImageGrid> {
    op.prepare(x.height(), x.width())?.apply(x)
}

/// `Aᵀ y`: zero-filled upsampling then circular correlation.
pub fn apply_a_adjoint(y: &ImageGrid, op: &DegradationOp) -> Result<ImageGrid> {
    op.prepare_for_measurement(y)?.adjoint(y)
}

/// Poisson-Gaussian noise parameters: read-noise std `sigma0` and gain `gain_k`,
/// both in normalized units, giving variance `sigma0² + K·v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    pub sigma0: f64,
    pub gain_k: f64,
}

impl NoiseParams {
    pub fn new(sigma0: f64, gain_k: f64) -> Result<Self> {
        if !(sigma0 >= 0.0) || !(gain_k >= 0.0) || !sigma0.is_finite() || !gain_k.is_finite() {
            return Err(Error::param(format!(
                "noise parameters must be finite and non-negative (sigma0={sigma0}, K={gain_k})"
            )));
        }
        Ok(Self { sigma0, gain_k })
    }

    pub fn gaussian(sigma0: f64) -> Result<Self> {
        Self::new(sigma0, 0.0)
    }

    /// Variance of a single measurement pixel with noiseless value `v`, and
    /// whether it depends on `v` there (false where the clamp or floor is active).
    #[inline]
    pub fn pixel_variance(&self, v: f64) -> (f64, bool) {
        let raw = self.sigma0 * self.sigma0 + self.gain_k * v.max(0.0);
        if raw < VARIANCE_FLOOR {
            (VARIANCE_FLOOR, false)
        } else {
            (raw, v > 0.0 && self.gain_k > 0.0)
        }
    }

    /// Variance at a scalar luminance, floored.
    pub fn variance_at(&self, v: f64) -> f64 {
        self.pixel_variance(v).0
    }
}

/// Per-pixel variance `σ₀² + K·max(v, 0)`, floored at [`VARIANCE_FLOOR`].
pub fn variance_map(v: &ImageGrid, noise: &NoiseParams) -> ImageGrid {
    v.map(|p| noise.pixel_variance(p).0)
}

fn check_sampler_input(x: &ImageGrid) -> Result<()> {
    if x.as_slice().iter().any(|&p| p < 0.0) {
        return Err(Error::param("target image must be non-negative for sampling"));
    }
    Ok(())
}

fn normal(std: f64) -> Normal<f64> {
    Normal::new(0.0, std).expect("std is finite and non-negative")
}

/// Draws `y = K·Poisson(Ax / K) + N(0, σ₀²)`; with `K = 0` only the Gaussian
/// part remains. Reproducible from `seed`.
pub fn sample_exact_pg(
    x: &ImageGrid,
    op: &DegradationOp,
    noise: &NoiseParams,
    seed: u64,
) -> Result<ImageGrid> {
    check_sampler_input(x)?;
    let v = apply_a(x, op)?;
    Ok(sample_exact_pg_from_clean(&v, noise, seed))
}

/// Exact sampler applied to an already-degraded noiseless measurement.
pub fn sample_exact_pg_from_clean(v: &ImageGrid, noise: &NoiseParams, seed: u64) -> ImageGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = normal(noise.sigma0);
    let k = noise.gain_k;
    v.map(|p| {
        let mut shot = p;
        if k > 0.0 {
            let lambda = p.max(0.0) / k;
            shot = if lambda > 0.0 {
                let pois = Poisson::new(lambda).expect("lambda is positive and finite");
                k * pois.sample(&mut rng)
            } else {
                0.0
            };
        }
        let read = if noise.sigma0 > 0.0 { gauss.sample(&mut rng) } else { 0.0 };
        shot + read
    })
}

/// Draws `y = Ax + N(0, variance_map(Ax))`. Reproducible from `seed`.
pub fn sample_gaussian_approx(
    x: &ImageGrid,
    op: &DegradationOp,
    noise: &NoiseParams,
    seed: u64,
) -> Result<ImageGrid> {
    check_sampler_input(x)?;
    let v = apply_a(x, op)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = normal(1.0);
    Ok(v.map(|p| {
        if noise.sigma0 == 0.0 && noise.gain_k == 0.0 {
            return p;
        }
        p + noise.variance_at(p).sqrt() * unit.sample(&mut rng)
    }))
}
