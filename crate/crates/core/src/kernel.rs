use crate::error::{Error, Result};

/// Convolution kernel with an explicit anchor (the tap aligned with the
/// output pixel).
#[derive(Debug, Clone, PartialEq)]
pub struct BlurKernel {
    height: usize,
    width: usize,
    taps: Vec<f64>,
    anchor: (usize, usize),
}

impl BlurKernel {
    /// Builds a kernel anchored at its center. With `require_unit_sum` the
    /// taps must sum to 1 within 1e-6.
    pub fn new(height: usize, width: usize, taps: Vec<f64>, require_unit_sum: bool) -> Result<Self> {
        Self::with_anchor(height, width, taps, (height / 2, width / 2), require_unit_sum)
    }

    pub fn with_anchor(
        height: usize,
        width: usize,
        taps: Vec<f64>,
        anchor: (usize, usize),
        require_unit_sum: bool,
    ) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::shape("kernel must be at least 1x1"));
        }
        if taps.len() != height * width {
            return Err(Error::shape(format!(
                "kernel has {} taps, expected {height}x{width}",
                taps.len()
            )));
        }
        if anchor.0 >= height || anchor.1 >= width {
            return Err(Error::shape(format!("anchor {anchor:?} outside {height}x{width} kernel")));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::param("kernel taps must be finite"));
        }
        let kernel = Self { height, width, taps, anchor };
        if require_unit_sum && (kernel.sum() - 1.0).abs() > 1e-6 {
            return Err(Error::param(format!("kernel sums to {}, expected 1", kernel.sum())));
        }
        Ok(kernel)
    }

    /// Rescales arbitrary taps to unit sum.
    pub fn normalized(height: usize, width: usize, taps: Vec<f64>) -> Result<Self> {
        let s: f64 = taps.iter().sum();
        if s.abs() < 1e-300 || !s.is_finite() {
            return Err(Error::param("cannot normalize a kernel with zero sum"));
        }
        Self::new(height, width, taps.into_iter().map(|t| t / s).collect(), true)
    }

    pub fn delta() -> Self {
        Self { height: 1, width: 1, taps: vec![1.0], anchor: (0, 0) }
    }

    /// Uniform `size`x`size` box.
    pub fn box_blur(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::param("box size must be positive"));
        }
        Self::normalized(size, size, vec![1.0; size * size])
    }

    /// Sampled isotropic Gaussian truncated to `size`x`size`, unit sum.
    pub fn gaussian(std: f64, size: usize) -> Result<Self> {
        if !(std > 0.0) || size == 0 {
            return Err(Error::param("gaussian kernel needs std > 0 and size > 0"));
        }
        let c = (size as f64 - 1.0) / 2.0;
        let mut taps = Vec::with_capacity(size * size);
        for r in 0..size {
            for k in 0..size {
                let d2 = (r as f64 - c).powi(2) + (k as f64 - c).powi(2);
                taps.push((-d2 / (2.0 * std * std)).exp());
            }
        }
        Self::normalized(size, size, taps)
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn anchor(&self) -> (usize, usize) {
        self.anchor
    }

    #[inline]
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    #[inline]
    pub fn tap(&self, row: usize, col: usize) -> f64 {
        self.taps[row * self.width + col]
    }

    pub fn sum(&self) -> f64 {
        self.taps.iter().sum()
    }

    pub fn is_unit_sum(&self) -> bool {
        (self.sum() - 1.0).abs() <= 1e-6
    }

    pub fn fits(&self, height: usize, width: usize) -> bool {
        self.height <= height && self.width <= width
    }

    /// Iterates `(row offset, col offset, weight)` relative to the anchor.
    pub fn offsets(&self) -> impl Iterator<Item = (isize, isize, f64)> + '_ {
        let (ar, ac) = (self.anchor.0 as isize, self.anchor.1 as isize);
        (0..self.height).flat_map(move |r| {
            (0..self.width).map(move |c| (r as isize - ar, c as isize - ac, self.tap(r, c)))
        })
    }
}
