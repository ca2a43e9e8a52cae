//! Circular (periodic boundary) convolution through the frequency domain.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{fft2, fft2_complex, ifft2, Spectrum};
use crate::grid::ImageGrid;
use crate::kernel::BlurKernel;

/// A kernel's transfer function on a fixed image size. Reuse it when the
/// same kernel is applied many times.
#[derive(Debug, Clone)]
pub struct CircularConv {
    transfer: Spectrum,
}

impl CircularConv {
    pub fn new(kernel: &BlurKernel, height: usize, width: usize) -> Result<Self> {
        if !kernel.fits(height, width) {
            return Err(Error::shape(format!(
                "{}x{} kernel does not fit a {height}x{width} image",
                kernel.height(),
                kernel.width()
            )));
        }
        let mut buf = vec![Complex64::default(); height * width];
        for (dr, dc, w) in kernel.offsets() {
            let r = dr.rem_euclid(height as isize) as usize;
            let c = dc.rem_euclid(width as isize) as usize;
            buf[r * width + c].re += w;
        }
        Ok(Self { transfer: fft2_complex(buf, height, width) })
    }

    /// Eigenvalues of the circulant operator, one per frequency bin.
    pub fn transfer(&self) -> &Spectrum {
        &self.transfer
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.transfer.height, self.transfer.width)
    }

    fn check(&self, x: &ImageGrid) -> Result<()> {
        if x.dims() != self.dims() {
            return Err(Error::shape(format!(
                "image is {}x{}, convolution prepared for {}x{}",
                x.height(),
                x.width(),
                self.transfer.height,
                self.transfer.width
            )));
        }
        Ok(())
    }

    fn filter(&self, x: &ImageGrid, conjugate: bool) -> Result<ImageGrid> {
        self.check(x)?;
        let mut s = fft2(x);
        for (v, h) in s.data.iter_mut().zip(&self.transfer.data) {
            *v *= if conjugate { h.conj() } else { *h };
        }
        Ok(ifft2(&s))
    }

    pub fn convolve(&self, x: &ImageGrid) -> Result<ImageGrid> {
        self.filter(x, false)
    }

    /// Adjoint of [`convolve`](Self::convolve): circular correlation.
    pub fn correlate(&self, x: &ImageGrid) -> Result<ImageGrid> {
        self.filter(x, true)
    }
}

/// `h * x` with periodic boundaries.
pub fn convolve_circular(x: &ImageGrid, h: &BlurKernel) -> Result<ImageGrid> {
    CircularConv::new(h, x.height(), x.width())?.convolve(x)
}

/// Circular correlation, the adjoint of [`convolve_circular`].
pub fn correlate_circular(x: &ImageGrid, h: &BlurKernel) -> Result<ImageGrid> {
    CircularConv::new(h, x.height(), x.width())?.correlate(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grid(rng: &mut ChaCha8Rng, h: usize, w: usize) -> ImageGrid {
        ImageGrid::from_fn(h, w, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_kernel(rng: &mut ChaCha8Rng, h: usize, w: usize) -> BlurKernel {
        let taps = (0..h * w).map(|_| rng.random_range(0.0..1.0)).collect();
        let anchor = (rng.random_range(0..h), rng.random_range(0..w));
        BlurKernel::with_anchor(h, w, taps, anchor, false).unwrap()
    }

    // Direct spatial-domain definition, independent of the FFT path.
    fn spatial_oracle(x: &ImageGrid, h: &BlurKernel) -> ImageGrid {
        let (ar, ac) = h.anchor();
        ImageGrid::from_fn(x.height(), x.width(), |i, j| {
            let mut acc = 0.0;
            for a in 0..h.height() {
                for b in 0..h.width() {
                    let r = i as isize - (a as isize - ar as isize);
                    let c = j as isize - (b as isize - ac as isize);
                    acc += h.tap(a, b) * x.get_wrapped(r, c);
                }
            }
            acc
        })
    }

    #[test]
    fn delta_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_grid(&mut rng, 6, 9);
        let y = convolve_circular(&x, &BlurKernel::delta()).unwrap();
        assert!(x.sub(&y).max_abs() < 1e-10);
    }

    #[test]
    fn unit_sum_kernel_preserves_constant() {
        let x = ImageGrid::filled(8, 8, 0.37);
        let h = BlurKernel::gaussian(1.0, 5).unwrap();
        let y = convolve_circular(&x, &h).unwrap();
        assert!(y.map(|v| v - 0.37).max_abs() < 1e-12);
    }

    #[test]
    fn matches_spatial_oracle_4x4() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_grid(&mut rng, 4, 4);
        let h = random_kernel(&mut rng, 3, 3);
        let got = convolve_circular(&x, &h).unwrap();
        assert!(got.sub(&spatial_oracle(&x, &h)).max_abs() < 1e-8);
    }

    #[test]
    fn matches_spatial_oracle_exhaustive_sizes() {
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let h_img = rng.random_range(1..=16);
            let w_img = rng.random_range(1..=16);
            let kh = rng.random_range(1..=h_img.min(5));
            let kw = rng.random_range(1..=w_img.min(5));
            let x = random_grid(&mut rng, h_img, w_img);
            let h = random_kernel(&mut rng, kh, kw);
            let got = convolve_circular(&x, &h).unwrap();
            let err = got.sub(&spatial_oracle(&x, &h)).max_abs();
            assert!(err < 1e-8, "seed {seed} {h_img}x{w_img} k{kh}x{kw}: {err}");
        }
    }

    #[test]
    fn linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_grid(&mut rng, 8, 8);
        let y = random_grid(&mut rng, 8, 8);
        let h = random_kernel(&mut rng, 3, 3);
        let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let lhs = convolve_circular(&x.scale(a).add(&y.scale(b)), &h).unwrap();
        let rhs = convolve_circular(&x, &h)
            .unwrap()
            .scale(a)
            .add(&convolve_circular(&y, &h).unwrap().scale(b));
        assert!(lhs.sub(&rhs).max_abs() < 1e-8);
    }

    #[test]
    fn correlation_is_adjoint() {
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(50 + seed);
            let x = random_grid(&mut rng, 8, 8);
            let z = random_grid(&mut rng, 8, 8);
            let h = random_kernel(&mut rng, 3, 3);
            let lhs = convolve_circular(&x, &h).unwrap().dot(&z);
            let rhs = x.dot(&correlate_circular(&z, &h).unwrap());
            assert!((lhs - rhs).abs() < 1e-8);
        }
    }

    #[test]
    fn oversized_kernel_is_shape_error() {
        let x = ImageGrid::zeros(2, 2);
        let h = BlurKernel::box_blur(3).unwrap();
        assert!(matches!(convolve_circular(&x, &h), Err(Error::Shape(_))));
    }
}
