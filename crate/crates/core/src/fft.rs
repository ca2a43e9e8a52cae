//! 2-D discrete Fourier transforms over [`ImageGrid`]s.
//!
//! The forward transform is unnormalized and the inverse carries the `1/N`
//! factor, so eigenvalues of circulant operators are the plain DFT of their
//! first column.

use std::cell::RefCell;

use rustfft::num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use crate::grid::ImageGrid;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Complex spectrum of a 2-D image, row-major, same layout as the image.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub height: usize,
    pub width: usize,
    pub data: Vec<Complex64>,
}

impl Spectrum {
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.width + col]
    }

    /// Sum of squared magnitudes.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }
}

fn transform_rows(buf: &mut [Complex64], height: usize, width: usize, dir: FftDirection) {
    if width <= 1 {
        return;
    }
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft(width, dir));
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    for row in buf.chunks_exact_mut(width).take(height) {
        fft.process_with_scratch(row, &mut scratch);
    }
}

fn transpose(src: &[Complex64], height: usize, width: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); src.len()];
    for r in 0..height {
        for c in 0..width {
            out[c * height + r] = src[r * width + c];
        }
    }
    out
}

fn transform_2d(mut buf: Vec<Complex64>, height: usize, width: usize, dir: FftDirection) -> Vec<Complex64> {
    transform_rows(&mut buf, height, width, dir);
    if height > 1 {
        let mut t = transpose(&buf, height, width);
        transform_rows(&mut t, width, height, dir);
        buf = transpose(&t, width, height);
    }
    buf
}

/// Forward 2-D DFT of a real image.
pub fn fft2(x: &ImageGrid) -> Spectrum {
    let buf = x.as_slice().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2_complex(buf, x.height(), x.width())
}

pub(crate) fn fft2_complex(buf: Vec<Complex64>, height: usize, width: usize) -> Spectrum {
    let data = transform_2d(buf, height, width, FftDirection::Forward);
    Spectrum { height, width, data }
}

/// Inverse 2-D DFT returning the complex result (normalized by `1/N`).
pub fn ifft2_complex(s: &Spectrum) -> Vec<Complex64> {
    let n = (s.height * s.width) as f64;
    let mut out = transform_2d(s.data.clone(), s.height, s.width, FftDirection::Inverse);
    for v in &mut out {
        *v /= n;
    }
    out
}

/// Inverse 2-D DFT keeping the real part.
pub fn ifft2(s: &Spectrum) -> ImageGrid {
    let data = ifft2_complex(s).into_iter().map(|c| c.re).collect();
    ImageGrid::from_raw(s.height, s.width, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grid(h: usize, w: usize, seed: u64) -> ImageGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageGrid::from_fn(h, w, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn impulse_has_flat_spectrum() {
        let mut x = ImageGrid::zeros(4, 6);
        x[(0, 0)] = 1.0;
        let s = fft2(&x);
        for c in &s.data {
            assert!((c.re - 1.0).abs() < 1e-14 && c.im.abs() < 1e-14);
        }
    }

    #[test]
    fn constant_energy_sits_in_dc() {
        let x = ImageGrid::filled(5, 3, 2.0);
        let s = fft2(&x);
        assert!((s.data[0].re - 30.0).abs() < 1e-12);
        for c in &s.data[1..] {
            assert!(c.norm() < 1e-12);
        }
    }

    #[test]
    fn round_trip_8x8() {
        let x = random_grid(8, 8, 7);
        let back = ifft2(&fft2(&x));
        let err = x.sub(&back).max_abs();
        assert!(err < 1e-10, "round trip error {err}");
    }

    #[test]
    fn parseval() {
        for (h, w) in [(8, 8), (5, 7), (1, 9), (16, 3)] {
            let x = random_grid(h, w, (h * 31 + w) as u64);
            let s = fft2(&x);
            let lhs = x.norm_sq();
            let rhs = s.energy() / (h * w) as f64;
            assert!((lhs - rhs).abs() <= 1e-8 * lhs, "{h}x{w}: {lhs} vs {rhs}");
        }
    }
}
