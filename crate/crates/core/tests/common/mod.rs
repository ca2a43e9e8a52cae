#![allow(dead_code)]

use nalgebra::DMatrix;
use pgdpir::forward::apply_a;
use pgdpir::{BlurKernel, DegradationOp, ImageGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn grid(rng: &mut ChaCha8Rng, h: usize, w: usize, lo: f64, hi: f64) -> ImageGrid {
    ImageGrid::from_fn(h, w, |_, _| rng.random_range(lo..hi))
}

pub fn kernel3(rng: &mut ChaCha8Rng) -> BlurKernel {
    let taps = (0..9).map(|_| rng.random_range(0.0..1.0)).collect();
    BlurKernel::normalized(3, 3, taps).unwrap()
}

/// Dense matrix of `A` on an `h x w` target, column `j` = `A e_j`.
pub fn dense_operator(op: &DegradationOp, h: usize, w: usize) -> DMatrix<f64> {
    let (mh, mw) = op.output_dims(h, w).unwrap();
    let mut m = DMatrix::zeros(mh * mw, h * w);
    for j in 0..h * w {
        let e = ImageGrid::from_fn(h, w, |r, c| if r * w + c == j { 1.0 } else { 0.0 });
        let col = apply_a(&e, op).unwrap();
        for (i, v) in col.as_slice().iter().enumerate() {
            m[(i, j)] = *v;
        }
    }
    m
}

pub fn to_vec(x: &ImageGrid) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_column_slice(x.as_slice())
}
