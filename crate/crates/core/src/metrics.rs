//! PSNR and SSIM.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ImageGrid;

const SSIM_WINDOW: usize = 11;
const SSIM_STD: f64 = 1.5;

pub fn mse(a: &ImageGrid, b: &ImageGrid) -> Result<f64> {
    a.ensure_same_dims(b, "mse")?;
    if a.is_empty() {
        return Err(Error::shape("mse of empty images"));
    }
    Ok(a.sub(b).norm_sq() / a.len() as f64)
}

/// `10·log10(peak² / MSE)`; identical images give `f64::INFINITY`.
pub fn psnr(a: &ImageGrid, b: &ImageGrid, peak: f64) -> Result<f64> {
    if !(peak > 0.0) {
        return Err(Error::param("psnr peak must be positive"));
    }
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / m).log10())
}

/// Mean local SSIM terms over all valid 11x11 Gaussian windows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimComponents {
    pub ssim: f64,
    pub luminance: f64,
    pub contrast: f64,
    pub structure: f64,
}

fn window() -> Vec<f64> {
    let c = (SSIM_WINDOW / 2) as f64;
    let mut w: Vec<f64> = (0..SSIM_WINDOW * SSIM_WINDOW)
        .map(|i| {
            let (r, k) = ((i / SSIM_WINDOW) as f64, (i % SSIM_WINDOW) as f64);
            (-((r - c).powi(2) + (k - c).powi(2)) / (2.0 * SSIM_STD * SSIM_STD)).exp()
        })
        .collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

pub fn ssim_components(a: &ImageGrid, b: &ImageGrid, peak: f64) -> Result<SsimComponents> {
    a.ensure_same_dims(b, "ssim")?;
    let (h, w) = a.dims();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::shape(format!("ssim needs at least 11x11, got {h}x{w}")));
    }
    let c1 = (0.01 * peak).powi(2);
    let c2 = (0.03 * peak).powi(2);
    let c3 = c2 / 2.0;
    let win = window();
    let (oh, ow) = (h - SSIM_WINDOW + 1, w - SSIM_WINDOW + 1);
    let mut total = SsimComponents { ssim: 0.0, luminance: 0.0, contrast: 0.0, structure: 0.0 };
    for r in 0..oh {
        for c in 0..ow {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..SSIM_WINDOW {
                for j in 0..SSIM_WINDOW {
                    let g = win[i * SSIM_WINDOW + j];
                    let (va, vb) = (a.get(r + i, c + j), b.get(r + i, c + j));
                    ma += g * va;
                    mb += g * vb;
                    saa += g * va * va;
                    sbb += g * vb * vb;
                    sab += g * va * vb;
                }
            }
            let var_a = (saa - ma * ma).max(0.0);
            let var_b = (sbb - mb * mb).max(0.0);
            let cov = sab - ma * mb;
            let (sa, sb) = (var_a.sqrt(), var_b.sqrt());
            let l = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
            let cs = (2.0 * sa * sb + c2) / (var_a + var_b + c2);
            let s = (cov + c3) / (sa * sb + c3);
            total.luminance += l;
            total.contrast += cs;
            total.structure += s;
            total.ssim += l * (2.0 * cov + c2) / (var_a + var_b + c2);
        }
    }
    let n = (oh * ow) as f64;
    Ok(SsimComponents {
        ssim: total.ssim / n,
        luminance: total.luminance / n,
        contrast: total.contrast / n,
        structure: total.structure / n,
    })
}

pub fn ssim_with_peak(a: &ImageGrid, b: &ImageGrid, peak: f64) -> Result<f64> {
    Ok(ssim_components(a, b, peak)?.ssim)
}

/// SSIM for images on the normalized `[0, 1]` scale.
pub fn ssim(a: &ImageGrid, b: &ImageGrid) -> Result<f64> {
    ssim_with_peak(a, b, 1.0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    /// dB; `null` in JSON when the images are identical.
    pub psnr: Option<f64>,
    pub ssim: f64,
    pub wall_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<String>,
}

impl MetricReport {
    pub fn compute(restored: &ImageGrid, reference: &ImageGrid, wall_time: f64) -> Result<Self> {
        let p = psnr(restored, reference, 1.0)?;
        Ok(Self {
            psnr: p.is_finite().then_some(p),
            ssim: ssim(restored, reference)?,
            wall_time,
            trace: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(seed: u64, h: usize, w: usize) -> ImageGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageGrid::from_fn(h, w, |_, _| rng.random_range(0.0..1.0))
    }

    #[test]
    fn psnr_identical_is_infinite() {
        let a = random(1, 8, 8);
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn psnr_twenty_db() {
        // MSE = peak²/100 with peak 2: every pixel off by 0.2.
        let a = ImageGrid::filled(4, 4, 0.5);
        let b = a.map(|v| v + 0.2);
        assert!((psnr(&a, &b, 2.0).unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn psnr_matches_pixel_loop() {
        let (a, b) = (random(2, 9, 7), random(3, 9, 7));
        let mut acc = 0.0;
        for i in 0..63 {
            acc += (a.as_slice()[i] - b.as_slice()[i]).powi(2);
        }
        let oracle = 10.0 * (1.0 / (acc / 63.0)).log10();
        assert!((psnr(&a, &b, 1.0).unwrap() - oracle).abs() < 1e-9);
    }

    #[test]
    fn psnr_dim_mismatch() {
        assert!(psnr(&random(1, 4, 4), &random(1, 4, 5), 1.0).is_err());
    }

    #[test]
    fn ssim_identical_is_one() {
        let a = random(4, 16, 16);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ssim_anticorrelated_binary() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = ImageGrid::from_fn(32, 32, |_, _| if rng.random::<bool>() { 1.0 } else { 0.0 });
        let b = a.map(|v| 1.0 - v);
        assert!(ssim(&a, &b).unwrap() < 0.1);
        assert!(ssim_components(&a, &b, 1.0).unwrap().structure < -0.5);
    }

    #[test]
    fn ssim_mean_shift() {
        let a = random(6, 16, 16).scale(0.5);
        let b = a.map(|v| v + 0.3);
        let c = ssim_components(&a, &b, 1.0).unwrap();
        assert!(c.luminance < 1.0);
        assert!((c.structure - 1.0).abs() < 1e-9);
        assert!(c.ssim <= 1.0);
    }

    #[test]
    fn ssim_too_small() {
        assert!(matches!(ssim(&random(1, 10, 20), &random(2, 10, 20)), Err(Error::Shape(_))));
    }
}
