//! Procedural test targets, all in `[0.05, 0.95]`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::denoise::gaussian_smooth;
use crate::error::{Error, Result};
use crate::grid::ImageGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Checkerboard,
    Ramp,
    FilteredNoise,
    /// Rectangles of varied brightness with thin line features, loosely
    /// resembling overhead imagery of buildings and roads.
    Urban,
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TargetKind::Checkerboard => "checkerboard",
            TargetKind::Ramp => "ramp",
            TargetKind::FilteredNoise => "filtered_noise",
            TargetKind::Urban => "urban",
        })
    }
}

impl FromStr for TargetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "checkerboard" => Ok(TargetKind::Checkerboard),
            "ramp" => Ok(TargetKind::Ramp),
            "filtered_noise" => Ok(TargetKind::FilteredNoise),
            "urban" => Ok(TargetKind::Urban),
            other => Err(Error::param(format!("unknown target kind `{other}`"))),
        }
    }
}

fn rescale(x: ImageGrid) -> ImageGrid {
    let (lo, hi) = (x.min(), x.max());
    if hi - lo < 1e-12 {
        return ImageGrid::filled(x.height(), x.width(), 0.5);
    }
    x.map(|v| 0.05 + 0.9 * (v - lo) / (hi - lo))
}

pub fn generate(kind: TargetKind, height: usize, width: usize, seed: u64) -> Result<ImageGrid> {
    if height == 0 || width == 0 {
        return Err(Error::shape("target must be non-empty"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let img = match kind {
        TargetKind::Checkerboard => {
            let cell = rng.random_range(4..=8usize);
            let (lo, hi) = (rng.random_range(0.1..0.4), rng.random_range(0.6..0.9));
            ImageGrid::from_fn(height, width, |r, c| if (r / cell + c / cell) % 2 == 0 { lo } else { hi })
        }
        TargetKind::Ramp => {
            let (a, b) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            rescale(ImageGrid::from_fn(height, width, |r, c| a * r as f64 + b * c as f64))
        }
        TargetKind::FilteredNoise => {
            let white = ImageGrid::from_fn(height, width, |_, _| rng.random::<f64>());
            rescale(gaussian_smooth(&white, rng.random_range(1.0..2.5))?)
        }
        TargetKind::Urban => urban(&mut rng, height, width),
    };
    Ok(img)
}

fn urban(rng: &mut ChaCha8Rng, h: usize, w: usize) -> ImageGrid {
    let mut img = ImageGrid::filled(h, w, rng.random_range(0.25..0.45));
    let blocks = (h * w / 150).max(4);
    for _ in 0..blocks {
        let bh = rng.random_range(3..=(h / 4).max(3));
        let bw = rng.random_range(3..=(w / 4).max(3));
        let r0 = rng.random_range(0..h);
        let c0 = rng.random_range(0..w);
        let level = rng.random_range(0.08..0.92);
        for r in r0..(r0 + bh).min(h) {
            for c in c0..(c0 + bw).min(w) {
                img[(r, c)] = level;
            }
        }
    }
    // Roads and markings.
    for _ in 0..3 {
        let level = rng.random_range(0.05..0.95);
        if rng.random::<bool>() {
            let r = rng.random_range(0..h);
            for c in 0..w {
                img[(r, c)] = level;
            }
        } else {
            let c = rng.random_range(0..w);
            for r in 0..h {
                img[(r, c)] = level;
            }
        }
    }
    img.clamp(0.05, 0.95)
}
