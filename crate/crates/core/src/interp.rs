//! Integer-factor bicubic upsampling (Keys, a = −0.5).
//!
//! Samples outside the grid are extrapolated linearly, so linear and bilinear
//! images are reproduced exactly.

use crate::grid::ImageGrid;

fn keys(t: f64) -> f64 {
    const A: f64 = -0.5;
    let t = t.abs();
    if t <= 1.0 {
        ((A + 2.0) * t - (A + 3.0)) * t * t + 1.0
    } else if t < 2.0 {
        ((A * t - 5.0 * A) * t + 8.0 * A) * t - 4.0 * A
    } else {
        0.0
    }
}

fn sample(line: &[f64], k: isize) -> f64 {
    let n = line.len() as isize;
    if n == 1 {
        return line[0];
    }
    if k < 0 {
        line[0] + k as f64 * (line[1] - line[0])
    } else if k >= n {
        let last = line[(n - 1) as usize];
        last + (k - n + 1) as f64 * (last - line[(n - 2) as usize])
    } else {
        line[k as usize]
    }
}

/// Upsamples `line` by `s`; low-res sample `i` lands on high-res `i·s + phase`.
fn upsample_line(line: &[f64], s: usize, phase: usize, out: &mut [f64]) {
    for (j, o) in out.iter_mut().enumerate() {
        let t = (j as f64 - phase as f64) / s as f64;
        let base = t.floor() as isize;
        let frac = t - base as f64;
        let mut acc = 0.0;
        for m in -1..=2isize {
            acc += keys(frac - m as f64) * sample(line, base + m);
        }
        *o = acc;
    }
}

pub fn bicubic_upsample(y: &ImageGrid, s: usize, phase: (usize, usize)) -> ImageGrid {
    if s == 1 {
        return y.clone();
    }
    let (h, w) = y.dims();
    let (hh, hw) = (h * s, w * s);
    let mut rows = vec![0.0; h * hw];
    for r in 0..h {
        upsample_line(y.row(r), s, phase.1, &mut rows[r * hw..(r + 1) * hw]);
    }
    let mut out = vec![0.0; hh * hw];
    let mut col = vec![0.0; h];
    let mut col_out = vec![0.0; hh];
    for c in 0..hw {
        for r in 0..h {
            col[r] = rows[r * hw + c];
        }
        upsample_line(&col, s, phase.0, &mut col_out);
        for r in 0..hh {
            out[r * hw + c] = col_out[r];
        }
    }
    ImageGrid::from_raw(hh, hw, out)
}

/// Pixel replication by `s`.
pub fn nearest_upsample(y: &ImageGrid, s: usize) -> ImageGrid {
    ImageGrid::from_fn(y.height() * s, y.width() * s, |r, c| y.get(r / s, c / s))
}
