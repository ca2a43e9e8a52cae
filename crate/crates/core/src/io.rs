//! Image files: raw `IMGF` floats and 16-bit grayscale PNG.
//!
//! `IMGF` layout: `"IMGF" | u32 LE height | u32 LE width | f32 LE row-major`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use image::{ImageBuffer, Luma};

use crate::error::{Error, Result};
use crate::grid::ImageGrid;

pub const IMGF_MAGIC: [u8; 4] = *b"IMGF";

pub fn encode_imgf(x: &ImageGrid) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 4 * x.len());
    out.extend_from_slice(&IMGF_MAGIC);
    out.extend_from_slice(&(x.height() as u32).to_le_bytes());
    out.extend_from_slice(&(x.width() as u32).to_le_bytes());
    for &v in x.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_imgf(bytes: &[u8]) -> Result<ImageGrid> {
    if bytes.len() < 12 || bytes[..4] != IMGF_MAGIC {
        return Err(Error::Format("missing IMGF header".into()));
    }
    let h = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let w = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expect = h
        .checked_mul(w)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Format("IMGF dimensions overflow".into()))?;
    let payload = &bytes[12..];
    if payload.len() != expect {
        return Err(Error::Format(format!(
            "IMGF {h}x{w} needs {expect} payload bytes, found {}",
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    ImageGrid::new(h, w, data).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_imgf(path: &Path, x: &ImageGrid) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&encode_imgf(x))?;
    w.flush()?;
    Ok(())
}

pub fn read_imgf(path: &Path) -> Result<ImageGrid> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    decode_imgf(&bytes)
}

/// Writes `round(x·65535)` clamped to `[0, 65535]`.
pub fn write_png16(path: &Path, x: &ImageGrid) -> Result<()> {
    let data: Vec<u16> = x
        .as_slice()
        .iter()
        .map(|&v| (v * 65535.0).round().clamp(0.0, 65535.0) as u16)
        .collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(x.width() as u32, x.height() as u32, data)
            .ok_or_else(|| Error::Format("png buffer size mismatch".into()))?;
    buf.save(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Reads any grayscale-convertible PNG, scaled to `[0, 1]`.
pub fn read_png(path: &Path) -> Result<ImageGrid> {
    let img = image::open(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let gray = img.into_luma16();
    let (w, h) = gray.dimensions();
    let data = gray.into_raw().into_iter().map(|v| v as f64 / 65535.0).collect();
    ImageGrid::new(h as usize, w as usize, data)
}

fn is_png(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

/// Loads by extension: `.png` as PNG, anything else as `IMGF`.
pub fn load_image(path: &Path) -> Result<ImageGrid> {
    if is_png(path) {
        read_png(path)
    } else {
        read_imgf(path)
    }
}

pub fn save_image(path: &Path, x: &ImageGrid) -> Result<()> {
    if is_png(path) {
        write_png16(path, x)
    } else {
        write_imgf(path, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn imgf_round_trip_bit_exact(h in 1usize..9, w in 1usize..9, vals in proptest::collection::vec(-1.0e6f32..1.0e6, 64)) {
            let x = ImageGrid::from_fn(h, w, |r, c| vals[r * 8 + c] as f64);
            let back = decode_imgf(&encode_imgf(&x)).unwrap();
            prop_assert_eq!(encode_imgf(&back), encode_imgf(&x));
            prop_assert_eq!(back, x);
        }
    }

    #[test]
    fn png16_round_trip_on_quantized_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.png");
        let x = ImageGrid::from_fn(7, 5, |r, c| ((r * 9301 + c * 49297) % 65536) as f64 / 65535.0);
        write_png16(&path, &x).unwrap();
        let back = read_png(&path).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn rejects_bad_imgf() {
        assert!(decode_imgf(b"IMGX\0\0\0\0\0\0\0\0").is_err());
        let mut b = encode_imgf(&ImageGrid::zeros(2, 2));
        b.pop();
        assert!(decode_imgf(&b).is_err());
    }
}
