//! `PGD1` framing used to talk to external denoiser processes.
//!
//! ```text
//! "PGD1" | u32 height | u32 width | u32 channels (=1) | f32 sigma_d | height*width f32
//! ```
//!
//! All integers and floats are little-endian, payload row-major. A frame with
//! zero height sent by the client asks the server to shut down.

use std::io::{self, Read, Write};

use crate::error::{Error, Result};
use crate::grid::ImageGrid;

pub const MAGIC: [u8; 4] = *b"PGD1";
pub const HEADER_LEN: usize = 20;
/// Upper bound on accepted payload size, in pixels.
pub const MAX_PIXELS: usize = 1 << 28;

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub height: u32,
    pub width: u32,
    pub channels: u32,
    pub sigma_d: f32,
    pub payload: Vec<f32>,
}

impl Frame {
    pub fn from_image(x: &ImageGrid, sigma_d: f64) -> Self {
        Self {
            height: x.height() as u32,
            width: x.width() as u32,
            channels: 1,
            sigma_d: sigma_d as f32,
            payload: x.as_slice().iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn shutdown() -> Self {
        Self { height: 0, width: 0, channels: 1, sigma_d: 0.0, payload: Vec::new() }
    }

    pub fn is_shutdown(&self) -> bool {
        self.height == 0
    }

    pub fn to_image(&self) -> Result<ImageGrid> {
        let data = self.payload.iter().map(|&v| v as f64).collect();
        ImageGrid::new(self.height as usize, self.width as usize, data)
            .map_err(|e| Error::Protocol(format!("bad payload: {e}")))
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.payload.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&self.height.to_le_bytes());
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.channels.to_le_bytes());
        out.extend_from_slice(&self.sigma_d.to_le_bytes());
        for v in &self.payload {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }
}

pub fn write_frame(w: &mut impl Write, frame: &Frame) -> io::Result<()> {
    w.write_all(&frame.encode())?;
    w.flush()
}

/// Reads as much as possible into `buf`; returns the number of bytes read.
fn read_full(r: &mut impl Read, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

/// Reads one frame. `Ok(None)` means the stream ended cleanly on a frame
/// boundary; a partial frame is a protocol error.
pub fn read_frame(r: &mut impl Read) -> Result<Option<Frame>> {
    let mut header = [0u8; HEADER_LEN];
    let got = read_full(r, &mut header)?;
    if got == 0 {
        return Ok(None);
    }
    if got < HEADER_LEN {
        return Err(Error::Protocol(format!("truncated header: {got} of {HEADER_LEN} bytes")));
    }
    if header[..4] != MAGIC {
        return Err(Error::Protocol(format!("bad magic {:02x?}", &header[..4])));
    }
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap());
    let (height, width, channels) = (word(4), word(8), word(12));
    let sigma_d = f32::from_le_bytes(header[16..20].try_into().unwrap());
    if height == 0 {
        return Ok(Some(Frame { height, width, channels, sigma_d, payload: Vec::new() }));
    }
    if channels != 1 {
        return Err(Error::Protocol(format!("expected 1 channel, got {channels}")));
    }
    let pixels = (height as usize)
        .checked_mul(width as usize)
        .filter(|&p| p <= MAX_PIXELS)
        .ok_or_else(|| Error::Protocol(format!("frame {height}x{width} exceeds size limit")))?;
    let mut bytes = vec![0u8; pixels * 4];
    let got = read_full(r, &mut bytes)?;
    if got < bytes.len() {
        return Err(Error::Protocol(format!(
            "truncated payload: {got} of {} bytes",
            bytes.len()
        )));
    }
    let payload = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Some(Frame { height, width, channels, sigma_d, payload }))
}
