//! Raw-grid and image export.
//!
//! Binary layout (little-endian), 32-byte header then row-major `f64` data:
//!
//! ```text
//! offset 0   u32  n
//! offset 4   u64  seed
//! offset 12  u16  nx (columns)
//! offset 14  u16  ny (rows)
//! offset 16  f32  x0
//! offset 20  f32  y0
//! offset 24  f32  x1
//! offset 28  f32  y1
//! offset 32  f64 * nx * ny, row 0 = y = y1 (image convention)
//! ```
//!
//! PNG outputs are 8-bit grayscale with row 0 = y = 1.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::Rect;

/// An in-memory grid with rows in ascending-`y` order (row 0 = `y0`).
#[derive(Debug, Clone, PartialEq)]
pub struct RawGrid {
    pub n: u32,
    pub seed: u64,
    pub nx: usize,
    pub ny: usize,
    pub rect: Rect,
    pub values: Vec<f64>,
}

/// Write a grid (given ascending-y) in the documented byte layout.
pub fn write_raw_grid(
    path: &Path,
    n: u64,
    seed: u64,
    nx: usize,
    ny: usize,
    rect: &Rect,
    values: &[f64],
) -> Result<()> {
    if values.len() != nx * ny {
        return Err(Error::Validation("grid shape mismatch".into()));
    }
    if nx > u16::MAX as usize || ny > u16::MAX as usize {
        return Err(Error::Validation(
            "grid exceeds u16 dimensions of the raw format".into(),
        ));
    }
    let n32 = u32::try_from(n)
        .map_err(|_| Error::Validation(format!("n = {n} exceeds the u32 header field")))?;
    let mut buf = Vec::with_capacity(32 + values.len() * 8);
    buf.extend_from_slice(&n32.to_le_bytes());
    buf.extend_from_slice(&seed.to_le_bytes());
    buf.extend_from_slice(&(nx as u16).to_le_bytes());
    buf.extend_from_slice(&(ny as u16).to_le_bytes());
    for v in [rect.x0, rect.y0, rect.x1, rect.y1] {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    for iy in (0..ny).rev() {
        for ix in 0..nx {
            buf.extend_from_slice(&values[iy * nx + ix].to_le_bytes());
        }
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

/// Read a raw grid back into ascending-y order.
pub fn read_raw_grid(path: &Path) -> Result<RawGrid> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 32 {
        return Err(Error::Parse(
            "raw grid shorter than its 32-byte header".into(),
        ));
    }
    let n = u32::from_le_bytes(bytes[0..4].try_into().unwrap());
    let seed = u64::from_le_bytes(bytes[4..12].try_into().unwrap());
    let nx = u16::from_le_bytes(bytes[12..14].try_into().unwrap()) as usize;
    let ny = u16::from_le_bytes(bytes[14..16].try_into().unwrap()) as usize;
    let f = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as f64;
    let rect = Rect {
        x0: f(16),
        y0: f(20),
        x1: f(24),
        y1: f(28),
    };
    let expected = 32 + nx * ny * 8;
    if bytes.len() != expected {
        return Err(Error::Parse(format!(
            "raw grid: expected {expected} bytes, found {}",
            bytes.len()
        )));
    }
    let mut values = vec![0.0f64; nx * ny];
    let mut off = 32;
    for iy in (0..ny).rev() {
        for ix in 0..nx {
            values[iy * nx + ix] = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
            off += 8;
        }
    }
    Ok(RawGrid {
        n,
        seed,
        nx,
        ny,
        rect,
        values,
    })
}

fn flip_to_image(nx: usize, ny: usize, pixels: Vec<u8>) -> image::GrayImage {
    let mut img = image::GrayImage::new(nx as u32, ny as u32);
    for iy in 0..ny {
        for ix in 0..nx {
            // PNG row 0 is the top of the box: y = y1
            img.put_pixel(
                ix as u32,
                (ny - 1 - iy) as u32,
                image::Luma([pixels[iy * nx + ix]]),
            );
        }
    }
    img
}

/// Min-max normalized grayscale heatmap (ascending-y input).
pub fn write_heatmap_png(path: &Path, nx: usize, ny: usize, values: &[f64]) -> Result<()> {
    if values.len() != nx * ny {
        return Err(Error::Validation("grid shape mismatch".into()));
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let pixels: Vec<u8> = values
        .iter()
        .map(|&v| (255.0 * (v - lo) / span).round().clamp(0.0, 255.0) as u8)
        .collect();
    flip_to_image(nx, ny, pixels)
        .save(path)
        .map_err(|e| Error::Validation(format!("png encode: {e}")))
}

/// Binary mask PNG (255 = flagged), ascending-y input.
pub fn write_mask_png(path: &Path, nx: usize, ny: usize, flags: &[bool]) -> Result<()> {
    if flags.len() != nx * ny {
        return Err(Error::Validation("mask shape mismatch".into()));
    }
    let pixels: Vec<u8> = flags.iter().map(|&f| if f { 255 } else { 0 }).collect();
    flip_to_image(nx, ny, pixels)
        .save(path)
        .map_err(|e| Error::Validation(format!("png encode: {e}")))
}

/// Sign background with nodal segments burned in black. Segments come in
/// node-index coordinates of the same grid.
pub fn write_overlay_png(
    path: &Path,
    nx: usize,
    ny: usize,
    values: &[f64],
    segments: &[((f64, f64), (f64, f64))],
) -> Result<()> {
    if values.len() != nx * ny {
        return Err(Error::Validation("grid shape mismatch".into()));
    }
    let mut pixels: Vec<u8> = values
        .iter()
        .map(|&v| if v >= 0.0 { 200 } else { 110 })
        .collect();
    for &(a, b) in segments {
        let steps = (2.0 * (b.0 - a.0).hypot(b.1 - a.1)).ceil().max(1.0) as usize;
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            let x = (a.0 + t * (b.0 - a.0)).round();
            let y = (a.1 + t * (b.1 - a.1)).round();
            if x >= 0.0 && y >= 0.0 && (x as usize) < nx && (y as usize) < ny {
                pixels[y as usize * nx + x as usize] = 0;
            }
        }
    }
    flip_to_image(nx, ny, pixels)
        .save(path)
        .map_err(|e| Error::Validation(format!("png encode: {e}")))
}
