//! 8-bit binary PGM (P5) heatmaps of `[frames × bins]` maps.

use std::path::Path;

use ndarray::ArrayView2;

use crate::error::{Error, Result};

/// Decoded P5 image; `pixels` is row-major, top row first.
#[derive(Debug, Clone, PartialEq)]
pub struct PgmImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
    /// Extrema from the `# min=.. max=..` comment, if present.
    pub range: Option<(f64, f64)>,
}

impl PgmImage {
    pub fn histogram(&self) -> [usize; 256] {
        let mut h = [0; 256];
        for &p in &self.pixels {
            h[p as usize] += 1;
        }
        h
    }
}

/// Renders frames as columns and bins as rows, lowest bin at the bottom,
/// scaled linearly from the map's minimum (0) to its maximum (255). A
/// constant map renders as 128.
pub fn render_pgm(map: ArrayView2<'_, f64>) -> Result<Vec<u8>> {
    let (frames, bins) = map.dim();
    if frames == 0 || bins == 0 {
        return Err(Error::shape(format!("cannot render an empty {frames}x{bins} map")));
    }
    if map.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("map contains non-finite values".into()));
    }
    let min = map.iter().copied().fold(f64::INFINITY, f64::min);
    let max = map.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = format!("P5\n# min={min} max={max}\n{frames} {bins}\n255\n").into_bytes();
    out.reserve(frames * bins);
    for row in 0..bins {
        let f = bins - 1 - row;
        for t in 0..frames {
            let px = if max > min {
                (255.0 * (map[[t, f]] - min) / (max - min)).round() as u8
            } else {
                128
            };
            out.push(px);
        }
    }
    Ok(out)
}

pub fn write_pgm(path: &Path, map: ArrayView2<'_, f64>) -> Result<()> {
    std::fs::write(path, render_pgm(map)?).map_err(|e| Error::io(path, e))
}

pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<PgmImage> {
    let bad = |msg: &str| Error::format(path, msg.to_string());
    let mut pos = 0;
    let mut range = None;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos >= bytes.len() {
            return Err(bad("header ends early"));
        }
        if bytes[pos] == b'#' {
            let end = bytes[pos..]
                .iter()
                .position(|&b| b == b'\n')
                .map_or(bytes.len(), |e| pos + e);
            let comment = String::from_utf8_lossy(&bytes[pos + 1..end]);
            let mut lo = None;
            let mut hi = None;
            for word in comment.split_whitespace() {
                if let Some(v) = word.strip_prefix("min=") {
                    lo = v.parse::<f64>().ok();
                } else if let Some(v) = word.strip_prefix("max=") {
                    hi = v.parse::<f64>().ok();
                }
            }
            if let (Some(lo), Some(hi)) = (lo, hi) {
                range = Some((lo, hi));
            }
            pos = end;
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if fields[0] != "P5" {
        return Err(bad("magic is not P5"));
    }
    let num = |s: &str, what: &str| {
        s.parse::<usize>()
            .map_err(|_| bad(&format!("{what} '{s}' is not a number")))
    };
    let width = num(&fields[1], "width")?;
    let height = num(&fields[2], "height")?;
    if num(&fields[3], "maxval")? != 255 {
        return Err(bad("maxval must be 255"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let pixels = bytes.get(pos..).unwrap_or_default();
    if pixels.len() != width * height {
        return Err(bad("payload shorter than header claims"));
    }
    Ok(PgmImage {
        width,
        height,
        pixels: pixels.to_vec(),
        range,
    })
}

pub fn read_pgm(path: &Path) -> Result<PgmImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes, path)
}
