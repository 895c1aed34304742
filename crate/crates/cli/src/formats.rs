//! PFM depth maps and binary PGM masks.
//!
//! PFM is written as single-channel little-endian (`Pf`, scale `-1.0`),
//! rows bottom to top. Values are stored as `f32`.

use std::fs;
use std::io::Write;
use std::path::Path;

use endoscale::raster::{DepthMap, DepthUnit, ShaftMask};

use crate::error::{CliError, Result};

pub fn encode_pfm(d: &DepthMap) -> Vec<u8> {
    let (w, h) = d.dims();
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(4 * w * h);
    for y in (0..h).rev() {
        for x in 0..w {
            out.extend_from_slice(&(d.get(x, y) as f32).to_le_bytes());
        }
    }
    out
}

// Splits off `n` whitespace-separated header tokens; the payload starts after
// the single whitespace byte that ends the last token.
fn header_tokens(bytes: &[u8], n: usize) -> Option<(Vec<String>, &[u8])> {
    let mut tokens = Vec::with_capacity(n);
    let mut i = 0;
    while tokens.len() < n {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return None;
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    if i == bytes.len() {
        return Some((tokens, &bytes[i..]));
    }
    Some((tokens, &bytes[i + 1..]))
}

pub fn decode_pfm(bytes: &[u8], unit: DepthUnit) -> std::result::Result<DepthMap, String> {
    let (tokens, payload) = header_tokens(bytes, 4).ok_or("truncated PFM header")?;
    if tokens[0] != "Pf" {
        return Err(format!("unsupported PFM type {:?} (only single-channel Pf)", tokens[0]));
    }
    let w: usize = tokens[1].parse().map_err(|_| "bad PFM width")?;
    let h: usize = tokens[2].parse().map_err(|_| "bad PFM height")?;
    let scale: f64 = tokens[3].parse().map_err(|_| "bad PFM scale")?;
    if scale == 0.0 || !scale.is_finite() {
        return Err("PFM scale must be non-zero".into());
    }
    let little = scale < 0.0;
    if payload.len() != 4 * w * h {
        return Err(format!("PFM payload has {} bytes, expected {}", payload.len(), 4 * w * h));
    }
    let mut values = vec![0.0; w * h];
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
        let (row, x) = (i / w, i % w);
        values[(h - 1 - row) * w + x] = v as f64;
    }
    DepthMap::new(w, h, values, unit).map_err(|e| e.to_string())
}

pub fn encode_pgm(m: &ShaftMask) -> Vec<u8> {
    let (w, h) = m.dims();
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(m.bits().iter().map(|b| if *b { 255u8 } else { 0 }));
    out
}

/// Any non-zero sample is foreground.
pub fn decode_pgm(bytes: &[u8]) -> std::result::Result<ShaftMask, String> {
    let (tokens, payload) = header_tokens(bytes, 4).ok_or("truncated PGM header")?;
    if tokens[0] != "P5" {
        return Err(format!("unsupported PGM type {:?} (only binary P5)", tokens[0]));
    }
    let w: usize = tokens[1].parse().map_err(|_| "bad PGM width")?;
    let h: usize = tokens[2].parse().map_err(|_| "bad PGM height")?;
    let maxval: u32 = tokens[3].parse().map_err(|_| "bad PGM maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err("only 8-bit PGM is supported".into());
    }
    if payload.len() != w * h {
        return Err(format!("PGM payload has {} bytes, expected {}", payload.len(), w * h));
    }
    ShaftMask::new(w, h, payload.iter().map(|b| *b != 0).collect()).map_err(|e| e.to_string())
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(bytes).map_err(|e| CliError::io(path, e))
}

pub fn read_pfm(path: &Path, unit: DepthUnit) -> Result<DepthMap> {
    decode_pfm(&read_bytes(path)?, unit).map_err(|m| CliError::data(format!("{}: {m}", path.display())))
}

pub fn write_pfm(path: &Path, d: &DepthMap) -> Result<()> {
    write_bytes(path, &encode_pfm(d))
}

pub fn read_pgm(path: &Path) -> Result<ShaftMask> {
    decode_pgm(&read_bytes(path)?).map_err(|m| CliError::data(format!("{}: {m}", path.display())))
}

pub fn write_pgm(path: &Path, m: &ShaftMask) -> Result<()> {
    write_bytes(path, &encode_pgm(m))
}
