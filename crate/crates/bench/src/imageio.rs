//! Grayscale image files.
//!
//! Binary PGM (P5, 8 or 16 bit) and single-channel PFM are read and written
//! directly; PNG input goes through the `image` crate and is reduced to
//! luminance. Pixel values are mapped to `[0, 1]` for integer formats and kept
//! as-is for PFM.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{s, Array2};

use crate::error::{BenchError, Result};

const PNG_MAGIC: &[u8] = b"\x89PNG\r\n\x1a\n";

pub fn luminance(r: f64, g: f64, b: f64) -> f64 {
    0.2126 * r + 0.7152 * g + 0.0722 * b
}

/// Reads a grayscale image, dispatching on the file contents.
pub fn read_image(path: &Path) -> Result<Array2<f64>> {
    let bytes = fs::read(path).map_err(|e| BenchError::user_io(path, e))?;
    let parsed = if bytes.starts_with(b"P5") {
        parse_pgm(&bytes)
    } else if bytes.starts_with(b"Pf") {
        parse_pfm(&bytes)
    } else if bytes.starts_with(PNG_MAGIC) {
        decode_png(&bytes)
    } else {
        Err("unsupported image format (expected binary PGM, PFM or PNG)".to_string())
    };
    parsed.map_err(|e| BenchError::user_io(path, e))
}

/// Writes by extension: `.pfm` keeps full precision, `.pgm` is quantized to 16
/// bits after clamping to `[0, 1]`.
pub fn write_image(path: &Path, img: &Array2<f64>) -> Result<()> {
    let bytes = match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref() {
        Some("pfm") => encode_pfm(img),
        Some("pgm") => encode_pgm(img, 16),
        _ => return Err(BenchError::User(format!("{}: output must end in .pfm or .pgm", path.display()))),
    };
    let mut f = fs::File::create(path).map_err(|e| BenchError::user_io(path, e))?;
    f.write_all(&bytes).map_err(|e| BenchError::user_io(path, e))
}

/// Largest power-of-two square anchored at the top-left corner.
pub fn crop_power_of_two(img: &Array2<f64>) -> Result<Array2<f64>> {
    let (h, w) = img.dim();
    let m = h.min(w);
    if m == 0 {
        return Err(BenchError::User("image is empty".into()));
    }
    let side = 1usize << (usize::BITS - 1 - m.leading_zeros());
    Ok(img.slice(s![..side, ..side]).to_owned())
}

fn header_tokens(bytes: &[u8], count: usize) -> std::result::Result<(Vec<String>, usize), String> {
    let mut tokens = Vec::with_capacity(count);
    let mut pos = 0;
    while tokens.len() < count {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    // exactly one whitespace byte separates the header from the raster
    Ok((tokens, pos + 1))
}

fn parse_dim(t: &str) -> std::result::Result<usize, String> {
    t.parse().map_err(|_| format!("invalid header field '{t}'"))
}

fn parse_pgm(bytes: &[u8]) -> std::result::Result<Array2<f64>, String> {
    let (t, start) = header_tokens(bytes, 4)?;
    let (w, h, maxval) = (parse_dim(&t[1])?, parse_dim(&t[2])?, parse_dim(&t[3])?);
    if maxval == 0 || maxval > 65535 {
        return Err(format!("invalid maxval {maxval}"));
    }
    let bpp = if maxval < 256 { 1 } else { 2 };
    let raster = bytes.get(start..).unwrap_or(&[]);
    if raster.len() < w * h * bpp {
        return Err(format!("raster too short: expected {} bytes, found {}", w * h * bpp, raster.len()));
    }
    let scale = maxval as f64;
    Ok(Array2::from_shape_fn((h, w), |(i, j)| {
        let k = (i * w + j) * bpp;
        let v = if bpp == 1 { raster[k] as f64 } else { u16::from_be_bytes([raster[k], raster[k + 1]]) as f64 };
        v / scale
    }))
}

pub fn encode_pgm(img: &Array2<f64>, bits: u32) -> Vec<u8> {
    let (h, w) = img.dim();
    let maxval: u32 = if bits <= 8 { 255 } else { 65535 };
    let mut out = format!("P5\n{w} {h}\n{maxval}\n").into_bytes();
    for &v in img.iter() {
        let q = (v.clamp(0.0, 1.0) * maxval as f64).round() as u32;
        if maxval == 255 {
            out.push(q as u8);
        } else {
            out.extend_from_slice(&(q as u16).to_be_bytes());
        }
    }
    out
}

fn parse_pfm(bytes: &[u8]) -> std::result::Result<Array2<f64>, String> {
    let (t, start) = header_tokens(bytes, 4)?;
    let (w, h) = (parse_dim(&t[1])?, parse_dim(&t[2])?);
    let scale: f64 = t[3].parse().map_err(|_| format!("invalid scale '{}'", t[3]))?;
    let little = scale < 0.0;
    let raster = bytes.get(start..).unwrap_or(&[]);
    if raster.len() < w * h * 4 {
        return Err("raster too short".into());
    }
    // rows are stored bottom to top
    Ok(Array2::from_shape_fn((h, w), |(i, j)| {
        let k = ((h - 1 - i) * w + j) * 4;
        let b = [raster[k], raster[k + 1], raster[k + 2], raster[k + 3]];
        (if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) }) as f64
    }))
}

pub fn encode_pfm(img: &Array2<f64>) -> Vec<u8> {
    let (h, w) = img.dim();
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    for i in (0..h).rev() {
        for j in 0..w {
            out.extend_from_slice(&(img[[i, j]] as f32).to_le_bytes());
        }
    }
    out
}

fn decode_png(bytes: &[u8]) -> std::result::Result<Array2<f64>, String> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png).map_err(|e| e.to_string())?;
    let rgb = img.to_rgb32f();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    Ok(Array2::from_shape_fn((h, w), |(i, j)| {
        let p = rgb.get_pixel(j as u32, i as u32).0;
        luminance(p[0] as f64, p[1] as f64, p[2] as f64)
    }))
}
