use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

/// Grayscale image, row-major, values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("not a binary graymap (expected P5 magic)")]
    BadMagic,
    #[error("malformed header: {0}")]
    Header(&'static str),
    #[error("maxval {0} outside 1..=65535")]
    MaxVal(u64),
    #[error("image dimensions {0}x{1} are not positive or too large")]
    Dimensions(u64, u64),
    #[error("pixel data truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("sample {value} exceeds maxval {maxval}")]
    Sample { value: u32, maxval: u32 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Largest side accepted when decoding.
pub const MAX_PGM_SIDE: u64 = 1 << 14;

impl Image {
    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Self { width, height, pixels: vec![value.clamp(0.0, 1.0); width * height] }
    }

    /// Wraps row-major pixels, clamping them into [0, 1].
    pub fn from_pixels(width: usize, height: usize, mut pixels: Vec<f64>) -> Self {
        assert!(width > 0 && height > 0 && pixels.len() == width * height, "pixel buffer does not match dimensions");
        for p in &mut pixels {
            *p = if p.is_nan() { 0.0 } else { p.clamp(0.0, 1.0) };
        }
        Self { width, height, pixels }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.pixels[y * self.width + x] = value.clamp(0.0, 1.0);
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }

    /// Largest absolute per-pixel difference.
    pub fn max_abs_diff(&self, other: &Image) -> f64 {
        assert_eq!((self.width, self.height), (other.width, other.height));
        self.pixels.iter().zip(&other.pixels).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Binary graymap (P5) with maxval 255.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.pixels.iter().map(|p| (p * 255.0).round() as u8));
        out
    }

    pub fn write_pgm(&self, path: &Path) -> io::Result<()> {
        fs::write(path, self.to_pgm())
    }

    pub fn read_pgm(path: &Path) -> Result<Self, PgmError> {
        Self::from_pgm(&fs::read(path)?)
    }

    /// Decodes a binary graymap; samples are scaled by 1 / maxval.
    pub fn from_pgm(bytes: &[u8]) -> Result<Self, PgmError> {
        if bytes.len() < 2 || &bytes[..2] != b"P5" {
            return Err(PgmError::BadMagic);
        }
        let mut pos = 2;
        let width = header_number(bytes, &mut pos)?;
        let height = header_number(bytes, &mut pos)?;
        let maxval = header_number(bytes, &mut pos)?;
        // exactly one whitespace byte separates the header from the raster
        match bytes.get(pos) {
            Some(b) if b.is_ascii_whitespace() => pos += 1,
            _ => return Err(PgmError::Header("missing whitespace after maxval")),
        }
        if !(1..=65535).contains(&maxval) {
            return Err(PgmError::MaxVal(maxval));
        }
        if width == 0 || height == 0 || width > MAX_PGM_SIDE || height > MAX_PGM_SIDE {
            return Err(PgmError::Dimensions(width, height));
        }
        let (w, h) = (width as usize, height as usize);
        let bytes_per = if maxval > 255 { 2 } else { 1 };
        let expected = w * h * bytes_per;
        let data = &bytes[pos..];
        if data.len() < expected {
            return Err(PgmError::Truncated { expected, found: data.len() });
        }
        let maxval = maxval as u32;
        let mut pixels = Vec::with_capacity(w * h);
        for i in 0..w * h {
            let value = if bytes_per == 2 {
                u32::from(u16::from_be_bytes([data[2 * i], data[2 * i + 1]]))
            } else {
                u32::from(data[i])
            };
            if value > maxval {
                return Err(PgmError::Sample { value, maxval });
            }
            pixels.push(f64::from(value) / f64::from(maxval));
        }
        Ok(Self { width: w, height: h, pixels })
    }
}

fn header_number(bytes: &[u8], pos: &mut usize) -> Result<u64, PgmError> {
    loop {
        match bytes.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while let Some(&b) = bytes.get(*pos) {
                    *pos += 1;
                    if b == b'\n' || b == b'\r' {
                        break;
                    }
                }
            }
            Some(_) => break,
            None => return Err(PgmError::Header("unexpected end of header")),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(u8::is_ascii_digit) {
        *pos += 1;
    }
    if *pos == start {
        return Err(PgmError::Header("expected a decimal number"));
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or(PgmError::Header("number out of range"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn encodes_header_and_samples() {
        let img = Image::from_pixels(2, 1, vec![0.0, 1.0]);
        assert_eq!(img.to_pgm(), b"P5\n2 1\n255\n\x00\xff".to_vec());
    }

    #[test]
    fn decodes_comments_and_wide_samples() {
        let mut bytes = b"P5 # made by hand\n2 # width\n1\n65535\n".to_vec();
        bytes.extend([0x00, 0x00, 0xff, 0xff]);
        let img = Image::from_pgm(&bytes).unwrap();
        assert_eq!(img.pixels(), &[0.0, 1.0]);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(matches!(Image::from_pgm(b"P2\n1 1\n255\n0"), Err(PgmError::BadMagic)));
        assert!(matches!(Image::from_pgm(b"P5\n2 2\n255\n\x00"), Err(PgmError::Truncated { .. })));
        assert!(matches!(Image::from_pgm(b"P5\n0 2\n255\n"), Err(PgmError::Dimensions(0, 2))));
        assert!(matches!(Image::from_pgm(b"P5\n1 1\n0\n\x00"), Err(PgmError::MaxVal(0))));
        assert!(matches!(Image::from_pgm(b"P5\n1 1\n7\n\x09"), Err(PgmError::Sample { .. })));
        assert!(matches!(Image::from_pgm(b"P5\n1 1\n255"), Err(PgmError::Header(_))));
        assert!(matches!(Image::from_pgm(b"P5\n99999999999999999999999 1\n255\n"), Err(PgmError::Header(_))));
    }

    proptest! {
        #[test]
        fn pgm_round_trip_within_quantization(w in 1usize..12, h in 1usize..12, seed in any::<u64>()) {
            let mut x = seed;
            let pixels: Vec<f64> = (0..w * h).map(|_| {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (x >> 11) as f64 / (1u64 << 53) as f64
            }).collect();
            let img = Image::from_pixels(w, h, pixels);
            let back = Image::from_pgm(&img.to_pgm()).unwrap();
            prop_assert_eq!((back.width(), back.height()), (w, h));
            prop_assert!(img.max_abs_diff(&back) <= 0.5 / 255.0 + 1e-12);
            prop_assert_eq!(Image::from_pgm(&back.to_pgm()).unwrap(), back);
        }
    }
}
