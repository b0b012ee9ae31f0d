//! Binary PGM (`P5`) and PPM (`P6`) with `maxval` 255.

use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{GrayImage, RgbImage};
use crate::metrics::BinaryMask;

/// Decoded 8-bit raster; `channels` is 1 for PGM and 3 for PPM.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

fn fmt_err(offset: usize, detail: impl Into<String>) -> Error {
    Error::ImageFormat {
        offset,
        detail: detail.into(),
    }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(fmt_err(start, format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| fmt_err(start, format!("{what} out of range")))
    }
}

fn decode(bytes: &[u8], magic: &[u8; 2], channels: usize) -> Result<Raster> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        let found = String::from_utf8_lossy(&bytes[..bytes.len().min(2)]).into_owned();
        return Err(fmt_err(
            0,
            format!(
                "expected magic {:?}, found {found:?}",
                std::str::from_utf8(magic).unwrap()
            ),
        ));
    }
    let mut h = Header { bytes, pos: 2 };
    let width = h.number("width")?;
    let height = h.number("height")?;
    h.skip_space_and_comments();
    let maxval_at = h.pos;
    let maxval = h.number("maxval")?;
    if maxval != 255 {
        return Err(fmt_err(
            maxval_at,
            format!("unsupported maxval {maxval}; only 255 is supported"),
        ));
    }
    if h.pos >= bytes.len() || !bytes[h.pos].is_ascii_whitespace() {
        return Err(fmt_err(
            h.pos,
            "expected a single whitespace byte after maxval",
        ));
    }
    let start = h.pos + 1;
    let need = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| fmt_err(2, "image dimensions overflow"))?;
    let have = bytes.len() - start;
    if have < need {
        return Err(fmt_err(
            bytes.len(),
            format!("truncated pixel data: need {need} bytes, found {have}"),
        ));
    }
    if have > need {
        return Err(fmt_err(
            start + need,
            format!("{} trailing bytes", have - need),
        ));
    }
    Ok(Raster {
        width,
        height,
        channels,
        data: bytes[start..].to_vec(),
    })
}

fn encode(magic: &str, width: usize, height: usize, data: &[u8]) -> Vec<u8> {
    let mut out = format!("{magic}\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(data);
    out
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Raster> {
    decode(bytes, b"P5", 1)
}

pub fn decode_ppm(bytes: &[u8]) -> Result<Raster> {
    decode(bytes, b"P6", 3)
}

pub fn encode_pgm(width: usize, height: usize, data: &[u8]) -> Result<Vec<u8>> {
    if data.len() != width * height {
        return Err(Error::shape(
            "pgm",
            format!("{width}x{height} with {} bytes", data.len()),
        ));
    }
    Ok(encode("P5", width, height, data))
}

pub fn encode_ppm(image: &RgbImage) -> Result<Vec<u8>> {
    if image.data.len() != image.width * image.height * 3 {
        return Err(Error::shape(
            "ppm",
            format!(
                "{}x{} with {} bytes",
                image.width,
                image.height,
                image.data.len()
            ),
        ));
    }
    Ok(encode("P6", image.width, image.height, &image.data))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn with_path(path: &Path, e: Error) -> Error {
    match e {
        Error::ImageFormat { offset, detail } => Error::ImageFormat {
            offset,
            detail: format!("{}: {detail}", path.display()),
        },
        other => other,
    }
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<Raster> {
    let path = path.as_ref();
    decode_pgm(&read_bytes(path)?).map_err(|e| with_path(path, e))
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<Raster> {
    let path = path.as_ref();
    decode_ppm(&read_bytes(path)?).map_err(|e| with_path(path, e))
}

pub fn write_pgm(path: impl AsRef<Path>, width: usize, height: usize, data: &[u8]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_pgm(width, height, data)?).map_err(|e| Error::io(path, e))
}

pub fn write_ppm(path: impl AsRef<Path>, image: &RgbImage) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_ppm(image)?).map_err(|e| Error::io(path, e))
}

pub fn read_pgm_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    let r = read_pgm(path)?;
    GrayImage::from_bytes(r.width, r.height, &r.data)
}

/// Reads a PGM as a mask: bytes `>= 128` are foreground.
pub fn read_pgm_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let r = read_pgm(path)?;
    BinaryMask::from_bits(
        r.width,
        r.height,
        r.data.iter().map(|&b| (b >= 128) as u8).collect(),
    )
}
