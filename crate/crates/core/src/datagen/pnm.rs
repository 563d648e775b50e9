//! Binary PPM (P6) and PGM (P5) files with maxval 255.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn header(magic: &str, width: usize, height: usize) -> Vec<u8> {
    format!("{magic}\n{width} {height}\n255\n").into_bytes()
}

pub fn encode_ppm(width: usize, height: usize, rgb: &[u8]) -> Vec<u8> {
    assert_eq!(rgb.len(), width * height * 3);
    let mut out = header("P6", width, height);
    out.extend_from_slice(rgb);
    out
}

pub fn encode_pgm(width: usize, height: usize, gray: &[u8]) -> Vec<u8> {
    assert_eq!(gray.len(), width * height);
    let mut out = header("P5", width, height);
    out.extend_from_slice(gray);
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Cursor<'_> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            offset: self.pos,
            msg: msg.into(),
        }
    }

    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| {
                let mut e = self.err(format!("{what} out of range"));
                if let Error::Parse { offset, .. } = &mut e {
                    *offset = start;
                }
                e
            })
    }
}

/// Returns `(width, height, raster)` after validating the header.
fn decode(bytes: &[u8], path: &Path, magic: &[u8; 2], channels: usize) -> Result<(usize, usize, Vec<u8>)> {
    let mut c = Cursor { bytes, pos: 0, path };
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(c.err(format!("missing {} magic", String::from_utf8_lossy(magic))));
    }
    c.pos = 2;
    let width = c.number("width")?;
    let height = c.number("height")?;
    let maxval = c.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(c.err("zero image dimension"));
    }
    if maxval != 255 {
        return Err(c.err(format!("maxval {maxval} unsupported (need 255)")));
    }
    match bytes.get(c.pos) {
        Some(b) if b.is_ascii_whitespace() => c.pos += 1,
        _ => return Err(c.err("expected a single whitespace before the raster")),
    }
    let need = width * height * channels;
    let have = bytes.len() - c.pos;
    if have != need {
        return Err(c.err(format!("raster has {have} bytes, expected {need}")));
    }
    Ok((width, height, bytes[c.pos..].to_vec()))
}

pub fn decode_ppm(bytes: &[u8], path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    decode(bytes, path, b"P6", 3)
}

pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    decode(bytes, path, b"P5", 1)
}

pub fn read_ppm(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    decode_ppm(&fs::read(path)?, path)
}

pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    decode_pgm(&fs::read(path)?, path)
}

/// Quantizes a `[3, H, W]` image in `[0, 1]` to interleaved RGB bytes.
pub fn image_to_rgb8(image: &Tensor) -> Vec<u8> {
    let (h, w) = (image.shape()[1], image.shape()[2]);
    let plane = h * w;
    let d = image.data();
    let mut out = Vec::with_capacity(3 * plane);
    for i in 0..plane {
        for k in 0..3 {
            out.push((d[k * plane + i].clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    out
}

/// Interleaved RGB bytes to a planar `[3, H, W]` image in `[0, 1]`.
pub fn rgb8_to_image(width: usize, height: usize, rgb: &[u8]) -> Tensor {
    let plane = width * height;
    let mut data = vec![0.0; 3 * plane];
    for i in 0..plane {
        for k in 0..3 {
            data[k * plane + i] = rgb[3 * i + k] as f64 / 255.0;
        }
    }
    Tensor::new(vec![3, height, width], data).expect("consistent image buffer")
}
