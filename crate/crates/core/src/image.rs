//! 8-bit raster images and binary netpbm (P5/P6) I/O.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Interleaved 8-bit image with 1 (gray) or 3 (RGB) channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::arg(format!("unsupported channel count {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::shape(format!(
                "{} bytes for a {width}x{height}x{channels} image",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Self {
        Self::new(width, height, channels, vec![value; width * height * channels])
            .expect("valid channel count")
    }

    pub fn gray(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        Self::new(width, height, 1, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn set(&mut self, x: usize, y: usize, c: usize, v: u8) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// Luma per pixel (Rec. 601 weights for RGB), row-major.
    pub fn luma(&self) -> Vec<f64> {
        match self.channels {
            1 => self.data.iter().map(|&v| f64::from(v)).collect(),
            _ => self
                .data
                .chunks_exact(3)
                .map(|p| 0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2]))
                .collect(),
        }
    }

    /// Whether pixel `(x, y)` of a single-channel mask is set (non-zero).
    pub fn is_on(&self, x: usize, y: usize) -> bool {
        self.get(x, y, 0) != 0
    }

    /// Number of non-zero pixels of a single-channel mask.
    pub fn count_on(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn same_dims(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Parses a binary P5 or P6 image with maxval at most 255.
    pub fn from_pnm(bytes: &[u8]) -> Result<Image> {
        let mut pos = 0;
        let magic = next_token(bytes, &mut pos)?;
        let channels = match magic.as_str() {
            "P5" => 1,
            "P6" => 3,
            other => return Err(Error::parse(1, format!("unsupported netpbm magic {other:?}"))),
        };
        let mut field = |name: &str| -> Result<usize> {
            let tok = next_token(bytes, &mut pos)?;
            tok.parse()
                .map_err(|_| Error::parse(1, format!("invalid {name} {tok:?}")))
        };
        let width = field("width")?;
        let height = field("height")?;
        let maxval = field("maxval")?;
        if maxval == 0 || maxval > 255 {
            return Err(Error::parse(1, format!("unsupported maxval {maxval}")));
        }
        // Exactly one whitespace byte separates the header from the raster.
        pos += 1;
        let len = width * height * channels;
        let raster = bytes
            .get(pos..pos + len)
            .ok_or_else(|| Error::parse(1, "truncated raster"))?;
        Image::new(width, height, channels, raster.to_vec())
    }

    /// Serializes as P5 (gray) or P6 (RGB).
    pub fn to_pnm(&self) -> Vec<u8> {
        let magic = if self.channels == 1 { "P5" } else { "P6" };
        let mut out = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Image> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Image::from_pnm(&bytes)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::File::create(path)?.write_all(&self.to_pnm())?;
        Ok(())
    }
}

fn next_token(bytes: &[u8], pos: &mut usize) -> Result<String> {
    loop {
        match bytes.get(*pos) {
            Some(b'#') => {
                while bytes.get(*pos).is_some_and(|&b| b != b'\n') {
                    *pos += 1;
                }
            }
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
            None => return Err(Error::parse(1, "truncated header")),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(|b| !b.is_ascii_whitespace()) {
        *pos += 1;
    }
    Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}
