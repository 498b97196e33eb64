//! Binary PGM (P5) reading and writing.

use std::io::{Read, Write};

use super::image::{GrayImage, Raster, MAX_INTENSITY};
use crate::error::{Error, Result};

fn bad(msg: impl Into<String>) -> Error {
    Error::Input(format!("PGM: {}", msg.into()))
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
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
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(format!("missing or invalid {what}")))
    }
}

/// Decodes an 8- or 16-bit binary PGM. 16-bit samples above 1023 are
/// rejected.
pub fn decode(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(bad("bad magic, expected P5"));
    }
    let mut h = Header { bytes, pos: 2 };
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(bad(format!("maxval {maxval} out of range")));
    }
    // exactly one whitespace byte separates the header from the raster
    if h.pos >= bytes.len() || !bytes[h.pos].is_ascii_whitespace() {
        return Err(bad("missing raster separator"));
    }
    let raster = &bytes[h.pos + 1..];
    let n = width * height;
    let data: Vec<u16> = if maxval < 256 {
        if raster.len() < n {
            return Err(bad("truncated 8-bit raster"));
        }
        raster[..n].iter().map(|&b| b as u16).collect()
    } else {
        if raster.len() < 2 * n {
            return Err(bad("truncated 16-bit raster"));
        }
        let data: Vec<u16> = raster[..2 * n]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect();
        if let Some(v) = data.iter().find(|&&v| v > MAX_INTENSITY) {
            return Err(bad(format!("sample {v} exceeds 10-bit range")));
        }
        data
    };
    GrayImage::new(width, height, data)
}

pub fn read<R: Read>(mut r: R) -> Result<GrayImage> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode(&bytes)
}

/// Writes a 16-bit PGM with maxval 1023.
pub fn write<W: Write>(img: &GrayImage, mut w: W) -> Result<()> {
    write!(w, "P5\n{} {}\n{}\n", img.width(), img.height(), MAX_INTENSITY)?;
    let mut raster = Vec::with_capacity(img.data().len() * 2);
    for &v in img.data() {
        raster.extend_from_slice(&v.to_be_bytes());
    }
    w.write_all(&raster)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_16_bit() {
        let img = GrayImage::from_fn(5, 3, |x, y| (x * 200 + y) as u16).unwrap();
        let mut buf = Vec::new();
        write(&img, &mut buf).unwrap();
        assert!(buf.starts_with(b"P5\n5 3\n1023\n"));
        assert_eq!(read(&buf[..]).unwrap(), img);
    }

    #[test]
    fn reads_8_bit_with_comments() {
        let mut bytes = b"P5\n# made by hand\n3 2 # dims\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 10, 255, 1, 2, 3]);
        let img = decode(&bytes).unwrap();
        assert_eq!(img.data(), &[0, 10, 255, 1, 2, 3]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(decode(b"P2\n1 1\n255\n0").is_err());
        assert!(decode(b"P5\n2 2\n255\n\x00").is_err());
        let mut over = b"P5\n1 1\n65535\n".to_vec();
        over.extend_from_slice(&1024u16.to_be_bytes());
        let err = decode(&over).unwrap_err();
        assert!(err.to_string().contains("1024"));
    }
}
