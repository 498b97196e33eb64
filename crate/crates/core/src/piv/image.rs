use crate::error::{Error, Result};

/// Largest intensity a 10-bit sensor can produce.
pub const MAX_INTENSITY: u16 = 1023;

/// Row-major raster of 10-bit intensities.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u16>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u16>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Input(format!(
                "{}x{} image needs {} pixels, got {}",
                width,
                height,
                width * height,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|&&v| v > MAX_INTENSITY) {
            return Err(Error::Input(format!(
                "intensity {v} exceeds the 10-bit maximum {MAX_INTENSITY}"
            )));
        }
        Ok(GrayImage {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u16) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u16) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.data[y * self.width + x]
    }

    pub fn data(&self) -> &[u16] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u16> {
        self.data
    }
}

/// Bit-packed binary raster. Pixel `k = y * width + x` lives in word `k / 32`
/// at bit `k % 32` (least significant bit first); bits past the last pixel
/// are zero.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    words: Vec<u32>,
}

impl BinaryImage {
    pub fn zeros(width: usize, height: usize) -> Self {
        BinaryImage {
            width,
            height,
            words: vec![0; (width * height).div_ceil(32)],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut img = Self::zeros(width, height);
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    img.set(x, y, true);
                }
            }
        }
        img
    }

    /// Builds an image from packed words, rejecting stray padding bits.
    pub fn from_words(width: usize, height: usize, words: Vec<u32>) -> Result<Self> {
        let bits = width * height;
        if words.len() != bits.div_ceil(32) {
            return Err(Error::Input(format!(
                "{}x{} binary image needs {} words, got {}",
                width,
                height,
                bits.div_ceil(32),
                words.len()
            )));
        }
        if !bits.is_multiple_of(32) {
            let pad = words[words.len() - 1] >> (bits % 32);
            if pad != 0 {
                return Err(Error::Input("padding bits of the last word must be zero".into()));
            }
        }
        Ok(BinaryImage {
            width,
            height,
            words,
        })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        let k = y * self.width + x;
        (self.words[k / 32] >> (k % 32)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, bit: bool) {
        let k = y * self.width + x;
        let mask = 1u32 << (k % 32);
        if bit {
            self.words[k / 32] |= mask;
        } else {
            self.words[k / 32] &= !mask;
        }
    }

    pub fn words(&self) -> &[u32] {
        &self.words
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Bitwise complement over the pixel area; padding stays zero.
    pub fn complement(&self) -> Self {
        let mut out = self.clone();
        for w in &mut out.words {
            *w = !*w;
        }
        let bits = self.width * self.height;
        if !bits.is_multiple_of(32) {
            let last = out.words.len() - 1;
            out.words[last] &= (1u32 << (bits % 32)) - 1;
        }
        out
    }

    /// Copies `len <= 64` bits of row `y`, starting at column `x`, into the
    /// low bits of a `u64` (column `x` at bit 0).
    pub(crate) fn row_bits(&self, x: usize, y: usize, len: usize) -> u64 {
        debug_assert!(len <= 64 && x + len <= self.width);
        let start = y * self.width + x;
        let mut out = 0u64;
        let mut got = 0;
        while got < len {
            let k = start + got;
            let shift = k % 32;
            let take = (32 - shift).min(len - got);
            let chunk = (self.words[k / 32] >> shift) as u64 & ((1u64 << take) - 1);
            out |= chunk << got;
            got += take;
        }
        out
    }
}

/// Common raster behaviour shared by gray and binary images.
pub trait Raster: Sized {
    fn width(&self) -> usize;
    fn height(&self) -> usize;

    /// Copies the `w` x `h` block whose top-left corner is `(x, y)`.
    fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<Self>;

    fn dims(&self) -> (usize, usize) {
        (self.width(), self.height())
    }
}

fn check_crop(dims: (usize, usize), x: usize, y: usize, w: usize, h: usize) -> Result<()> {
    if x + w > dims.0 || y + h > dims.1 {
        return Err(Error::Input(format!(
            "region {w}x{h} at ({x}, {y}) exceeds {}x{} image",
            dims.0, dims.1
        )));
    }
    Ok(())
}

impl Raster for GrayImage {
    fn width(&self) -> usize {
        self.width
    }

    fn height(&self) -> usize {
        self.height
    }

    fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<Self> {
        check_crop(self.dims(), x, y, w, h)?;
        let mut data = Vec::with_capacity(w * h);
        for row in y..y + h {
            let start = row * self.width + x;
            data.extend_from_slice(&self.data[start..start + w]);
        }
        Ok(GrayImage {
            width: w,
            height: h,
            data,
        })
    }
}

impl Raster for BinaryImage {
    fn width(&self) -> usize {
        self.width
    }

    fn height(&self) -> usize {
        self.height
    }

    fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<Self> {
        check_crop(self.dims(), x, y, w, h)?;
        let mut out = BinaryImage::zeros(w, h);
        for row in 0..h {
            let mut col = 0;
            while col < w {
                let len = (w - col).min(64);
                let bits = self.row_bits(x + col, y + row, len);
                for b in 0..len {
                    if (bits >> b) & 1 == 1 {
                        out.set(col + b, row, true);
                    }
                }
                col += len;
            }
        }
        Ok(out)
    }
}
