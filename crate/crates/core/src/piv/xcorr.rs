use super::image::{BinaryImage, GrayImage, Raster};
use crate::error::{config_err, Result};

/// Correlation sums over every fully-overlapping pattern placement.
///
/// Values are stored row-major in *displacement* order: index `(ix, iy)`
/// holds the sum for displacement `(ix + shift_offset.0, iy + shift_offset.1)`.
/// A displacement `d` means the pattern, taken from the center of the
/// second frame's window, was found at `center - d` in the first frame, so
/// `d` is the particle motion from frame 1 to frame 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrelationPlane<V> {
    pub shifts_x: usize,
    pub shifts_y: usize,
    pub values: Vec<V>,
    pub shift_offset: (i32, i32),
}

impl<V: Copy> CorrelationPlane<V> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn at(&self, ix: usize, iy: usize) -> V {
        self.values[iy * self.shifts_x + ix]
    }

    /// Value at displacement `(dx, dy)`, if it was evaluated.
    pub fn at_displacement(&self, dx: i32, dy: i32) -> Option<V> {
        let ix = dx - self.shift_offset.0;
        let iy = dy - self.shift_offset.1;
        if ix < 0 || iy < 0 || ix as usize >= self.shifts_x || iy as usize >= self.shifts_y {
            return None;
        }
        Some(self.at(ix as usize, iy as usize))
    }

    pub fn displacement(&self, ix: usize, iy: usize) -> (i32, i32) {
        (ix as i32 + self.shift_offset.0, iy as i32 + self.shift_offset.1)
    }

    pub fn map<U>(&self, f: impl FnMut(V) -> U) -> CorrelationPlane<U> {
        CorrelationPlane {
            shifts_x: self.shifts_x,
            shifts_y: self.shifts_y,
            values: self.values.iter().copied().map(f).collect(),
            shift_offset: self.shift_offset,
        }
    }
}

/// Search geometry for one axis: `range` = number of shifts minus one,
/// `center` = where the centered pattern sits.
#[derive(Clone, Copy)]
struct AxisShifts {
    range: usize,
    center: usize,
}

impl AxisShifts {
    fn new(search: usize, pattern: usize) -> Self {
        let range = search - pattern;
        AxisShifts {
            range,
            center: range / 2,
        }
    }

    fn offset(&self) -> i32 {
        self.center as i32 - self.range as i32
    }

    /// Pattern location in the search window for plane index `i`.
    fn location(&self, i: usize) -> usize {
        self.range - i
    }
}

fn geometry(search: (usize, usize), pattern: (usize, usize)) -> Result<(AxisShifts, AxisShifts)> {
    if pattern.0 == 0 || pattern.1 == 0 {
        return Err(config_err("pattern must be non-empty"));
    }
    if pattern.0 > search.0 || pattern.1 > search.1 {
        return Err(config_err(format!(
            "pattern {}x{} does not fit in search window {}x{}",
            pattern.0, pattern.1, search.0, search.1
        )));
    }
    Ok((AxisShifts::new(search.0, pattern.0), AxisShifts::new(search.1, pattern.1)))
}

fn build_plane<V>(
    gx: AxisShifts,
    gy: AxisShifts,
    mut at_location: impl FnMut(usize, usize) -> V,
) -> CorrelationPlane<V> {
    let (sx, sy) = (gx.range + 1, gy.range + 1);
    let mut values = Vec::with_capacity(sx * sy);
    for iy in 0..sy {
        for ix in 0..sx {
            values.push(at_location(gx.location(ix), gy.location(iy)));
        }
    }
    CorrelationPlane {
        shifts_x: sx,
        shifts_y: sy,
        values,
        shift_offset: (gx.offset(), gy.offset()),
    }
}

/// Centered `pattern_size` square taken from a window. The top-left corner
/// sits at `(window - pattern) / 2` on each axis.
pub fn extract_pattern<R: Raster>(window: &R, pattern_size: usize) -> Result<R> {
    let (w, h) = window.dims();
    if pattern_size == 0 || pattern_size > w || pattern_size > h {
        return Err(config_err(format!(
            "pattern size {pattern_size} does not fit in {w}x{h} window"
        )));
    }
    window.crop((w - pattern_size) / 2, (h - pattern_size) / 2, pattern_size, pattern_size)
}

/// Direct product correlation of grey levels.
pub fn xcorr_gray(search: &GrayImage, pattern: &GrayImage) -> Result<CorrelationPlane<u64>> {
    let (gx, gy) = geometry(search.dims(), pattern.dims())?;
    let (pw, ph) = pattern.dims();
    Ok(build_plane(gx, gy, |lx, ly| {
        let mut sum = 0u64;
        for v in 0..ph {
            for u in 0..pw {
                sum += search.get(lx + u, ly + v) as u64 * pattern.get(u, v) as u64;
            }
        }
        sum
    }))
}

/// XNOR correlation: the number of pattern pixels equal to the search pixel
/// they overlap. Rows are compared 64 bits at a time with population counts.
pub fn xcorr_binary(search: &BinaryImage, pattern: &BinaryImage) -> Result<CorrelationPlane<u32>> {
    let (gx, gy) = geometry(search.dims(), pattern.dims())?;
    let (pw, ph) = pattern.dims();
    let chunks: Vec<(usize, usize)> = (0..pw)
        .step_by(64)
        .map(|start| (start, (pw - start).min(64)))
        .collect();
    let masks: Vec<u64> = chunks
        .iter()
        .map(|&(_, len)| if len == 64 { u64::MAX } else { (1u64 << len) - 1 })
        .collect();
    let nc = chunks.len();

    let pattern_rows: Vec<u64> = (0..ph)
        .flat_map(|v| chunks.iter().map(move |&(s, len)| pattern.row_bits(s, v, len)))
        .collect();

    // slices[(row * shifts_x + lx) * nc + chunk]
    let sx = gx.range + 1;
    let mut slices = Vec::with_capacity(search.height() * sx * nc);
    for y in 0..search.height() {
        for lx in 0..sx {
            for &(s, len) in &chunks {
                slices.push(search.row_bits(lx + s, y, len));
            }
        }
    }

    Ok(build_plane(gx, gy, |lx, ly| {
        let mut matches = 0u32;
        for v in 0..ph {
            let srow = &slices[((ly + v) * sx + lx) * nc..][..nc];
            let prow = &pattern_rows[v * nc..][..nc];
            for c in 0..nc {
                matches += (!(srow[c] ^ prow[c]) & masks[c]).count_ones();
            }
        }
        matches
    }))
}
