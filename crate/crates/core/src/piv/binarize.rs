use super::grid::WindowGrid;
use super::image::{BinaryImage, GrayImage, Raster};
use crate::error::Result;

/// One threshold for the whole frame: bit is set iff `pixel >= threshold`.
pub fn binarize_global(img: &GrayImage, threshold: u16) -> BinaryImage {
    BinaryImage::from_fn(img.width(), img.height(), |x, y| img.get(x, y) >= threshold)
}

/// Arithmetic mean of a window's pixels, rounded half up.
pub fn window_mean(img: &GrayImage, x0: usize, y0: usize, size: usize) -> u16 {
    let mut sum: u64 = 0;
    for y in y0..y0 + size {
        for x in x0..x0 + size {
            sum += img.get(x, y) as u64;
        }
    }
    let n = (size * size) as u64;
    ((2 * sum + n) / (2 * n)) as u16
}

/// Per-window threshold equal to the window mean.
pub fn binarize_adaptive(img: &GrayImage, grid: &WindowGrid) -> Result<BinaryImage> {
    grid.check_dims(img.width(), img.height())?;
    let mut out = BinaryImage::zeros(img.width(), img.height());
    let ws = grid.window_size;
    for (x0, y0) in grid.origins() {
        let thr = window_mean(img, x0, y0, ws);
        for y in y0..y0 + ws {
            for x in x0..x0 + ws {
                if img.get(x, y) >= thr {
                    out.set(x, y, true);
                }
            }
        }
    }
    Ok(out)
}
