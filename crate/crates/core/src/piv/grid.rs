use crate::error::{config_err, Axis, Error, Result};

/// Non-overlapping tiling of an image into square interrogation windows,
/// numbered row-major from the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WindowGrid {
    pub window_size: usize,
    pub cols: usize,
    pub rows: usize,
}

impl WindowGrid {
    pub fn len(&self) -> usize {
        self.cols * self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Top-left corner of window `index`.
    pub fn origin(&self, index: usize) -> (usize, usize) {
        assert!(index < self.len(), "window {index} out of range");
        (
            (index % self.cols) * self.window_size,
            (index / self.cols) * self.window_size,
        )
    }

    pub fn origins(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.len()).map(|i| self.origin(i))
    }

    /// Window center in pixel coordinates (half-integer for odd sizes).
    pub fn center(&self, index: usize) -> (f64, f64) {
        let (x, y) = self.origin(index);
        let half = self.window_size as f64 / 2.0;
        (x as f64 + half, y as f64 + half)
    }

    /// Index of the window containing pixel `(x, y)`.
    pub fn window_at(&self, x: usize, y: usize) -> usize {
        (y / self.window_size) * self.cols + x / self.window_size
    }

    pub fn pixel_dims(&self) -> (usize, usize) {
        (self.cols * self.window_size, self.rows * self.window_size)
    }

    pub(crate) fn check_dims(&self, width: usize, height: usize) -> Result<()> {
        if self.pixel_dims() != (width, height) {
            return Err(Error::SizeMismatch {
                expected: self.pixel_dims(),
                found: (width, height),
            });
        }
        Ok(())
    }
}

pub fn tile_windows(width: usize, height: usize, window_size: usize) -> Result<WindowGrid> {
    if window_size == 0 {
        return Err(config_err("window size must be positive"));
    }
    for (axis, size) in [(Axis::Width, width), (Axis::Height, height)] {
        if size == 0 || size % window_size != 0 {
            return Err(Error::NotTileable {
                axis,
                size,
                window: window_size,
            });
        }
    }
    Ok(WindowGrid {
        window_size,
        cols: width / window_size,
        rows: height / window_size,
    })
}
