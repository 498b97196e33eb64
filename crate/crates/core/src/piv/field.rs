use std::io::Write;

use rayon::prelude::*;

use super::binarize::{binarize_adaptive, binarize_global};
use super::grid::{tile_windows, WindowGrid};
use super::image::{BinaryImage, GrayImage, Raster};
use super::peak::{peak_displacement_with, Displacement, TieBreak};
use super::xcorr::{extract_pattern, xcorr_binary};
use crate::error::{config_err, Error, Result};

/// How grey levels are reduced to one bit per pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Binarization {
    /// One threshold for the entire frame.
    Global(u16),
    /// Each interrogation window thresholded at its own mean.
    #[default]
    Adaptive,
}

impl Binarization {
    pub fn apply(&self, img: &GrayImage, grid: &WindowGrid) -> Result<BinaryImage> {
        match *self {
            Binarization::Global(t) => {
                grid.check_dims(img.width(), img.height())?;
                Ok(binarize_global(img, t))
            }
            Binarization::Adaptive => binarize_adaptive(img, grid),
        }
    }

    /// Accepts `adaptive` or `global:<threshold>`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "adaptive" {
            return Ok(Binarization::Adaptive);
        }
        if let Some(t) = s.strip_prefix("global:") {
            let t: u16 = t
                .trim()
                .parse()
                .map_err(|_| config_err(format!("bad global threshold '{t}'")))?;
            return Ok(Binarization::Global(t));
        }
        Err(config_err(format!(
            "unknown binarization '{s}' (expected 'adaptive' or 'global:<threshold>')"
        )))
    }
}

impl std::fmt::Display for Binarization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Binarization::Global(t) => write!(f, "global:{t}"),
            Binarization::Adaptive => f.write_str("adaptive"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PivConfig {
    pub window_size: usize,
    pub pattern_size: usize,
    pub binarization: Binarization,
    pub tie_break: TieBreak,
}

impl Default for PivConfig {
    fn default() -> Self {
        PivConfig {
            window_size: 32,
            pattern_size: 16,
            binarization: Binarization::Adaptive,
            tie_break: TieBreak::NearestThenRowMajor,
        }
    }
}

impl PivConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_size == 0 || self.pattern_size == 0 {
            return Err(config_err("window and pattern sizes must be positive"));
        }
        if self.pattern_size > self.window_size {
            return Err(config_err(format!(
                "pattern size {} exceeds window size {}",
                self.pattern_size, self.window_size
            )));
        }
        Ok(())
    }

    /// Number of shifts tested along each axis.
    pub fn search_range(&self) -> usize {
        self.window_size - self.pattern_size + 1
    }

    /// Largest displacement magnitude the search can report.
    pub fn max_shift(&self) -> usize {
        let range = self.window_size - self.pattern_size;
        range - range / 2
    }
}

/// One displacement per interrogation window, in window order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VectorField {
    pub grid: WindowGrid,
    pub vectors: Vec<Displacement>,
}

impl VectorField {
    pub const CSV_HEADER: &'static str = "window,cx,cy,dx,dy,peak";

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for v in &self.vectors {
            let (cx, cy) = self.grid.center(v.window_index);
            writeln!(out, "{},{},{},{},{},{}", v.window_index, cx, cy, v.dx, v.dy, v.peak_value)?;
        }
        Ok(())
    }
}

/// Correlates one window pair: the centered pattern of `second` against the
/// whole of `first`.
pub(crate) fn window_displacement(
    first: &BinaryImage,
    second: &BinaryImage,
    origin: (usize, usize),
    cfg: &PivConfig,
) -> Result<Displacement> {
    let ws = cfg.window_size;
    let search = first.crop(origin.0, origin.1, ws, ws)?;
    let window2 = second.crop(origin.0, origin.1, ws, ws)?;
    let pattern = extract_pattern(&window2, cfg.pattern_size)?;
    let plane = xcorr_binary(&search, &pattern)?;
    Ok(peak_displacement_with(&plane, cfg.tie_break))
}

/// Vector field from two binarized frames already known to match `grid`.
pub(crate) fn field_from_binary(
    first: &BinaryImage,
    second: &BinaryImage,
    grid: WindowGrid,
    cfg: &PivConfig,
) -> Result<VectorField> {
    let vectors = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            window_displacement(first, second, grid.origin(i), cfg).map(|d| Displacement {
                window_index: i,
                ..d
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VectorField { grid, vectors })
}

/// Full-field binary PIV on a frame pair.
pub fn compute_field(frame1: &GrayImage, frame2: &GrayImage, cfg: &PivConfig) -> Result<VectorField> {
    cfg.validate()?;
    if frame1.dims() != frame2.dims() {
        return Err(Error::SizeMismatch {
            expected: frame1.dims(),
            found: frame2.dims(),
        });
    }
    let grid = tile_windows(frame1.width(), frame1.height(), cfg.window_size)?;
    let b1 = cfg.binarization.apply(frame1, &grid)?;
    let b2 = cfg.binarization.apply(frame2, &grid)?;
    field_from_binary(&b1, &b2, grid, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn textured(w: usize, h: usize, seed: u64) -> GrayImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GrayImage::from_fn(w, h, |_, _| rng.gen_range(0..1024)).unwrap()
    }

    #[test]
    fn identical_frames_give_zero_field() {
        let f = textured(320, 256, 1);
        let field = compute_field(&f, &f, &PivConfig::default()).unwrap();
        assert_eq!(field.vectors.len(), 80);
        assert!(field.vectors.iter().all(|v| v.dx == 0 && v.dy == 0 && v.peak_value == 256));
        assert!(field.vectors.iter().enumerate().all(|(i, v)| v.window_index == i));
    }

    #[test]
    fn shifted_texture_is_recovered() {
        let f1 = textured(96, 64, 2);
        // frame 2 content at (x, y) came from frame 1 at (x - 3, y + 2)
        let f2 = GrayImage::from_fn(96, 64, |x, y| {
            let (sx, sy) = (x as i64 - 3, y as i64 + 2);
            if sx < 0 || sy >= 64 {
                0
            } else {
                f1.get(sx as usize, sy as usize)
            }
        })
        .unwrap();
        let cfg = PivConfig {
            binarization: Binarization::Global(512),
            ..Default::default()
        };
        let field = compute_field(&f1, &f2, &cfg).unwrap();
        for v in &field.vectors {
            assert_eq!((v.dx, v.dy), (3, -2), "window {}", v.window_index);
        }
    }

    #[test]
    fn mismatched_frames_rejected() {
        let a = textured(64, 64, 1);
        let b = textured(64, 32, 1);
        assert!(matches!(
            compute_field(&a, &b, &PivConfig::default()),
            Err(Error::SizeMismatch { .. })
        ));
        let c = textured(64, 48, 1);
        assert!(matches!(
            compute_field(&c, &c, &PivConfig::default()),
            Err(Error::NotTileable { .. })
        ));
    }

    #[test]
    fn config_limits() {
        let cfg = PivConfig::default();
        assert_eq!(cfg.search_range(), 17);
        assert_eq!(cfg.max_shift(), 8);
        let bad = PivConfig {
            pattern_size: 33,
            ..cfg
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn binarization_round_trips_through_text() {
        for b in [Binarization::Adaptive, Binarization::Global(300)] {
            assert_eq!(Binarization::parse(&b.to_string()).unwrap(), b);
        }
        assert!(Binarization::parse("otsu").is_err());
    }

    #[test]
    fn csv_layout() {
        let f = textured(64, 32, 4);
        let field = compute_field(&f, &f, &PivConfig::default()).unwrap();
        let mut buf = Vec::new();
        field.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "window,cx,cy,dx,dy,peak");
        assert_eq!(lines[1], "0,16,16,0,0,256");
        assert_eq!(lines[2], "1,48,16,0,0,256");
        assert_eq!(lines.len(), 3);
    }
}
