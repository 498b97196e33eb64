use super::xcorr::CorrelationPlane;

/// Rule for choosing among equal correlation maxima.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TieBreak {
    /// Smallest `dx² + dy²`, then first in row-major plane order. A flat
    /// plane therefore reports zero motion.
    #[default]
    NearestThenRowMajor,
    /// First maximum in row-major plane order.
    RowMajor,
}

impl TieBreak {
    pub fn name(&self) -> &'static str {
        match self {
            TieBreak::NearestThenRowMajor => "nearest",
            TieBreak::RowMajor => "row-major",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "nearest" => Some(TieBreak::NearestThenRowMajor),
            "row-major" => Some(TieBreak::RowMajor),
            _ => None,
        }
    }
}

/// Displacement of one interrogation window, in whole pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Displacement<V = u32> {
    pub window_index: usize,
    pub dx: i32,
    pub dy: i32,
    pub peak_value: V,
}

pub fn peak_displacement<V: Copy + PartialOrd>(plane: &CorrelationPlane<V>) -> Displacement<V> {
    peak_displacement_with(plane, TieBreak::default())
}

/// Location of the correlation maximum. Panics on an empty plane.
pub fn peak_displacement_with<V: Copy + PartialOrd>(
    plane: &CorrelationPlane<V>,
    tie_break: TieBreak,
) -> Displacement<V> {
    assert!(!plane.is_empty(), "peak search on an empty correlation plane");
    let mut best = (0usize, 0usize);
    let mut best_v = plane.at(0, 0);
    let mut best_r2 = radius2(plane.displacement(0, 0));
    for iy in 0..plane.shifts_y {
        for ix in 0..plane.shifts_x {
            let v = plane.at(ix, iy);
            let r2 = radius2(plane.displacement(ix, iy));
            let better = if v > best_v {
                true
            } else if v == best_v {
                tie_break == TieBreak::NearestThenRowMajor && r2 < best_r2
            } else {
                false
            };
            if better {
                best = (ix, iy);
                best_v = v;
                best_r2 = r2;
            }
        }
    }
    let (dx, dy) = plane.displacement(best.0, best.1);
    Displacement {
        window_index: 0,
        dx,
        dy,
        peak_value: best_v,
    }
}

fn radius2((dx, dy): (i32, i32)) -> i64 {
    (dx as i64).pow(2) + (dy as i64).pow(2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane_17(f: impl Fn(i32, i32) -> u32) -> CorrelationPlane<u32> {
        let mut values = Vec::new();
        for iy in 0..17 {
            for ix in 0..17 {
                values.push(f(ix - 8, iy - 8));
            }
        }
        CorrelationPlane {
            shifts_x: 17,
            shifts_y: 17,
            values,
            shift_offset: (-8, -8),
        }
    }

    #[test]
    fn unique_max_at_origin() {
        let p = plane_17(|dx, dy| if (dx, dy) == (0, 0) { 9 } else { 1 });
        let d = peak_displacement(&p);
        assert_eq!((d.dx, d.dy, d.peak_value), (0, 0, 9));
    }

    #[test]
    fn signed_offset_peak() {
        let p = plane_17(|dx, dy| if (dx, dy) == (2, -3) { 200 } else { 100 });
        let d = peak_displacement(&p);
        assert_eq!((d.dx, d.dy), (2, -3));
    }

    #[test]
    fn flat_plane_is_zero_motion() {
        let p = plane_17(|_, _| 42);
        let d = peak_displacement(&p);
        assert_eq!((d.dx, d.dy), (0, 0));
        let d = peak_displacement_with(&p, TieBreak::RowMajor);
        assert_eq!((d.dx, d.dy), (-8, -8));
    }

    #[test]
    fn ties_at_equal_radius_go_row_major() {
        let p = plane_17(|dx, dy| if dx.abs() + dy.abs() == 1 { 5 } else { 0 });
        // (0,-1) comes first in row-major order among the four neighbours
        let d = peak_displacement(&p);
        assert_eq!((d.dx, d.dy), (0, -1));
    }

    #[test]
    fn works_for_float_planes() {
        let p = plane_17(|dx, dy| (dx * dy).unsigned_abs()).map(|v| v as f64 * -0.5);
        let d = peak_displacement(&p);
        assert_eq!((d.dx, d.dy), (0, 0));
        assert_eq!(d.peak_value, 0.0);
    }
}
