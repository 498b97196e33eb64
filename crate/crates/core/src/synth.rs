//! Synthetic particle image pairs with known motion.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{config_err, Result};
use crate::piv::{GrayImage, WindowGrid, MAX_INTENSITY};

pub const DEFAULT_RADIUS: f64 = 5.0;
const DENSITY_WINDOW: usize = 32;

/// Displacement field between the two exposures, in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Flow {
    Uniform { dx: f64, dy: f64 },
    /// Horizontal motion proportional to the row: `dx = rate * y`.
    Shear { rate: f64 },
    /// Solid-body rotation by `strength` radians about `(cx, cy)`.
    Vortex { cx: f64, cy: f64, strength: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowSpec {
    pub kind: Flow,
    /// Inter-frame interval in seconds. Carried for converting displacement
    /// to velocity; it does not affect rendering.
    pub delta_t: f64,
}

impl FlowSpec {
    pub fn uniform(dx: f64, dy: f64) -> Self {
        Flow::Uniform { dx, dy }.into()
    }

    pub fn shear(rate: f64) -> Self {
        Flow::Shear { rate }.into()
    }

    pub fn vortex(cx: f64, cy: f64, strength: f64) -> Self {
        Flow::Vortex { cx, cy, strength }.into()
    }

    /// Displacement of a particle at `(x, y)`.
    pub fn displacement(&self, x: f64, y: f64) -> (f64, f64) {
        match self.kind {
            Flow::Uniform { dx, dy } => (dx, dy),
            Flow::Shear { rate } => (rate * y, 0.0),
            Flow::Vortex { cx, cy, strength } => {
                let (s, c) = strength.sin_cos();
                let (rx, ry) = (x - cx, y - cy);
                (c * rx - s * ry - rx, s * rx + c * ry - ry)
            }
        }
    }

    /// Velocity in pixels per second.
    pub fn velocity(&self, x: f64, y: f64) -> (f64, f64) {
        let (dx, dy) = self.displacement(x, y);
        (dx / self.delta_t, dy / self.delta_t)
    }

    /// Parses `uniform:dx,dy`, `shear:rate` or `vortex:cx,cy,strength`.
    pub fn parse(s: &str) -> Result<Self> {
        let (name, args) = s.trim().split_once(':').unwrap_or((s.trim(), ""));
        let nums = args
            .split(',')
            .filter(|a| !a.trim().is_empty())
            .map(|a| {
                a.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| config_err(format!("bad flow parameter '{a}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        let flow = match (name, nums.as_slice()) {
            ("uniform", &[dx, dy]) => Flow::Uniform { dx, dy },
            ("shear", &[rate]) => Flow::Shear { rate },
            ("vortex", &[cx, cy, strength]) => Flow::Vortex { cx, cy, strength },
            _ => {
                return Err(config_err(format!(
                    "bad flow '{s}' (expected uniform:dx,dy | shear:rate | vortex:cx,cy,strength)"
                )))
            }
        };
        Ok(flow.into())
    }
}

impl From<Flow> for FlowSpec {
    fn from(kind: Flow) -> Self {
        FlowSpec { kind, delta_t: 1.0 }
    }
}

impl fmt::Display for FlowSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            Flow::Uniform { dx, dy } => write!(f, "uniform:{dx},{dy}"),
            Flow::Shear { rate } => write!(f, "shear:{rate}"),
            Flow::Vortex { cx, cy, strength } => write!(f, "vortex:{cx},{cy},{strength}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleField {
    pub positions: Vec<(f64, f64)>,
    pub radius: f64,
    pub seed: u64,
}

impl ParticleField {
    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }
}

/// Places `density` particles per 32x32 window, uniformly over the frame.
/// The count is the rounded expectation, so it is the same for every seed.
pub fn seed_particles(width: usize, height: usize, density: f64, seed: u64) -> Result<ParticleField> {
    if !density.is_finite() || density <= 0.0 {
        return Err(config_err(format!("particle density must be positive, got {density}")));
    }
    let windows = (width * height) as f64 / (DENSITY_WINDOW * DENSITY_WINDOW) as f64;
    let count = (density * windows).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions = (0..count)
        .map(|_| (rng.gen::<f64>() * width as f64, rng.gen::<f64>() * height as f64))
        .collect();
    Ok(ParticleField {
        positions,
        radius: DEFAULT_RADIUS,
        seed,
    })
}

/// Moves every particle by the flow. Particles may leave the frame.
pub fn advect(field: &ParticleField, flow: &FlowSpec) -> ParticleField {
    let positions = field
        .positions
        .iter()
        .map(|&(x, y)| {
            let (dx, dy) = flow.displacement(x, y);
            (x + dx, y + dy)
        })
        .collect();
    ParticleField {
        positions,
        ..field.clone()
    }
}

/// Like [`advect`], but particles re-enter on the opposite edge.
pub fn advect_periodic(field: &ParticleField, flow: &FlowSpec, width: usize, height: usize) -> ParticleField {
    let (w, h) = (width as f64, height as f64);
    let mut out = advect(field, flow);
    for p in &mut out.positions {
        p.0 = p.0.rem_euclid(w);
        p.1 = p.1.rem_euclid(h);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderConfig {
    pub width: usize,
    pub height: usize,
    pub background: u16,
    pub particle: u16,
    /// Uniform noise in `[-noise, noise]` added to every pixel.
    pub noise: u16,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            width: 320,
            height: 256,
            background: 100,
            particle: 800,
            noise: 0,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(config_err("image dimensions must be positive"));
        }
        for (name, v) in [("background", self.background), ("particle", self.particle), ("noise", self.noise)] {
            if v > MAX_INTENSITY {
                return Err(config_err(format!("{name} intensity {v} exceeds {MAX_INTENSITY}")));
            }
        }
        Ok(())
    }
}

/// Draws hard-edged discs; a pixel is lit when its center lies inside one.
/// `stream` selects an independent noise sequence.
pub fn render(field: &ParticleField, cfg: &RenderConfig, stream: u64) -> Result<GrayImage> {
    cfg.validate()?;
    let (w, h) = (cfg.width, cfg.height);
    let mut data = vec![cfg.background; w * h];
    let r = field.radius;
    for &(x, y) in &field.positions {
        let x0 = (x - r - 0.5).floor().max(0.0) as usize;
        let y0 = (y - r - 0.5).floor().max(0.0) as usize;
        let x1 = ((x + r + 0.5).ceil().max(0.0) as usize).min(w);
        let y1 = ((y + r + 0.5).ceil().max(0.0) as usize).min(h);
        for py in y0..y1 {
            let ddy = py as f64 + 0.5 - y;
            for px in x0..x1 {
                let ddx = px as f64 + 0.5 - x;
                if ddx * ddx + ddy * ddy <= r * r {
                    data[py * w + px] = cfg.particle;
                }
            }
        }
    }
    if cfg.noise > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(field.seed);
        rng.set_stream(stream + 1);
        let amp = cfg.noise as i32;
        for v in &mut data {
            let n = rng.gen_range(-amp..=amp);
            *v = (*v as i32 + n).clamp(0, MAX_INTENSITY as i32) as u16;
        }
    }
    GrayImage::new(w, h, data)
}

/// Frame 1 shows `field`, frame 2 the field advected by `flow`.
pub fn render_pair(field: &ParticleField, flow: &FlowSpec, cfg: &RenderConfig) -> Result<(GrayImage, GrayImage)> {
    let moved = advect(field, flow);
    Ok((render(field, cfg, 0)?, render(&moved, cfg, 1)?))
}

/// Flow displacement at each window center, in window order.
pub fn truth(flow: &FlowSpec, grid: &WindowGrid) -> Vec<(f64, f64)> {
    (0..grid.len())
        .map(|i| {
            let (cx, cy) = grid.center(i);
            flow.displacement(cx, cy)
        })
        .collect()
}

/// `count` consecutive frames of one particle field under a steady flow with
/// periodic boundaries, so every frame keeps the same particle density.
pub fn frame_sequence(
    density: f64,
    flow: &FlowSpec,
    cfg: &RenderConfig,
    count: usize,
    seed: u64,
) -> Result<Vec<GrayImage>> {
    let mut field = seed_particles(cfg.width, cfg.height, density, seed)?;
    let mut frames = Vec::with_capacity(count);
    for i in 0..count {
        frames.push(render(&field, cfg, i as u64)?);
        field = advect_periodic(&field, flow, cfg.width, cfg.height);
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::piv::Raster;

    #[test]
    fn seeding_is_deterministic_and_bounded() {
        let a = seed_particles(320, 256, 10.0, 42).unwrap();
        assert_eq!(a, seed_particles(320, 256, 10.0, 42).unwrap());
        assert_ne!(a, seed_particles(320, 256, 10.0, 43).unwrap());
        assert_eq!(a.positions.len(), 800);
        let small = seed_particles(32, 32, 1.0, 7).unwrap();
        assert_eq!(small.positions.len(), 1);
        for s in 0..50 {
            let f = seed_particles(32, 32, 1.0, s).unwrap();
            assert!(f.positions.iter().all(|&(x, y)| (0.0..32.0).contains(&x) && (0.0..32.0).contains(&y)));
        }
        assert!(seed_particles(32, 32, 0.0, 1).is_err());
        assert!(seed_particles(32, 32, -1.0, 1).is_err());
    }

    #[test]
    fn flows() {
        let f = ParticleField {
            positions: vec![(10.0, 100.0), (3.5, 7.25)],
            radius: 1.0,
            seed: 0,
        };
        assert_eq!(advect(&f, &FlowSpec::uniform(0.0, 0.0)), f);
        let moved = advect(&f, &FlowSpec::uniform(3.0, 1.0));
        assert_eq!(moved.positions, vec![(13.0, 101.0), (6.5, 8.25)]);
        let (dx, dy) = FlowSpec::shear(0.1).displacement(10.0, 100.0);
        assert!((dx - 10.0).abs() < 1e-12 && dy == 0.0);
        // quarter turn about the origin maps (1, 0) to (0, 1)
        let (dx, dy) = FlowSpec::vortex(0.0, 0.0, std::f64::consts::FRAC_PI_2).displacement(1.0, 0.0);
        assert!((dx + 1.0).abs() < 1e-12 && (dy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flow_text_round_trip() {
        for s in ["uniform:3,1", "shear:0.1", "vortex:160,128,0.05", "uniform:-2.5,0"] {
            assert_eq!(FlowSpec::parse(s).unwrap().to_string(), s);
        }
        for bad in ["uniform:3", "spin:1", "shear:x", "uniform:1,inf"] {
            assert!(FlowSpec::parse(bad).is_err(), "{bad}");
        }
        let mut f = FlowSpec::uniform(4.0, 0.0);
        f.delta_t = 0.5;
        assert_eq!(f.velocity(0.0, 0.0), (8.0, 0.0));
    }

    #[test]
    fn empty_field_renders_background() {
        let f = ParticleField {
            positions: vec![],
            radius: 5.0,
            seed: 0,
        };
        let cfg = RenderConfig {
            width: 64,
            height: 32,
            ..Default::default()
        };
        let (a, b) = render_pair(&f, &FlowSpec::uniform(2.0, 2.0), &cfg).unwrap();
        assert!(a.data().iter().chain(b.data()).all(|&v| v == 100));
    }

    fn centroid(img: &GrayImage) -> (f64, f64) {
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
        for y in 0..img.height() {
            for x in 0..img.width() {
                if img.get(x, y) == 800 {
                    sx += x as f64 + 0.5;
                    sy += y as f64 + 0.5;
                    n += 1.0;
                }
            }
        }
        (sx / n, sy / n)
    }

    #[test]
    fn single_particle_moves_with_flow() {
        let f = ParticleField {
            positions: vec![(16.0, 16.0)],
            radius: 1.0,
            seed: 0,
        };
        let cfg = RenderConfig {
            width: 32,
            height: 32,
            ..Default::default()
        };
        let (a, b) = render_pair(&f, &FlowSpec::uniform(3.0, 0.0), &cfg).unwrap();
        assert_eq!(a.data().iter().filter(|&&v| v == 800).count(), 4);
        assert_eq!(centroid(&a), (16.0, 16.0));
        assert_eq!(centroid(&b), (19.0, 16.0));
    }

    #[test]
    fn noise_is_seeded_and_clamped() {
        let f = seed_particles(64, 64, 5.0, 3).unwrap();
        let cfg = RenderConfig {
            width: 64,
            height: 64,
            background: 10,
            particle: 1020,
            noise: 50,
        };
        let a = render(&f, &cfg, 0).unwrap();
        assert_eq!(a, render(&f, &cfg, 0).unwrap());
        assert_ne!(a, render(&f, &cfg, 1).unwrap());
        assert!(a.data().iter().all(|&v| v <= MAX_INTENSITY));
        let bad = RenderConfig { particle: 2000, ..cfg };
        assert!(render(&f, &bad, 0).is_err());
    }

    #[test]
    fn periodic_sequence_keeps_particles() {
        let cfg = RenderConfig {
            width: 64,
            height: 64,
            ..Default::default()
        };
        let frames = frame_sequence(4.0, &FlowSpec::uniform(5.0, -3.0), &cfg, 20, 9).unwrap();
        assert_eq!(frames.len(), 20);
        let lit = |g: &GrayImage| g.data().iter().filter(|&&v| v == 800).count();
        // overlaps change slightly, but nothing drains out of the frame
        let first = lit(&frames[0]) as f64;
        assert!(frames.iter().all(|g| (lit(g) as f64 / first - 1.0).abs() < 0.25));
    }
}
