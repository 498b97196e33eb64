use std::fmt;
use std::fmt::Write as _;

use super::frame::{MAX_RESULT_PEAK, MAX_RESULT_SHIFT, MAX_RESULT_WINDOWS};
use crate::error::{config_err, Result};
use crate::piv::{tile_windows, Binarization, PivConfig, TieBreak, WindowGrid};
use crate::synth::{FlowSpec, RenderConfig};
use crate::ThroughputModel;

const FS_PER_US: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClockDomain {
    pub freq_mhz: f64,
    /// Offset of the first edge, in cycles of this clock.
    pub phase: f64,
}

impl ClockDomain {
    pub const fn new(freq_mhz: f64) -> Self {
        ClockDomain { freq_mhz, phase: 0.0 }
    }

    /// Clock period in femtoseconds.
    pub fn period_fs(&self) -> u64 {
        (FS_PER_US / self.freq_mhz).round() as u64
    }

    pub fn first_edge_fs(&self) -> u64 {
        (self.phase * self.period_fs() as f64).round() as u64
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.freq_mhz > 0.0 && self.freq_mhz <= 1e6) {
            return Err(config_err(format!("{name} clock must be in (0, 1e6] MHz, got {}", self.freq_mhz)));
        }
        if !(self.phase >= 0.0 && self.phase.is_finite()) {
            return Err(config_err(format!("{name} phase must be non-negative")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModuleKind {
    Control,
    Acquisition,
    Storage,
    Processing,
}

impl fmt::Display for ModuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModuleKind::Control => "control",
            ModuleKind::Acquisition => "acquisition",
            ModuleKind::Storage => "storage",
            ModuleKind::Processing => "processing",
        })
    }
}

/// Everything needed to build and run a ring.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_processing: usize,
    pub width: usize,
    pub height: usize,
    pub window_size: usize,
    pub pattern_size: usize,
    /// Processing cycles per window correlation.
    pub t_corr: u64,
    /// Processing cycles a module's engine loses for each command frame
    /// passing through its wrapper.
    pub hop_cost: u64,
    /// Synchronizer depth on each handshake line, in receiving-clock edges.
    pub handshake_cost: u32,
    pub pixel_clock_mhz: f64,
    pub control: ClockDomain,
    pub acquisition: ClockDomain,
    pub storage: ClockDomain,
    pub processing: ClockDomain,
    pub binarization: Binarization,
    pub tie_break: TieBreak,
    /// Workload: particles per window, flow, RNG seed.
    pub density: f64,
    pub flow: FlowSpec,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_processing: 1,
            width: 320,
            height: 256,
            window_size: 32,
            pattern_size: 16,
            t_corr: 6166,
            hop_cost: 2026,
            handshake_cost: 2,
            pixel_clock_mhz: 320.0,
            control: ClockDomain::new(150.0),
            acquisition: ClockDomain::new(10.0),
            storage: ClockDomain::new(100.0),
            processing: ClockDomain::new(100.0),
            binarization: Binarization::Adaptive,
            tie_break: TieBreak::NearestThenRowMajor,
            density: 10.0,
            flow: FlowSpec::uniform(3.0, 1.0),
            seed: 1,
        }
    }
}

impl SimConfig {
    pub fn with_processing(&self, n: usize) -> Self {
        SimConfig {
            n_processing: n,
            ..self.clone()
        }
    }

    pub fn grid(&self) -> Result<WindowGrid> {
        tile_windows(self.width, self.height, self.window_size)
    }

    pub fn window_count(&self) -> usize {
        (self.width / self.window_size.max(1)) * (self.height / self.window_size.max(1))
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn module_count(&self) -> usize {
        self.n_processing + 3
    }

    pub fn piv(&self) -> PivConfig {
        PivConfig {
            window_size: self.window_size,
            pattern_size: self.pattern_size,
            binarization: self.binarization,
            tie_break: self.tie_break,
        }
    }

    pub fn render(&self) -> RenderConfig {
        RenderConfig {
            width: self.width,
            height: self.height,
            ..RenderConfig::default()
        }
    }

    /// Closed-form model implied by the cycle costs.
    pub fn timing_model(&self) -> ThroughputModel {
        ThroughputModel::from_cycles(
            self.window_count(),
            self.t_corr as f64,
            self.hop_cost as f64,
            self.processing.freq_mhz,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_processing == 0 {
            return Err(config_err("n_processing must be at least 1"));
        }
        let piv = self.piv();
        piv.validate()?;
        self.grid()?;
        if self.window_count() > MAX_RESULT_WINDOWS {
            return Err(config_err(format!(
                "{} windows exceed the {MAX_RESULT_WINDOWS} addressable in a result frame",
                self.window_count()
            )));
        }
        if piv.max_shift() as i32 > MAX_RESULT_SHIFT || (self.pattern_size * self.pattern_size) as u32 > MAX_RESULT_PEAK {
            return Err(config_err("window/pattern sizes exceed the result frame encoding"));
        }
        if self.t_corr == 0 {
            return Err(config_err("t_corr must be at least 1 cycle"));
        }
        if self.handshake_cost == 0 {
            return Err(config_err("handshake_cost must be at least 1"));
        }
        if !(self.pixel_clock_mhz > 0.0 && self.pixel_clock_mhz.is_finite()) {
            return Err(config_err("pixel_clock_mhz must be positive"));
        }
        if !(self.density > 0.0 && self.density.is_finite()) {
            return Err(config_err("density must be positive"));
        }
        for (name, c) in self.clocks() {
            c.validate(name)?;
        }
        Ok(())
    }

    fn clocks(&self) -> [(&'static str, ClockDomain); 4] {
        [
            ("control", self.control),
            ("acquisition", self.acquisition),
            ("storage", self.storage),
            ("processing", self.processing),
        ]
    }

    /// Renders the config as `key = value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: &dyn fmt::Display| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("n_processing", &self.n_processing);
        kv("width", &self.width);
        kv("height", &self.height);
        kv("window_size", &self.window_size);
        kv("pattern_size", &self.pattern_size);
        kv("t_corr", &self.t_corr);
        kv("hop_cost", &self.hop_cost);
        kv("handshake_cost", &self.handshake_cost);
        kv("pixel_clock_mhz", &self.pixel_clock_mhz);
        for (name, c) in self.clocks() {
            kv(&format!("{name}_mhz"), &c.freq_mhz);
            kv(&format!("{name}_phase"), &c.phase);
        }
        kv("binarization", &self.binarization);
        kv("tie_break", &self.tie_break.name());
        kv("density", &self.density);
        kv("flow", &self.flow);
        kv("seed", &self.seed);
        s
    }

    /// Parses `key = value` lines over the defaults. `#` starts a comment.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = SimConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("line {}: expected key = value", i + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| config_err(format!("line {}: {e}", i + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse().map_err(|_| format!("bad value '{v}' for {key}"))
        }
        fn clock<'c>(cfg: &'c mut SimConfig, name: &str) -> Option<&'c mut ClockDomain> {
            match name {
                "control" => Some(&mut cfg.control),
                "acquisition" => Some(&mut cfg.acquisition),
                "storage" => Some(&mut cfg.storage),
                "processing" => Some(&mut cfg.processing),
                _ => None,
            }
        }
        match key {
            "n_processing" => self.n_processing = num(key, v)?,
            "width" => self.width = num(key, v)?,
            "height" => self.height = num(key, v)?,
            "window_size" => self.window_size = num(key, v)?,
            "pattern_size" => self.pattern_size = num(key, v)?,
            "t_corr" => self.t_corr = num(key, v)?,
            "hop_cost" => self.hop_cost = num(key, v)?,
            "handshake_cost" => self.handshake_cost = num(key, v)?,
            "pixel_clock_mhz" => self.pixel_clock_mhz = num(key, v)?,
            "binarization" => self.binarization = Binarization::parse(v).map_err(|e| e.to_string())?,
            "tie_break" => self.tie_break = TieBreak::parse(v).ok_or_else(|| format!("unknown tie break '{v}'"))?,
            "density" => self.density = num(key, v)?,
            "flow" => self.flow = FlowSpec::parse(v).map_err(|e| e.to_string())?,
            "seed" => self.seed = num(key, v)?,
            _ => {
                let parsed = key
                    .strip_suffix("_mhz")
                    .map(|n| (n, true))
                    .or_else(|| key.strip_suffix("_phase").map(|n| (n, false)));
                let (name, is_freq) = parsed.ok_or_else(|| format!("unknown key '{key}'"))?;
                let c = clock(self, name).ok_or_else(|| format!("unknown key '{key}'"))?;
                if is_freq {
                    c.freq_mhz = num(key, v)?;
                } else {
                    c.phase = num(key, v)?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let cfg = SimConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.window_count(), 80);
        assert_eq!(cfg.pixels(), 81920);
        let text = cfg.to_text();
        assert!(text.contains("control_mhz = 150"));
        assert_eq!(SimConfig::from_text(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_file_with_comments() {
        let cfg = SimConfig::from_text("# tuned\nn_processing = 4  # four engines\n\nstorage_phase = 0.5\nflow = shear:0.02\n").unwrap();
        assert_eq!(cfg.n_processing, 4);
        assert_eq!(cfg.storage.phase, 0.5);
        assert_eq!(cfg.flow, FlowSpec::shear(0.02));
        assert_eq!(cfg.t_corr, SimConfig::default().t_corr);
    }

    #[test]
    fn rejects_bad_files() {
        for bad in [
            "n_processing = 0",
            "bogus = 1",
            "t_corr = -5",
            "width = 300",
            "processing_mhz = 0",
            "handshake_cost = 0",
            "no equals sign",
            "gpu_mhz = 5",
        ] {
            assert!(SimConfig::from_text(bad).is_err(), "{bad}");
        }
        // a ring with no per-hop overhead is allowed
        assert_eq!(SimConfig::from_text("hop_cost = 0").unwrap().hop_cost, 0);
    }

    #[test]
    fn clock_periods() {
        assert_eq!(ClockDomain::new(100.0).period_fs(), 10_000_000);
        assert_eq!(ClockDomain::new(150.0).period_fs(), 6_666_667);
        let c = ClockDomain {
            freq_mhz: 10.0,
            phase: 0.25,
        };
        assert_eq!(c.first_edge_fs(), 25_000_000);
    }

    #[test]
    fn model_from_cycles() {
        let m = SimConfig::default().timing_model();
        assert!((m.a - 80.0 * 6166.0 / 1e8).abs() < 1e-12);
        assert!((m.b - 2026.0 / 1e8).abs() < 1e-12);
    }
}
