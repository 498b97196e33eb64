use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, ValueEnum};
use ringpiv::model::{parse_reference, reference_table};
use ringpiv::piv::{self, compute_field, tile_windows, Binarization, TieBreak};
use ringpiv::ring::{
    self, default_pairs, predict_throughput, write_reports, SimConfig, SimOptions, Simulator, ThroughputReport,
};
use ringpiv::synth::{render_pair, seed_particles, truth, FlowSpec, RenderConfig, DEFAULT_RADIUS};

use crate::manifest::RunManifest;
use crate::{CliError, Common, EXIT_CONFIG, EXIT_FAILURE, EXIT_INPUT};

type CliResult<T = ()> = Result<T, CliError>;

fn load_config(common: &Common) -> CliResult<SimConfig> {
    let Some(path) = &common.config else {
        return Ok(SimConfig::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::new(EXIT_CONFIG, format!("cannot read config {}: {e}", path.display())))?;
    Ok(SimConfig::from_text(&text)?)
}

fn emit(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::new(EXIT_FAILURE, format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn csv_with<F>(manifest: &RunManifest, body: F) -> CliResult<String>
where
    F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
{
    let mut buf = manifest.render().into_bytes();
    body(&mut buf).map_err(|e| CliError::new(EXIT_FAILURE, e.to_string()))?;
    Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
}

// ---- synth ----

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// `uniform:dx,dy`, `shear:rate` or `vortex:cx,cy,strength`.
    #[arg(long, default_value = "uniform:3,1")]
    flow: String,
    /// Particles per 32x32 window.
    #[arg(long, default_value_t = 10.0)]
    density: f64,
    /// Particle disc radius in pixels.
    #[arg(long, default_value_t = DEFAULT_RADIUS)]
    radius: f64,
    /// Uniform noise amplitude added to every pixel.
    #[arg(long, default_value_t = 0)]
    noise: u16,
    /// Frame width; defaults to the config's image size.
    #[arg(long)]
    width: Option<usize>,
    /// Frame height; defaults to the config's image size.
    #[arg(long)]
    height: Option<usize>,
}

pub fn synth(common: &Common, args: &SynthArgs) -> CliResult {
    let cfg = load_config(common)?;
    let dir = common
        .out
        .as_deref()
        .ok_or_else(|| CliError::new(2, "synth needs --out <directory>"))?;
    let flow = FlowSpec::parse(&args.flow)?;
    let seed = common.seed.unwrap_or(cfg.seed);
    let render = RenderConfig {
        width: args.width.unwrap_or(cfg.width),
        height: args.height.unwrap_or(cfg.height),
        noise: args.noise,
        ..RenderConfig::default()
    };
    if !(args.radius > 0.0 && args.radius.is_finite()) {
        return Err(CliError::new(EXIT_CONFIG, "radius must be positive"));
    }
    let grid = tile_windows(render.width, render.height, cfg.window_size)?;
    let field = seed_particles(render.width, render.height, args.density, seed)?.with_radius(args.radius);
    let (f1, f2) = render_pair(&field, &flow, &render)?;

    fs::create_dir_all(dir).map_err(|e| CliError::new(EXIT_FAILURE, format!("cannot create {}: {e}", dir.display())))?;
    for (name, img) in [("frame1.pgm", &f1), ("frame2.pgm", &f2)] {
        let mut buf = Vec::new();
        piv::pgm::write(img, &mut buf)?;
        let path = dir.join(name);
        fs::write(&path, buf).map_err(|e| CliError::new(EXIT_FAILURE, format!("cannot write {}: {e}", path.display())))?;
    }
    let manifest = RunManifest::new("synth")
        .seed(seed)
        .with("flow", flow)
        .with("density", args.density)
        .with("radius", args.radius)
        .with("particles", field.positions.len());
    let csv = csv_with(&manifest, |w| {
        use std::io::Write;
        writeln!(w, "window,dx,dy")?;
        for (i, (dx, dy)) in truth(&flow, &grid).into_iter().enumerate() {
            writeln!(w, "{i},{dx},{dy}")?;
        }
        Ok(())
    })?;
    emit(Some(&dir.join("truth.csv")), &csv)?;
    if common.verbose {
        eprintln!("wrote {} particles, {} windows to {}", field.positions.len(), grid.len(), dir.display());
    }
    Ok(())
}

// ---- piv ----

#[derive(Args, Debug)]
pub struct PivArgs {
    /// First exposure (binary PGM).
    frame1: PathBuf,
    /// Second exposure (binary PGM).
    frame2: PathBuf,
    /// Search window side in pixels.
    #[arg(long)]
    window: Option<usize>,
    /// Pattern side in pixels, centered in the window.
    #[arg(long)]
    pattern: Option<usize>,
    /// `adaptive` or `global:<threshold>`.
    #[arg(long)]
    binarization: Option<String>,
    /// `nearest` or `row-major`.
    #[arg(long)]
    tie_break: Option<String>,
}

fn read_pgm(path: &Path) -> CliResult<piv::GrayImage> {
    let file = fs::File::open(path).map_err(|e| CliError::new(EXIT_INPUT, format!("cannot open {}: {e}", path.display())))?;
    piv::pgm::read(std::io::BufReader::new(file))
        .map_err(|e| CliError::new(EXIT_INPUT, format!("{}: {e}", path.display())))
}

pub fn piv(common: &Common, args: &PivArgs) -> CliResult {
    let mut cfg = load_config(common)?.piv();
    if let Some(w) = args.window {
        cfg.window_size = w;
    }
    if let Some(p) = args.pattern {
        cfg.pattern_size = p;
    }
    if let Some(b) = &args.binarization {
        cfg.binarization = Binarization::parse(b)?;
    }
    if let Some(t) = &args.tie_break {
        cfg.tie_break = TieBreak::parse(t).ok_or_else(|| CliError::new(EXIT_CONFIG, format!("unknown tie break '{t}'")))?;
    }
    let f1 = read_pgm(&args.frame1)?;
    let f2 = read_pgm(&args.frame2)?;
    let start = Instant::now();
    let field = compute_field(&f1, &f2, &cfg)?;
    let elapsed = start.elapsed();
    let manifest = RunManifest::new("piv")
        .with("frame1", args.frame1.display())
        .with("frame2", args.frame2.display())
        .with("window", cfg.window_size)
        .with("pattern", cfg.pattern_size)
        .with("binarization", cfg.binarization)
        .with("tie_break", cfg.tie_break.name());
    let csv = csv_with(&manifest, |w| field.write_csv(w))?;
    emit(common.out.as_deref(), &csv)?;
    eprintln!("{} windows in {:.3} ms", field.vectors.len(), elapsed.as_secs_f64() * 1e3);
    Ok(())
}

// ---- scale ----

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Model {
    /// Discrete-event simulation of the ring.
    Sim,
    /// Closed-form a/n + b*n model.
    Analytic,
}

#[derive(Args, Debug)]
pub struct ScaleArgs {
    /// Processing-module counts, `a..b` (inclusive) or a single count.
    #[arg(long, default_value = "1..6")]
    range: String,
    /// Override the per-command engine stall, in processing cycles.
    #[arg(long)]
    hop_cost: Option<u64>,
    /// Measured image pairs per point; defaults to a multiple of n.
    #[arg(long)]
    pairs: Option<usize>,
    #[arg(long, value_enum, default_value_t = Model::Sim)]
    model: Model,
    /// With --verbose, write one simulation trace CSV per point into this
    /// directory.
    #[arg(long)]
    trace: Option<PathBuf>,
}

fn parse_range(s: &str) -> CliResult<Vec<usize>> {
    let bad = || CliError::new(2, format!("bad range '{s}' (expected a..b)"));
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (a.trim().parse().map_err(|_| bad())?, b.trim().trim_start_matches('=').parse().map_err(|_| bad())?),
        None => {
            let n = s.trim().parse().map_err(|_| bad())?;
            (n, n)
        }
    };
    if lo == 0 || hi < lo {
        return Err(bad());
    }
    Ok((lo..=hi).collect())
}

pub fn scale(common: &Common, args: &ScaleArgs) -> CliResult {
    let mut cfg = load_config(common)?;
    if let Some(h) = args.hop_cost {
        cfg.hop_cost = h;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    if args.pairs == Some(0) {
        return Err(CliError::new(EXIT_CONFIG, "--pairs must be at least 1"));
    }
    let ns = parse_range(&args.range)?;
    let traces = args.trace.as_deref().filter(|_| common.verbose);
    if let Some(dir) = traces {
        fs::create_dir_all(dir).map_err(|e| CliError::new(EXIT_FAILURE, format!("cannot create {}: {e}", dir.display())))?;
    }

    let reports: Vec<ThroughputReport> = match args.model {
        Model::Analytic => ns.iter().map(|&n| predict_throughput(&cfg, n)).collect(),
        Model::Sim => {
            // independent simulations, one thread per point
            let results: Vec<CliResult<ThroughputReport>> = std::thread::scope(|scope| {
                let handles: Vec<_> = ns
                    .iter()
                    .map(|&n| {
                        let cfg = cfg.with_processing(n);
                        let pairs = args.pairs.unwrap_or_else(|| default_pairs(n));
                        scope.spawn(move || -> CliResult<ThroughputReport> {
                            let start = Instant::now();
                            let out = Simulator::new(cfg)
                                .options(SimOptions {
                                    trace: traces.is_some(),
                                    ..Default::default()
                                })
                                .run(pairs)?;
                            if let Some(dir) = traces {
                                let mut buf = Vec::new();
                                out.trace.write_csv(&mut buf).map_err(|e| CliError::new(EXIT_FAILURE, e.to_string()))?;
                                emit(Some(&dir.join(format!("trace_n{n}.csv"))), &String::from_utf8_lossy(&buf))?;
                            }
                            if common.verbose {
                                eprintln!(
                                    "n={n}: {pairs} pairs, {:.1} images/s, simulated in {:.2} s",
                                    out.report.images_per_sec,
                                    start.elapsed().as_secs_f64()
                                );
                            }
                            Ok(out.report)
                        })
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("simulation thread panicked")).collect()
            });
            results.into_iter().collect::<CliResult<_>>()?
        }
    };

    let model_name = match args.model {
        Model::Sim => "sim",
        Model::Analytic => "analytic",
    };
    let manifest = RunManifest::new("scale")
        .seed(cfg.seed)
        .with("model", model_name)
        .with("range", &args.range)
        .with("t_corr", cfg.t_corr)
        .with("hop_cost", cfg.hop_cost);
    let csv = csv_with(&manifest, |w| write_reports(&reports, w))?;
    emit(common.out.as_deref(), &csv)
}

// ---- calibrate ----

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    /// Measured rates as `n,images_per_sec,pixel_clock_mhz,vectors_per_sec`.
    /// Defaults to the embedded hardware measurements.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Largest acceptable relative error per row.
    #[arg(long, default_value_t = 0.10)]
    tolerance: f64,
}

pub fn calibrate(common: &Common, args: &CalibrateArgs) -> CliResult {
    let base = load_config(common)?;
    let rows = match &args.reference {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::new(EXIT_INPUT, format!("cannot read {}: {e}", p.display())))?;
            parse_reference(&text)?
        }
        None => reference_table(),
    };
    let cal = ring::calibrate(&base, &rows)?;
    eprintln!("n,reference_images_per_sec,model_images_per_sec,rel_error");
    for r in &cal.rows {
        eprintln!("{},{:.1},{:.1},{:+.4}", r.n, r.reference, r.predicted, r.rel_error);
    }
    eprintln!(
        "t_corr = {} cycles, hop_cost = {} cycles, a = {:.6} ms, b = {:.6} ms",
        cal.config.t_corr,
        cal.config.hop_cost,
        cal.model.a * 1e3,
        cal.model.b * 1e3
    );
    if cal.max_error() > args.tolerance {
        return Err(CliError::new(
            EXIT_FAILURE,
            format!("fit residual {:.1}% exceeds {:.1}%", cal.max_error() * 100.0, args.tolerance * 100.0),
        ));
    }
    let source = args
        .reference
        .as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_else(|| "embedded".into());
    let manifest = RunManifest::new("calibrate")
        .with("reference", source)
        .with("max_rel_error", format!("{:.4}", cal.max_error()));
    emit(common.out.as_deref(), &(manifest.render() + &cal.config.to_text()))
}
