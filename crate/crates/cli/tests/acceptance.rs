//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line
//! on stderr (written directly so it survives output capture).

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ringpiv::model::reference_table;
use ringpiv::piv::{compute_field, xcorr_binary, BinaryImage, PivConfig};
use ringpiv::ring::{
    default_pairs, find_saturation, predict_throughput, run_simulation, transfer_all, ClockDomain, RingFrame, SimConfig,
};
use ringpiv::synth::{render_pair, seed_particles, FlowSpec, RenderConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn run_cli(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_ringpiv"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn data_rows(text: &str) -> Vec<String> {
    text.lines().filter(|l| !l.starts_with('#')).map(str::to_owned).collect()
}

fn parse_reports(csv: &str) -> Vec<Vec<f64>> {
    data_rows(csv)[1..]
        .iter()
        .map(|r| r.split(',').take(4).map(|v| v.parse().expect("numeric cell")).collect())
        .collect()
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

// 1: packed XNOR correlation equals the per-bit definition.
fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0c0ffee);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let search = BinaryImage::from_fn(32, 32, |_, _| rng.gen());
        let pattern = BinaryImage::from_fn(16, 16, |_, _| rng.gen());
        let plane = xcorr_binary(&search, &pattern).expect("sizes fit");
        for iy in 0..17 {
            for ix in 0..17 {
                let (ox, oy) = (16 - ix, 16 - iy);
                let mut naive = 0;
                for y in 0..16 {
                    for x in 0..16 {
                        naive += (search.get(ox + x, oy + y) == pattern.get(x, y)) as u32;
                    }
                }
                mismatches += (plane.at(ix, iy) != naive) as usize;
            }
        }
    }
    outcome(mismatches == 0, format!("1000 pairs x 289 shifts, {mismatches} mismatches"))
}

// 2: exact displacement recovery over every integer flow in range.
fn ground_truth_recovery() -> Outcome {
    let cfg = RenderConfig::default();
    let piv = PivConfig::default();
    let mut worst = (1.0f64, (0, 0, 0));
    for dx in -8..=8 {
        for dy in -8..=8 {
            for s in 0..5u64 {
                let seed = 1000 * s + 7;
                let field = seed_particles(320, 256, 10.0, seed).expect("valid density");
                let (f1, f2) = render_pair(&field, &FlowSpec::uniform(dx as f64, dy as f64), &cfg).expect("valid render");
                let v = compute_field(&f1, &f2, &piv).expect("tileable");
                let hit = v.vectors.iter().filter(|d| (d.dx, d.dy) == (dx, dy)).count() as f64 / 80.0;
                if hit < worst.0 {
                    worst = (hit, (dx, dy, seed));
                }
            }
        }
    }
    outcome(
        worst.0 >= 0.95,
        format!("289 flows x 5 seeds, worst {:.2}% at flow ({}, {}) seed {}", worst.0 * 100.0, worst.1 .0, worst.1 .1, worst.1 .2),
    )
}

// 3: calibrate, then simulate n = 1..6 through the CLI.
fn table_reproduction(dir: &Path) -> (Outcome, Option<String>) {
    let cfg = dir.join("calibrated.cfg");
    let run = run_cli(&["calibrate", "--out", path(&cfg)])
        .and_then(|_| run_cli(&["scale", "--config", path(&cfg), "--range", "1..6"]));
    let csv = match run {
        Ok(csv) => csv,
        Err(e) => return (outcome(false, e), None),
    };
    let rows = parse_reports(&csv);
    let reference = reference_table();
    let mut worst = 0.0f64;
    for (row, r) in rows.iter().zip(&reference) {
        for (got, want) in [(row[1], r.images_per_sec), (row[2], r.pixel_clock_mhz), (row[3], r.vectors_per_sec)] {
            worst = worst.max((got / want - 1.0).abs());
        }
    }
    let pass = rows.len() == 6 && worst <= 0.05;
    (outcome(pass, format!("{} rows, worst cell error {:.2}%", rows.len(), worst * 100.0)), Some(csv))
}

// 4: derived columns of every emitted report.
fn report_consistency(sim_csv: Option<&str>) -> Outcome {
    let mut csvs = vec![run_cli(&["scale", "--model", "analytic", "--range", "1..20"])];
    csvs.push(run_cli(&["scale", "--model", "analytic", "--range", "1..8", "--hop-cost", "0"]));
    if let Some(s) = sim_csv {
        csvs.push(Ok(s.to_owned()));
    }
    let mut checked = 0;
    let mut worst_pixel = 0.0f64;
    let mut worst_vectors = 0.0f64;
    for csv in csvs {
        let csv = match csv {
            Ok(c) => c,
            Err(e) => return outcome(false, e),
        };
        for row in parse_reports(&csv) {
            let ips = row[1];
            worst_pixel = worst_pixel.max((row[2] / (ips * 81920.0 / 1e6) - 1.0).abs());
            // 3-decimal images/s times 80, compared against a 1-decimal column
            worst_vectors = worst_vectors.max((row[3] - ips * 80.0).abs() - 0.05 - 80.0 * 5e-4);
            checked += 1;
        }
    }
    let pass = checked > 0 && worst_pixel <= 0.01 && worst_vectors <= 0.0;
    outcome(pass, format!("{checked} rows, pixel clock max rel error {:.2e}", worst_pixel))
}

// 5: handshake transfers across random clock pairs.
fn handshake_safety() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let frames: Vec<RingFrame> = (0..10_000u64).map(|i| RingFrame::command(i, (i % 9) as usize, 2, i as u32)).collect();
    let mut pairs = vec![(1.0, 200.0), (200.0, 1.0), (10.0, 150.0), (150.0, 10.0)];
    pairs.extend((0..12).map(|_| (rng.gen_range(1.0..=200.0), rng.gen_range(1.0..=200.0))));
    let mut bad = Vec::new();
    for &(fs, fr) in &pairs {
        let s = ClockDomain { freq_mhz: fs, phase: rng.gen() };
        let r = ClockDomain { freq_mhz: fr, phase: rng.gen() };
        let depth = rng.gen_range(1..=3);
        let got = transfer_all(&frames, (s.period_fs(), s.first_edge_fs()), (r.period_fs(), r.first_edge_fs()), depth, 1);
        if got != frames {
            bad.push(format!("{fs:.1}->{fr:.1} MHz delivered {}", got.len()));
        }
    }
    outcome(
        bad.is_empty(),
        format!("{} clock pairs x 10^4 frames, {} with loss/duplication/reordering{}", pairs.len(), bad.len(), if bad.is_empty() { String::new() } else { format!(": {}", bad.join("; ")) }),
    )
}

// 6: scaling shape and saturation of the calibrated configuration.
fn scaling_shape() -> Outcome {
    let cfg = SimConfig::default();
    let sim = |c: &SimConfig, n: usize| run_simulation(&c.with_processing(n), default_pairs(n)).map(|o| o.report.images_per_sec);
    let rates: Result<Vec<f64>, _> = (1..=6).map(|n| sim(&cfg, n)).collect();
    let rates = match rates {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let increasing = rates.windows(2).all(|w| w[1] > w[0]);
    let eff: Vec<f64> = rates.iter().enumerate().map(|(i, r)| r / rates[0] / (i + 1) as f64).collect();
    let sublinear = eff.windows(2).all(|w| w[1] <= w[0] + 1e-12);

    let flat = SimConfig { hop_cost: 0, ..cfg.clone() };
    let flat_rates: Vec<f64> = (1..=4).filter_map(|n| sim(&flat, n).ok()).collect();
    let sim_linear = flat_rates.len() == 4
        && flat_rates.iter().enumerate().all(|(i, r)| (r / ((i + 1) as f64 * flat_rates[0]) - 1.0).abs() < 1e-4);
    let model_linear = (1..=6).all(|n| {
        let r = predict_throughput(&flat, n).images_per_sec;
        (r - n as f64 * predict_throughput(&flat, 1).images_per_sec).abs() < 1e-9 * r
    });

    let sat = match find_saturation(&cfg, 0.05) {
        Ok(s) => s,
        Err(e) => return outcome(false, e.to_string()),
    };
    let opt = sat.optimum.unwrap_or(f64::INFINITY);
    let consistent = sat.saturated && sat.n as f64 <= opt.ceil() && sat.n as f64 >= 0.8 * opt;
    let pass = increasing && sublinear && sim_linear && model_linear && consistent;
    outcome(
        pass,
        format!(
            "increasing {increasing}, speedup/n non-increasing {sublinear}, zero-overhead linear {}, n* = {} vs sqrt(a/b) = {opt:.2}",
            sim_linear && model_linear,
            sat.n
        ),
    )
}

// 7: repeated runs give byte-identical data.
fn determinism(dir: &Path) -> Outcome {
    let mut diffs = Vec::new();
    let mut runs: Vec<Vec<String>> = Vec::new();
    for round in 0..2 {
        let d = dir.join(format!("round{round}"));
        let s = d.join("synth");
        let cfg = d.join("cal.cfg");
        let mut rows = Vec::new();
        let steps: Vec<Vec<String>> = vec![
            vec!["synth".into(), "--seed".into(), "99".into(), "--flow".into(), "vortex:160,128,0.02".into(), "--noise".into(), "20".into(), "--out".into(), path(&s).into()],
            vec!["piv".into(), path(&s.join("frame1.pgm")).into(), path(&s.join("frame2.pgm")).into()],
            vec!["calibrate".into(), "--out".into(), path(&cfg).into()],
            vec!["scale".into(), "--config".into(), path(&cfg).into(), "--range".into(), "1..3".into(), "--seed".into(), "4".into()],
            vec!["scale".into(), "--model".into(), "analytic".into(), "--range".into(), "1..20".into()],
        ];
        for step in &steps {
            let args: Vec<&str> = step.iter().map(String::as_str).collect();
            match run_cli(&args) {
                Ok(out) => rows.push(data_rows(&out).join("\n")),
                Err(e) => return outcome(false, e),
            }
        }
        for f in ["frame1.pgm", "frame2.pgm"] {
            rows.push(format!("{:?}", fs::read(s.join(f)).unwrap_or_default()));
        }
        rows.push(data_rows(&fs::read_to_string(s.join("truth.csv")).unwrap_or_default()).join("\n"));
        rows.push(data_rows(&fs::read_to_string(&cfg).unwrap_or_default()).join("\n"));
        runs.push(rows);
    }
    let names = ["synth", "piv", "calibrate", "scale sim", "scale analytic", "frame1", "frame2", "truth", "config"];
    for (i, name) in names.iter().enumerate() {
        // synth and calibrate write files only, so their stdout is empty
        let must_have_data = !matches!(*name, "synth" | "calibrate");
        if runs[0][i] != runs[1][i] || (must_have_data && runs[0][i].is_empty()) {
            diffs.push(*name);
        }
    }
    outcome(diffs.is_empty(), format!("4 subcommands twice, differing outputs: {diffs:?}"))
}

#[test]
fn acceptance() {
    let dir = tempfile::tempdir().expect("temp dir");
    let mut results: Vec<(usize, &str, Outcome, Duration, Duration)> = Vec::new();
    let mut timed = |id, name, limit: u64, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        results.push((id, name, o, start.elapsed(), Duration::from_secs(limit)));
    };
    let mut sim_csv = None;
    timed(1, "correlation oracle equivalence", 10, &mut oracle_equivalence);
    timed(2, "ground-truth recovery", 60, &mut ground_truth_recovery);
    timed(3, "reference table reproduction", 30, &mut || {
        let (o, csv) = table_reproduction(dir.path());
        sim_csv = csv;
        o
    });
    timed(4, "report internal consistency", 30, &mut || report_consistency(sim_csv.as_deref()));
    timed(5, "handshake safety", 60, &mut handshake_safety);
    timed(6, "scaling shape and saturation", 120, &mut scaling_shape);
    timed(7, "determinism", 120, &mut || determinism(dir.path()));

    let mut err = std::io::stderr().lock();
    let mut failed = Vec::new();
    for (id, name, o, took, limit) in &results {
        let in_time = took <= limit;
        let pass = o.pass && in_time;
        let timing = if in_time { String::new() } else { format!(" [over {}s limit]", limit.as_secs()) };
        writeln!(
            err,
            "ACCEPTANCE {id} {}: {name}: {} ({:.1}s){timing}",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64()
        )
        .ok();
        if !pass {
            failed.push(*id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
