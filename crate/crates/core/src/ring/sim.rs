use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::io::Write;
use std::sync::Arc;

use super::config::{ModuleKind, SimConfig};
use super::frame::{decode_result, encode_result, opcode, FrameKind, RingFrame};
use super::handshake::{HandshakeLink, LinkEvent};
use super::report::ThroughputReport;
use super::schedule::{assigned_module, control_schedule_from};
use super::{ACQUISITION, CONTROL, FIRST_PROCESSING, STORAGE};
use crate::error::{config_err, Error, Result};
use crate::model::Saturation;
use crate::piv::{field::window_displacement, BinaryImage, Displacement, GrayImage, PivConfig, VectorField, WindowGrid};
use crate::synth::frame_sequence;

/// Upper bound on the module count searched for saturation.
pub const SATURATION_CAP: usize = 64;

const TAIL_PAIRS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Record every frame movement in the returned trace.
    pub trace: bool,
    /// Let control fill idle link slots with empty frames. Without them
    /// results and notifications have no way back, which is only useful for
    /// exercising deadlock detection.
    pub inject_empties: bool,
    /// Simulated-time limit in seconds before the run is declared stuck.
    pub max_sim_seconds: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            trace: false,
            inject_empties: true,
            max_sim_seconds: 60.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TraceKind {
    /// Control put a new frame on the ring.
    Inject,
    /// A sender offered the frame on its outgoing link.
    Send,
    /// A receiver latched the frame.
    Recv,
    /// Control consumed the frame.
    Absorb,
    /// A command came back to control with its accepted flag set.
    Flag,
    /// Control committed one result; the id is the originating command.
    Commit,
    /// Storage holds a new image; the id is the image index.
    FrameStored,
    /// All windows of a pair are committed; the id is the pair index.
    PairComplete,
}

impl TraceKind {
    pub fn name(&self) -> &'static str {
        match self {
            TraceKind::Inject => "inject",
            TraceKind::Send => "send",
            TraceKind::Recv => "recv",
            TraceKind::Absorb => "absorb",
            TraceKind::Flag => "flag",
            TraceKind::Commit => "commit",
            TraceKind::FrameStored => "frame_stored",
            TraceKind::PairComplete => "pair_complete",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TraceEvent {
    pub time_fs: u64,
    pub module: usize,
    pub kind: TraceKind,
    pub frame_id: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SimTrace {
    pub module_names: Vec<String>,
    pub events: Vec<TraceEvent>,
}

impl SimTrace {
    pub const CSV_HEADER: &'static str = "time_ns,module,event,frame_id";

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for e in &self.events {
            writeln!(
                out,
                "{}.{:06},{},{},{}",
                e.time_fs / 1_000_000,
                e.time_fs % 1_000_000,
                self.module_names[e.module],
                e.kind.name(),
                e.frame_id
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub report: ThroughputReport,
    pub trace: SimTrace,
    /// Vector field of every simulated pair, including the warm-up pair and
    /// two unmeasured trailing pairs.
    pub fields: Vec<VectorField>,
    /// Completion time of each pair in femtoseconds.
    pub pair_complete_fs: Vec<u64>,
    pub end_fs: u64,
}

/// Module kinds in ring order.
pub fn build_ring(cfg: &SimConfig) -> Result<Vec<ModuleKind>> {
    if cfg.n_processing == 0 {
        return Err(config_err("n_processing must be at least 1"));
    }
    let mut ring = vec![ModuleKind::Control, ModuleKind::Acquisition, ModuleKind::Storage];
    ring.extend(std::iter::repeat_n(ModuleKind::Processing, cfg.n_processing));
    Ok(ring)
}

fn module_name(kind: ModuleKind, id: usize) -> String {
    match kind {
        ModuleKind::Processing => format!("processing{}", id - FIRST_PROCESSING + 1),
        k => k.to_string(),
    }
}

pub fn run_simulation(cfg: &SimConfig, n_image_pairs: usize) -> Result<SimOutput> {
    Simulator::new(cfg.clone()).run(n_image_pairs)
}

/// Closed-form counterpart of [`run_simulation`].
pub fn predict_throughput(cfg: &SimConfig, n: usize) -> ThroughputReport {
    let model = cfg.timing_model();
    let t = model.image_time(n);
    let busy = model.a / n as f64 / t;
    ThroughputReport::from_image_rate(n, 1.0 / t, cfg.pixels(), cfg.window_count(), vec![busy; n], None)
}

/// Outcome of [`find_saturation`].
#[derive(Debug, Clone, PartialEq)]
pub struct SaturationSearch {
    /// Module count after confirmation by simulation.
    pub n: usize,
    pub saturated: bool,
    /// What the closed-form model alone predicts.
    pub analytic: Saturation,
    /// Continuous optimum `sqrt(a/b)` of the model.
    pub optimum: Option<f64>,
    /// Simulated vector rates used for confirmation, as `(n, rate)`.
    pub simulated: Vec<(usize, f64)>,
}

/// Smallest module count whose successor adds less than `gain_threshold`
/// times the single-module rate.
pub fn find_saturation(cfg: &SimConfig, gain_threshold: f64) -> Result<SaturationSearch> {
    if !(gain_threshold > 0.0 && gain_threshold <= 1.0) {
        return Err(config_err(format!("gain threshold must be in (0, 1], got {gain_threshold}")));
    }
    let model = cfg.timing_model();
    let analytic = model.saturation(gain_threshold, SATURATION_CAP);
    let mut search = SaturationSearch {
        n: analytic.n,
        saturated: analytic.saturated,
        analytic,
        optimum: model.optimum(),
        simulated: Vec::new(),
    };
    if !analytic.saturated {
        return Ok(search);
    }
    let mut cache: Vec<(usize, f64)> = Vec::new();
    let mut rate = |n: usize| -> Result<f64> {
        if let Some(&(_, r)) = cache.iter().find(|c| c.0 == n) {
            return Ok(r);
        }
        let r = run_simulation(&cfg.with_processing(n), default_pairs(n))?.report.vectors_per_sec;
        cache.push((n, r));
        Ok(r)
    };
    let limit = gain_threshold * rate(1)?;
    let mut n = analytic.n;
    // the model and the simulator rarely disagree by more than one step
    for _ in 0..8 {
        if rate(n + 1)? - rate(n)? >= limit {
            if n + 1 >= SATURATION_CAP {
                search.saturated = false;
                n = SATURATION_CAP;
                break;
            }
            n += 1;
        } else if n > 1 && rate(n)? - rate(n - 1)? < limit {
            n -= 1;
        } else {
            break;
        }
    }
    search.n = n;
    cache.sort_by_key(|c| c.0);
    search.simulated = cache;
    Ok(search)
}

/// Measured pairs used by default for `n` modules: a multiple of `n` so
/// the rotating window assignment is balanced over the measurement.
pub fn default_pairs(n: usize) -> usize {
    n * 4usize.div_ceil(n)
}

pub struct Simulator {
    cfg: SimConfig,
    options: SimOptions,
    frames: Option<Vec<GrayImage>>,
}

impl Simulator {
    pub fn new(cfg: SimConfig) -> Self {
        Simulator {
            cfg,
            options: SimOptions::default(),
            frames: None,
        }
    }

    pub fn options(mut self, options: SimOptions) -> Self {
        self.options = options;
        self
    }

    /// Uses these images instead of a synthetic sequence. Pair `p` is made
    /// of images `p` and `p + 1`.
    pub fn with_frames(mut self, frames: Vec<GrayImage>) -> Self {
        self.frames = Some(frames);
        self
    }

    /// Simulates one warm-up pair followed by `n_image_pairs` measured pairs.
    /// Supplied frames must cover `n_image_pairs + 4` images.
    pub fn run(&self, n_image_pairs: usize) -> Result<SimOutput> {
        self.cfg.validate()?;
        if n_image_pairs == 0 {
            return Err(config_err("at least one measured image pair is required"));
        }
        // two trailing pairs keep commands flowing through the measured span
        let total_pairs = n_image_pairs + 1 + TAIL_PAIRS;
        let grid = self.cfg.grid()?;
        let gray = match &self.frames {
            Some(f) => {
                if f.len() < total_pairs + 1 {
                    return Err(config_err(format!(
                        "{} pairs need {} images, got {}",
                        total_pairs,
                        total_pairs + 1,
                        f.len()
                    )));
                }
                f[..total_pairs + 1].to_vec()
            }
            None => frame_sequence(self.cfg.density, &self.cfg.flow, &self.cfg.render(), total_pairs + 1, self.cfg.seed)?,
        };
        let binary = gray
            .iter()
            .map(|g| self.cfg.binarization.apply(g, &grid).map(Arc::new))
            .collect::<Result<Vec<_>>>()?;
        Engine::new(&self.cfg, self.options, grid, binary, total_pairs).run()
    }
}

struct Clock {
    period: u64,
    first: u64,
}

impl Clock {
    fn edge_at_or_after(&self, t: u64) -> u64 {
        if t <= self.first {
            self.first
        } else {
            self.first + (t - self.first).div_ceil(self.period) * self.period
        }
    }
}

struct Slot {
    kind: ModuleKind,
    clock: Clock,
    scheduled: Option<u64>,
}

struct Control {
    queue: VecDeque<RingFrame>,
    stored: Vec<bool>,
    next_pair: usize,
    flags: Vec<Vec<Option<u64>>>,
    buffered: Vec<Vec<Vec<Displacement>>>,
    vectors: Vec<Vec<Option<Displacement>>>,
    committed: Vec<usize>,
    complete: Vec<Option<u64>>,
    done: bool,
}

struct Acquisition {
    configured: bool,
    next_frame: usize,
    active: bool,
    edges_done: u64,
    edges_needed: u64,
}

struct Storage {
    banks: Vec<(usize, Arc<BinaryImage>)>,
    notify: VecDeque<usize>,
}

struct Work {
    pair: usize,
    windows: Vec<usize>,
    next: usize,
    first: Arc<BinaryImage>,
    second: Arc<BinaryImage>,
}

#[derive(Default)]
struct Processing {
    queue: VecDeque<usize>,
    current: Option<Work>,
    running: Option<usize>,
    busy_until: u64,
    fifo: VecDeque<(usize, Displacement)>,
    completions: Vec<u64>,
}

impl Processing {
    fn pending_pairs(&self) -> usize {
        self.queue.len() + self.current.is_some() as usize
    }
}

struct Engine<'a> {
    cfg: &'a SimConfig,
    opts: SimOptions,
    grid: WindowGrid,
    piv: PivConfig,
    window_count: usize,
    n: usize,
    total_pairs: usize,
    frames: Vec<Arc<BinaryImage>>,

    slots: Vec<Slot>,
    links: Vec<HandshakeLink>,
    heap: BinaryHeap<Reverse<(u64, usize, u64)>>,
    seq: u64,
    next_id: u64,

    control: Control,
    acq: Acquisition,
    storage: Storage,
    procs: Vec<Processing>,
    loaded: Vec<usize>,

    in_flight: u64,
    area: u128,
    area_t: u64,
    area_at: Vec<u128>,

    trace: Vec<TraceEvent>,
}

impl<'a> Engine<'a> {
    fn new(cfg: &'a SimConfig, opts: SimOptions, grid: WindowGrid, frames: Vec<Arc<BinaryImage>>, total_pairs: usize) -> Self {
        let n = cfg.n_processing;
        let kinds = build_ring(cfg).expect("validated config");
        let slots = kinds
            .iter()
            .map(|&kind| {
                let domain = match kind {
                    ModuleKind::Control => cfg.control,
                    ModuleKind::Acquisition => cfg.acquisition,
                    ModuleKind::Storage => cfg.storage,
                    ModuleKind::Processing => cfg.processing,
                };
                Slot {
                    kind,
                    clock: Clock {
                        period: domain.period_fs(),
                        first: domain.first_edge_fs(),
                    },
                    scheduled: None,
                }
            })
            .collect::<Vec<_>>();
        let edges_needed = (cfg.pixels() as f64 * cfg.acquisition.freq_mhz / cfg.pixel_clock_mhz - 1e-9)
            .ceil()
            .max(1.0) as u64;
        let window_count = grid.len();
        let mut eng = Engine {
            cfg,
            opts,
            piv: cfg.piv(),
            grid,
            window_count,
            n,
            total_pairs,
            frames,
            links: (0..slots.len()).map(|_| HandshakeLink::new(cfg.handshake_cost)).collect(),
            slots,
            heap: BinaryHeap::new(),
            seq: 0,
            next_id: 0,
            control: Control {
                queue: VecDeque::new(),
                stored: vec![false; total_pairs + 1],
                next_pair: 0,
                flags: vec![vec![None; n]; total_pairs],
                buffered: vec![vec![Vec::new(); n]; total_pairs],
                vectors: vec![vec![None; window_count]; total_pairs],
                committed: vec![0; total_pairs],
                complete: vec![None; total_pairs],
                done: false,
            },
            acq: Acquisition {
                configured: false,
                next_frame: 0,
                active: false,
                edges_done: 0,
                edges_needed,
            },
            storage: Storage {
                banks: Vec::with_capacity(2),
                notify: VecDeque::new(),
            },
            procs: (0..n).map(|_| Processing::default()).collect(),
            loaded: vec![0; total_pairs],
            in_flight: 0,
            area: 0,
            area_t: 0,
            area_at: vec![0; total_pairs],
            trace: Vec::new(),
        };
        for target in [ACQUISITION, STORAGE] {
            let id = eng.fresh_id();
            eng.control.queue.push_back(RingFrame::command(id, target, opcode::CONFIGURE, 0));
        }
        eng
    }

    fn m(&self) -> usize {
        self.slots.len()
    }

    fn fresh_id(&mut self) -> u64 {
        self.next_id += 1;
        self.next_id
    }

    fn log(&mut self, time_fs: u64, module: usize, kind: TraceKind, frame_id: u64) {
        if self.opts.trace {
            self.trace.push(TraceEvent {
                time_fs,
                module,
                kind,
                frame_id,
            });
        }
    }

    fn advance_area(&mut self, t: u64) {
        self.area += self.in_flight as u128 * (t - self.area_t) as u128;
        self.area_t = t;
    }

    fn period(&self, m: usize) -> u64 {
        self.slots[m].clock.period
    }

    fn run(mut self) -> Result<SimOutput> {
        let limit = (self.opts.max_sim_seconds * 1e15) as u64;
        self.schedule(CONTROL, 0);
        let mut now = 0;
        while let Some(Reverse((t, m, _))) = self.heap.pop() {
            if self.slots[m].scheduled != Some(t) {
                continue;
            }
            if t > limit {
                return Err(Error::Deadlock {
                    time_ns: t as f64 / 1e6,
                    stalled: vec![format!("watchdog: no completion within {} s", self.opts.max_sim_seconds)],
                });
            }
            now = t;
            self.slots[m].scheduled = None;
            self.edge(m, t);
            let mm = self.m();
            for x in [m, (m + 1) % mm, (m + mm - 1) % mm] {
                self.reschedule(x, t);
            }
        }
        if !self.control.done {
            return Err(Error::Deadlock {
                time_ns: now as f64 / 1e6,
                stalled: self.stalled(),
            });
        }
        self.finish(now)
    }

    fn schedule(&mut self, m: usize, at: u64) {
        let e = self.slots[m].clock.edge_at_or_after(at);
        if self.slots[m].scheduled.is_none_or(|s| e < s) {
            self.slots[m].scheduled = Some(e);
            self.seq += 1;
            self.heap.push(Reverse((e, m, self.seq)));
        }
    }

    fn reschedule(&mut self, m: usize, now: u64) {
        if let Some(at) = self.wants_edge(m, now) {
            self.schedule(m, at);
        }
    }

    /// Earliest time after `now` at which module `m` has something to do.
    fn wants_edge(&self, m: usize, now: u64) -> Option<u64> {
        let mm = self.m();
        let inl = &self.links[(m + mm - 1) % mm];
        let out = &self.links[m];
        if inl.receiver_busy() || inl.recv.latch.is_some() || out.sender_busy() {
            return Some(now + 1);
        }
        match self.slots[m].kind {
            ModuleKind::Control => {
                let c = &self.control;
                (!c.done && (!c.queue.is_empty() || self.opts.inject_empties)).then_some(now + 1)
            }
            ModuleKind::Acquisition => {
                let a = &self.acq;
                let can_run = a.active || self.storage.banks.len() < 2;
                (a.configured && a.next_frame < self.frames.len() && can_run).then_some(now + 1)
            }
            ModuleKind::Storage => None,
            ModuleKind::Processing => {
                let p = &self.procs[m - FIRST_PROCESSING];
                (p.running.is_some() || p.pending_pairs() > 0).then(|| p.busy_until.max(now + 1))
            }
        }
    }

    fn edge(&mut self, m: usize, t: u64) {
        let mm = self.m();
        let inl = (m + mm - 1) % mm;
        if let Some(LinkEvent::Latched(id)) = self.links[inl].receiver_edge() {
            self.log(t, m, TraceKind::Recv, id);
        }
        match self.slots[m].kind {
            ModuleKind::Control => self.control_edge(t),
            ModuleKind::Acquisition => self.acquisition_edge(t),
            ModuleKind::Storage => self.forward(m, t),
            ModuleKind::Processing => self.processing_edge(m, t),
        }
        if let Some(LinkEvent::Offered(id)) = self.links[m].sender_edge() {
            self.log(t, m, TraceKind::Send, id);
        }
    }

    /// Moves the incoming frame to the outgoing latch, letting the module
    /// act on it on the way.
    fn forward(&mut self, m: usize, t: u64) {
        let mm = self.m();
        let inl = (m + mm - 1) % mm;
        if self.links[m].send.latch.is_some() {
            return;
        }
        let Some(frame) = self.links[inl].recv.latch.take() else {
            return;
        };
        let frame = match self.slots[m].kind {
            ModuleKind::Acquisition => self.acquisition_frame(frame),
            ModuleKind::Storage => self.storage_frame(frame),
            ModuleKind::Processing => self.processing_frame(m, t, frame),
            ModuleKind::Control => unreachable!("control absorbs frames"),
        };
        self.links[m].send.latch = Some(frame);
    }

    // ---- control ----

    fn control_edge(&mut self, t: u64) {
        let inl = self.m() - 1;
        if let Some(frame) = self.links[inl].recv.latch.take() {
            self.absorb(frame, t);
        }
        if !self.control.done && self.links[CONTROL].send.latch.is_none() {
            let frame = match self.control.queue.pop_front() {
                Some(c) => Some(c),
                None if self.opts.inject_empties => Some(RingFrame::empty(self.fresh_id())),
                None => None,
            };
            if let Some(frame) = frame {
                self.advance_area(t);
                self.in_flight += 1;
                self.log(t, CONTROL, TraceKind::Inject, frame.id);
                self.links[CONTROL].send.latch = Some(frame);
            }
        }
    }

    fn absorb(&mut self, frame: RingFrame, t: u64) {
        self.advance_area(t);
        self.in_flight -= 1;
        self.log(t, CONTROL, TraceKind::Absorb, frame.id);
        match frame.kind {
            FrameKind::Empty => {}
            FrameKind::Command if !frame.accepted => {
                let id = self.fresh_id();
                let retry = RingFrame::command(id, frame.target.expect("commands have targets"), frame.opcode, frame.payload);
                self.control.queue.push_back(retry);
            }
            FrameKind::Command => {
                self.log(t, CONTROL, TraceKind::Flag, frame.id);
                if frame.opcode == opcode::RUN {
                    let pair = frame.payload as usize;
                    let k = frame.target.expect("commands have targets") - FIRST_PROCESSING;
                    self.control.flags[pair][k] = Some(frame.id);
                    let held = std::mem::take(&mut self.control.buffered[pair][k]);
                    for d in held {
                        self.commit(pair, d, frame.id, t);
                    }
                }
            }
            FrameKind::Data if frame.is_frame_ready() => {
                self.control.stored[frame.payload as usize] = true;
                self.issue_runs();
            }
            FrameKind::Data => {
                let d = decode_result(frame.payload);
                let pair = self.resolve_pair(frame.opcode);
                let k = assigned_module(self.n, self.window_count, pair, d.window_index);
                match self.control.flags[pair][k] {
                    Some(cmd) => self.commit(pair, d, cmd, t),
                    None => self.control.buffered[pair][k].push(d),
                }
            }
        }
    }

    /// Pair index from the 7-bit tag carried in result frames.
    fn resolve_pair(&self, tag: u8) -> usize {
        let oldest = self.control.complete.iter().position(Option::is_none).unwrap_or(0);
        (oldest..self.total_pairs)
            .find(|p| p % 128 == tag as usize)
            .expect("result for a pair in flight")
    }

    fn commit(&mut self, pair: usize, d: Displacement, cmd: u64, t: u64) {
        self.log(t, CONTROL, TraceKind::Commit, cmd);
        let c = &mut self.control;
        debug_assert!(c.vectors[pair][d.window_index].is_none());
        c.vectors[pair][d.window_index] = Some(d);
        c.committed[pair] += 1;
        if c.committed[pair] == self.window_count {
            c.complete[pair] = Some(t);
            self.advance_area(t);
            self.area_at[pair] = self.area;
            self.log(t, CONTROL, TraceKind::PairComplete, pair as u64);
            if self.control.complete.iter().all(Option::is_some) {
                self.control.done = true;
            }
            self.issue_runs();
        }
    }

    /// Queues RUN commands for every pair whose images are stored, keeping
    /// at most two pairs ahead of the last completed one.
    fn issue_runs(&mut self) {
        loop {
            let c = &self.control;
            let p = c.next_pair;
            let ready = p < self.total_pairs && c.stored[p] && c.stored[p + 1] && (p < 2 || c.complete[p - 2].is_some());
            if !ready {
                return;
            }
            for k in 0..self.n {
                let id = self.fresh_id();
                self.control
                    .queue
                    .push_back(RingFrame::command(id, FIRST_PROCESSING + k, opcode::RUN, p as u32));
            }
            self.control.next_pair += 1;
        }
    }

    // ---- acquisition and storage ----

    fn acquisition_frame(&mut self, mut frame: RingFrame) -> RingFrame {
        if frame.kind == FrameKind::Command && frame.target == Some(ACQUISITION) && frame.opcode == opcode::CONFIGURE {
            frame.accepted = true;
            self.acq.configured = true;
        }
        frame
    }

    fn acquisition_edge(&mut self, t: u64) {
        self.forward(ACQUISITION, t);
        let a = &mut self.acq;
        if !a.configured || a.next_frame >= self.frames.len() {
            return;
        }
        if !a.active {
            if self.storage.banks.len() >= 2 {
                return;
            }
            a.active = true;
            a.edges_done = 0;
        }
        // one packed word per edge at the default pixel clock
        a.edges_done += 1;
        if a.edges_done >= a.edges_needed {
            let f = a.next_frame;
            a.next_frame += 1;
            a.active = false;
            self.storage.banks.push((f, self.frames[f].clone()));
            self.storage.notify.push_back(f);
            self.log(t, STORAGE, TraceKind::FrameStored, f as u64);
            self.schedule(STORAGE, t + 1);
        }
    }

    fn storage_frame(&mut self, mut frame: RingFrame) -> RingFrame {
        match frame.kind {
            FrameKind::Command if frame.target == Some(STORAGE) => {
                frame.accepted = true;
                frame
            }
            FrameKind::Empty => match self.storage.notify.pop_front() {
                Some(f) => frame.fill(CONTROL, opcode::FRAME_READY, f as u32),
                None => frame,
            },
            _ => frame,
        }
    }

    fn image(&self, index: usize) -> Arc<BinaryImage> {
        self.storage
            .banks
            .iter()
            .find(|b| b.0 == index)
            .map(|b| b.1.clone())
            .expect("image resident in storage")
    }

    // ---- processing ----

    fn processing_frame(&mut self, m: usize, t: u64, mut frame: RingFrame) -> RingFrame {
        let period = self.period(m);
        let hop = self.cfg.hop_cost * period;
        let p = &mut self.procs[m - FIRST_PROCESSING];
        match frame.kind {
            FrameKind::Command => {
                // decoding a passing command pauses the correlator
                if hop > 0 {
                    p.busy_until = p.busy_until.max(t) + hop;
                }
                if frame.target == Some(m) && frame.opcode == opcode::RUN && p.pending_pairs() < 2 {
                    p.queue.push_back(frame.payload as usize);
                    frame.accepted = true;
                }
                frame
            }
            FrameKind::Empty => match p.fifo.pop_front() {
                Some((pair, d)) => frame.fill(CONTROL, (pair % 128) as u8, encode_result(&d)),
                None => frame,
            },
            FrameKind::Data => frame,
        }
    }

    fn processing_edge(&mut self, m: usize, t: u64) {
        let k = m - FIRST_PROCESSING;
        if let Some(w) = self.procs[k].running {
            if t >= self.procs[k].busy_until {
                let work = self.procs[k].current.as_ref().expect("running window belongs to a pair");
                let d = window_displacement(&work.first, &work.second, self.grid.origin(w), &self.piv)
                    .expect("window inside validated grid");
                let pair = work.pair;
                let p = &mut self.procs[k];
                p.fifo.push_back((pair, Displacement { window_index: w, ..d }));
                p.completions.push(t);
                p.running = None;
            }
        }
        self.forward(m, t);
        let t_corr = self.cfg.t_corr * self.period(m);
        while self.procs[k].running.is_none() && t >= self.procs[k].busy_until {
            if self.procs[k].current.is_none() {
                let Some(pair) = self.procs[k].queue.pop_front() else {
                    break;
                };
                let start = pair * self.window_count % self.n;
                let windows = control_schedule_from(self.n, self.window_count, start).swap_remove(k);
                let work = Work {
                    pair,
                    windows,
                    next: 0,
                    first: self.image(pair),
                    second: self.image(pair + 1),
                };
                self.procs[k].current = Some(work);
                self.loaded[pair] += 1;
                if self.loaded[pair] == self.n {
                    // image `pair` has no remaining readers
                    self.storage.banks.retain(|b| b.0 != pair);
                    self.schedule(ACQUISITION, t + 1);
                }
            }
            let p = &mut self.procs[k];
            let work = p.current.as_mut().expect("current pair");
            if work.next < work.windows.len() {
                p.running = Some(work.windows[work.next]);
                work.next += 1;
                p.busy_until = t + t_corr;
            } else {
                p.current = None;
            }
        }
    }

    // ---- wrap-up ----

    fn stalled(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (m, slot) in self.slots.iter().enumerate() {
            let busy = match slot.kind {
                ModuleKind::Control => !self.control.done,
                ModuleKind::Acquisition => self.acq.next_frame < self.frames.len(),
                ModuleKind::Storage => !self.storage.notify.is_empty(),
                ModuleKind::Processing => {
                    let p = &self.procs[m - FIRST_PROCESSING];
                    !p.fifo.is_empty() || p.pending_pairs() > 0
                }
            };
            if busy || self.links[m].send.latch.is_some() {
                out.push(module_name(slot.kind, m));
            }
        }
        out
    }

    fn finish(self, end_fs: u64) -> Result<SimOutput> {
        let complete: Vec<u64> = self.control.complete.iter().map(|c| c.expect("all pairs complete")).collect();
        let last = self.total_pairs - 1 - TAIL_PAIRS;
        let t0 = complete[0];
        let t1 = complete[last];
        let interval = (t1 - t0).max(1);
        let measured = last as f64;
        let images_per_sec = measured / (interval as f64 * 1e-15);
        let t_corr_fs = self.cfg.t_corr * self.slots[FIRST_PROCESSING].clock.period;
        let utilization = self
            .procs
            .iter()
            .map(|p| {
                let done = p.completions.iter().filter(|&&c| c > t0 && c <= t1).count() as u64;
                (done * t_corr_fs) as f64 / interval as f64
            })
            .collect();
        let occupied = (self.area_at[last] - self.area_at[0]) as f64 / interval as f64;
        let occupancy = occupied / (2 * self.slots.len()) as f64;
        let report = ThroughputReport::from_image_rate(
            self.n,
            images_per_sec,
            self.cfg.pixels(),
            self.window_count,
            utilization,
            Some(occupancy),
        );
        let fields = self
            .control
            .vectors
            .into_iter()
            .map(|vs| VectorField {
                grid: self.grid,
                vectors: vs.into_iter().map(|v| v.expect("committed window")).collect(),
            })
            .collect();
        let module_names = self.slots.iter().enumerate().map(|(m, s)| module_name(s.kind, m)).collect();
        Ok(SimOutput {
            report,
            trace: SimTrace {
                module_names,
                events: self.trace,
            },
            fields,
            pair_complete_fs: complete,
            end_fs,
        })
    }
}
