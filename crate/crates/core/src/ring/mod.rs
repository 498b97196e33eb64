//! Discrete-event model of the module ring.
//!
//! Module order is fixed: control (id 0), acquisition (1), storage (2), then
//! the processing modules. Link `m` carries frames from module `m` to module
//! `m + 1`, wrapping back to control.

mod calibrate;
mod config;
mod frame;
mod handshake;
mod report;
mod schedule;
mod sim;

pub use calibrate::{calibrate, Calibration, CalibrationRow};
pub use config::{ClockDomain, ModuleKind, SimConfig};
pub use frame::{decode_result, encode_result, opcode, FrameKind, RingFrame};
pub use handshake::{handshake_step, transfer_all, HandshakeLink, LinkEvent, Phase, ReceiveUnit, SendUnit, Side};
pub use report::{write_reports, ThroughputReport};
pub use schedule::{assigned_module, control_schedule, control_schedule_from};
pub use sim::{
    build_ring, default_pairs, find_saturation, predict_throughput, run_simulation, SaturationSearch, SimOptions, SimOutput,
    SimTrace, Simulator, TraceEvent, TraceKind, SATURATION_CAP,
};

pub const CONTROL: usize = 0;
pub const ACQUISITION: usize = 1;
pub const STORAGE: usize = 2;
pub const FIRST_PROCESSING: usize = 3;
