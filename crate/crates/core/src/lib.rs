//! Binary cross-correlation particle image velocimetry, plus a deterministic
//! discrete-event model of the GALS ring architecture that runs it in
//! hardware.
//!
//! The crate is split into four layers:
//!
//! * [`piv`]: window tiling, binarization, grayscale and XNOR correlation,
//!   peak extraction and full-field vector computation.
//! * [`synth`]: seeded particle fields advected by a known flow and rendered
//!   to frame pairs with ground truth.
//! * [`ring`]: the ring simulator (clock domains, 4-phase handshake wrappers,
//!   control/acquisition/storage/processing modules).
//! * [`model`]: the closed-form `a/n + b*n` timing model, its calibration
//!   against reference measurements, and saturation search.
//!
//! Numeric code that is not inherently integer is generic over
//! [`num_traits::Float`]; the aliases below fix the common instantiations.

pub mod error;
pub mod model;
pub mod piv;
pub mod ring;
pub mod synth;

pub use error::{Axis, Error, Result};

/// Correlation plane produced by the XNOR correlator.
pub type BinaryPlane = piv::CorrelationPlane<u32>;
/// Correlation plane produced by the grayscale product correlator.
pub type GrayPlane = piv::CorrelationPlane<u64>;
/// Timing model in double precision, as used by the CLI and the simulator.
pub type ThroughputModel = model::TimingModel<f64>;
/// Single-precision timing model.
pub type ThroughputModelF32 = model::TimingModel<f32>;
