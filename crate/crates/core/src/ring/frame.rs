use crate::piv::Displacement;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrameKind {
    Command,
    Data,
    Empty,
}

/// Opcodes carried by command frames.
pub mod opcode {
    pub const CONFIGURE: u8 = 1;
    /// Run one image pair; the payload is the pair index.
    pub const RUN: u8 = 2;
    /// Data frame announcing a stored image; the payload is its index.
    pub const FRAME_READY: u8 = 0x80;
}

/// One slot travelling around the ring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RingFrame {
    pub id: u64,
    pub kind: FrameKind,
    pub target: Option<usize>,
    pub opcode: u8,
    pub payload: u32,
    pub accepted: bool,
}

impl RingFrame {
    pub fn empty(id: u64) -> Self {
        RingFrame {
            id,
            kind: FrameKind::Empty,
            target: None,
            opcode: 0,
            payload: 0,
            accepted: false,
        }
    }

    pub fn command(id: u64, target: usize, opcode: u8, payload: u32) -> Self {
        RingFrame {
            id,
            kind: FrameKind::Command,
            target: Some(target),
            opcode,
            payload,
            accepted: false,
        }
    }

    /// Turns an empty frame into a data frame, keeping its id.
    pub fn fill(self, target: usize, opcode: u8, payload: u32) -> Self {
        debug_assert_eq!(self.kind, FrameKind::Empty);
        RingFrame {
            kind: FrameKind::Data,
            target: Some(target),
            opcode,
            payload,
            ..self
        }
    }

    pub fn is_frame_ready(&self) -> bool {
        self.kind == FrameKind::Data && self.opcode & opcode::FRAME_READY != 0
    }
}

const WINDOW_BITS: u32 = 9;
const SHIFT_BITS: u32 = 6;
const PEAK_BITS: u32 = 11;

pub const MAX_RESULT_WINDOWS: usize = 1 << WINDOW_BITS;
pub const MAX_RESULT_SHIFT: i32 = (1 << (SHIFT_BITS - 1)) - 1;
const MIN_RESULT_SHIFT: i32 = -(1 << (SHIFT_BITS - 1));
pub const MAX_RESULT_PEAK: u32 = (1 << PEAK_BITS) - 1;

fn field(v: u32, shift: u32, bits: u32) -> u32 {
    (v >> shift) & ((1 << bits) - 1)
}

fn sign_extend(v: u32, bits: u32) -> i32 {
    ((v << (32 - bits)) as i32) >> (32 - bits)
}

/// Packs a vector as `window:9 | dx:6 | dy:6 | peak:11`, most significant
/// field first.
pub fn encode_result(d: &Displacement) -> u32 {
    debug_assert!(d.window_index < MAX_RESULT_WINDOWS);
    let range = MIN_RESULT_SHIFT..=MAX_RESULT_SHIFT;
    debug_assert!(range.contains(&d.dx) && range.contains(&d.dy));
    debug_assert!(d.peak_value <= MAX_RESULT_PEAK);
    let mask = (1u32 << SHIFT_BITS) - 1;
    (d.window_index as u32) << 23
        | ((d.dx as u32) & mask) << 17
        | ((d.dy as u32) & mask) << 11
        | d.peak_value
}

pub fn decode_result(word: u32) -> Displacement {
    Displacement {
        window_index: field(word, 23, WINDOW_BITS) as usize,
        dx: sign_extend(field(word, 17, SHIFT_BITS), SHIFT_BITS),
        dy: sign_extend(field(word, 11, SHIFT_BITS), SHIFT_BITS),
        peak_value: field(word, 0, PEAK_BITS),
    }
}
