//! Single-rail 4-phase handshake between two clock domains.
//!
//! Each side samples the other's control line through a synchronizer of
//! `sync_depth` flops, so a level change becomes visible after that many
//! local edges.

use super::frame::RingFrame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Phase {
    #[default]
    Idle,
    ReqRaised,
    Acked,
    ReqLowered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct Synchronizer {
    seen: bool,
    count: u32,
}

impl Synchronizer {
    fn sample(&mut self, raw: bool, depth: u32) -> bool {
        if raw == self.seen {
            self.count = 0;
        } else {
            self.count += 1;
            if self.count >= depth {
                self.seen = raw;
                self.count = 0;
            }
        }
        self.seen
    }

    fn settled(&self, raw: bool) -> bool {
        raw == self.seen
    }
}

/// Outgoing half of a wrapper.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SendUnit {
    /// Frame waiting to leave; freed once the receiver acknowledges it.
    pub latch: Option<RingFrame>,
    pub phase: Phase,
    ack: Synchronizer,
}

/// Incoming half of a wrapper.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ReceiveUnit {
    /// Frame delivered to the module; the receiver will not acknowledge a
    /// new request until the module empties it.
    pub latch: Option<RingFrame>,
    pub phase: Phase,
    req: Synchronizer,
}

/// What one edge did on the link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkEvent {
    /// Sender raised `req` with this frame on the data lines.
    Offered(u64),
    /// Receiver latched this frame and raised `ack`.
    Latched(u64),
    /// Sender saw `ack`, lowered `req` and freed its latch.
    Released(u64),
    /// Receiver lowered `ack`, closing the cycle.
    Closed,
    /// Sender saw `ack` drop and is ready for the next frame.
    Ready,
}

/// Which side's clock produced an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Sender,
    Receiver,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HandshakeLink {
    pub send: SendUnit,
    pub recv: ReceiveUnit,
    pub req: bool,
    pub ack: bool,
    data: Option<RingFrame>,
    sync_depth: u32,
}

impl HandshakeLink {
    pub fn new(sync_depth: u32) -> Self {
        HandshakeLink {
            send: SendUnit::default(),
            recv: ReceiveUnit::default(),
            req: false,
            ack: false,
            data: None,
            sync_depth,
        }
    }

    /// One edge of the sender's clock.
    pub fn sender_edge(&mut self) -> Option<LinkEvent> {
        let ack = self.send.ack.sample(self.ack, self.sync_depth);
        match self.send.phase {
            Phase::Idle => {
                let frame = self.send.latch?;
                if ack {
                    return None;
                }
                self.data = Some(frame);
                self.req = true;
                self.send.phase = Phase::ReqRaised;
                Some(LinkEvent::Offered(frame.id))
            }
            Phase::ReqRaised if ack => {
                self.req = false;
                self.send.phase = Phase::ReqLowered;
                let frame = self.send.latch.take().expect("latched frame while requesting");
                Some(LinkEvent::Released(frame.id))
            }
            Phase::ReqLowered if !ack => {
                self.send.phase = Phase::Idle;
                Some(LinkEvent::Ready)
            }
            _ => None,
        }
    }

    /// One edge of the receiver's clock.
    pub fn receiver_edge(&mut self) -> Option<LinkEvent> {
        let req = self.recv.req.sample(self.req, self.sync_depth);
        match self.recv.phase {
            Phase::Idle if req && self.recv.latch.is_none() => {
                let frame = self.data.take().expect("data valid while req is high");
                self.recv.latch = Some(frame);
                self.ack = true;
                self.recv.phase = Phase::Acked;
                Some(LinkEvent::Latched(frame.id))
            }
            Phase::Acked if !req => {
                self.ack = false;
                self.recv.phase = Phase::Idle;
                Some(LinkEvent::Closed)
            }
            _ => None,
        }
    }

    /// Whether the sender side still has something to do on its edges.
    pub fn sender_busy(&self) -> bool {
        self.send.latch.is_some() || self.send.phase != Phase::Idle || !self.send.ack.settled(self.ack)
    }

    /// Whether the receiver side still has something to do on its edges.
    pub fn receiver_busy(&self) -> bool {
        self.recv.phase != Phase::Idle || self.req || !self.recv.req.settled(self.req)
    }

    /// Frames currently held by the link, counting both latches.
    pub fn occupancy(&self) -> usize {
        self.send.latch.is_some() as usize + self.recv.latch.is_some() as usize
    }
}

/// Pure form of a single edge on either side.
pub fn handshake_step(mut link: HandshakeLink, side: Side) -> (HandshakeLink, Option<LinkEvent>) {
    let ev = match side {
        Side::Sender => link.sender_edge(),
        Side::Receiver => link.receiver_edge(),
    };
    (link, ev)
}


/// Pushes `frames` through a single link between two free-running clocks
/// and returns them in arrival order. The sender refills its latch on every
/// edge; the receiver empties its latch on every `drain_every`-th edge.
/// Periods and phases are in femtoseconds.
pub fn transfer_all(
    frames: &[RingFrame],
    sender: (u64, u64),
    receiver: (u64, u64),
    sync_depth: u32,
    drain_every: u32,
) -> Vec<RingFrame> {
    let mut link = HandshakeLink::new(sync_depth);
    let mut pending = frames.iter().copied();
    let mut out = Vec::with_capacity(frames.len());
    let (mut ts, mut tr) = (sender.1, receiver.1);
    let mut r_edges = 0u32;
    let stuck_limit = 64 * (sync_depth as u64 + 2) * drain_every.max(1) as u64;
    let mut idle_edges = 0u64;
    while out.len() < frames.len() {
        // sender wins exact ties, as the lower module id would on the ring
        if ts <= tr {
            if link.send.latch.is_none() {
                link.send.latch = pending.next();
            }
            link.sender_edge();
            ts += sender.0;
        } else {
            let before = out.len();
            link.receiver_edge();
            r_edges += 1;
            if r_edges.is_multiple_of(drain_every.max(1)) {
                out.extend(link.recv.latch.take());
            }
            idle_edges = if out.len() == before { idle_edges + 1 } else { 0 };
            // the slow side bounds progress; anything beyond this is a bug
            if idle_edges > stuck_limit * (1 + sender.0 / receiver.0) {
                break;
            }
            tr += receiver.0;
        }
    }
    out
}
