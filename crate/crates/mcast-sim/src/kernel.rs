//! Deterministic discrete-event kernel: simulation clock, event queue and
//! named RNG streams.
//!
//! One tick equals one transmission time interval (TTI, 1 ms). Events that
//! fire at the same tick are dispatched in insertion order, so the dispatch
//! order of a run is a pure function of the schedule calls and never of heap
//! internals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Simulation time in scheduler ticks. 1 tick = 1 TTI = 1 ms.
#[derive(
    Debug,
    Clone,
    Copy,
    PartialEq,
    Eq,
    PartialOrd,
    Ord,
    Hash,
    Default,
    serde::Serialize,
    serde::Deserialize,
)]
#[serde(transparent)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn from_ms(ms: u64) -> SimTime {
        SimTime(ms)
    }

    pub fn from_secs(s: u64) -> SimTime {
        SimTime(s * 1000)
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    pub fn ticks(self) -> u64 {
        self.0
    }
}

impl std::ops::Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl std::ops::Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }
}

impl std::fmt::Display for SimTime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.3}s", self.as_secs_f64())
    }
}

/// Opaque handle returned by [`EventQueue::schedule`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventHandle(u64);

struct QueuedEvent<E> {
    fire_at: SimTime,
    seq: u64,
    payload: E,
}

// Reversed ordering: BinaryHeap is a max-heap, we want the earliest
// (fire_at, seq) on top.
impl<E> PartialEq for QueuedEvent<E> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_at == other.fire_at && self.seq == other.seq
    }
}
impl<E> Eq for QueuedEvent<E> {}
impl<E> PartialOrd for QueuedEvent<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<E> Ord for QueuedEvent<E> {
    fn cmp(&self, other: &Self) -> Ordering {
        (other.fire_at, other.seq).cmp(&(self.fire_at, self.seq))
    }
}

/// Time-ordered event queue with a strict (fire_at, insertion seq) total
/// order. Scheduling in the past is a programming error and panics.
pub struct EventQueue<E> {
    now: SimTime,
    next_seq: u64,
    heap: BinaryHeap<QueuedEvent<E>>,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        EventQueue {
            now: SimTime::ZERO,
            next_seq: 0,
            heap: BinaryHeap::new(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Queue `payload` to fire at `fire_at`. Ties on `fire_at` dispatch in
    /// insertion order.
    pub fn schedule(&mut self, fire_at: SimTime, payload: E) -> EventHandle {
        assert!(
            fire_at >= self.now,
            "scheduled event in the past: fire_at={fire_at} now={}",
            self.now
        );
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(QueuedEvent {
            fire_at,
            seq,
            payload,
        });
        EventHandle(seq)
    }

    /// Convenience: schedule `delay` ticks from now.
    pub fn schedule_in(&mut self, delay: SimTime, payload: E) -> EventHandle {
        self.schedule(self.now + delay, payload)
    }

    /// Pop the next event with `fire_at <= t_end`, advancing the clock to its
    /// fire time. Returns `None` once the queue holds nothing due by `t_end`;
    /// the clock is then left where it was (callers advance it via
    /// [`EventQueue::finish_until`]).
    pub fn pop_due(&mut self, t_end: SimTime) -> Option<(SimTime, E)> {
        match self.heap.peek() {
            Some(ev) if ev.fire_at <= t_end => {
                let ev = self.heap.pop().unwrap();
                debug_assert!(ev.fire_at >= self.now);
                self.now = ev.fire_at;
                Some((ev.fire_at, ev.payload))
            }
            _ => None,
        }
    }

    /// Advance the clock to `t_end` after draining due events.
    pub fn finish_until(&mut self, t_end: SimTime) {
        assert!(t_end >= self.now, "run_until into the past");
        self.now = t_end;
    }

    /// Dispatch every event due by `t_end` through `handler`, which may
    /// schedule further events (including at the current tick). Returns the
    /// dispatch count and leaves `now() == t_end`.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> u64
    where
        F: FnMut(&mut EventQueue<E>, SimTime, E),
    {
        assert!(t_end >= self.now, "run_until into the past");
        let mut dispatched = 0;
        while let Some((at, payload)) = self.pop_due(t_end) {
            handler(self, at, payload);
            dispatched += 1;
        }
        self.finish_until(t_end);
        dispatched
    }
}

/// Named, seeded random stream. Identical `(seed, stream_id)` pairs yield
/// identical draw sequences on every platform, and distinct stream ids map to
/// distinct ChaCha streams so adding a consumer never perturbs the others.
pub struct RngStream {
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: &str) -> RngStream {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(fnv1a(stream_id.as_bytes()));
        RngStream { rng }
    }

    /// Uniform draw in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        // 53 random mantissa bits.
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Standard normal via Box-Muller; deterministic two-draw form.
    pub fn std_normal(&mut self) -> f64 {
        let u1 = self.next_f64().max(f64::MIN_POSITIVE);
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}
