//! Multi-link logic: the server-side gateway (ML-GW) that duplicates the
//! multicast stream onto per-UE unicast sessions when effective SINR drops
//! below a threshold, and the client-side middleware (ML-MW) that reorders,
//! deduplicates and merges packets from both links into one stream, with an
//! optional retransmission-based repair path for gaps.

use std::collections::BTreeMap;

use crate::delivery::Packet;
use crate::kernel::SimTime;

#[derive(Debug, Clone)]
pub struct MlConfig {
    /// Duplication turns on below this effective (MBSFN) SINR.
    pub sinr_threshold_db: f64,
    /// Duplication turns off again at threshold + margin.
    pub hysteresis_margin_db: f64,
    pub reorder_window: u64,
    pub repair_timeout: SimTime,
    pub repair_enabled: bool,
}

impl Default for MlConfig {
    fn default() -> Self {
        MlConfig {
            sinr_threshold_db: 5.0,
            hysteresis_margin_db: 1.0,
            reorder_window: 256,
            repair_timeout: SimTime::from_ms(100),
            repair_enabled: false,
        }
    }
}

/// Gateway steering policy. Only duplication is implemented; the enum leaves
/// room for split (load-balancing) steering without an API change.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GwPolicy {
    Duplicate,
}

/// Per-UE duplication decision with hysteresis: on strictly below the
/// threshold, off again at threshold + margin. A UE whose SINR never crosses
/// the threshold never changes state.
#[derive(Debug, Clone, Copy, Default)]
pub struct MlDecider {
    on: bool,
}

impl MlDecider {
    pub fn is_on(&self) -> bool {
        self.on
    }

    pub fn decide(&mut self, sinr_db: f64, cfg: &MlConfig) -> bool {
        if !self.on && sinr_db < cfg.sinr_threshold_db {
            self.on = true;
        } else if self.on && sinr_db >= cfg.sinr_threshold_db + cfg.hysteresis_margin_db {
            self.on = false;
        }
        self.on
    }
}

/// Server-side gateway state: one duplication flag per UE. A unicast
/// duplicate session exists exactly while the flag is on.
#[derive(Debug)]
pub struct MlGw {
    pub policy: GwPolicy,
    deciders: Vec<MlDecider>,
}

impl MlGw {
    pub fn new(num_ues: usize) -> MlGw {
        MlGw {
            policy: GwPolicy::Duplicate,
            deciders: vec![MlDecider::default(); num_ues],
        }
    }

    /// Re-evaluate one UE's duplication flag from its current effective SINR.
    pub fn ml_decide(&mut self, ue: usize, mbsfn_sinr_db: f64, cfg: &MlConfig) -> bool {
        self.deciders[ue].decide(mbsfn_sinr_db, cfg)
    }

    pub fn duplication_on(&self, ue: usize) -> bool {
        self.deciders[ue].is_on()
    }

    /// Process one multicast packet: it is always emitted on the multicast
    /// link, and additionally copied (payload and seq preserved) to every UE
    /// whose duplication flag is on. Returns the UEs that get a unicast copy.
    pub fn gw_process(&self, packet: &Packet) -> (Packet, Vec<usize>) {
        let dup_targets = (0..self.deciders.len())
            .filter(|&u| self.deciders[u].is_on())
            .collect();
        (*packet, dup_targets)
    }
}

/// Per-UE merge statistics, exported at end of run.
#[derive(Debug, Default, Clone, Copy)]
pub struct MergeStats {
    pub received: u64,
    pub duplicates_discarded: u64,
    pub stale_dropped: u64,
    pub repaired: u64,
    pub declared_lost: u64,
}

#[derive(Debug, Clone, Copy)]
struct MissingSeq {
    detected_at: SimTime,
    requested_at: Option<SimTime>,
    retries: u32,
}

/// A ranged retransmission request for `[start, end]` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RepairRequest {
    pub start_seq: u64,
    pub end_seq: u64,
}

/// Client-side reorder/dedup/merge buffer. Emits sequence numbers in
/// strictly increasing order with no duplicates; out-of-order packets are
/// held up to `reorder_window`; overflowing the window declares the oldest
/// gap lost.
#[derive(Debug)]
pub struct MergeBuffer {
    next_expected: u64,
    max_seen: Option<u64>,
    window: u64,
    store: BTreeMap<u64, Packet>,
    missing: BTreeMap<u64, MissingSeq>,
    pub stats: MergeStats,
}

/// Packets the client receives in order, plus sequence numbers that were
/// given up on (declared lost) while advancing.
#[derive(Debug, Default)]
pub struct IngestOutcome {
    pub released: Vec<Packet>,
    pub newly_lost: Vec<u64>,
}

impl MergeBuffer {
    pub fn new(window: u64) -> MergeBuffer {
        assert!(window >= 1);
        MergeBuffer {
            next_expected: 0,
            max_seen: None,
            window,
            store: BTreeMap::new(),
            missing: BTreeMap::new(),
            stats: MergeStats::default(),
        }
    }

    pub fn next_expected(&self) -> u64 {
        self.next_expected
    }

    /// Ingest one packet from either link.
    pub fn ingest(&mut self, pkt: Packet, now: SimTime) -> IngestOutcome {
        let mut out = IngestOutcome::default();
        let seq = pkt.seq;

        if seq < self.next_expected {
            // Late duplicate of something already released or declared lost.
            if self.next_expected - seq <= self.window {
                self.stats.duplicates_discarded += 1;
            } else {
                self.stats.stale_dropped += 1;
            }
            return out;
        }
        if self.store.contains_key(&seq) {
            self.stats.duplicates_discarded += 1;
            return out;
        }

        // Window overflow: give up on the oldest gaps until the newcomer fits.
        while seq >= self.next_expected + self.window {
            self.declare_lost_one(&mut out);
        }

        self.stats.received += 1;
        if self.missing.remove(&seq).is_some() && pkt.link_tag == crate::delivery::LinkTag::UnicastRepair {
            self.stats.repaired += 1;
        }
        // Newly created holes between the previous horizon and this packet.
        let hole_from = match self.max_seen {
            Some(m) => m + 1,
            None => self.next_expected,
        };
        for s in hole_from..seq {
            if s >= self.next_expected && !self.store.contains_key(&s) {
                self.missing.entry(s).or_insert(MissingSeq {
                    detected_at: now,
                    requested_at: None,
                    retries: 0,
                });
            }
        }
        self.max_seen = Some(self.max_seen.map_or(seq, |m| m.max(seq)));
        self.store.insert(seq, pkt);

        // Release the in-order prefix.
        while let Some(p) = self.store.remove(&self.next_expected) {
            out.released.push(p);
            self.next_expected += 1;
        }
        out
    }

    fn declare_lost_one(&mut self, out: &mut IngestOutcome) {
        let lost = self.next_expected;
        if self.store.contains_key(&lost) {
            // Held packet, not actually lost: release it while advancing.
            let p = self.store.remove(&lost).unwrap();
            out.released.push(p);
        } else {
            self.missing.remove(&lost);
            self.stats.declared_lost += 1;
            out.newly_lost.push(lost);
        }
        self.next_expected += 1;
    }

    /// Gaps eligible for repair: contiguous missing runs whose oldest member
    /// has been missing for at least `timeout`, with at most one outstanding
    /// request per gap (exponential backoff on retries).
    pub fn repair_due(&mut self, now: SimTime, timeout: SimTime) -> Vec<RepairRequest> {
        let seqs: Vec<u64> = self.missing.keys().copied().collect();
        let mut requests: Vec<RepairRequest> = Vec::new();
        let mut run: Option<(u64, u64)> = None;
        let mut run_due = false;

        let flush = |run: &mut Option<(u64, u64)>, due: &mut bool, requests: &mut Vec<RepairRequest>| {
            if let Some((s, e)) = run.take() {
                if *due {
                    requests.push(RepairRequest {
                        start_seq: s,
                        end_seq: e,
                    });
                }
            }
            *due = false;
        };

        for seq in seqs {
            let m = self.missing[&seq];
            let eligible = match m.requested_at {
                None => now - m.detected_at >= timeout,
                Some(t) => {
                    let backoff = SimTime(timeout.ticks() << (m.retries.min(6)));
                    now - t >= backoff
                }
            };
            match run {
                Some((_, e)) if seq == e + 1 => {
                    run = Some((run.unwrap().0, seq));
                    run_due |= eligible;
                }
                _ => {
                    flush(&mut run, &mut run_due, &mut requests);
                    run = Some((seq, seq));
                    run_due = eligible;
                }
            }
        }
        flush(&mut run, &mut run_due, &mut requests);

        for r in &requests {
            for s in r.start_seq..=r.end_seq {
                if let Some(m) = self.missing.get_mut(&s) {
                    m.requested_at = Some(now);
                    m.retries += 1;
                }
            }
        }
        requests
    }

    /// Missing sequence numbers currently tracked (for diagnostics).
    pub fn missing_count(&self) -> usize {
        self.missing.len()
    }
}
