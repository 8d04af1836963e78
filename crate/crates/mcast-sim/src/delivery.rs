//! Delivery core: sessions, segments and packets; the shared per-TTI PRB
//! grid split between multicast and unicast traffic; resource accounting;
//! and cyclic file broadcast (carousel) for alert delivery.
//!
//! Multicast is transmitted MBSFN-style: every in-area cell spends the same
//! PRBs on the same packets, so multicast cost is independent of the number
//! of subscribers. Unicast flows share the remaining PRBs round-robin.

use crate::kernel::SimTime;

/// Payload bytes per packet (Ethernet-MTU-like chunking).
pub const PAYLOAD_BYTES: u64 = 1500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContentId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Mode {
    Unicast,
    Multicast,
    MulticastWithMultiLink,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Unicast => write!(f, "unicast"),
            Mode::Multicast => write!(f, "multicast"),
            Mode::MulticastWithMultiLink => write!(f, "multicast+ml"),
        }
    }
}

/// Which path a packet was emitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkTag {
    Multicast,
    UnicastDuplicate,
    UnicastRepair,
    UnicastPrimary,
}

#[derive(Debug, Clone, Copy)]
pub struct Packet {
    pub content: ContentId,
    pub segment_index: u64,
    /// Global per-session sequence number; strictly increasing in emission
    /// order, contiguous within a segment.
    pub seq: u64,
    pub payload_bytes: u64,
    pub link_tag: LinkTag,
}

/// One rung of a bitrate ladder.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Rung {
    pub bits_per_s: u64,
    pub label: String,
}

/// The Table-1 unicast ladder; the top rung is the single multicast encoding.
pub fn default_ladder() -> Vec<Rung> {
    [
        (1_000_000, "480p"),
        (4_000_000, "1080p"),
        (8_000_000, "1080p+"),
        (12_000_000, "2K"),
        (16_000_000, "4K"),
        (20_000_000, "4K+"),
    ]
    .iter()
    .map(|(b, l)| Rung {
        bits_per_s: *b,
        label: (*l).to_string(),
    })
    .collect()
}

#[derive(Debug, Clone)]
pub struct Segment {
    pub content: ContentId,
    pub index: u64,
    pub rung: usize,
    pub size_bytes: u64,
    pub deadline: SimTime,
}

/// Splits gapless segments into packets with contiguous sequence numbers.
#[derive(Debug)]
pub struct Packetizer {
    content: ContentId,
    next_seq: u64,
    next_segment: u64,
}

impl Packetizer {
    pub fn new(content: ContentId) -> Packetizer {
        Packetizer {
            content,
            next_seq: 0,
            next_segment: 0,
        }
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    /// Packetize the next segment. The source must be gapless; an index gap
    /// is a programming error.
    pub fn enqueue_segment(&mut self, index: u64, size_bytes: u64, tag: LinkTag) -> Vec<Packet> {
        assert_eq!(
            index, self.next_segment,
            "segment index gap: got {index}, expected {}",
            self.next_segment
        );
        assert!(size_bytes > 0, "zero-size segment");
        self.next_segment += 1;
        let n = size_bytes.div_ceil(PAYLOAD_BYTES);
        let mut packets = Vec::with_capacity(n as usize);
        let mut remaining = size_bytes;
        for _ in 0..n {
            let payload = remaining.min(PAYLOAD_BYTES);
            packets.push(Packet {
                content: self.content,
                segment_index: index,
                seq: self.next_seq,
                payload_bytes: payload,
                link_tag: tag,
            });
            self.next_seq += 1;
            remaining -= payload;
        }
        packets
    }
}

/// Append-only per-TTI resource usage, aggregated over the simulated cells.
#[derive(Debug, Default, Clone)]
pub struct ResourceLog {
    pub rows: Vec<ResourceRow>,
}

#[derive(Debug, Clone, Copy)]
pub struct ResourceRow {
    pub tti: u64,
    pub prbs_multicast: u32,
    pub prbs_unicast: u32,
    pub prbs_total: u32,
}

impl ResourceLog {
    pub fn push(&mut self, row: ResourceRow) {
        assert!(
            row.prbs_multicast + row.prbs_unicast <= row.prbs_total,
            "PRB conservation violated at tti {}",
            row.tti
        );
        self.rows.push(row);
    }
}

/// Multicast PRB demand for one TTI.
#[derive(Debug, Clone, Copy)]
pub struct McastDemand {
    pub backlog_bits: f64,
    pub rate_bits_per_prb: f64,
    /// Broadcast share of the grid (0.6 or 0.8 presets).
    pub cap_fraction: f64,
}

/// One unicast flow competing for PRBs in a cell this TTI.
#[derive(Debug, Clone, Copy)]
pub struct FlowDemand {
    pub backlog_bits: f64,
    pub rate_bits_per_prb: f64,
}

#[derive(Debug, Clone)]
pub struct TtiAllocation {
    pub mcast_prbs: u32,
    pub mcast_bits: f64,
    pub uni_prbs: u32,
    /// Bits delivered to each flow, same order as the demand slice.
    pub flow_bits: Vec<f64>,
}

/// PRBs the multicast stream needs this TTI before capping.
pub fn mcast_prbs_needed(backlog_bits: f64, rate_bits_per_prb: f64) -> u32 {
    if backlog_bits <= 0.0 || rate_bits_per_prb <= 0.0 {
        return 0;
    }
    (backlog_bits / rate_bits_per_prb).ceil() as u32
}

/// Allocate one cell's PRB grid for one TTI: multicast first (exactly what
/// its fixed-MCS stream needs, capped at the broadcast share), then a
/// round-robin split of the remainder among backlogged unicast flows.
/// `rr_cursor` rotates which flow is served first and is advanced in place.
pub fn allocate_tti(
    mcast: McastDemand,
    flows: &[FlowDemand],
    rr_cursor: &mut usize,
    prbs_total: u32,
) -> TtiAllocation {
    let cap = (prbs_total as f64 * mcast.cap_fraction).floor() as u32;
    let mcast_prbs = mcast_prbs_needed(mcast.backlog_bits, mcast.rate_bits_per_prb).min(cap);
    let mcast_bits = (mcast_prbs as f64 * mcast.rate_bits_per_prb).min(mcast.backlog_bits);

    let mut remaining = prbs_total - mcast_prbs;
    let mut flow_bits = vec![0.0; flows.len()];
    let mut backlog: Vec<f64> = flows.iter().map(|f| f.backlog_bits).collect();
    let n = flows.len();
    let mut uni_prbs = 0u32;

    while remaining > 0 {
        let active: Vec<usize> = (0..n)
            .map(|k| (*rr_cursor + k) % n.max(1))
            .filter(|&i| backlog[i] > 0.0 && flows[i].rate_bits_per_prb > 0.0)
            .collect();
        if active.is_empty() {
            break;
        }
        let share = (remaining / active.len() as u32).max(1);
        let mut allocated_this_round = false;
        for &i in &active {
            if remaining == 0 {
                break;
            }
            let need = (backlog[i] / flows[i].rate_bits_per_prb).ceil() as u32;
            let take = share.min(need).min(remaining);
            if take == 0 {
                continue;
            }
            let bits = (take as f64 * flows[i].rate_bits_per_prb).min(backlog[i]);
            flow_bits[i] += bits;
            backlog[i] -= bits;
            remaining -= take;
            uni_prbs += take;
            allocated_this_round = true;
        }
        if !allocated_this_round {
            break;
        }
    }
    if n > 0 {
        *rr_cursor = (*rr_cursor + 1) % n;
    }

    TtiAllocation {
        mcast_prbs,
        mcast_bits,
        uni_prbs,
        flow_bits,
    }
}

/// Cyclic broadcast of one file: the alert is packetized once and the packet
/// sequence is repeated for a configured number of carousel rounds. Each
/// receiver assembles the file from whichever pieces it decodes across
/// rounds.
#[derive(Debug)]
pub struct FileCarousel {
    pub packets_per_round: u64,
    pub rounds: u32,
    pub payload_bytes: u64,
    pub last_payload_bytes: u64,
    emitted: u64,
}

impl FileCarousel {
    pub fn new(file_bytes: u64, rounds: u32) -> FileCarousel {
        assert!(file_bytes > 0, "empty alert");
        let n = file_bytes.div_ceil(PAYLOAD_BYTES);
        let last = file_bytes - (n - 1) * PAYLOAD_BYTES;
        FileCarousel {
            packets_per_round: n,
            rounds,
            payload_bytes: PAYLOAD_BYTES,
            last_payload_bytes: last,
            emitted: 0,
        }
    }

    pub fn total_packets(&self) -> u64 {
        self.packets_per_round * self.rounds as u64
    }

    pub fn emitted_count(&self) -> u64 {
        self.emitted
    }

    /// All configured rounds have been handed to the transmitter.
    pub fn is_exhausted(&self) -> bool {
        self.emitted >= self.total_packets()
    }

    /// Next packet to transmit: (piece index within the file, payload bytes),
    /// or `None` when all rounds are done.
    pub fn next_packet(&mut self) -> Option<(u64, u64)> {
        if self.emitted >= self.total_packets() {
            return None;
        }
        let piece = self.emitted % self.packets_per_round;
        self.emitted += 1;
        let payload = if piece == self.packets_per_round - 1 {
            self.last_payload_bytes
        } else {
            self.payload_bytes
        };
        Some((piece, payload))
    }
}

/// Per-UE assembly state for a carousel file.
#[derive(Debug, Clone)]
pub struct AlertAssembly {
    received: Vec<bool>,
    received_count: u64,
    pub complete_at: Option<SimTime>,
}

impl AlertAssembly {
    pub fn new(packets_per_round: u64) -> AlertAssembly {
        AlertAssembly {
            received: vec![false; packets_per_round as usize],
            received_count: 0,
            complete_at: None,
        }
    }

    pub fn receive_piece(&mut self, piece: u64, now: SimTime) {
        if self.complete_at.is_some() {
            return;
        }
        if !self.received[piece as usize] {
            self.received[piece as usize] = true;
            self.received_count += 1;
            if self.received_count == self.received.len() as u64 {
                self.complete_at = Some(now);
            }
        }
    }

    pub fn is_complete(&self) -> bool {
        self.complete_at.is_some()
    }
}

/// Multicast queue growth watermark, in seconds of stream, beyond which the
/// run reports a misconfiguration warning (demand exceeds the broadcast cap).
pub const MCAST_BACKLOG_WATERMARK_S: f64 = 2.0;
