//! Orchestration: builds the simulated world from a scenario config, drives
//! the event loop tick by tick, and collects every per-run artifact (resource
//! log, per-UE traces, switch log, KPI report) into a [`RunOutput`].

use std::collections::{BTreeMap, VecDeque};

use crate::client::{
    maybe_cancel, select_bitrate, AbrState, CancelDecision, ClientConfig, ObjectComposition,
    PlaybackState, SegPlay,
};
use crate::delivery::{
    allocate_tti, mcast_prbs_needed, AlertAssembly, ContentId, FileCarousel, FlowDemand, LinkTag,
    McastDemand, Packet, Packetizer, ResourceLog, ResourceRow, Rung, MCAST_BACKLOG_WATERMARK_S,
    PAYLOAD_BYTES,
};
use crate::error::SimError;
use crate::kernel::{EventQueue, RngStream, SimTime};
use crate::kpi::{self, KpiReport, QoeConfig};
use crate::mood::{Bearer, MoodConfig, MoodController, SwitchRecord};
use crate::multilink::{MergeBuffer, MergeStats, MlConfig, MlGw};
use crate::radio::{McsTable, Pos, RadioModel, NUM_SIMULATED_CELLS, PRBS_PER_TTI};
use crate::scenario::{DeliveryMode, ScenarioConfig};

const TICKS_PER_MOBILITY: u64 = 100;
const TICKS_PER_CLIENT: u64 = 100;
const TICKS_PER_SECOND: u64 = 1000;
/// Multicast packets kept around for repair lookups (~5 s of stream).
const REPAIR_HISTORY: usize = 16_384;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    SegmentStart,
    SegmentComplete,
    Cancel,
    StallStart,
    StallEnd,
    Quit,
    Switch,
}

impl std::fmt::Display for TraceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            TraceKind::SegmentStart => "segment_start",
            TraceKind::SegmentComplete => "segment_complete",
            TraceKind::Cancel => "cancel",
            TraceKind::StallStart => "stall_start",
            TraceKind::StallEnd => "stall_end",
            TraceKind::Quit => "quit",
            TraceKind::Switch => "switch",
        };
        write!(f, "{s}")
    }
}

/// One per-UE session trace row (external CSV contract:
/// time, event, rung, buffer_s).
#[derive(Debug, Clone, Copy)]
pub struct TraceEvent {
    pub at: SimTime,
    pub event: TraceKind,
    /// Ladder rung involved, or -1 where not applicable.
    pub rung: i64,
    pub buffer_s: f64,
}

/// End-of-run view of one UE.
#[derive(Debug, Clone)]
pub struct UeReport {
    pub ue: usize,
    /// Delivery path label for the report: unicast / multicast /
    /// multicast+ml.
    pub path: String,
    pub quit_at: Option<SimTime>,
    /// Run-mean MOS (1.0 for quit or never-started UEs).
    pub mean_mos: f64,
    pub mos_series: Vec<(SimTime, f64)>,
    pub plays: Vec<SegPlay>,
    pub stall_episodes: usize,
    pub stall_seconds: f64,
    pub delivered_bits: f64,
    /// Unicast bits credited after the UE quit; the quit contract requires 0.
    pub bits_after_quit: f64,
    pub merge_stats: Option<MergeStats>,
    /// TTIs during which this UE had an active duplicate session.
    pub dup_ticks: u64,
    pub alert_reached_at: Option<SimTime>,
    /// "multicast" or "unicast"; present in alert scenarios.
    pub alert_path: Option<String>,
    pub trace: Vec<TraceEvent>,
}

#[derive(Debug)]
pub struct RunOutput {
    pub config: ScenarioConfig,
    pub resource: ResourceLog,
    pub kpi: KpiReport,
    pub switches: Vec<SwitchRecord>,
    pub ues: Vec<UeReport>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ev {
    Tti,
    Mobility,
    ClientTick,
    SecondTick,
    AlertTrigger,
    SwitchEffective,
}

/// Packet-granular multicast media stream (MBSFN: one transmission schedule,
/// identical in every in-area cell).
struct McastStream {
    packetizer: Packetizer,
    queue: VecDeque<Packet>,
    /// Bits already transmitted of the packet at the queue head.
    head_sent_bits: f64,
    /// (first_seq, last_seq) per segment index.
    seg_ranges: Vec<(u64, u64)>,
    history: VecDeque<Packet>,
    next_emit_index: u64,
    rate_bits_per_prb: f64,
    min_sinr_db: f64,
    /// Nominal CBR pacing budget per TTI. A live stream is sent at its source
    /// rate, not burst at the full broadcast PRB cap; bursting would let the
    /// direct multicast path run a reorder window ahead of any unicast-side
    /// duplicate or repair traffic.
    pace_bits_per_tti: f64,
}

impl McastStream {
    fn backlog_bits(&self) -> f64 {
        let total: u64 = self.queue.iter().map(|p| p.payload_bytes * 8).sum();
        total as f64 - self.head_sent_bits
    }

    fn demand_bits(&self) -> f64 {
        self.backlog_bits().min(self.pace_bits_per_tti)
    }
}

/// Segment-granular multicast (MooD broadcast bearer): same PRB accounting,
/// no per-packet bookkeeping.
struct SegMcast {
    queue: VecDeque<(u64, f64)>, // (segment index, remaining bits)
    rate_bits_per_prb: f64,
    min_sinr_db: f64,
    /// Nominal CBR pacing budget per TTI (see [`McastStream::pace_bits_per_tti`]).
    pace_bits_per_tti: f64,
}

impl SegMcast {
    fn backlog_bits(&self) -> f64 {
        self.queue.iter().map(|(_, b)| *b).sum()
    }

    fn demand_bits(&self) -> f64 {
        self.backlog_bits().min(self.pace_bits_per_tti)
    }
}

struct AlertState {
    carousel: FileCarousel,
    /// Remaining bits of the piece currently on air.
    head_piece: Option<(u64, f64)>,
    rate_bits_per_prb: f64,
    min_sinr_db: f64,
    fallback_issued: bool,
    file_bytes: u64,
}

struct Download {
    index: u64,
    rung: usize,
    size_bytes: u64,
    received_bits: f64,
    /// Transfer begins after the request latency.
    available_at: SimTime,
}

struct VodClient {
    abr: AbrState,
    next_index: u64,
    inflight: Option<Download>,
    last_progress: SimTime,
    first_cancel_since_progress: Option<SimTime>,
}

struct Viewer {
    active: bool,
    /// Segment-level unicast delivery queue (unicast bearer phase).
    useg_q: VecDeque<(u64, f64)>,
}

struct ObjSession {
    comp: ObjectComposition,
    /// Completed heavy-object segments waiting for the composition gate.
    ready_video: BTreeMap<u64, u64>,
    overlay_q: VecDeque<(u64, f64)>,
    video_bits: u64,
}

/// Tracks per-UE multicast segment completion from the in-order merge output.
struct SegTracker {
    cur_seg: u64,
    processed: u64,
    lost_in_seg: u64,
}

struct UeState {
    capable: bool,
    quit_at: Option<SimTime>,
    playback: PlaybackState,
    mos_series: Vec<(SimTime, f64)>,
    trace: Vec<TraceEvent>,
    serving_cell: usize,
    uni_link_sinr_db: f64,
    mbsfn_sinr_db: f64,
    // multicast packet path
    merge: Option<MergeBuffer>,
    seg_tracker: SegTracker,
    drop_budget: u64,
    dup_on: bool,
    dup_q: VecDeque<Packet>,
    dup_head_bits: f64,
    /// Cached sum of dup_q payload bits (kept in O(1) per push/pop).
    dup_q_bits: f64,
    repair_q: VecDeque<Packet>,
    repair_head_bits: f64,
    repair_q_bits: f64,
    dup_ticks: u64,
    // unicast session kinds
    vod: Option<VodClient>,
    viewer: Option<Viewer>,
    obj: Option<ObjSession>,
    // alert
    alert_asm: Option<AlertAssembly>,
    alert_uni_remaining_bits: f64,
    alert_reached_at: Option<SimTime>,
    alert_path: Option<String>,
    // accounting
    delivered_bits: f64,
    bits_after_quit: f64,
    tick_bits: f64,
    was_stalled: bool,
    mos_played: usize,
}

impl UeState {
    fn unicast_backlog_bits(&self, now: SimTime) -> f64 {
        let mut total = 0.0;
        total += self.dup_q_bits - self.dup_head_bits;
        total += self.repair_q_bits - self.repair_head_bits;
        if let Some(vod) = &self.vod {
            if let Some(dl) = &vod.inflight {
                if now >= dl.available_at {
                    total += (dl.size_bytes * 8) as f64 - dl.received_bits;
                }
            }
        }
        if let Some(v) = &self.viewer {
            total += v.useg_q.iter().map(|(_, b)| *b).sum::<f64>();
        }
        if let Some(o) = &self.obj {
            total += o.overlay_q.iter().map(|(_, b)| *b).sum::<f64>();
        }
        total += self.alert_uni_remaining_bits;
        total
    }

    fn push_trace(&mut self, at: SimTime, event: TraceKind, rung: i64) {
        let buffer_s = self.playback.buffer_s();
        self.trace.push(TraceEvent {
            at,
            event,
            rung,
            buffer_s,
        });
    }
}

pub struct Sim {
    cfg: ScenarioConfig,
    ccfg: ClientConfig,
    mlcfg: MlConfig,
    qoe: QoeConfig,
    mcs: McsTable,
    radio: RadioModel,
    ladder: Vec<Rung>,
    top_bits: u64,
    seg_duration: SimTime,
    end: SimTime,
    resource: ResourceLog,
    rr_cursors: Vec<usize>,
    mcast: Option<McastStream>,
    seg_mcast: Option<SegMcast>,
    gw: MlGw,
    mood: Option<MoodController>,
    audience_idx: usize,
    alert: Option<AlertState>,
    ues: Vec<UeState>,
    warnings: Vec<String>,
    backlog_warned: bool,
    source_bits: f64,
}

impl Sim {
    pub fn new(cfg: ScenarioConfig) -> Result<Sim, SimError> {
        cfg.validate()?;
        let mcs = cfg.mcs_table()?;
        let mut mobility_rng = RngStream::new(cfg.seed, "mobility");
        let mut channel_rng = RngStream::new(cfg.seed, "channel");
        let mut radio = RadioModel::new(
            cfg.radio.cell_config(),
            cfg.radio.ue_config(),
            cfg.radio.propagation(),
            cfg.topology.topology(),
            &mut mobility_rng,
            &mut channel_rng,
        );
        for p in &cfg.placements {
            let pos = Pos {
                x: p.radius_m * p.angle_deg.to_radians().cos(),
                y: p.radius_m * p.angle_deg.to_radians().sin(),
            };
            radio.place_ue(p.ue, pos, p.heading_deg);
            if let Some(s) = p.shadowing_db {
                radio.set_shadowing(p.ue, s);
            }
        }

        let ladder = cfg.content.ladder.clone();
        let top_bits = ladder.last().unwrap().bits_per_s;
        let ccfg = cfg.client.client_config();
        let mlcfg = cfg.multilink.ml_config();
        let qoe = QoeConfig {
            window_segments: cfg.qoe.window_segments,
            ..QoeConfig::default()
        };
        let num_ues = cfg.num_ues();
        let seg_duration = cfg.segment_duration();

        let media_on = cfg.content.media_enabled;
        let packet_mcast = media_on
            && matches!(
                cfg.mode,
                DeliveryMode::Ptm | DeliveryMode::PtmMl | DeliveryMode::Object
            );
        let mcast = if packet_mcast {
            let e = mcs.entry(cfg.content.mcast_mcs_index).unwrap();
            Some(McastStream {
                packetizer: Packetizer::new(ContentId(0)),
                queue: VecDeque::new(),
                head_sent_bits: 0.0,
                seg_ranges: Vec::new(),
                history: VecDeque::new(),
                next_emit_index: 0,
                rate_bits_per_prb: mcs.rate_bits_per_prb(0.0, Some(e.index)),
                min_sinr_db: e.min_sinr_db,
                pace_bits_per_tti: top_bits as f64 / 1000.0,
            })
        } else {
            None
        };
        let seg_mcast = if media_on && cfg.mode == DeliveryMode::Mood {
            let e = mcs.entry(cfg.content.mcast_mcs_index).unwrap();
            Some(SegMcast {
                queue: VecDeque::new(),
                rate_bits_per_prb: mcs.rate_bits_per_prb(0.0, Some(e.index)),
                min_sinr_db: e.min_sinr_db,
                pace_bits_per_tti: top_bits as f64 / 1000.0,
            })
        } else {
            None
        };
        let mood = if cfg.mode == DeliveryMode::Mood {
            Some(MoodController::new(
                MoodConfig {
                    activation_threshold: cfg.mood.activation_threshold,
                    deactivation_threshold: cfg.mood.deactivation_threshold,
                    eval_interval: SimTime::from_secs(cfg.mood.eval_interval_s),
                    switch_latency: SimTime::from_secs(cfg.mood.switch_latency_s),
                },
                Bearer::Unicast,
                seg_duration,
            ))
        } else {
            None
        };

        let mut ues = Vec::with_capacity(num_ues);
        for ue in 0..num_ues {
            let capable = !cfg.alert.non_capable_ues.contains(&ue);
            let needs_merge = packet_mcast;
            let video_bits = if cfg.mode == DeliveryMode::Object {
                cfg.objects
                    .objects
                    .iter()
                    .filter(|o| o.popularity == crate::client::Popularity::Shared)
                    .map(|o| o.bitrate_bps)
                    .max()
                    .unwrap_or(top_bits)
            } else {
                top_bits
            };
            let vod = if media_on && cfg.mode == DeliveryMode::Ptp {
                // Sessions open at the top rung with an optimistic prior; the
                // estimator corrects from real completions.
                let top_rung = ladder.len() - 1;
                let prior = top_bits as f64 / ccfg.safety_factor * 1.25;
                Some(VodClient {
                    abr: AbrState::new(top_rung, prior),
                    next_index: 0,
                    inflight: None,
                    last_progress: SimTime::ZERO,
                    first_cancel_since_progress: None,
                })
            } else {
                None
            };
            let viewer = if media_on && cfg.mode == DeliveryMode::Mood {
                Some(Viewer {
                    active: false,
                    useg_q: VecDeque::new(),
                })
            } else {
                None
            };
            let obj = if cfg.mode == DeliveryMode::Object {
                Some(ObjSession {
                    comp: ObjectComposition::new(2),
                    ready_video: BTreeMap::new(),
                    overlay_q: VecDeque::new(),
                    video_bits,
                })
            } else {
                None
            };
            ues.push(UeState {
                capable,
                quit_at: None,
                playback: PlaybackState::new(
                    ccfg.initial_buffer_target_s,
                    seg_duration.as_secs_f64(),
                ),
                mos_series: Vec::new(),
                trace: Vec::new(),
                serving_cell: 0,
                uni_link_sinr_db: 0.0,
                mbsfn_sinr_db: 0.0,
                merge: needs_merge.then(|| MergeBuffer::new(mlcfg.reorder_window)),
                seg_tracker: SegTracker {
                    cur_seg: 0,
                    processed: 0,
                    lost_in_seg: 0,
                },
                drop_budget: 0,
                dup_on: false,
                dup_q: VecDeque::new(),
                dup_head_bits: 0.0,
                dup_q_bits: 0.0,
                repair_q: VecDeque::new(),
                repair_head_bits: 0.0,
                repair_q_bits: 0.0,
                dup_ticks: 0,
                vod,
                viewer,
                obj,
                alert_asm: None,
                alert_uni_remaining_bits: 0.0,
                alert_reached_at: None,
                alert_path: None,
                delivered_bits: 0.0,
                bits_after_quit: 0.0,
                tick_bits: 0.0,
                was_stalled: false,
                mos_played: 0,
            });
        }

        let end = SimTime::from_secs(cfg.duration_s);
        let mut sim = Sim {
            ccfg,
            mlcfg,
            qoe,
            mcs,
            radio,
            ladder,
            top_bits,
            seg_duration,
            end,
            resource: ResourceLog::default(),
            rr_cursors: vec![0; NUM_SIMULATED_CELLS],
            mcast,
            seg_mcast,
            gw: MlGw::new(num_ues),
            mood,
            audience_idx: 0,
            alert: None,
            ues,
            warnings: Vec::new(),
            backlog_warned: false,
            source_bits: 0.0,
            cfg,
        };
        sim.refresh_link_state();
        Ok(sim)
    }

    fn refresh_link_state(&mut self) {
        // Scheduling uses the load-balanced attachment, not the raw
        // strongest-cell choice: a cell whose beam happens to cover most of
        // the disc would otherwise end up saturated while its neighbours idle.
        let serving = self.radio.balanced_serving();
        for ue in 0..self.ues.len() {
            let lq = self.radio.link_quality(ue);
            let s = &mut self.ues[ue];
            s.serving_cell = serving[ue];
            s.mbsfn_sinr_db = lq.sinr_mbsfn_db;
            s.uni_link_sinr_db = self.radio.unicast_link_sinr_to_cell_db(ue, serving[ue]);
        }
    }

    fn in_outage(&self, ue: usize, now: SimTime) -> bool {
        self.cfg.outages.iter().any(|o| {
            o.ue == ue && now >= SimTime::from_secs(o.from_s) && now < SimTime::from_secs(o.to_s)
        })
    }

    fn subscriber_count(&self) -> usize {
        self.ues
            .iter()
            .filter(|u| u.capable && u.quit_at.is_none())
            .count()
    }

    /// Execute the whole scenario and collect artifacts.
    pub fn run(mut self) -> Result<RunOutput, SimError> {
        let mut queue: EventQueue<Ev> = EventQueue::new();
        // Order at shared instants is insertion order, kept stable by each
        // handler rescheduling only itself: mobility, then client logic, then
        // the TTI transport step.
        queue.schedule(SimTime(TICKS_PER_MOBILITY), Ev::Mobility);
        queue.schedule(SimTime(TICKS_PER_CLIENT), Ev::ClientTick);
        queue.schedule(SimTime(TICKS_PER_SECOND), Ev::SecondTick);
        if self.cfg.alert.enabled {
            queue.schedule(SimTime::from_secs(self.cfg.alert.trigger_s), Ev::AlertTrigger);
        }
        self.refresh_ml_decisions();
        self.emit_second(SimTime::ZERO, &mut queue);
        queue.schedule(SimTime::ZERO, Ev::Tti);

        let end = self.end;
        let mut sim = self;
        queue.run_until(end, |q, at, ev| match ev {
            Ev::Tti => {
                sim.step_tti(at);
                if at + SimTime(1) < end {
                    q.schedule(at + SimTime(1), Ev::Tti);
                }
            }
            Ev::Mobility => {
                sim.step_mobility(at);
                q.schedule(at + SimTime(TICKS_PER_MOBILITY), Ev::Mobility);
            }
            Ev::ClientTick => {
                sim.step_clients(at, q);
                q.schedule(at + SimTime(TICKS_PER_CLIENT), Ev::ClientTick);
            }
            Ev::SecondTick => {
                sim.emit_second(at, q);
                q.schedule(at + SimTime(TICKS_PER_SECOND), Ev::SecondTick);
            }
            Ev::AlertTrigger => sim.trigger_alert(at),
            Ev::SwitchEffective => sim.switch_effective(at),
        });

        sim.finalize(end)
    }

    // ------------------------------------------------------------------
    // Per-second cadence: source emission, audience script, MooD.
    // ------------------------------------------------------------------

    fn emit_second(&mut self, now: SimTime, queue: &mut EventQueue<Ev>) {
        if now + self.seg_duration > self.end {
            // A segment that cannot finish inside the horizon is not emitted.
            return;
        }
        self.apply_audience(now);

        let seg_bits = self.top_bits as f64 * self.seg_duration.as_secs_f64();
        match self.cfg.mode {
            DeliveryMode::Ptm | DeliveryMode::PtmMl => {
                let subs = self.subscriber_count();
                if let Some(m) = &mut self.mcast {
                    let idx = m.next_emit_index;
                    let bytes = (seg_bits / 8.0).round() as u64;
                    let pkts = m.packetizer.enqueue_segment(idx, bytes, LinkTag::Multicast);
                    let first = pkts.first().unwrap().seq;
                    let last = pkts.last().unwrap().seq;
                    m.seg_ranges.push((first, last));
                    m.queue.extend(pkts);
                    m.next_emit_index += 1;
                    self.source_bits += seg_bits * subs as f64;
                }
            }
            DeliveryMode::Object => {
                let subs = self.subscriber_count();
                let overlay_bits: f64 = self
                    .cfg
                    .objects
                    .objects
                    .iter()
                    .filter(|o| o.popularity == crate::client::Popularity::Personalized)
                    .map(|o| o.bitrate_bps as f64 * self.seg_duration.as_secs_f64())
                    .sum();
                if let Some(m) = &mut self.mcast {
                    let video_bits = self
                        .ues
                        .first()
                        .and_then(|u| u.obj.as_ref())
                        .map(|o| o.video_bits as f64 * self.seg_duration.as_secs_f64())
                        .unwrap_or(seg_bits);
                    let idx = m.next_emit_index;
                    let bytes = (video_bits / 8.0).round() as u64;
                    let pkts = m.packetizer.enqueue_segment(idx, bytes, LinkTag::Multicast);
                    let first = pkts.first().unwrap().seq;
                    let last = pkts.last().unwrap().seq;
                    m.seg_ranges.push((first, last));
                    m.queue.extend(pkts);
                    m.next_emit_index += 1;
                    self.source_bits += video_bits * subs as f64;
                    for ue in 0..self.ues.len() {
                        if self.ues[ue].quit_at.is_some() {
                            continue;
                        }
                        if overlay_bits > 0.0 {
                            if let Some(o) = &mut self.ues[ue].obj {
                                o.overlay_q.push_back((idx, overlay_bits));
                            }
                            self.source_bits += overlay_bits;
                        }
                    }
                }
            }
            DeliveryMode::Mood => {
                let bearer = self.mood.as_ref().unwrap().bearer();
                let idx = (now.ticks() / self.seg_duration.ticks()) as u64;
                let viewers: Vec<usize> = self
                    .ues
                    .iter()
                    .enumerate()
                    .filter(|(_, u)| u.viewer.as_ref().is_some_and(|v| v.active))
                    .map(|(i, _)| i)
                    .collect();
                if viewers.is_empty() {
                    // No audience: the source pauses.
                } else {
                    match bearer {
                        Bearer::Broadcast => {
                            self.seg_mcast
                                .as_mut()
                                .unwrap()
                                .queue
                                .push_back((idx, seg_bits));
                            self.source_bits += seg_bits * viewers.len() as f64;
                        }
                        Bearer::Unicast => {
                            for ue in viewers {
                                self.ues[ue]
                                    .viewer
                                    .as_mut()
                                    .unwrap()
                                    .useg_q
                                    .push_back((idx, seg_bits));
                                self.source_bits += seg_bits;
                            }
                        }
                    }
                }
                let audience = self
                    .ues
                    .iter()
                    .filter(|u| u.viewer.as_ref().is_some_and(|v| v.active))
                    .count();
                if let Some(ctl) = &mut self.mood {
                    if let Some(eff) = ctl.evaluate(now, audience) {
                        queue.schedule(eff, Ev::SwitchEffective);
                    }
                }
            }
            DeliveryMode::Ptp => {}
        }

        // Scripted multicast loss bursts arm at their scheduled second.
        let bursts: Vec<(usize, u64)> = self
            .cfg
            .loss_bursts
            .iter()
            .filter(|b| SimTime::from_secs(b.at_s) == now)
            .map(|b| (b.ue, b.packets))
            .collect();
        for (ue, n) in bursts {
            self.ues[ue].drop_budget += n;
        }

        // Misconfiguration watermark: multicast demand beyond the cap makes
        // the queue grow without bound.
        let backlog_s = self
            .mcast
            .as_ref()
            .map(|m| m.backlog_bits() / self.top_bits as f64)
            .unwrap_or(0.0);
        if backlog_s > MCAST_BACKLOG_WATERMARK_S && !self.backlog_warned {
            self.backlog_warned = true;
            self.warnings.push(format!(
                "multicast backlog exceeded {MCAST_BACKLOG_WATERMARK_S} s of stream at {now}; demand exceeds the broadcast capacity cap"
            ));
        }
    }

    fn apply_audience(&mut self, now: SimTime) {
        if self.cfg.mode != DeliveryMode::Mood {
            return;
        }
        let timeline = self.cfg.mood.timeline();
        let mut target: Option<usize> = None;
        while self.audience_idx < timeline.len()
            && SimTime::from_secs(timeline[self.audience_idx].at_s) <= now
        {
            target = Some(timeline[self.audience_idx].count);
            self.audience_idx += 1;
        }
        let Some(target) = target else { return };
        let live_index = (now.ticks() / self.seg_duration.ticks()) as u64;
        for ue in 0..self.ues.len() {
            let want_active = ue < target;
            let initial_target = self.ccfg.initial_buffer_target_s;
            let seg_s = self.seg_duration.as_secs_f64();
            let u = &mut self.ues[ue];
            let Some(v) = &mut u.viewer else { continue };
            if want_active && !v.active {
                v.active = true;
                v.useg_q.clear();
                u.playback = PlaybackState::new_starting_at(initial_target, seg_s, live_index);
                u.was_stalled = false;
                u.mos_played = 0;
                u.mos_series.clear();
            } else if !want_active && v.active {
                v.active = false;
                v.useg_q.clear();
            }
        }
    }

    fn switch_effective(&mut self, now: SimTime) {
        let Some(ctl) = &mut self.mood else { return };
        if ctl.complete_pending(now).is_some() {
            for u in &mut self.ues {
                if u.viewer.as_ref().is_some_and(|v| v.active) {
                    u.push_trace(now, TraceKind::Switch, -1);
                }
            }
        }
    }

    fn trigger_alert(&mut self, now: SimTime) {
        let a = &self.cfg.alert;
        let e = self.mcs.entry(a.mcs_index).unwrap();
        let carousel = FileCarousel::new(a.file_bytes, a.carousel_rounds);
        let pieces = carousel.packets_per_round;
        self.alert = Some(AlertState {
            carousel,
            head_piece: None,
            rate_bits_per_prb: self.mcs.rate_bits_per_prb(0.0, Some(e.index)),
            min_sinr_db: e.min_sinr_db,
            fallback_issued: false,
            file_bytes: a.file_bytes,
        });
        let file_bits = (a.file_bytes * 8) as f64;
        for ue in 0..self.ues.len() {
            if self.ues[ue].capable {
                self.ues[ue].alert_asm = Some(AlertAssembly::new(pieces));
            } else {
                // Non-broadcast-capable UEs fetch the alert over unicast
                // right from the trigger.
                self.ues[ue].alert_uni_remaining_bits = file_bits;
                self.ues[ue].alert_path = Some("unicast".to_string());
            }
            let _ = now;
        }
        self.source_bits += file_bits * self.ues.len() as f64;
    }

    // ------------------------------------------------------------------
    // Mobility + multi-link decisions (every 100 ms).
    // ------------------------------------------------------------------

    fn step_mobility(&mut self, _now: SimTime) {
        self.radio.mobility_step(SimTime(TICKS_PER_MOBILITY));
        self.refresh_link_state();
        self.refresh_ml_decisions();
    }

    /// Re-evaluate the per-UE duplication decision against the current link
    /// state. Runs once before the first TTI and after every mobility step so
    /// duplication is already armed for any packet that will be undecodable.
    fn refresh_ml_decisions(&mut self) {
        if self.cfg.mode == DeliveryMode::PtmMl {
            for ue in 0..self.ues.len() {
                let sinr = self.ues[ue].mbsfn_sinr_db;
                let on = self.gw.ml_decide(ue, sinr, &self.mlcfg);
                self.ues[ue].dup_on = on && self.ues[ue].capable && self.ues[ue].quit_at.is_none();
            }
        }
    }

    // ------------------------------------------------------------------
    // Transport: one TTI of the shared PRB grid.
    // ------------------------------------------------------------------

    fn step_tti(&mut self, now: SimTime) {
        // Multicast demand: the media stream, or the alert carousel once the
        // media queue is idle.
        let (mcast_backlog, mcast_rate) = {
            if let Some(m) = &self.mcast {
                if m.backlog_bits() > 0.0 {
                    (m.demand_bits(), m.rate_bits_per_prb)
                } else {
                    self.alert_demand()
                }
            } else if let Some(s) = &self.seg_mcast {
                if s.backlog_bits() > 0.0 {
                    (s.demand_bits(), s.rate_bits_per_prb)
                } else {
                    self.alert_demand()
                }
            } else {
                self.alert_demand()
            }
        };
        let cap = (PRBS_PER_TTI as f64 * self.cfg.content.mcast_cap_fraction).floor() as u32;
        let mcast_prbs = mcast_prbs_needed(mcast_backlog, mcast_rate).min(cap);
        let mcast_bits = (mcast_prbs as f64 * mcast_rate).min(mcast_backlog);

        // Unicast: per-cell round-robin over backlogged flows.
        let mut uni_prbs_total = 0u32;
        for cell in 0..NUM_SIMULATED_CELLS {
            let members: Vec<usize> = (0..self.ues.len())
                .filter(|&ue| {
                    self.ues[ue].serving_cell == cell
                        && self.ues[ue].quit_at.is_none()
                        && !self.in_outage(ue, now)
                        && self.ues[ue].unicast_backlog_bits(now) > 0.0
                })
                .collect();
            if members.is_empty() {
                continue;
            }
            let flows: Vec<FlowDemand> = members
                .iter()
                .map(|&ue| FlowDemand {
                    backlog_bits: self.ues[ue].unicast_backlog_bits(now),
                    rate_bits_per_prb: self
                        .mcs
                        .rate_bits_per_prb(self.ues[ue].uni_link_sinr_db, None),
                })
                .collect();
            let alloc = allocate_tti(
                McastDemand {
                    backlog_bits: 0.0,
                    rate_bits_per_prb: 0.0,
                    cap_fraction: self.cfg.content.mcast_cap_fraction,
                },
                &flows,
                &mut self.rr_cursors[cell],
                PRBS_PER_TTI - mcast_prbs,
            );
            uni_prbs_total += alloc.uni_prbs;
            for (k, &ue) in members.iter().enumerate() {
                let bits = alloc.flow_bits[k];
                if bits > 0.0 {
                    self.credit_unicast(ue, bits, now);
                }
            }
        }

        if mcast_bits > 0.0 {
            self.drain_mcast(mcast_bits, now);
        }

        self.resource.push(ResourceRow {
            tti: now.ticks(),
            prbs_multicast: mcast_prbs * NUM_SIMULATED_CELLS as u32,
            prbs_unicast: uni_prbs_total,
            prbs_total: PRBS_PER_TTI * NUM_SIMULATED_CELLS as u32,
        });
    }

    fn alert_demand(&self) -> (f64, f64) {
        match &self.alert {
            Some(a) => {
                let head = a.head_piece.map(|(_, b)| b).unwrap_or(0.0);
                let queued = (a.carousel.total_packets() - a.carousel.emitted_count()) as f64
                    * (PAYLOAD_BYTES * 8) as f64;
                let backlog = head + queued;
                (backlog, a.rate_bits_per_prb)
            }
            None => (0.0, 0.0),
        }
    }

    /// Spend one TTI's multicast bit budget on the media stream and then the
    /// alert carousel, delivering completed packets.
    fn drain_mcast(&mut self, mut budget: f64, now: SimTime) {
        // Packet-granular media stream.
        while budget > 0.0 {
            let Some(m) = &mut self.mcast else { break };
            let Some(head) = m.queue.front().copied() else { break };
            let head_bits = (head.payload_bytes * 8) as f64;
            let remaining = head_bits - m.head_sent_bits;
            if budget >= remaining {
                budget -= remaining;
                m.head_sent_bits = 0.0;
                m.queue.pop_front();
                m.history.push_back(head);
                if m.history.len() > REPAIR_HISTORY {
                    m.history.pop_front();
                }
                self.deliver_mcast_packet(head, now);
            } else {
                m.head_sent_bits += budget;
                budget = 0.0;
            }
        }
        // Segment-granular MooD stream.
        while budget > 0.0 {
            let Some(s) = &mut self.seg_mcast else { break };
            let Some((idx, remaining)) = s.queue.front_mut() else { break };
            let threshold = s.min_sinr_db;
            if budget >= *remaining {
                budget -= *remaining;
                let idx = *idx;
                s.queue.pop_front();
                self.deliver_mood_segment(idx, threshold, now);
            } else {
                *remaining -= budget;
                budget = 0.0;
            }
        }
        // Alert carousel.
        while budget > 0.0 {
            let Some(a) = &mut self.alert else { break };
            if a.head_piece.is_none() {
                match a.carousel.next_packet() {
                    Some((piece, payload)) => {
                        a.head_piece = Some((piece, (payload * 8) as f64));
                    }
                    None => break,
                }
            }
            let threshold = a.min_sinr_db;
            let (piece, remaining) = a.head_piece.unwrap();
            if budget >= remaining {
                budget -= remaining;
                a.head_piece = None;
                self.deliver_alert_piece(piece, threshold, now);
            } else {
                a.head_piece = Some((piece, remaining - budget));
                budget = 0.0;
            }
        }
        // Once the final carousel round is on the ground, stragglers fall
        // back to unicast.
        let exhausted = self
            .alert
            .as_ref()
            .is_some_and(|a| !a.fallback_issued && a.carousel.is_exhausted() && a.head_piece.is_none());
        if exhausted {
            let file_bits = (self.alert.as_ref().unwrap().file_bytes * 8) as f64;
            let fallback = self.cfg.alert.unicast_fallback;
            self.alert.as_mut().unwrap().fallback_issued = true;
            for u in &mut self.ues {
                if let Some(asm) = &u.alert_asm {
                    if !asm.is_complete() && fallback && u.alert_uni_remaining_bits == 0.0 {
                        u.alert_uni_remaining_bits = file_bits;
                        u.alert_path = Some("unicast".to_string());
                    }
                }
            }
        }
    }

    fn deliver_mcast_packet(&mut self, pkt: Packet, now: SimTime) {
        let threshold = self.mcast.as_ref().unwrap().min_sinr_db;
        for ue in 0..self.ues.len() {
            if !self.ues[ue].capable || self.ues[ue].quit_at.is_some() {
                continue;
            }
            if self.ues[ue].dup_on {
                let mut copy = pkt;
                copy.link_tag = LinkTag::UnicastDuplicate;
                let u = &mut self.ues[ue];
                u.dup_q.push_back(copy);
                u.dup_q_bits += (copy.payload_bytes * 8) as f64;
                // Bound the duplicate queue far above one segment's packet
                // burst so backpressure never silently discards a packet the
                // merge is still waiting for.
                while u.dup_q.len() > REPAIR_HISTORY {
                    let old = u.dup_q.pop_front().unwrap();
                    u.dup_q_bits -= (old.payload_bytes * 8) as f64;
                    u.dup_head_bits = 0.0;
                }
            }
            let dropped = if self.ues[ue].drop_budget > 0 {
                self.ues[ue].drop_budget -= 1;
                true
            } else {
                false
            };
            if !dropped && self.ues[ue].mbsfn_sinr_db >= threshold {
                self.ingest_for_ue(ue, pkt, now);
            }
        }
    }

    fn deliver_mood_segment(&mut self, idx: u64, threshold: f64, now: SimTime) {
        for ue in 0..self.ues.len() {
            let ok = self.ues[ue].capable && self.ues[ue].mbsfn_sinr_db >= threshold;
            let u = &mut self.ues[ue];
            let Some(v) = &u.viewer else { continue };
            if !v.active || !ok {
                continue;
            }
            if idx > u.playback.next_push_index() && u.playback.buffer_s() <= 0.0 {
                // A live viewer that fell behind (missed segments, nothing
                // buffered) re-syncs to the live edge rather than waiting for
                // segments that will never be retransmitted on broadcast.
                let target = self.ccfg.initial_buffer_target_s;
                u.playback = PlaybackState::new_starting_at(target, self.seg_duration.as_secs_f64(), idx);
            }
            if idx == u.playback.next_push_index() {
                u.playback.push_segment(idx, self.top_bits);
                u.delivered_bits += self.top_bits as f64 * self.seg_duration.as_secs_f64();
                u.push_trace(now, TraceKind::SegmentComplete, self.ladder.len() as i64 - 1);
            }
        }
    }

    fn deliver_alert_piece(&mut self, piece: u64, threshold: f64, now: SimTime) {
        for u in &mut self.ues {
            if u.mbsfn_sinr_db < threshold {
                continue;
            }
            if let Some(asm) = &mut u.alert_asm {
                if !asm.is_complete() {
                    asm.receive_piece(piece, now);
                    if asm.is_complete() {
                        u.alert_reached_at = Some(now);
                        u.alert_path = Some("multicast".to_string());
                        u.delivered_bits += (self.cfg.alert.file_bytes * 8) as f64;
                    }
                }
            }
        }
    }

    /// Route one multicast-path packet through the UE's merge buffer and
    /// update segment assembly from the in-order output.
    fn ingest_for_ue(&mut self, ue: usize, pkt: Packet, now: SimTime) {
        let seg_ranges_len = self.mcast.as_ref().unwrap().seg_ranges.len();
        let out = {
            let u = &mut self.ues[ue];
            let Some(merge) = &mut u.merge else { return };
            merge.ingest(pkt, now)
        };
        if out.released.is_empty() && out.newly_lost.is_empty() {
            return;
        }
        // Interleave releases and losses back into seq order.
        let mut rel = out.released.iter().peekable();
        let mut lost = out.newly_lost.iter().peekable();
        loop {
            let take_rel = match (rel.peek(), lost.peek()) {
                (Some(p), Some(&&l)) => p.seq < l,
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (None, None) => break,
            };
            if take_rel {
                let p = rel.next().unwrap();
                self.ues[ue].delivered_bits += (p.payload_bytes * 8) as f64;
                self.advance_seg_tracker(ue, false, now, seg_ranges_len);
            } else {
                lost.next();
                self.advance_seg_tracker(ue, true, now, seg_ranges_len);
            }
        }
    }

    fn advance_seg_tracker(&mut self, ue: usize, lost: bool, now: SimTime, seg_count: usize) {
        let (first, last) = {
            let t = &self.ues[ue].seg_tracker;
            if (t.cur_seg as usize) >= seg_count {
                return;
            }
            self.mcast.as_ref().unwrap().seg_ranges[t.cur_seg as usize]
        };
        let total = last - first + 1;
        let finished_seg = {
            let t = &mut self.ues[ue].seg_tracker;
            t.processed += 1;
            if lost {
                t.lost_in_seg += 1;
            }
            if t.processed == total {
                let damaged = t.lost_in_seg > 0;
                t.cur_seg += 1;
                t.processed = 0;
                t.lost_in_seg = 0;
                Some(damaged)
            } else {
                None
            }
        };
        if let Some(damaged) = finished_seg {
            let idx = self.ues[ue].seg_tracker.cur_seg - 1;
            self.complete_mcast_segment(ue, idx, damaged, now);
        }
    }

    fn complete_mcast_segment(&mut self, ue: usize, idx: u64, damaged: bool, now: SimTime) {
        if self.cfg.mode == DeliveryMode::Object {
            let u = &mut self.ues[ue];
            if let Some(o) = &mut u.obj {
                if !damaged {
                    o.ready_video.insert(idx, o.video_bits);
                }
                o.comp.cover(0, idx + 1);
            }
            self.push_composed(ue, now);
        } else {
            let top = self.top_bits;
            let rung = self.ladder.len() as i64 - 1;
            let u = &mut self.ues[ue];
            if damaged {
                u.playback.push_damaged(idx);
            } else {
                u.playback.push_segment(idx, top);
                u.push_trace(now, TraceKind::SegmentComplete, rung);
            }
        }
    }

    /// Object sessions render a position only when every object covers it.
    fn push_composed(&mut self, ue: usize, now: SimTime) {
        let u = &mut self.ues[ue];
        let Some(o) = &mut u.obj else { return };
        let renderable = o.comp.renderable();
        while u.playback.next_push_index() < renderable {
            let idx = u.playback.next_push_index();
            match o.ready_video.remove(&idx) {
                Some(bits) => {
                    u.playback.push_segment(idx, bits);
                    u.trace.push(TraceEvent {
                        at: now,
                        event: TraceKind::SegmentComplete,
                        rung: self.ladder.len() as i64 - 1,
                        buffer_s: u.playback.buffer_s(),
                    });
                }
                None => u.playback.push_damaged(idx),
            }
        }
        o.comp.render_up_to(renderable);
    }

    /// Deliver `bits` of unicast capacity to one UE, in path priority order:
    /// duplicate stream, repair stream, media session, alert file.
    fn credit_unicast(&mut self, ue: usize, mut bits: f64, now: SimTime) {
        if self.ues[ue].quit_at.is_some() {
            self.ues[ue].bits_after_quit += bits;
            return;
        }
        self.ues[ue].tick_bits += bits;

        // Duplicate link.
        while bits > 0.0 {
            let u = &mut self.ues[ue];
            let Some(head) = u.dup_q.front().copied() else { break };
            let head_bits = (head.payload_bytes * 8) as f64;
            let remaining = head_bits - u.dup_head_bits;
            if bits >= remaining {
                bits -= remaining;
                u.dup_head_bits = 0.0;
                u.dup_q.pop_front();
                u.dup_q_bits -= head_bits;
                self.ingest_for_ue(ue, head, now);
            } else {
                u.dup_head_bits += bits;
                bits = 0.0;
            }
        }
        // Repair link.
        while bits > 0.0 {
            let u = &mut self.ues[ue];
            let Some(head) = u.repair_q.front().copied() else { break };
            let head_bits = (head.payload_bytes * 8) as f64;
            let remaining = head_bits - u.repair_head_bits;
            if bits >= remaining {
                bits -= remaining;
                u.repair_head_bits = 0.0;
                u.repair_q.pop_front();
                u.repair_q_bits -= head_bits;
                self.ingest_for_ue(ue, head, now);
            } else {
                u.repair_head_bits += bits;
                bits = 0.0;
            }
        }
        // Adaptive VoD download.
        if bits > 0.0 && self.ues[ue].vod.is_some() {
            let ema_alpha = self.ccfg.throughput_ema_alpha;
            let seg_s = self.seg_duration.as_secs_f64();
            let mut completed_bits = 0.0;
            {
                let u = &mut self.ues[ue];
                let UeState {
                    vod,
                    playback,
                    delivered_bits,
                    trace,
                    ..
                } = u;
                let vod = vod.as_mut().unwrap();
                if let Some(dl) = &mut vod.inflight {
                    if now >= dl.available_at {
                        let need = (dl.size_bytes * 8) as f64 - dl.received_bits;
                        let take = bits.min(need);
                        dl.received_bits += take;
                        bits -= take;
                        vod.last_progress = now;
                        vod.first_cancel_since_progress = None;
                        if dl.received_bits >= (dl.size_bytes * 8) as f64 - 1e-9 {
                            let elapsed = (now - dl.available_at).as_secs_f64().max(1e-3);
                            let goodput = (dl.size_bytes * 8) as f64 / elapsed;
                            let index = dl.index;
                            let rung = dl.rung;
                            completed_bits = (dl.size_bytes * 8) as f64;
                            vod.abr.observe_goodput(goodput, ema_alpha);
                            vod.abr.current_rung = rung;
                            vod.next_index = index + 1;
                            vod.inflight = None;
                            let rate = self.ladder[rung].bits_per_s;
                            playback.push_segment(index, rate);
                            *delivered_bits += rate as f64 * seg_s;
                            trace.push(TraceEvent {
                                at: now,
                                event: TraceKind::SegmentComplete,
                                rung: rung as i64,
                                buffer_s: playback.buffer_s(),
                            });
                        }
                    }
                }
            }
            // Unicast source bits: exactly what each session's source encoded
            // and shipped for this one UE.
            self.source_bits += completed_bits;
            // Pipeline the next request right away instead of waiting for the
            // next client tick; idle gaps between segments would depress the
            // throughput estimate well below the link's actual capacity.
            if completed_bits > 0.0 {
                self.start_next_download(ue, now);
            }
        }
        // MooD unicast bearer.
        if bits > 0.0 && self.ues[ue].viewer.is_some() {
            let top = self.top_bits;
            let seg_s = self.seg_duration.as_secs_f64();
            let rung = self.ladder.len() as i64 - 1;
            let u = &mut self.ues[ue];
            let UeState {
                viewer,
                playback,
                delivered_bits,
                trace,
                ..
            } = u;
            let v = viewer.as_mut().unwrap();
            while bits > 0.0 {
                let Some((idx, remaining)) = v.useg_q.front_mut() else { break };
                if bits >= *remaining {
                    bits -= *remaining;
                    let idx = *idx;
                    v.useg_q.pop_front();
                    if v.active && idx == playback.next_push_index() {
                        playback.push_segment(idx, top);
                        *delivered_bits += top as f64 * seg_s;
                        trace.push(TraceEvent {
                            at: now,
                            event: TraceKind::SegmentComplete,
                            rung,
                            buffer_s: playback.buffer_s(),
                        });
                    }
                } else {
                    *remaining -= bits;
                    bits = 0.0;
                }
            }
        }
        // Personalized overlay object.
        if bits > 0.0 && self.ues[ue].obj.is_some() {
            let mut covered = false;
            {
                let u = &mut self.ues[ue];
                let o = u.obj.as_mut().unwrap();
                while bits > 0.0 {
                    let Some((idx, remaining)) = o.overlay_q.front_mut() else { break };
                    if bits >= *remaining {
                        bits -= *remaining;
                        let idx = *idx;
                        o.overlay_q.pop_front();
                        o.comp.cover(1, idx + 1);
                        covered = true;
                    } else {
                        *remaining -= bits;
                        bits = 0.0;
                    }
                }
            }
            if covered {
                self.push_composed(ue, now);
            }
        }
        // Alert file over unicast.
        if bits > 0.0 && self.ues[ue].alert_uni_remaining_bits > 0.0 {
            let u = &mut self.ues[ue];
            let take = bits.min(u.alert_uni_remaining_bits);
            u.alert_uni_remaining_bits -= take;
            bits -= take;
            if u.alert_uni_remaining_bits <= 1e-9 {
                u.alert_uni_remaining_bits = 0.0;
                u.alert_reached_at = Some(now);
                u.delivered_bits += (self.cfg.alert.file_bytes * 8) as f64;
            }
        }
        let _ = bits; // spare capacity this TTI goes unused
    }

    // ------------------------------------------------------------------
    // Client logic (every 100 ms): playback, ABR, cancel, quit, repair.
    // ------------------------------------------------------------------

    fn step_clients(&mut self, now: SimTime, _queue: &mut EventQueue<Ev>) {
        let dt = SimTime(TICKS_PER_CLIENT).as_secs_f64();
        for ue in 0..self.ues.len() {
            if self.ues[ue].quit_at.is_some() {
                self.ues[ue].tick_bits = 0.0;
                continue;
            }
            let consuming = self.is_consumer(ue);
            if consuming {
                self.ues[ue].playback.tick(dt, now);
                self.emit_stall_events(ue, now);
                self.append_mos_points(ue, now);
            }
            if self.mlcfg.repair_enabled {
                self.run_repair(ue, now);
            }
            if self.ues[ue].vod.is_some() {
                self.step_vod(ue, now);
            }
            if self.ues[ue].dup_on {
                self.ues[ue].dup_ticks += TICKS_PER_CLIENT;
            }
            self.ues[ue].tick_bits = 0.0;
        }
    }

    fn is_consumer(&self, ue: usize) -> bool {
        let u = &self.ues[ue];
        match self.cfg.mode {
            DeliveryMode::Ptp => u.vod.is_some(),
            DeliveryMode::Ptm | DeliveryMode::PtmMl => {
                self.cfg.content.media_enabled && u.capable
            }
            DeliveryMode::Mood => u.viewer.as_ref().is_some_and(|v| v.active),
            DeliveryMode::Object => u.obj.is_some(),
        }
    }

    fn emit_stall_events(&mut self, ue: usize, now: SimTime) {
        let stalled = self.ues[ue].playback.is_stalled();
        let was = self.ues[ue].was_stalled;
        if stalled && !was {
            self.ues[ue].push_trace(now, TraceKind::StallStart, -1);
        } else if !stalled && was {
            self.ues[ue].push_trace(now, TraceKind::StallEnd, -1);
        }
        self.ues[ue].was_stalled = stalled;
    }

    fn append_mos_points(&mut self, ue: usize, now: SimTime) {
        let window = self.qoe.window_segments;
        let top = self.top_bits;
        let u = &mut self.ues[ue];
        let plays = u.playback.plays.len();
        while u.mos_played < plays {
            let end = u.mos_played + 1;
            let start = end.saturating_sub(window);
            let m = kpi::mos(&u.playback.plays[start..end], top, &self.qoe);
            u.mos_series.push((now, m));
            u.mos_played = end;
        }
    }

    fn run_repair(&mut self, ue: usize, now: SimTime) {
        if !self.mlcfg.repair_enabled {
            return;
        }
        let Some(m) = &self.mcast else { return };
        let history_first = m.history.front().map(|p| p.seq);
        let requests = {
            let u = &mut self.ues[ue];
            let Some(merge) = &mut u.merge else { return };
            merge.repair_due(now, self.mlcfg.repair_timeout)
        };
        if requests.is_empty() {
            return;
        }
        let Some(first) = history_first else { return };
        let mut copies = Vec::new();
        {
            let m = self.mcast.as_ref().unwrap();
            for r in &requests {
                for seq in r.start_seq..=r.end_seq {
                    if seq < first {
                        continue; // aged out of the repair window
                    }
                    let idx = (seq - first) as usize;
                    if let Some(p) = m.history.get(idx) {
                        let mut c = *p;
                        c.link_tag = LinkTag::UnicastRepair;
                        copies.push(c);
                    }
                }
            }
        }
        let added: f64 = copies.iter().map(|p| (p.payload_bytes * 8) as f64).sum();
        self.ues[ue].repair_q.extend(copies);
        self.ues[ue].repair_q_bits += added;
    }

    fn step_vod(&mut self, ue: usize, now: SimTime) {
        let inst_goodput = self.ues[ue].tick_bits / SimTime(TICKS_PER_CLIENT).as_secs_f64();
        let buffer_s = self.ues[ue].playback.buffer_s();

        // Cancellation of a download projected to miss.
        let cancel = {
            let u = &self.ues[ue];
            let vod = u.vod.as_ref().unwrap();
            match &vod.inflight {
                // During prefill (nothing played yet) there is no stall
                // deadline to protect; let the first downloads finish.
                Some(dl) if now > dl.available_at && !u.playback.plays.is_empty() => {
                    let remaining =
                        ((dl.size_bytes * 8) as f64 - dl.received_bits).max(0.0) / 8.0;
                    matches!(
                        maybe_cancel(remaining as u64, inst_goodput, buffer_s, dl.rung),
                        CancelDecision::CancelAndRedownloadLower
                    )
                }
                _ => false,
            }
        };
        if cancel {
            let seg_s = self.seg_duration.as_secs_f64();
            let latency = self.ccfg.request_latency;
            let (old_rung, old_index) = {
                let vod = self.ues[ue].vod.as_mut().unwrap();
                let old = vod.inflight.take().unwrap();
                if vod.first_cancel_since_progress.is_none() {
                    vod.first_cancel_since_progress = Some(now);
                }
                (old.rung, old.index)
            };
            self.ues[ue].push_trace(now, TraceKind::Cancel, old_rung as i64);
            // Restart one rung down (or lower if the estimator says so).
            let pick = {
                let vod = self.ues[ue].vod.as_ref().unwrap();
                select_bitrate(&vod.abr, buffer_s, &self.ladder, &self.ccfg)
            };
            let rung = pick.min(old_rung.saturating_sub(1));
            let size_bytes = ((self.ladder[rung].bits_per_s as f64 * seg_s) / 8.0).round() as u64;
            self.ues[ue].vod.as_mut().unwrap().inflight = Some(Download {
                index: old_index,
                rung,
                size_bytes,
                received_bits: 0.0,
                available_at: now + latency,
            });
            self.ues[ue].push_trace(now, TraceKind::SegmentStart, rung as i64);
        }

        // Session quit: the chain stopped making progress 30 s ago, a
        // cancellation fired long enough ago, and the replacement is still
        // projected to miss.
        let quit = {
            let u = &self.ues[ue];
            let vod = u.vod.as_ref().unwrap();
            let chain_age = (now - vod.last_progress).as_secs_f64();
            let cancel_age = vod
                .first_cancel_since_progress
                .map(|t| (now - t).as_secs_f64());
            let replacement_missing = match &vod.inflight {
                Some(dl) => {
                    let remaining = (dl.size_bytes * 8) as f64 - dl.received_bits;
                    inst_goodput <= 0.0 || remaining / inst_goodput > buffer_s
                }
                None => false,
            };
            crate::client::check_quit(chain_age, cancel_age, replacement_missing, &self.ccfg)
                == crate::client::QuitDecision::Quit
        };
        if quit {
            let u = &mut self.ues[ue];
            u.quit_at = Some(now);
            u.vod.as_mut().unwrap().inflight = None;
            u.push_trace(now, TraceKind::Quit, -1);
            return;
        }

        // Next request once idle and not buffer-capped.
        self.start_next_download(ue, now);
    }

    /// Issue the next segment request if the session is idle, the buffer has
    /// room, and the UE is not in a coverage outage.
    fn start_next_download(&mut self, ue: usize, now: SimTime) {
        let buffer_s = self.ues[ue].playback.buffer_s();
        let start = {
            let u = &self.ues[ue];
            match &u.vod {
                Some(vod) => {
                    vod.inflight.is_none()
                        && buffer_s < self.ccfg.max_buffer_s
                        && !self.in_outage(ue, now)
                        && u.quit_at.is_none()
                }
                None => false,
            }
        };
        if start {
            let seg_s = self.seg_duration.as_secs_f64();
            let latency = self.ccfg.request_latency;
            let rung = {
                let u = &self.ues[ue];
                let vod = u.vod.as_ref().unwrap();
                // During prefill the buffer is low by definition and playback
                // has no deadline yet, so the panic demotion does not apply.
                let effective_buffer = if u.playback.plays.is_empty() {
                    buffer_s.max(self.ccfg.panic_buffer_s)
                } else {
                    buffer_s
                };
                select_bitrate(&vod.abr, effective_buffer, &self.ladder, &self.ccfg)
            };
            let size_bytes = ((self.ladder[rung].bits_per_s as f64 * seg_s) / 8.0).round() as u64;
            let u = &mut self.ues[ue];
            let vod = u.vod.as_mut().unwrap();
            let index = vod.next_index;
            vod.inflight = Some(Download {
                index,
                rung,
                size_bytes,
                received_bits: 0.0,
                available_at: now + latency,
            });
            u.push_trace(now, TraceKind::SegmentStart, rung as i64);
        }
    }

    // ------------------------------------------------------------------
    // Finalization.
    // ------------------------------------------------------------------

    fn finalize(mut self, end: SimTime) -> Result<RunOutput, SimError> {
        let path_label = |mode: DeliveryMode| -> &'static str {
            match mode {
                DeliveryMode::Ptp => "unicast",
                DeliveryMode::Ptm => "multicast",
                DeliveryMode::PtmMl => "multicast+ml",
                DeliveryMode::Mood => "mood",
                DeliveryMode::Object => "object",
            }
        };

        let mut reports = Vec::with_capacity(self.ues.len());
        let mut per_ue_mos = Vec::new();
        let mut quit_count = 0usize;
        let media_consumers = self.cfg.content.media_enabled;
        for (idx, u) in self.ues.iter_mut().enumerate() {
            let quit = u.quit_at.is_some();
            if quit {
                quit_count += 1;
            }
            let mean_mos = if quit || u.mos_series.is_empty() {
                1.0
            } else {
                u.mos_series.iter().map(|(_, m)| *m).sum::<f64>() / u.mos_series.len() as f64
            };
            if media_consumers {
                per_ue_mos.push(mean_mos);
            }
            let stall_seconds = u.playback.total_stall_s(end);
            reports.push(UeReport {
                ue: idx,
                path: path_label(self.cfg.mode).to_string(),
                quit_at: u.quit_at,
                mean_mos,
                mos_series: std::mem::take(&mut u.mos_series),
                plays: u.playback.plays.clone(),
                stall_episodes: u.playback.stalls.len(),
                stall_seconds,
                delivered_bits: u.delivered_bits,
                bits_after_quit: u.bits_after_quit,
                merge_stats: u.merge.as_ref().map(|m| m.stats),
                dup_ticks: u.dup_ticks,
                alert_reached_at: u.alert_reached_at,
                alert_path: u.alert_path.clone(),
                trace: std::mem::take(&mut u.trace),
            });
        }

        if self.cfg.alert.enabled {
            let unreached: Vec<usize> = reports
                .iter()
                .filter(|r| r.alert_reached_at.is_none())
                .map(|r| r.ue)
                .collect();
            if !unreached.is_empty() {
                self.warnings
                    .push(format!("alert unreached within horizon: UEs {unreached:?}"));
            }
        }

        let kpi = KpiReport::build(
            &self.resource.rows,
            end.as_secs_f64(),
            self.cfg.bandwidth_hz(),
            self.source_bits,
            per_ue_mos,
            quit_count,
        )?;
        if kpi.al_se_bits_per_s_per_hz.is_none() {
            self.warnings
                .push("AL-SE undefined: no resources were consumed".to_string());
        }

        Ok(RunOutput {
            switches: self.mood.map(|m| m.switches).unwrap_or_default(),
            config: self.cfg,
            resource: self.resource,
            kpi,
            ues: reports,
            warnings: self.warnings,
        })
    }
}

/// Convenience wrapper: build and run in one call.
pub fn run(cfg: ScenarioConfig) -> Result<RunOutput, SimError> {
    Sim::new(cfg)?.run()
}
