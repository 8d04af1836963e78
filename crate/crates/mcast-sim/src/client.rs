//! Per-UE media consumer: throughput-based DASH rate adaptation with
//! single-step promotion and panic demotion, in-flight download
//! cancellation, playback buffer and stall accounting, 30 s session-quit
//! behaviour, and object-based session composition.

use std::collections::VecDeque;

use crate::delivery::{Mode, Rung};
use crate::kernel::SimTime;

#[derive(Debug, Clone)]
pub struct ClientConfig {
    pub initial_buffer_target_s: f64,
    pub max_buffer_s: f64,
    pub quit_timer_s: f64,
    /// EMA smoothing for completed-segment goodput.
    pub throughput_ema_alpha: f64,
    pub safety_factor: f64,
    /// Below this buffer level the ABR demotes one rung.
    pub panic_buffer_s: f64,
    /// Fixed control-plane latency per unicast segment fetch.
    pub request_latency: SimTime,
    /// A cancellation counts as "attempted without improvement" once it fired
    /// at least this long before the quit check.
    pub cancel_no_improvement_lead_s: f64,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            initial_buffer_target_s: 4.0,
            max_buffer_s: 30.0,
            quit_timer_s: 30.0,
            throughput_ema_alpha: 0.05,
            safety_factor: 0.8,
            panic_buffer_s: 2.0,
            request_latency: SimTime::from_ms(20),
            cancel_no_improvement_lead_s: 10.0,
        }
    }
}

/// DASH adaptation state for one unicast session.
#[derive(Debug, Clone)]
pub struct AbrState {
    pub throughput_estimate_bps: f64,
    pub current_rung: usize,
}

impl AbrState {
    pub fn new(initial_rung: usize, initial_estimate_bps: f64) -> AbrState {
        AbrState {
            throughput_estimate_bps: initial_estimate_bps,
            current_rung: initial_rung,
        }
    }

    pub fn observe_goodput(&mut self, goodput_bps: f64, alpha: f64) {
        self.throughput_estimate_bps =
            (1.0 - alpha) * self.throughput_estimate_bps + alpha * goodput_bps;
    }
}

/// Pick the rung for the next segment: highest rung affordable under
/// `safety * estimate`, promoted at most one rung per decision, demoted one
/// rung when the buffer is in the panic zone.
pub fn select_bitrate(abr: &AbrState, buffer_s: f64, ladder: &[Rung], cfg: &ClientConfig) -> usize {
    let budget = cfg.safety_factor * abr.throughput_estimate_bps;
    let affordable = ladder
        .iter()
        .rposition(|r| r.bits_per_s as f64 <= budget)
        .unwrap_or(0);
    let mut rung = affordable.min(abr.current_rung + 1);
    if buffer_s < cfg.panic_buffer_s {
        rung = rung.min(abr.current_rung.saturating_sub(1));
    }
    rung
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CancelDecision {
    Continue,
    CancelAndRedownloadLower,
}

/// Cancel an in-flight download iff its projected completion time exceeds
/// the buffer and a lower rung exists to fall back to.
pub fn maybe_cancel(
    remaining_bytes: u64,
    instantaneous_goodput_bps: f64,
    buffer_s: f64,
    download_rung: usize,
) -> CancelDecision {
    if download_rung == 0 {
        return CancelDecision::Continue;
    }
    let projected_s = if instantaneous_goodput_bps <= 0.0 {
        f64::INFINITY
    } else {
        remaining_bytes as f64 * 8.0 / instantaneous_goodput_bps
    };
    if projected_s > buffer_s {
        CancelDecision::CancelAndRedownloadLower
    } else {
        CancelDecision::Continue
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuitDecision {
    Continue,
    Quit,
}

/// Session-quit rule: quit when the in-flight download chain is at least
/// `quit_timer_s` old, a cancellation already fired long enough ago, and the
/// replacement is still projected to miss.
pub fn check_quit(
    chain_age_s: f64,
    last_cancel_age_s: Option<f64>,
    replacement_projected_to_miss: bool,
    cfg: &ClientConfig,
) -> QuitDecision {
    let cancel_without_improvement = matches!(
        last_cancel_age_s,
        Some(age) if age >= cfg.cancel_no_improvement_lead_s
    ) && replacement_projected_to_miss;
    if chain_age_s >= cfg.quit_timer_s && cancel_without_improvement {
        QuitDecision::Quit
    } else {
        QuitDecision::Continue
    }
}

/// One stall episode (open episodes have `end == None`).
#[derive(Debug, Clone, Copy)]
pub struct StallEpisode {
    pub start: SimTime,
    pub end: Option<SimTime>,
}

/// What happened at one playback position, for QoE scoring.
#[derive(Debug, Clone, Copy)]
pub struct SegPlay {
    pub index: u64,
    /// Bitrate actually played; 0 for a damaged/skipped position.
    pub bitrate_bps: u64,
    /// Stall seconds attributed to this position.
    pub stall_s: f64,
}

#[derive(Debug, Clone)]
enum Buffered {
    Playable { rung_bits: u64, remaining_s: f64 },
    Damaged { remaining_s: f64 },
}

/// Shared playback engine: consumes buffered segments at 1 s per s, opens a
/// stall when the buffer empties, records per-position play/stall facts.
/// Damaged positions (multicast loss without repair) play as stall time of
/// one segment duration and are then skipped.
#[derive(Debug)]
pub struct PlaybackState {
    started: bool,
    initial_target_s: f64,
    segment_duration_s: f64,
    queue: VecDeque<(u64, Buffered)>,
    next_push_index: u64,
    position: u64,
    pub stalls: Vec<StallEpisode>,
    stall_open: bool,
    pending_stall_s: f64,
    pub plays: Vec<SegPlay>,
}

impl PlaybackState {
    pub fn new(initial_target_s: f64, segment_duration_s: f64) -> PlaybackState {
        PlaybackState::new_starting_at(initial_target_s, segment_duration_s, 0)
    }

    /// Playback joining a live stream mid-way: positions before `start_index`
    /// are outside this session entirely.
    pub fn new_starting_at(
        initial_target_s: f64,
        segment_duration_s: f64,
        start_index: u64,
    ) -> PlaybackState {
        PlaybackState {
            started: false,
            initial_target_s,
            segment_duration_s,
            queue: VecDeque::new(),
            next_push_index: start_index,
            position: start_index,
            stalls: Vec::new(),
            stall_open: false,
            pending_stall_s: 0.0,
            plays: Vec::new(),
        }
    }

    pub fn buffer_s(&self) -> f64 {
        self.queue
            .iter()
            .map(|(_, b)| match b {
                Buffered::Playable { remaining_s, .. } => *remaining_s,
                // Damaged positions hold no playable media.
                Buffered::Damaged { .. } => 0.0,
            })
            .sum()
    }

    pub fn position(&self) -> u64 {
        self.position
    }

    pub fn next_push_index(&self) -> u64 {
        self.next_push_index
    }

    pub fn is_stalled(&self) -> bool {
        self.stall_open
    }

    /// A complete segment became available for playback.
    pub fn push_segment(&mut self, index: u64, rung_bits: u64) {
        assert_eq!(index, self.next_push_index, "playback positions must be gapless");
        self.next_push_index += 1;
        self.queue.push_back((
            index,
            Buffered::Playable {
                rung_bits,
                remaining_s: self.segment_duration_s,
            },
        ));
    }

    /// A position was lost beyond recovery; it will play as stall time.
    pub fn push_damaged(&mut self, index: u64) {
        assert_eq!(index, self.next_push_index, "playback positions must be gapless");
        self.next_push_index += 1;
        self.queue.push_back((
            index,
            Buffered::Damaged {
                remaining_s: self.segment_duration_s,
            },
        ));
    }

    fn open_stall(&mut self, now: SimTime) {
        if !self.stall_open {
            self.stall_open = true;
            self.stalls.push(StallEpisode {
                start: now,
                end: None,
            });
        }
    }

    fn close_stall(&mut self, now: SimTime) {
        if self.stall_open {
            self.stall_open = false;
            self.stalls.last_mut().unwrap().end = Some(now);
        }
    }

    /// Advance playback by `dt` seconds ending at `now`.
    pub fn tick(&mut self, dt_s: f64, now: SimTime) {
        if !self.started {
            if self.buffer_s() >= self.initial_target_s {
                self.started = true;
            } else {
                return;
            }
        }
        let mut left = dt_s;
        while left > 1e-12 {
            // Inspect the head by value so stall bookkeeping below does not
            // fight the queue borrow.
            let (damaged, rung_bits, remaining_s) = match self.queue.front() {
                None => {
                    // Nothing buffered: stall for the rest of the tick.
                    self.open_stall(now);
                    self.pending_stall_s += left;
                    return;
                }
                Some((_, Buffered::Playable { rung_bits, remaining_s })) => {
                    (false, *rung_bits, *remaining_s)
                }
                Some((_, Buffered::Damaged { remaining_s })) => (true, 0, *remaining_s),
            };
            if !damaged {
                // One buffered full segment closes any open stall.
                if self.stall_open && remaining_s >= self.segment_duration_s - 1e-12 {
                    self.close_stall(now);
                }
                if self.stall_open {
                    // Partially buffered only; keep stalling until full.
                    self.pending_stall_s += left;
                    return;
                }
                let play = left.min(remaining_s);
                let new_remaining = remaining_s - play;
                left -= play;
                if let Some((_, Buffered::Playable { remaining_s, .. })) = self.queue.front_mut() {
                    *remaining_s = new_remaining;
                }
                if new_remaining <= 1e-12 {
                    let (idx, _) = self.queue.pop_front().unwrap();
                    self.plays.push(SegPlay {
                        index: idx,
                        bitrate_bps: rung_bits,
                        stall_s: self.pending_stall_s,
                    });
                    self.pending_stall_s = 0.0;
                    self.position = idx + 1;
                }
            } else {
                // Damaged media plays as stall time, then is skipped.
                self.open_stall(now);
                let burn = left.min(remaining_s);
                let new_remaining = remaining_s - burn;
                left -= burn;
                self.pending_stall_s += burn;
                if let Some((_, Buffered::Damaged { remaining_s })) = self.queue.front_mut() {
                    *remaining_s = new_remaining;
                }
                if new_remaining <= 1e-12 {
                    let (idx, _) = self.queue.pop_front().unwrap();
                    self.plays.push(SegPlay {
                        index: idx,
                        bitrate_bps: 0,
                        stall_s: self.pending_stall_s,
                    });
                    self.pending_stall_s = 0.0;
                    self.position = idx + 1;
                    // Close only if the next entry is a full playable segment.
                    let next_full = matches!(
                        self.queue.front(),
                        Some((_, Buffered::Playable { remaining_s, .. }))
                            if *remaining_s >= self.segment_duration_s - 1e-12
                    );
                    if next_full {
                        self.close_stall(now);
                    }
                }
            }
        }
    }

    /// Total stall seconds, counting any open episode up to `now`.
    pub fn total_stall_s(&self, now: SimTime) -> f64 {
        self.stalls
            .iter()
            .map(|s| {
                let end = s.end.unwrap_or(now);
                (end - s.start).as_secs_f64()
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Popularity {
    Shared,
    Personalized,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct MediaObject {
    pub object_id: String,
    pub bitrate_bps: u64,
    pub popularity: Popularity,
}

/// Object-based mode assignment: shared objects at or above the heavy
/// threshold ride multicast; personalized and light objects stay unicast.
pub fn assign_object_modes(
    objects: &[MediaObject],
    heavy_threshold_bps: u64,
    audience: usize,
) -> Vec<(String, Mode)> {
    objects
        .iter()
        .map(|o| {
            let mode = if o.popularity == Popularity::Shared
                && o.bitrate_bps >= heavy_threshold_bps
                && audience >= 1
            {
                Mode::Multicast
            } else {
                Mode::Unicast
            };
            (o.object_id.clone(), mode)
        })
        .collect()
}

/// Composition gate for object-based sessions: a playback position renders
/// only when every subscribed object stream has coverage at that position.
#[derive(Debug)]
pub struct ObjectComposition {
    /// Per object: first position not yet covered.
    coverage: Vec<u64>,
    rendered: u64,
}

impl ObjectComposition {
    pub fn new(num_objects: usize) -> ObjectComposition {
        assert!(num_objects >= 1, "at least one object");
        ObjectComposition {
            coverage: vec![0; num_objects],
            rendered: 0,
        }
    }

    pub fn cover(&mut self, object: usize, up_to_position: u64) {
        self.coverage[object] = self.coverage[object].max(up_to_position);
    }

    /// Highest position the composite can render (min over objects).
    pub fn renderable(&self) -> u64 {
        *self.coverage.iter().min().unwrap()
    }

    /// Advance the render pointer; never past the composition gate.
    pub fn render_up_to(&mut self, position: u64) -> u64 {
        self.rendered = self.rendered.max(position.min(self.renderable()));
        self.rendered
    }

    pub fn rendered(&self) -> u64 {
        self.rendered
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delivery::default_ladder;

    fn cfg() -> ClientConfig {
        ClientConfig::default()
    }

    #[test]
    fn abr_picks_highest_affordable_rung() {
        // Estimate 10 Mbps, safety 0.8 -> budget 8 Mbps -> the 8 Mbps rung.
        let abr = AbrState::new(2, 10e6);
        let rung = select_bitrate(&abr, 10.0, &default_ladder(), &cfg());
        assert_eq!(default_ladder()[rung].bits_per_s, 8_000_000);
    }

    #[test]
    fn abr_panic_demotes_below_current() {
        let abr = AbrState::new(3, 100e6);
        let rung = select_bitrate(&abr, 1.0, &default_ladder(), &cfg());
        assert!(rung <= 2);
    }

    #[test]
    fn abr_promotes_one_step_at_a_time() {
        let abr = AbrState::new(0, 100e6);
        let rung = select_bitrate(&abr, 10.0, &default_ladder(), &cfg());
        assert_eq!(rung, 1);
    }

    #[test]
    fn abr_never_exceeds_budget() {
        let ladder = default_ladder();
        for est in [0.5e6, 2e6, 5e6, 11e6, 26e6, 80e6] {
            let abr = AbrState::new(5, est);
            let rung = select_bitrate(&abr, 10.0, &ladder, &cfg());
            if rung > 0 {
                assert!(ladder[rung].bits_per_s as f64 <= 0.8 * est);
            }
        }
    }

    #[test]
    fn cancel_when_projection_exceeds_buffer() {
        // 2 s of buffer, 10 s projected, not at lowest rung -> cancel.
        assert_eq!(
            maybe_cancel(2_500_000, 2_000_000.0, 2.0, 3),
            CancelDecision::CancelAndRedownloadLower
        );
    }

    #[test]
    fn no_cancel_with_comfortable_buffer() {
        // 6 s of buffer, 2 s projected -> continue.
        assert_eq!(
            maybe_cancel(500_000, 2_000_000.0, 6.0, 3),
            CancelDecision::Continue
        );
    }

    #[test]
    fn no_cancel_at_lowest_rung() {
        assert_eq!(maybe_cancel(2_500_000, 100.0, 0.5, 0), CancelDecision::Continue);
    }

    #[test]
    fn quit_requires_age_and_failed_cancellation() {
        let c = cfg();
        assert_eq!(check_quit(29.0, Some(15.0), true, &c), QuitDecision::Continue);
        assert_eq!(check_quit(30.0, Some(15.0), true, &c), QuitDecision::Quit);
        assert_eq!(check_quit(30.0, None, true, &c), QuitDecision::Continue);
        assert_eq!(check_quit(30.0, Some(5.0), true, &c), QuitDecision::Continue);
        assert_eq!(check_quit(30.0, Some(15.0), false, &c), QuitDecision::Continue);
    }

    #[test]
    fn playback_drains_one_second_per_second() {
        let mut p = PlaybackState::new(2.0, 1.0);
        for i in 0..3 {
            p.push_segment(i, 20_000_000);
        }
        p.tick(1.0, SimTime::from_secs(1));
        assert!((p.buffer_s() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn stall_opens_at_empty_and_closes_on_full_segment() {
        let mut p = PlaybackState::new(1.0, 1.0);
        p.push_segment(0, 20_000_000);
        p.tick(1.0, SimTime::from_secs(1)); // plays everything
        p.tick(1.0, SimTime::from_secs(2)); // empty -> stall
        assert!(p.is_stalled());
        p.push_segment(1, 20_000_000);
        p.tick(0.1, SimTime(2100));
        assert!(!p.is_stalled());
        assert_eq!(p.stalls.len(), 1);
        let s = p.stalls[0];
        // Stalls open and close at the tick that observes the condition, so
        // both endpoints share the same tick-boundary precision.
        assert_eq!(s.start, SimTime::from_secs(2));
        assert_eq!(s.end, Some(SimTime(2100)));
    }

    #[test]
    fn scripted_starvation_matches_hand_timeline() {
        // Segments arrive at t=0,1 then 3,4 (1 s hole). Start threshold 1 s.
        let mut p = PlaybackState::new(1.0, 1.0);
        p.push_segment(0, 8_000_000);
        p.tick(1.0, SimTime::from_secs(1)); // plays seg 0 during [0,1)
        p.push_segment(1, 8_000_000);
        p.tick(1.0, SimTime::from_secs(2)); // plays seg 1
        p.tick(1.0, SimTime::from_secs(3)); // nothing -> 1 s stall
        p.push_segment(2, 8_000_000);
        p.push_segment(3, 8_000_000);
        p.tick(1.0, SimTime::from_secs(4));
        p.tick(1.0, SimTime::from_secs(5));
        assert_eq!(p.plays.len(), 4);
        assert!((p.total_stall_s(SimTime::from_secs(5)) - 1.0).abs() < 1e-9);
        assert!((p.plays[2].stall_s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn damaged_position_plays_as_stall_and_skips() {
        let mut p = PlaybackState::new(1.0, 1.0);
        p.push_segment(0, 20_000_000);
        p.push_damaged(1);
        p.push_segment(2, 20_000_000);
        for t in 1..=3 {
            p.tick(1.0, SimTime::from_secs(t));
        }
        assert_eq!(p.plays.len(), 3);
        assert_eq!(p.plays[1].bitrate_bps, 0);
        assert!((p.plays[1].stall_s - 1.0).abs() < 1e-9);
        assert_eq!(p.plays[2].bitrate_bps, 20_000_000);
    }

    #[test]
    fn buffer_stays_nonnegative_and_bounded() {
        let mut p = PlaybackState::new(2.0, 1.0);
        for i in 0..10 {
            p.push_segment(i, 1_000_000);
        }
        for t in 1..30 {
            p.tick(0.5, SimTime(500 * t));
            assert!(p.buffer_s() >= -1e-9);
            assert!(p.buffer_s() <= 10.0 + 1e-9);
        }
    }

    #[test]
    fn object_modes_follow_popularity_and_threshold() {
        let objects = vec![
            MediaObject {
                object_id: "video".into(),
                bitrate_bps: 8_000_000,
                popularity: Popularity::Shared,
            },
            MediaObject {
                object_id: "icons".into(),
                bitrate_bps: 50_000,
                popularity: Popularity::Personalized,
            },
        ];
        let modes = assign_object_modes(&objects, 1_000_000, 5);
        assert_eq!(modes[0].1, Mode::Multicast);
        assert_eq!(modes[1].1, Mode::Unicast);
    }

    #[test]
    fn personalized_objects_never_multicast() {
        let objects = vec![MediaObject {
            object_id: "huge-personal".into(),
            bitrate_bps: 50_000_000,
            popularity: Popularity::Personalized,
        }];
        assert_eq!(assign_object_modes(&objects, 0, 10)[0].1, Mode::Unicast);
    }

    #[test]
    fn zero_threshold_multicasts_every_shared_object() {
        let objects = vec![
            MediaObject {
                object_id: "a".into(),
                bitrate_bps: 1,
                popularity: Popularity::Shared,
            },
            MediaObject {
                object_id: "b".into(),
                bitrate_bps: 999,
                popularity: Popularity::Shared,
            },
        ];
        for (_, m) in assign_object_modes(&objects, 0, 1) {
            assert_eq!(m, Mode::Multicast);
        }
    }

    #[test]
    fn composition_gate_blocks_partial_renders() {
        let mut c = ObjectComposition::new(3);
        c.cover(0, 5);
        c.cover(1, 3);
        c.cover(2, 7);
        assert_eq!(c.renderable(), 3);
        assert_eq!(c.render_up_to(6), 3);
        c.cover(1, 6);
        // Object 0 still caps the composite at 5.
        assert_eq!(c.render_up_to(6), 5);
        c.cover(0, 6);
        assert_eq!(c.render_up_to(6), 6);
    }
}
