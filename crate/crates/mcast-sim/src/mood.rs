//! Audience-driven bearer selection (unicast vs. broadcast) with hysteresis
//! thresholds, periodic evaluation, and a switch latency during which further
//! evaluations are suppressed. Switches take effect on segment boundaries so
//! no playback position is ever served half on each bearer.

use crate::kernel::SimTime;

#[derive(Debug, Clone)]
pub struct MoodConfig {
    /// Audience at or above this count activates the broadcast bearer.
    pub activation_threshold: usize,
    /// Audience at or below this count deactivates it.
    pub deactivation_threshold: usize,
    pub eval_interval: SimTime,
    /// Reconfiguration latency between decision and the switch taking effect.
    pub switch_latency: SimTime,
}

impl Default for MoodConfig {
    fn default() -> Self {
        MoodConfig {
            activation_threshold: 2,
            deactivation_threshold: 1,
            eval_interval: SimTime::from_secs(1),
            switch_latency: SimTime::from_secs(2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Bearer {
    Unicast,
    Broadcast,
}

impl std::fmt::Display for Bearer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Bearer::Unicast => write!(f, "unicast"),
            Bearer::Broadcast => write!(f, "broadcast"),
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SwitchRecord {
    pub decided_at: SimTime,
    pub effective_at: SimTime,
    pub from: Bearer,
    pub to: Bearer,
    pub audience: usize,
}

#[derive(Debug)]
pub struct MoodController {
    cfg: MoodConfig,
    segment_duration: SimTime,
    state: Bearer,
    pending: Option<(SimTime, Bearer, SimTime, usize)>,
    pub switches: Vec<SwitchRecord>,
}

impl MoodController {
    pub fn new(cfg: MoodConfig, initial: Bearer, segment_duration: SimTime) -> MoodController {
        assert!(
            cfg.deactivation_threshold < cfg.activation_threshold,
            "hysteresis thresholds must not overlap"
        );
        assert!(segment_duration.0 > 0);
        MoodController {
            cfg,
            segment_duration,
            state: initial,
            pending: None,
            switches: Vec::new(),
        }
    }

    pub fn bearer(&self) -> Bearer {
        self.state
    }

    pub fn pending_switch(&self) -> Option<(SimTime, Bearer)> {
        self.pending.map(|(at, to, _, _)| (at, to))
    }

    fn align_up(&self, t: SimTime) -> SimTime {
        let d = self.segment_duration.0;
        SimTime(t.0.div_ceil(d) * d)
    }

    /// Periodic evaluation against the reported audience. Returns the time at
    /// which a newly decided switch becomes effective, if one was decided.
    /// While a switch is pending, evaluations are suppressed.
    pub fn evaluate(&mut self, now: SimTime, audience: usize) -> Option<SimTime> {
        if self.pending.is_some() {
            return None;
        }
        let target = match self.state {
            Bearer::Unicast if audience >= self.cfg.activation_threshold => Bearer::Broadcast,
            Bearer::Broadcast if audience <= self.cfg.deactivation_threshold => Bearer::Unicast,
            _ => return None,
        };
        let effective = self.align_up(now + self.cfg.switch_latency);
        self.pending = Some((effective, target, now, audience));
        Some(effective)
    }

    /// Commit a pending switch whose effective time has arrived.
    pub fn complete_pending(&mut self, now: SimTime) -> Option<&SwitchRecord> {
        let (effective, target, decided_at, audience) = self.pending?;
        if now < effective {
            return None;
        }
        self.pending = None;
        self.switches.push(SwitchRecord {
            decided_at,
            effective_at: effective,
            from: self.state,
            to: target,
            audience,
        });
        self.state = target;
        self.switches.last()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctl() -> MoodController {
        MoodController::new(MoodConfig::default(), Bearer::Unicast, SimTime::from_secs(1))
    }

    #[test]
    fn activates_at_threshold_and_not_below() {
        let mut c = ctl();
        assert_eq!(c.evaluate(SimTime::from_secs(1), 1), None);
        let eff = c.evaluate(SimTime::from_secs(2), 2).unwrap();
        assert_eq!(eff, SimTime::from_secs(4));
    }

    #[test]
    fn pending_switch_suppresses_evaluation() {
        let mut c = ctl();
        c.evaluate(SimTime::from_secs(1), 5).unwrap();
        assert_eq!(c.evaluate(SimTime::from_secs(2), 0), None);
        assert_eq!(c.bearer(), Bearer::Unicast);
    }

    #[test]
    fn switch_takes_effect_on_segment_boundary() {
        let mut c = MoodController::new(
            MoodConfig {
                switch_latency: SimTime::from_ms(2500),
                ..MoodConfig::default()
            },
            Bearer::Unicast,
            SimTime::from_secs(1),
        );
        let eff = c.evaluate(SimTime::from_ms(1300), 3).unwrap();
        assert_eq!(eff, SimTime::from_secs(4)); // 3.8 s rounded up
        assert!(c.complete_pending(SimTime::from_ms(3999)).is_none());
        let rec = c.complete_pending(SimTime::from_secs(4)).unwrap();
        assert_eq!(rec.to, Bearer::Broadcast);
        assert_eq!(c.bearer(), Bearer::Broadcast);
    }

    #[test]
    fn ramp_up_and_down_produces_exactly_two_switches() {
        // Audience 1, 2, 3, ..., 8, then back down to 1: one activation
        // when the count first reaches 2, one deactivation at the end.
        let mut c = ctl();
        let mut now = SimTime::from_secs(1);
        let profile: Vec<usize> = (1..=8).chain((1..8).rev()).collect();
        for audience in profile {
            if let Some(eff) = c.evaluate(now, audience) {
                c.complete_pending(eff);
            }
            now = now + SimTime::from_secs(1);
        }
        assert_eq!(c.switches.len(), 2);
        assert_eq!(c.switches[0].to, Bearer::Broadcast);
        assert_eq!(c.switches[0].audience, 2);
        assert_eq!(c.switches[1].to, Bearer::Unicast);
        assert_eq!(c.switches[1].audience, 1);
    }

    #[test]
    fn hysteresis_band_holds_state() {
        let mut c = MoodController::new(
            MoodConfig {
                activation_threshold: 5,
                deactivation_threshold: 2,
                ..MoodConfig::default()
            },
            Bearer::Broadcast,
            SimTime::from_secs(1),
        );
        for (t, audience) in [(1u64, 3usize), (2, 4), (3, 3), (4, 4)] {
            assert_eq!(c.evaluate(SimTime::from_secs(t), audience), None);
        }
        assert_eq!(c.bearer(), Bearer::Broadcast);
    }

    #[test]
    fn overlapping_thresholds_rejected() {
        let result = std::panic::catch_unwind(|| {
            MoodController::new(
                MoodConfig {
                    activation_threshold: 2,
                    deactivation_threshold: 2,
                    ..MoodConfig::default()
                },
                Bearer::Unicast,
                SimTime::from_secs(1),
            )
        });
        assert!(result.is_err());
    }
}
