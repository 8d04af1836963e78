//! Run-level key performance indicators: resource consumption, allocated-link
//! spectral efficiency, a parametric session MOS, and quality CDFs across the
//! UE population.

use serde::Serialize;

use crate::client::SegPlay;
use crate::delivery::ResourceRow;
use crate::error::SimError;

#[derive(Debug, Clone)]
pub struct QoeConfig {
    /// MOS is scored over the last `window_segments` playback positions.
    pub window_segments: usize,
    pub stall_episode_penalty: f64,
    pub stall_second_penalty: f64,
}

impl Default for QoeConfig {
    fn default() -> Self {
        QoeConfig {
            window_segments: 15,
            stall_episode_penalty: 1.5,
            stall_second_penalty: 0.1,
        }
    }
}

/// Fraction of scheduled PRBs actually used, over the whole run.
pub fn resource_consumption(rows: &[ResourceRow]) -> Result<f64, SimError> {
    let used: u64 = rows
        .iter()
        .map(|r| (r.prbs_multicast + r.prbs_unicast) as u64)
        .sum();
    let total: u64 = rows.iter().map(|r| r.prbs_total as u64).sum();
    if total == 0 {
        return Err(SimError::KpiUndefined(
            "resource consumption over an empty schedule".into(),
        ));
    }
    Ok(used as f64 / total as f64)
}

/// Caveat attached to every AL-SE figure: the numerator is what the content
/// source generated per receiving UE, not what survived the radio.
pub const AL_SE_CAVEAT: &str =
    "packet losses caused by transmission errors or congestion are not considered in this KPI";

/// Spectral efficiency of the allocated share of the carrier: source bits per
/// second, per hertz of the bandwidth fraction actually consumed. Counts a
/// multicast bit once per receiving UE, so serving more UEs from the same
/// PRBs raises it.
pub fn allocated_link_spectral_efficiency(
    source_bits_delivered: f64,
    duration_s: f64,
    bandwidth_hz: f64,
    consumption: f64,
) -> Result<f64, SimError> {
    if duration_s <= 0.0 || bandwidth_hz <= 0.0 {
        return Err(SimError::KpiUndefined(
            "spectral efficiency needs positive duration and bandwidth".into(),
        ));
    }
    if consumption <= 0.0 {
        return Err(SimError::KpiUndefined(
            "spectral efficiency undefined when no resources were consumed".into(),
        ));
    }
    Ok((source_bits_delivered / duration_s) / (bandwidth_hz * consumption))
}

/// Count maximal runs of consecutive positions carrying stall time.
fn stall_episodes(plays: &[SegPlay]) -> usize {
    let mut episodes = 0;
    let mut in_run = false;
    for p in plays {
        if p.stall_s > 0.0 {
            if !in_run {
                episodes += 1;
            }
            in_run = true;
        } else {
            in_run = false;
        }
    }
    episodes
}

/// Parametric session quality on a 1..5 scale: the bitrate term rewards the
/// mean played bitrate relative to the top rung; each stall episode costs
/// 1.5 points and each stall second 0.1.
pub fn mos(plays: &[SegPlay], top_bits_per_s: u64, cfg: &QoeConfig) -> f64 {
    if plays.is_empty() || top_bits_per_s == 0 {
        return 1.0;
    }
    let mean_bps =
        plays.iter().map(|p| p.bitrate_bps as f64).sum::<f64>() / plays.len() as f64;
    let stall_s: f64 = plays.iter().map(|p| p.stall_s).sum();
    let score = 1.0 + 4.0 * (mean_bps / top_bits_per_s as f64)
        - cfg.stall_episode_penalty * stall_episodes(plays) as f64
        - cfg.stall_second_penalty * stall_s;
    score.clamp(1.0, 5.0)
}

/// End-of-run MOS for one UE: the sliding window over the most recent
/// positions, floored to 1 for UEs that abandoned the session.
pub fn final_mos(plays: &[SegPlay], quit: bool, top_bits_per_s: u64, cfg: &QoeConfig) -> f64 {
    if quit {
        return 1.0;
    }
    let start = plays.len().saturating_sub(cfg.window_segments);
    mos(&plays[start..], top_bits_per_s, cfg)
}

/// Empirical CDF: for each distinct value v, the fraction of samples <= v.
pub fn empirical_cdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, v) in sorted.iter().enumerate() {
        let frac = (i + 1) as f64 / n as f64;
        match out.last_mut() {
            Some(last) if (last.0 - v).abs() < 1e-12 => last.1 = frac,
            _ => out.push((*v, frac)),
        }
    }
    out
}

/// Fraction of UEs whose MOS sits at the scale maximum.
pub fn fraction_at_max(mos_values: &[f64]) -> f64 {
    if mos_values.is_empty() {
        return 0.0;
    }
    let at_max = mos_values.iter().filter(|&&m| m >= 5.0 - 1e-9).count();
    at_max as f64 / mos_values.len() as f64
}

#[derive(Debug, Clone, Serialize)]
pub struct KpiReport {
    pub duration_s: f64,
    pub avg_resource_consumption: f64,
    /// Bits/s/Hz of the consumed bandwidth share; absent when nothing was
    /// consumed. Always read together with [`AL_SE_CAVEAT`].
    pub al_se_bits_per_s_per_hz: Option<f64>,
    /// Source bits counted once per receiving UE.
    pub source_bits: f64,
    /// Run-mean MOS per UE (quit UEs floored to 1).
    pub per_ue_mos: Vec<f64>,
    pub qoe_cdf: Vec<(f64, f64)>,
    pub fraction_at_max_mos: f64,
    pub quit_ues: usize,
}

impl KpiReport {
    pub fn build(
        rows: &[ResourceRow],
        duration_s: f64,
        bandwidth_hz: f64,
        source_bits: f64,
        per_ue_mos: Vec<f64>,
        quit_ues: usize,
    ) -> Result<KpiReport, SimError> {
        let consumption = resource_consumption(rows)?;
        let al_se = allocated_link_spectral_efficiency(
            source_bits,
            duration_s,
            bandwidth_hz,
            consumption,
        )
        .ok();
        let qoe_cdf = empirical_cdf(&per_ue_mos);
        let fraction_at_max_mos = fraction_at_max(&per_ue_mos);
        Ok(KpiReport {
            duration_s,
            avg_resource_consumption: consumption,
            al_se_bits_per_s_per_hz: al_se,
            source_bits,
            per_ue_mos,
            qoe_cdf,
            fraction_at_max_mos,
            quit_ues,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delivery::ResourceRow;

    fn row(tti: u64, mcast: u32, ucast: u32, total: u32) -> ResourceRow {
        ResourceRow {
            tti,
            prbs_multicast: mcast,
            prbs_unicast: ucast,
            prbs_total: total,
        }
    }

    fn play(bps: u64, stall: f64) -> SegPlay {
        SegPlay {
            index: 0,
            bitrate_bps: bps,
            stall_s: stall,
        }
    }

    #[test]
    fn consumption_is_used_over_total() {
        let rows = vec![row(0, 20, 7, 273), row(1, 50, 5, 273)];
        // (27 + 55) / 546
        let c = resource_consumption(&rows).unwrap();
        assert!((c - 82.0 / 546.0).abs() < 1e-12);
    }

    #[test]
    fn consumption_undefined_on_empty_schedule() {
        assert!(resource_consumption(&[]).is_err());
    }

    #[test]
    fn al_se_hand_value() {
        // 2 Gbit over 100 s = 20 Mbps of source; 100 MHz at 10% consumption
        // = 10 MHz allocated -> 2.0 bit/s/Hz.
        let se =
            allocated_link_spectral_efficiency(2e9, 100.0, 100e6, 0.1).unwrap();
        assert!((se - 2.0).abs() < 1e-12);
    }

    #[test]
    fn al_se_undefined_at_zero_consumption() {
        assert!(allocated_link_spectral_efficiency(1e9, 100.0, 100e6, 0.0).is_err());
    }

    #[test]
    fn mos_top_rung_no_stalls_is_five() {
        let plays: Vec<SegPlay> = (0..15).map(|_| play(20_000_000, 0.0)).collect();
        assert_eq!(mos(&plays, 20_000_000, &QoeConfig::default()), 5.0);
    }

    #[test]
    fn mos_single_two_second_stall() {
        // 15 segments at the top rung with one 2 s stall:
        // clamp(5 - 1.5 - 0.2) = 3.3.
        let mut plays: Vec<SegPlay> = (0..15).map(|_| play(20_000_000, 0.0)).collect();
        plays[7].stall_s = 2.0;
        let m = mos(&plays, 20_000_000, &QoeConfig::default());
        assert!((m - 3.3).abs() < 1e-12);
    }

    #[test]
    fn mos_clamps_to_one() {
        let plays: Vec<SegPlay> = (0..15).map(|_| play(1_000_000, 3.0)).collect();
        assert_eq!(mos(&plays, 20_000_000, &QoeConfig::default()), 1.0);
    }

    #[test]
    fn adjacent_stalled_positions_are_one_episode() {
        let mut plays: Vec<SegPlay> = (0..10).map(|_| play(20_000_000, 0.0)).collect();
        plays[3].stall_s = 0.5;
        plays[4].stall_s = 0.5;
        plays[8].stall_s = 0.5;
        assert_eq!(stall_episodes(&plays), 2);
    }

    #[test]
    fn final_mos_uses_trailing_window() {
        // Early misery followed by 15 clean top-rung segments scores 5.
        let mut plays: Vec<SegPlay> = (0..10).map(|_| play(1_000_000, 5.0)).collect();
        plays.extend((0..15).map(|_| play(20_000_000, 0.0)));
        let m = final_mos(&plays, false, 20_000_000, &QoeConfig::default());
        assert_eq!(m, 5.0);
    }

    #[test]
    fn quit_ue_scores_one() {
        let plays: Vec<SegPlay> = (0..15).map(|_| play(20_000_000, 0.0)).collect();
        assert_eq!(final_mos(&plays, true, 20_000_000, &QoeConfig::default()), 1.0);
    }

    #[test]
    fn cdf_is_monotone_and_ends_at_one() {
        let cdf = empirical_cdf(&[3.0, 1.0, 5.0, 3.0, 4.2]);
        assert_eq!(cdf.first().unwrap().0, 1.0);
        assert_eq!(cdf.last().unwrap(), &(5.0, 1.0));
        for w in cdf.windows(2) {
            assert!(w[0].0 < w[1].0);
            assert!(w[0].1 < w[1].1);
        }
        // Two of five samples <= 3.0.
        let at3 = cdf.iter().find(|(v, _)| *v == 3.0).unwrap();
        assert!((at3.1 - 0.6).abs() < 1e-12);
    }

    #[test]
    fn fraction_at_max_counts_exact_fives() {
        assert_eq!(fraction_at_max(&[5.0, 5.0, 4.999, 1.0]), 0.5);
    }
}
