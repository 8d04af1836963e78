//! Survey the radio model: drop the default 30-UE population, walk it for a
//! while, and print per-UE SINR statistics for both the MBSFN (multicast)
//! observable and the beamformed unicast link.
//!
//! Run with: cargo run --release --example radio_survey [seed]

use mcast_sim::kernel::{RngStream, SimTime};
use mcast_sim::radio::RadioModel;
use mcast_sim::scenario::preset;

fn main() {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1);
    let mut cfg = preset("ptm-only").unwrap();
    if let Some(offset) = std::env::args().nth(2).and_then(|s| s.parse().ok()) {
        cfg.topology.ring_power_offset_db = offset;
    }
    let mut mobility = RngStream::new(seed, "mobility");
    let mut channel = RngStream::new(seed, "channel");
    let mut radio = RadioModel::new(
        cfg.radio.cell_config(),
        cfg.radio.ue_config(),
        cfg.radio.propagation(),
        cfg.topology.topology(),
        &mut mobility,
        &mut channel,
    );

    let n = radio.num_ues();
    let steps = 3000; // 300 s at 100 ms per step
    let mut mbsfn_min = vec![f64::MAX; n];
    let mut mbsfn_sum = vec![0.0; n];
    let mut uni_min = vec![f64::MAX; n];
    let mut below3 = vec![0u32; n];
    let mut below5 = vec![0u32; n];

    for _ in 0..steps {
        radio.mobility_step(SimTime::from_ms(100));
        for ue in 0..n {
            let m = radio.link_quality(ue).sinr_mbsfn_db;
            let u = radio.unicast_link_sinr_db(ue);
            mbsfn_min[ue] = mbsfn_min[ue].min(m);
            mbsfn_sum[ue] += m;
            uni_min[ue] = uni_min[ue].min(u);
            if m < 3.0 {
                below3[ue] += 1;
            }
            if m < 5.0 {
                below5[ue] += 1;
            }
        }
    }

    println!("ue  r0_m  mbsfn_mean  mbsfn_min  uni_min  %t<3dB  %t<5dB");
    for ue in 0..n {
        let p = radio.ue_pos(ue);
        println!(
            "{ue:>2}  {:>5.0}  {:>9.2}  {:>8.2}  {:>7.2}  {:>6.1}  {:>6.1}",
            (p.x * p.x + p.y * p.y).sqrt(),
            mbsfn_sum[ue] / steps as f64,
            mbsfn_min[ue],
            uni_min[ue],
            100.0 * below3[ue] as f64 / steps as f64,
            100.0 * below5[ue] as f64 / steps as f64,
        );
    }
    let frac5 = below5.iter().filter(|&&c| c > 0).count();
    let frac3 = below3.iter().filter(|&&c| c > 0).count();
    println!("UEs ever below 5 dB (dup candidates): {frac5}/{n}");
    println!("UEs ever below 3 dB (ptm damage candidates): {frac3}/{n}");
    let avg_dup: f64 = below5.iter().map(|&c| c as f64).sum::<f64>() / steps as f64;
    println!("mean simultaneous UEs below 5 dB: {avg_dup:.2}");
}
