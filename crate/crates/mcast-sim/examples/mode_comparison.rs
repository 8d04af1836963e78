//! Run the three delivery presets (unicast, multicast, multicast with
//! multi-link) under the same seed and print the headline KPIs side by side:
//! resource consumption, allocated-link spectral efficiency, and the share
//! of UEs finishing at the maximum quality score.
//!
//!     cargo run --release --example mode_comparison [seed]

use mcast_sim::kpi::AL_SE_CAVEAT;
use mcast_sim::runner;
use mcast_sim::scenario::preset;

fn main() {
    let seed: u64 = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("seed must be an integer"))
        .unwrap_or(1);

    println!("{:<16} {:>12} {:>14} {:>12} {:>10}", "preset", "consumption", "al-se b/s/Hz", "at-max-mos", "quit");
    for name in ["ptp-only", "ptm-only", "ptm-multilink"] {
        let mut cfg = preset(name).expect("builtin preset");
        cfg.seed = seed;
        let out = runner::run(cfg).expect("run");
        let k = &out.kpi;
        println!(
            "{:<16} {:>12.6} {:>14.3} {:>12.3} {:>10}",
            name,
            k.avg_resource_consumption,
            k.al_se_bits_per_s_per_hz.unwrap_or(f64::NAN),
            k.fraction_at_max_mos,
            k.quit_ues
        );
    }
    println!("\nal-se caveat: {AL_SE_CAVEAT}");
}
