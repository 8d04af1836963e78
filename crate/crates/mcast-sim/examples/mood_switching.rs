//! Audience-driven bearer switching: a scripted audience ramps 1 -> 3 -> 1
//! while the controller moves the stream between unicast and broadcast.
//! Prints the audience timeline, every switch decision, and the per-UE
//! outcome.
//!
//!     cargo run --release --example mood_switching

use mcast_sim::runner;
use mcast_sim::scenario::preset;

fn main() {
    let cfg = preset("mood-demo").expect("builtin preset");
    println!("audience timeline:");
    for step in cfg.mood.timeline() {
        println!("  t={:>4}s  viewers={}", step.at_s, step.count);
    }
    println!(
        "thresholds: activate at >= {}, deactivate at <= {}, switch latency {}s\n",
        cfg.mood.activation_threshold, cfg.mood.deactivation_threshold, cfg.mood.switch_latency_s
    );

    let out = runner::run(cfg).expect("run");

    println!("switches:");
    for s in &out.switches {
        println!(
            "  decided {}  effective {}  {} -> {}  (audience {})",
            s.decided_at, s.effective_at, s.from, s.to, s.audience
        );
    }

    println!("\nper-UE outcome:");
    for u in &out.ues {
        println!(
            "  UE {:>2}  mean MOS {:.2}  stalls {}  delivered {:.1} Mbit",
            u.ue,
            u.mean_mos,
            u.stall_episodes,
            u.delivered_bits / 1e6
        );
    }
}
