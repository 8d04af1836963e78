//! Public-warning alert delivery: a file is broadcast cyclically over
//! multicast; receive-only-incapable UEs and UEs outside the robust-MCS
//! footprint fall back to unicast. Prints when and how each UE received the
//! alert.
//!
//!     cargo run --release --example pw_alert

use mcast_sim::runner;
use mcast_sim::scenario::preset;

fn main() {
    let cfg = preset("pw-alert").expect("builtin preset");
    println!(
        "alert: trigger {}s, {} bytes, {} carousel rounds, non-capable UEs {:?}\n",
        cfg.alert.trigger_s, cfg.alert.file_bytes, cfg.alert.carousel_rounds, cfg.alert.non_capable_ues
    );

    let out = runner::run(cfg).expect("run");

    let mut reached = 0;
    for u in &out.ues {
        let (at, path) = match (&u.alert_reached_at, &u.alert_path) {
            (Some(t), Some(p)) => {
                reached += 1;
                (format!("{:.3}s", t.as_secs_f64()), p.clone())
            }
            _ => ("never".to_string(), "-".to_string()),
        };
        println!("  UE {:>2}  reached {at:>8}  via {path}", u.ue);
    }
    println!("\n{reached}/{} UEs reached", out.ues.len());

    let mcast_prbs: u64 = out.resource.rows.iter().map(|r| r.prbs_multicast as u64).sum();
    println!("total broadcast PRBs spent on the carousel: {mcast_prbs}");
}
