//! Write a full artifact tree for one run and show how the KPI layer scores
//! it: the KPI report text, the quality CDF, and a deterministic-replay
//! check (two runs, byte-identical artifacts).
//!
//!     cargo run --release --example kpi_report [out_dir]

use std::path::PathBuf;

use mcast_sim::{report, runner, scenario};

fn main() {
    let out_dir = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "runs/kpi-report-example".to_string()),
    );

    let mut cfg = scenario::preset("ptm-multilink").expect("builtin preset");
    cfg.seed = 11;
    let run = runner::run(cfg.clone()).expect("run");
    report::write_run(&out_dir, &run).expect("write artifacts");
    println!("artifacts written to {}\n", out_dir.display());
    print!("{}", report::kpi_text(&run));

    println!("\nquality CDF:");
    for (mos, frac) in &run.kpi.qoe_cdf {
        println!("  MOS <= {mos:.3}: {:.0}% of UEs", frac * 100.0);
    }

    // Determinism: the same config and seed reproduce the KPI text exactly.
    let replay = runner::run(cfg).expect("replay");
    let identical = report::kpi_text(&run) == report::kpi_text(&replay);
    println!("\nreplay with the same seed is byte-identical: {identical}");
}
