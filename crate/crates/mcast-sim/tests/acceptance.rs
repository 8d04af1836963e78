//! End-to-end acceptance suite. Each test covers one acceptance criterion and
//! prints a single `criterion NN (<name>): PASS|FAIL` line; run with
//! `cargo test --test acceptance -- --nocapture` to see the lines as the
//! suite progresses.
//!
//! The three headline criteria (resource ordering, spectral-efficiency gain,
//! quality ordering) share one run matrix: the three delivery presets, each
//! replayed under five seeds, built once behind a `OnceLock`.

use std::sync::OnceLock;
use std::time::Instant;

use mcast_sim::delivery::{ContentId, LinkTag, Packet};
use mcast_sim::kernel::{RngStream, SimTime};
use mcast_sim::kpi;
use mcast_sim::multilink::MergeBuffer;
use mcast_sim::runner::{self, RunOutput, TraceKind, UeReport};
use mcast_sim::scenario::{preset, LossBurst, Outage, Placement};

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const WALL_BUDGET_S: f64 = 60.0;

struct Case {
    seed: u64,
    out: RunOutput,
    wall_s: f64,
}

struct Matrix {
    ptp: Vec<Case>,
    ptm: Vec<Case>,
    ml: Vec<Case>,
}

fn run_preset(name: &str, seed: u64) -> Case {
    let mut cfg = preset(name).unwrap_or_else(|| panic!("preset {name}"));
    cfg.seed = seed;
    let start = Instant::now();
    let out = runner::run(cfg).unwrap_or_else(|e| panic!("{name} seed {seed}: {e}"));
    Case {
        seed,
        out,
        wall_s: start.elapsed().as_secs_f64(),
    }
}

fn matrix() -> &'static Matrix {
    static M: OnceLock<Matrix> = OnceLock::new();
    M.get_or_init(|| Matrix {
        ptp: SEEDS.iter().map(|&s| run_preset("ptp-only", s)).collect(),
        ptm: SEEDS.iter().map(|&s| run_preset("ptm-only", s)).collect(),
        ml: SEEDS
            .iter()
            .map(|&s| run_preset("ptm-multilink", s))
            .collect(),
    })
}

/// Print the one-line verdict and fail the test if the criterion failed.
fn verdict(n: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {n:02} ({name}): {}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {n:02} ({name}) failed: {detail}");
}

// ---------------------------------------------------------------------
// Criterion 1: resource consumption ordering ptm < ptm-ml < ptp on the
// default scenario, for every seed, within the wall-clock budget.
// ---------------------------------------------------------------------

#[test]
fn criterion_01_resource_consumption_ordering() {
    let m = matrix();
    let mut pass = true;
    let mut detail = String::new();
    for i in 0..SEEDS.len() {
        let (a, b, c) = (
            m.ptm[i].out.kpi.avg_resource_consumption,
            m.ml[i].out.kpi.avg_resource_consumption,
            m.ptp[i].out.kpi.avg_resource_consumption,
        );
        if !(a < b && b < c) {
            pass = false;
        }
        detail.push_str(&format!(
            "seed {}: ptm {a:.6} | ptm-ml {b:.6} | ptp {c:.6}\n",
            SEEDS[i]
        ));
        for case in [&m.ptm[i], &m.ml[i], &m.ptp[i]] {
            if case.wall_s >= WALL_BUDGET_S {
                pass = false;
                detail.push_str(&format!(
                    "seed {} exceeded the wall budget: {:.1}s\n",
                    case.seed, case.wall_s
                ));
            }
        }
    }
    verdict(1, "resource consumption ordering", pass, &detail);
}

// ---------------------------------------------------------------------
// Criterion 2: allocated-link spectral efficiency gain of multicast with
// multi-link over pure unicast is at least 1.3x for every seed.
// ---------------------------------------------------------------------

#[test]
fn criterion_02_spectral_efficiency_gain() {
    let m = matrix();
    let mut pass = true;
    let mut detail = String::new();
    for i in 0..SEEDS.len() {
        let se_ml = m.ml[i].out.kpi.al_se_bits_per_s_per_hz.unwrap_or(0.0);
        let se_ptp = m.ptp[i].out.kpi.al_se_bits_per_s_per_hz.unwrap_or(f64::NAN);
        let ratio = se_ml / se_ptp;
        if !(ratio >= 1.3) {
            pass = false;
        }
        detail.push_str(&format!(
            "seed {}: al-se ptm-ml {se_ml:.2} / ptp {se_ptp:.2} = {ratio:.3}\n",
            SEEDS[i]
        ));
    }
    verdict(2, "spectral efficiency gain >= 1.3", pass, &detail);
}

// ---------------------------------------------------------------------
// Criterion 3: fraction of UEs finishing at the maximum quality score is
// ordered ptm < ptm-ml <= ptp for every seed, with ptm-ml in [0.80, 1.00]
// and ptp in [0.90, 1.00].
// ---------------------------------------------------------------------

#[test]
fn criterion_03_quality_fraction_ordering() {
    let m = matrix();
    let mut pass = true;
    let mut detail = String::new();
    for i in 0..SEEDS.len() {
        let (a, b, c) = (
            m.ptm[i].out.kpi.fraction_at_max_mos,
            m.ml[i].out.kpi.fraction_at_max_mos,
            m.ptp[i].out.kpi.fraction_at_max_mos,
        );
        if !(a < b && b <= c) {
            pass = false;
        }
        if !(0.80 - 1e-12..=1.0 + 1e-12).contains(&b) {
            pass = false;
        }
        if !(0.90 - 1e-12..=1.0 + 1e-12).contains(&c) {
            pass = false;
        }
        detail.push_str(&format!(
            "seed {}: at-max ptm {a:.2} | ptm-ml {b:.2} | ptp {c:.2}\n",
            SEEDS[i]
        ));
    }
    verdict(3, "fraction at max quality ordering", pass, &detail);
}

// ---------------------------------------------------------------------
// Criterion 4: audience-driven bearer switching. A scripted audience ramp
// 1 -> N -> 1 with thresholds (2 up, 1 down) produces exactly two switches,
// no switch-attributable stalls, and broadcast resource usage independent of
// the audience size.
// ---------------------------------------------------------------------

#[test]
fn criterion_04_audience_driven_switching() {
    let mut cfg = preset("mood-demo").unwrap();
    cfg.seed = 3;
    cfg.mood.audience_max = cfg.num_ues(); // ramp all the way to N = 6
    cfg.radio.ue_speed_kmph = 0.0;
    // Pin every viewer well inside coverage with no shadowing so any stall
    // would be attributable to the switches, not to the radio.
    cfg.placements = (0..cfg.num_ues())
        .map(|ue| Placement {
            ue,
            radius_m: 30.0 + 8.0 * ue as f64,
            angle_deg: 60.0 * ue as f64,
            heading_deg: 0.0,
            shadowing_db: Some(0.0),
        })
        .collect();
    let out = runner::run(cfg).unwrap();

    let mut pass = true;
    let mut detail = String::new();

    // Exactly two switches: up when the audience reaches the activation
    // threshold (2), down when it falls back to the deactivation threshold.
    detail.push_str(&format!("switches: {}\n", out.switches.len()));
    for s in &out.switches {
        detail.push_str(&format!(
            "  {} -> {} decided {} effective {} audience {}\n",
            s.from, s.to, s.decided_at, s.effective_at, s.audience
        ));
    }
    if out.switches.len() != 2 {
        pass = false;
    } else {
        let up = &out.switches[0];
        let down = &out.switches[1];
        if up.from.to_string() != "unicast" || up.to.to_string() != "broadcast" {
            pass = false;
        }
        if down.from.to_string() != "broadcast" || down.to.to_string() != "unicast" {
            pass = false;
        }
        if up.audience != 2 || down.audience != 1 {
            pass = false;
        }
    }

    // No stalls anywhere in the run (buffer target exceeds switch latency
    // plus one segment, so clean switches must not interrupt playback).
    for u in &out.ues {
        let stall_events = u
            .trace
            .iter()
            .filter(|e| e.event == TraceKind::StallStart)
            .count();
        if stall_events > 0 || u.stall_episodes > 0 {
            pass = false;
            detail.push_str(&format!(
                "UE {} stalled: {} events, {} episodes\n",
                u.ue, stall_events, u.stall_episodes
            ));
        }
    }

    // Broadcast resource usage is audience-independent: mean multicast PRBs
    // per cell while 2 viewers watch equals the mean while all N watch,
    // within one PRB.
    let per_cell_mean = |from_s: u64, to_s: u64| -> f64 {
        let rows: Vec<_> = out
            .resource
            .rows
            .iter()
            .filter(|r| r.tti >= from_s * 1000 && r.tti < to_s * 1000)
            .collect();
        let sum: u64 = rows.iter().map(|r| r.prbs_multicast as u64).sum();
        sum as f64 / rows.len() as f64 / 3.0
    };
    let at_two = per_cell_mean(14, 19); // audience = 2 (broadcast active)
    let at_max = per_cell_mean(52, 58); // audience = N
    detail.push_str(&format!(
        "mcast PRBs/cell: audience 2 -> {at_two:.2}, audience max -> {at_max:.2}\n"
    ));
    if (at_two - at_max).abs() > 1.0 {
        pass = false;
    }
    if at_max <= 0.0 {
        pass = false; // broadcast must actually be carrying the stream
    }

    verdict(4, "audience-driven bearer switching", pass, &detail);
}

// ---------------------------------------------------------------------
// Criterion 5: merge oracle. 10,000 adversarial two-link delivery schedules
// (independent loss up to 30% per link, bounded reordering, duplication,
// every sequence number arriving at least once) must merge back into the
// exact source stream every single time.
// ---------------------------------------------------------------------

#[test]
fn criterion_05_merge_oracle() {
    const SCHEDULES: usize = 10_000;
    let mut rng = RngStream::new(42, "merge-oracle");
    let mut perfect = 0usize;
    let mut detail = String::new();

    for trial in 0..SCHEDULES {
        let n = 20 + (rng.next_u64() % 300);
        let loss_mcast = rng.uniform(0.0, 0.30);
        let loss_dup = rng.uniform(0.0, 0.30);
        let extra_dup_p = rng.uniform(0.0, 0.15);

        let source: Vec<Packet> = (0..n)
            .map(|seq| Packet {
                content: ContentId(0),
                segment_index: seq / 16,
                seq,
                payload_bytes: 400 + (seq * 37) % 1100,
                link_tag: LinkTag::Multicast,
            })
            .collect();

        // Build the arrival schedule: per-link loss, guaranteed union
        // coverage, occasional extra duplicates, bounded reordering.
        let mut arrivals: Vec<(f64, Packet)> = Vec::new();
        for p in &source {
            let on_mcast = rng.next_f64() >= loss_mcast;
            let mut on_dup = rng.next_f64() >= loss_dup;
            if !on_mcast && !on_dup {
                on_dup = true; // every seq arrives at least once
            }
            if on_mcast {
                arrivals.push((p.seq as f64 + rng.uniform(0.0, 60.0), *p));
            }
            if on_dup {
                let mut d = *p;
                d.link_tag = LinkTag::UnicastDuplicate;
                arrivals.push((p.seq as f64 + rng.uniform(0.0, 60.0), d));
            }
            if rng.next_f64() < extra_dup_p {
                // A second copy of an already-sent packet (pure duplication).
                arrivals.push((p.seq as f64 + rng.uniform(0.0, 60.0), *p));
            }
        }
        arrivals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

        let mut mb = MergeBuffer::new(256);
        let mut released: Vec<Packet> = Vec::new();
        for (i, (_, pkt)) in arrivals.iter().enumerate() {
            released.extend(mb.ingest(*pkt, SimTime(i as u64)).released);
        }

        let identical = released.len() == source.len()
            && mb.stats.declared_lost == 0
            && released.iter().zip(&source).all(|(r, s)| {
                r.seq == s.seq
                    && r.segment_index == s.segment_index
                    && r.content == s.content
                    && r.payload_bytes == s.payload_bytes
            });
        if identical {
            perfect += 1;
        } else if detail.is_empty() {
            detail = format!(
                "first failing schedule: trial {trial}, n {n}, released {} of {}, \
                 declared_lost {}",
                released.len(),
                source.len(),
                mb.stats.declared_lost
            );
        }
    }

    let pass = perfect == SCHEDULES;
    verdict(
        5,
        "merge oracle 10000/10000",
        pass,
        &format!("{perfect}/{SCHEDULES} byte-identical. {detail}"),
    );
}

// ---------------------------------------------------------------------
// Criterion 6: gap repair. A single isolated multicast packet loss with the
// repair path enabled and an adequate buffer causes zero stalls; with repair
// disabled the same loss produces a visible stall or playback gap.
// ---------------------------------------------------------------------

fn repair_scenario(repair: bool) -> RunOutput {
    let mut cfg = preset("ptm-only").unwrap();
    cfg.seed = 2;
    cfg.duration_s = 60;
    cfg.multilink.repair_enabled = repair;
    // Adequate margin for the retransmission: the default 256-packet window
    // covers only ~150 ms of stream, less than the repair timeout plus the
    // client-tick cadence.
    cfg.multilink.reorder_window = 1024;
    cfg.multilink.repair_timeout_ms = 50;
    // The observed UE sits at the center with pinned shadowing: the scripted
    // drop is its only loss.
    cfg.placements = vec![Placement {
        ue: 0,
        radius_m: 20.0,
        angle_deg: 0.0,
        heading_deg: 90.0,
        shadowing_db: Some(0.0),
    }];
    cfg.loss_bursts = vec![LossBurst {
        at_s: 30,
        ue: 0,
        packets: 1,
    }];
    runner::run(cfg).unwrap()
}

#[test]
fn criterion_06_single_loss_repair() {
    let with = repair_scenario(true);
    let without = repair_scenario(false);
    let mut pass = true;
    let mut detail = String::new();

    let gap_count = |u: &UeReport| u.plays.iter().filter(|p| p.bitrate_bps == 0).count();

    let u = &with.ues[0];
    let stats = u.merge_stats.expect("merge stats");
    detail.push_str(&format!(
        "repair on : stalls {}, gaps {}, repaired {}, lost {}\n",
        u.stall_episodes,
        gap_count(u),
        stats.repaired,
        stats.declared_lost
    ));
    if u.stall_episodes != 0 || gap_count(u) != 0 || stats.repaired < 1 {
        pass = false;
    }

    let u = &without.ues[0];
    let stats = u.merge_stats.expect("merge stats");
    detail.push_str(&format!(
        "repair off: stalls {}, gaps {}, repaired {}, lost {}\n",
        u.stall_episodes,
        gap_count(u),
        stats.repaired,
        stats.declared_lost
    ));
    if u.stall_episodes + gap_count(u) < 1 || stats.declared_lost < 1 {
        pass = false;
    }

    verdict(6, "single-loss repair", pass, &detail);
}

// ---------------------------------------------------------------------
// Criterion 7: KPI oracle equivalence. The production KPI code must agree
// with an independent brute-force implementation on 100 random micro-traces
// to within 1e-9 relative error.
// ---------------------------------------------------------------------

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn criterion_07_kpi_oracle_equivalence() {
    use mcast_sim::client::SegPlay;
    use mcast_sim::delivery::ResourceRow;

    const TRACES: usize = 100;
    let mut rng = RngStream::new(7, "kpi-oracle");
    let mut pass = true;
    let mut worst = 0.0f64;
    let mut detail = String::new();
    let qoe = kpi::QoeConfig::default();
    let top: u64 = 20_000_000;

    for trial in 0..TRACES {
        // Random resource schedule: up to 100 TTIs.
        let ttis = 1 + (rng.next_u64() % 100) as usize;
        let rows: Vec<ResourceRow> = (0..ttis)
            .map(|t| {
                let mcast = (rng.next_u64() % 219) as u32;
                let uni = (rng.next_u64() % (273 - mcast as u64)) as u32;
                ResourceRow {
                    tti: t as u64,
                    prbs_multicast: mcast,
                    prbs_unicast: uni,
                    prbs_total: 273,
                }
            })
            .collect();

        // Brute-force consumption: exact integer sums, divided once.
        let used: u128 = rows
            .iter()
            .map(|r| r.prbs_multicast as u128 + r.prbs_unicast as u128)
            .sum();
        let total: u128 = rows.iter().map(|r| r.prbs_total as u128).sum();
        let brute_consumption = used as f64 / total as f64;
        let got = kpi::resource_consumption(&rows).unwrap();
        let e = rel_err(got, brute_consumption);
        worst = worst.max(e);
        if e > 1e-9 {
            pass = false;
            detail.push_str(&format!("trial {trial}: consumption err {e:.3e}\n"));
        }

        // Brute-force spectral efficiency from its definition.
        let bits = rng.uniform(1e6, 1e10);
        let dur = ttis as f64 / 1000.0;
        let bw = 100e6;
        let brute_se = bits / dur / (bw * brute_consumption);
        let got_se =
            kpi::allocated_link_spectral_efficiency(bits, dur, bw, got).unwrap();
        let e = rel_err(got_se, brute_se);
        worst = worst.max(e);
        if e > 1e-9 {
            pass = false;
            detail.push_str(&format!("trial {trial}: al-se err {e:.3e}\n"));
        }

        // Brute-force session MOS for up to 5 UEs with random play traces.
        let num_ues = 1 + (rng.next_u64() % 5) as usize;
        let mut per_ue = Vec::new();
        for _ in 0..num_ues {
            let plays: Vec<SegPlay> = (0..(1 + rng.next_u64() % 100))
                .map(|i| SegPlay {
                    index: i,
                    bitrate_bps: [0, 600_000, 5_000_000, 20_000_000]
                        [(rng.next_u64() % 4) as usize],
                    stall_s: if rng.next_f64() < 0.2 {
                        rng.uniform(0.1, 3.0)
                    } else {
                        0.0
                    },
                })
                .collect();

            // Independent re-derivation: mean bitrate term, stall episodes by
            // explicit run-length scan, linear penalties, clamped to [1, 5].
            let mean_bps: f64 = plays.iter().map(|p| p.bitrate_bps as f64).sum::<f64>()
                / plays.len() as f64;
            let mut episodes = 0usize;
            for (i, p) in plays.iter().enumerate() {
                if p.stall_s > 0.0 && (i == 0 || plays[i - 1].stall_s == 0.0) {
                    episodes += 1;
                }
            }
            let stall_total: f64 = plays.iter().map(|p| p.stall_s).sum();
            let brute_mos = (1.0 + 4.0 * mean_bps / top as f64
                - 1.5 * episodes as f64
                - 0.1 * stall_total)
                .clamp(1.0, 5.0);

            let got_mos = kpi::mos(&plays, top, &qoe);
            let e = rel_err(got_mos, brute_mos);
            worst = worst.max(e);
            if e > 1e-9 {
                pass = false;
                detail.push_str(&format!("trial {trial}: mos err {e:.3e}\n"));
            }
            per_ue.push(got_mos);
        }

        // Brute-force fraction at max.
        let brute_frac = per_ue.iter().filter(|&&m| m >= 5.0 - 1e-9).count() as f64
            / per_ue.len() as f64;
        let e = rel_err(kpi::fraction_at_max(&per_ue), brute_frac);
        worst = worst.max(e);
        if e > 1e-9 {
            pass = false;
            detail.push_str(&format!("trial {trial}: fraction err {e:.3e}\n"));
        }
    }

    verdict(
        7,
        "kpi oracle equivalence",
        pass,
        &format!("worst relative error {worst:.3e}\n{detail}"),
    );
}

// ---------------------------------------------------------------------
// Criterion 8: public-warning alert. 30 UEs including 3 non-capable and one
// multicast-edge UE all receive the alert; broadcast resource usage does not
// depend on how many UEs are capable; the non-capable and edge deliveries
// are labeled as unicast.
// ---------------------------------------------------------------------

fn alert_scenario(non_capable: Vec<usize>) -> RunOutput {
    let mut cfg = preset("pw-alert").unwrap();
    cfg.seed = 1;
    cfg.radio.ue_speed_kmph = 0.0;
    // Robust-but-not-free carousel MCS: decodable from the interior of the
    // deployment, not from the rim where the edge UE is pinned.
    cfg.alert.mcs_index = 11;
    cfg.alert.non_capable_ues = non_capable;
    // Deterministic geometry: 29 interior UEs plus one at the rim.
    cfg.placements = (0..cfg.num_ues())
        .map(|ue| {
            if ue == 7 {
                Placement {
                    ue,
                    radius_m: 150.0,
                    angle_deg: 30.0,
                    heading_deg: 200.0,
                    shadowing_db: Some(0.0),
                }
            } else {
                Placement {
                    ue,
                    radius_m: 20.0 + (ue % 7) as f64 * 9.0,
                    angle_deg: ue as f64 * 12.0,
                    heading_deg: 0.0,
                    shadowing_db: Some(0.0),
                }
            }
        })
        .collect();
    runner::run(cfg).unwrap()
}

#[test]
fn criterion_08_public_warning_alert() {
    let base = alert_scenario(vec![4, 11, 23]);
    let more = alert_scenario(vec![2, 3, 4, 5, 11, 19, 23]);
    let mut pass = true;
    let mut detail = String::new();

    let reached = base.ues.iter().filter(|u| u.alert_reached_at.is_some()).count();
    detail.push_str(&format!("reached: {reached}/30\n"));
    if reached != 30 {
        pass = false;
    }

    // Path labels: scripted non-capable UEs and the rim UE fall back to
    // unicast, everyone else decodes the broadcast carousel.
    for u in &base.ues {
        let want = if [4usize, 11, 23, 7].contains(&u.ue) {
            "unicast"
        } else {
            "multicast"
        };
        let got = u.alert_path.as_deref().unwrap_or("none");
        if got != want {
            pass = false;
            detail.push_str(&format!("UE {}: path {got}, expected {want}\n", u.ue));
        }
    }

    // Broadcast usage is independent of the capable count.
    let mcast_prbs = |r: &RunOutput| -> u64 {
        r.resource.rows.iter().map(|x| x.prbs_multicast as u64).sum()
    };
    let (a, b) = (mcast_prbs(&base), mcast_prbs(&more));
    detail.push_str(&format!("mcast PRBs: base {a}, larger non-capable set {b}\n"));
    if a != b || a == 0 {
        pass = false;
    }
    let reached_more = more.ues.iter().filter(|u| u.alert_reached_at.is_some()).count();
    if reached_more != 30 {
        pass = false;
        detail.push_str(&format!("second run reached only {reached_more}/30\n"));
    }

    verdict(8, "public warning alert", pass, &detail);
}

// ---------------------------------------------------------------------
// Criterion 9: determinism. The same preset and seed must reproduce the
// entire output tree byte for byte.
// ---------------------------------------------------------------------

#[test]
fn criterion_09_deterministic_replay() {
    let dirs = tempfile::tempdir().unwrap();
    let (dir_a, dir_b) = (dirs.path().join("a"), dirs.path().join("b"));
    for dir in [&dir_a, &dir_b] {
        let mut cfg = preset("ptm-multilink").unwrap();
        cfg.seed = 7;
        let out = runner::run(cfg).unwrap();
        std::fs::create_dir_all(dir).unwrap();
        mcast_sim::report::write_run(dir, &out).unwrap();
    }

    let mut names_a: Vec<String> = std::fs::read_dir(&dir_a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names_a.sort();
    let mut names_b: Vec<String> = std::fs::read_dir(&dir_b)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names_b.sort();

    let mut pass = names_a == names_b && !names_a.is_empty();
    let mut detail = format!("{} artifacts\n", names_a.len());
    if pass {
        for name in &names_a {
            let a = std::fs::read(dir_a.join(name)).unwrap();
            let b = std::fs::read(dir_b.join(name)).unwrap();
            if a != b {
                pass = false;
                detail.push_str(&format!("{name} differs between replays\n"));
            }
        }
    } else {
        detail.push_str("artifact lists differ\n");
    }

    verdict(9, "deterministic replay", pass, &detail);
}

// ---------------------------------------------------------------------
// Criterion 10: session abandonment. A scripted starvation makes the client
// quit exactly 30 s after progress stopped (following a failed cancellation),
// with zero traffic delivered afterwards and a bottom score in the CDF.
// ---------------------------------------------------------------------

#[test]
fn criterion_10_starvation_quit() {
    let mut cfg = preset("ptp-only").unwrap();
    cfg.seed = 4;
    cfg.duration_s = 150;
    cfg.outages = vec![Outage {
        ue: 0,
        from_s: 60,
        to_s: 150,
    }];
    let quit_timer = cfg.client.quit_timer_s;
    let out = runner::run(cfg).unwrap();
    let u = &out.ues[0];

    let mut pass = true;
    let mut detail = String::new();

    // Quit lands one client tick after the 30 s no-progress timer expires,
    // measured from the last delivery before the outage began.
    let quit_s = u.quit_at.map(|t| t.as_secs_f64());
    detail.push_str(&format!("quit at {quit_s:?} (outage from 60.0)\n"));
    match quit_s {
        Some(t) => {
            if (t - (60.0 + quit_timer)).abs() > 0.1 + 1e-9 {
                pass = false;
            }
        }
        None => pass = false,
    }

    // The quit followed a failed cancel-and-replace attempt.
    let cancels_after_outage = u
        .trace
        .iter()
        .filter(|e| e.event == TraceKind::Cancel && e.at.as_secs_f64() >= 60.0)
        .count();
    detail.push_str(&format!("cancels during starvation: {cancels_after_outage}\n"));
    if cancels_after_outage < 1 {
        pass = false;
    }

    // Zero traffic after the quit, and the abandoned session scores 1 in the
    // population CDF.
    detail.push_str(&format!(
        "bits after quit: {}, mean MOS {:.2}\n",
        u.bits_after_quit, u.mean_mos
    ));
    if u.bits_after_quit != 0.0 || u.mean_mos != 1.0 {
        pass = false;
    }
    let cdf_floor = out.kpi.qoe_cdf.first().map(|(v, _)| *v);
    if cdf_floor != Some(1.0) {
        pass = false;
        detail.push_str(&format!("CDF floor {cdf_floor:?}, expected 1.0\n"));
    }
    if out.kpi.quit_ues != 1 {
        pass = false;
        detail.push_str(&format!("quit UEs {}, expected 1\n", out.kpi.quit_ues));
    }

    verdict(10, "starvation quit timing", pass, &detail);
}
