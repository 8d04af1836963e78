//! Run artifact writers and the cross-run comparison tool.
//!
//! Every file is written with fixed formatting (stable float precision, no
//! timestamps, no map iteration order) so a repeated run with the same
//! config and seed produces a byte-identical output tree. CSV column orders
//! are part of the external contract.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::SimError;
use crate::kpi::AL_SE_CAVEAT;
use crate::runner::RunOutput;
use crate::scenario::ScenarioConfig;

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const RESOURCE_FILE: &str = "resource.csv";
pub const KPI_FILE: &str = "kpi_report.txt";
pub const MOS_SERIES_FILE: &str = "mos_series.csv";
pub const QOE_CDF_FILE: &str = "qoe_cdf.csv";
pub const SWITCHES_FILE: &str = "switches.csv";
pub const UE_SUMMARY_FILE: &str = "ue_summary.csv";

fn write_file(dir: &Path, name: &str, content: &str) -> Result<(), SimError> {
    let path = dir.join(name);
    fs::write(&path, content).map_err(|e| SimError::io(&path, e))
}

pub fn trace_file_name(ue: usize) -> String {
    format!("ue_{ue:03}_trace.csv")
}

/// Write the run manifest: resolved config snapshot, software version and
/// seed. Called before the simulation starts; the per-file digest table is
/// appended by [`append_digests`] once the artifacts exist.
pub fn write_manifest(dir: &Path, cfg: &ScenarioConfig) -> Result<(), SimError> {
    fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
    let mut out = String::new();
    let _ = writeln!(out, "version = \"{}\"", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "seed = {}", cfg.seed);
    let _ = writeln!(out);
    let _ = writeln!(out, "[config]");
    // The snapshot is the scenario's own serialization, nested one level down.
    for line in cfg.to_toml_string().lines() {
        if let Some(rest) = line.strip_prefix("[[") {
            let _ = writeln!(out, "[[config.{rest}");
        } else if let Some(rest) = line.strip_prefix('[') {
            let _ = writeln!(out, "[config.{rest}");
        } else {
            let _ = writeln!(out, "{line}");
        }
    }
    write_file(dir, MANIFEST_FILE, &out)
}

/// Append the sha256 digest of every other artifact to the manifest.
pub fn append_digests(dir: &Path) -> Result<(), SimError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let mut names: Vec<String> = Vec::new();
    let entries = fs::read_dir(dir).map_err(|e| SimError::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| SimError::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().to_string();
        if name != MANIFEST_FILE {
            names.push(name);
        }
    }
    names.sort();
    let mut out = String::from("\n[digests]\n");
    for name in names {
        let path = dir.join(&name);
        let data = fs::read(&path).map_err(|e| SimError::io(&path, e))?;
        let digest = Sha256::digest(&data);
        let _ = writeln!(out, "\"{name}\" = \"{digest:x}\"");
    }
    let mut manifest =
        fs::read_to_string(&manifest_path).map_err(|e| SimError::io(&manifest_path, e))?;
    manifest.push_str(&out);
    fs::write(&manifest_path, manifest).map_err(|e| SimError::io(&manifest_path, e))
}

pub fn resource_csv(run: &RunOutput) -> String {
    let mut out = String::from("tti,prbs_multicast,prbs_unicast,prbs_total\n");
    for r in &run.resource.rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.tti, r.prbs_multicast, r.prbs_unicast, r.prbs_total
        );
    }
    out
}

pub fn trace_csv(run: &RunOutput, ue: usize) -> String {
    let mut out = String::from("time,event,rung,buffer_s\n");
    for t in &run.ues[ue].trace {
        let _ = writeln!(
            out,
            "{:.3},{},{},{:.3}",
            t.at.as_secs_f64(),
            t.event,
            t.rung,
            t.buffer_s
        );
    }
    out
}

pub fn switches_csv(run: &RunOutput) -> String {
    let mut out = String::from("decided_at,effective_at,from,to,audience\n");
    for s in &run.switches {
        let _ = writeln!(
            out,
            "{:.3},{:.3},{},{},{}",
            s.decided_at.as_secs_f64(),
            s.effective_at.as_secs_f64(),
            s.from,
            s.to,
            s.audience
        );
    }
    out
}

pub fn mos_series_csv(run: &RunOutput) -> String {
    let mut out = String::from("time,ue,mos\n");
    // Rows ordered by time, then UE, for a plottable long-format series.
    let mut rows: Vec<(u64, usize, f64)> = Vec::new();
    for u in &run.ues {
        for (at, m) in &u.mos_series {
            rows.push((at.ticks(), u.ue, *m));
        }
    }
    rows.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    for (ticks, ue, m) in rows {
        let _ = writeln!(out, "{:.3},{},{:.6}", ticks as f64 / 1000.0, ue, m);
    }
    out
}

pub fn qoe_cdf_csv(run: &RunOutput) -> String {
    let mut out = String::from("mos,cum_fraction\n");
    for (v, f) in &run.kpi.qoe_cdf {
        let _ = writeln!(out, "{v:.6},{f:.6}");
    }
    out
}

pub fn ue_summary_csv(run: &RunOutput) -> String {
    let mut out = String::from(
        "ue,path,mean_mos,quit_at,stall_episodes,stall_s,delivered_bits,dup_ticks,alert_reached_at,alert_path\n",
    );
    for u in &run.ues {
        let quit = u
            .quit_at
            .map(|t| format!("{:.3}", t.as_secs_f64()))
            .unwrap_or_default();
        let alert_at = u
            .alert_reached_at
            .map(|t| format!("{:.3}", t.as_secs_f64()))
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{:.6},{},{},{:.3},{:.0},{},{},{}",
            u.ue,
            u.path,
            u.mean_mos,
            quit,
            u.stall_episodes,
            u.stall_seconds,
            u.delivered_bits,
            u.dup_ticks,
            alert_at,
            u.alert_path.as_deref().unwrap_or_default()
        );
    }
    out
}

pub fn kpi_text(run: &RunOutput) -> String {
    let mut out = String::new();
    let k = &run.kpi;
    let _ = writeln!(out, "preset = {}", run.config.preset);
    let _ = writeln!(out, "mode = {}", run.config.mode);
    let _ = writeln!(out, "seed = {}", run.config.seed);
    let _ = writeln!(out, "duration_s = {:.3}", k.duration_s);
    let _ = writeln!(out, "num_ues = {}", run.ues.len());
    let _ = writeln!(out, "resource_consumption = {:.9}", k.avg_resource_consumption);
    match k.al_se_bits_per_s_per_hz {
        Some(v) => {
            let _ = writeln!(out, "al_se_bits_per_s_per_hz = {v:.9}");
        }
        None => {
            let _ = writeln!(out, "al_se_bits_per_s_per_hz = undefined");
        }
    }
    let _ = writeln!(out, "al_se_caveat = {AL_SE_CAVEAT}");
    let _ = writeln!(out, "source_bits = {:.0}", k.source_bits);
    if k.per_ue_mos.is_empty() {
        let _ = writeln!(out, "mean_mos = undefined");
        let _ = writeln!(out, "fraction_at_max_mos = undefined");
    } else {
        let mean = k.per_ue_mos.iter().sum::<f64>() / k.per_ue_mos.len() as f64;
        let _ = writeln!(out, "mean_mos = {mean:.6}");
        let _ = writeln!(out, "fraction_at_max_mos = {:.6}", k.fraction_at_max_mos);
    }
    let _ = writeln!(out, "quit_ues = {}", k.quit_ues);
    for w in &run.warnings {
        let _ = writeln!(out, "warning = {w}");
    }
    out
}

/// Write every artifact of a finished run and seal the manifest with digests.
/// [`write_manifest`] must have been called for the same directory first.
pub fn write_outputs(dir: &Path, run: &RunOutput) -> Result<(), SimError> {
    write_file(dir, RESOURCE_FILE, &resource_csv(run))?;
    for u in &run.ues {
        write_file(dir, &trace_file_name(u.ue), &trace_csv(run, u.ue))?;
    }
    write_file(dir, SWITCHES_FILE, &switches_csv(run))?;
    write_file(dir, KPI_FILE, &kpi_text(run))?;
    write_file(dir, MOS_SERIES_FILE, &mos_series_csv(run))?;
    write_file(dir, QOE_CDF_FILE, &qoe_cdf_csv(run))?;
    write_file(dir, UE_SUMMARY_FILE, &ue_summary_csv(run))?;
    append_digests(dir)
}

/// Full pipeline used by the CLI: manifest first (per the manifest
/// invariant), then the artifacts, then the digest seal.
pub fn write_run(dir: &Path, run: &RunOutput) -> Result<(), SimError> {
    write_manifest(dir, &run.config)?;
    write_outputs(dir, run)
}

// ---------------------------------------------------------------------
// Cross-run comparison.
// ---------------------------------------------------------------------

/// One parsed run directory.
#[derive(Debug)]
pub struct LoadedRun {
    pub dir: PathBuf,
    pub kpis: BTreeMap<String, String>,
    pub config: ScenarioConfig,
}

fn parse_kpi_text(text: &str) -> BTreeMap<String, String> {
    let mut map = BTreeMap::new();
    for line in text.lines() {
        if let Some((k, v)) = line.split_once(" = ") {
            // Repeated keys (warnings) keep the first occurrence.
            map.entry(k.trim().to_string())
                .or_insert_with(|| v.trim().to_string());
        }
    }
    map
}

/// Extract the `[config]` snapshot back out of a manifest.
fn config_from_manifest(text: &str) -> Result<ScenarioConfig, SimError> {
    let mut cfg_lines = String::new();
    let mut in_config = false;
    for line in text.lines() {
        if line == "[config]" {
            in_config = true;
            continue;
        }
        if in_config {
            if line == "[digests]" {
                break;
            }
            if let Some(rest) = line.strip_prefix("[[config.") {
                cfg_lines.push_str(&format!("[[{rest}\n"));
            } else if let Some(rest) = line.strip_prefix("[config.") {
                cfg_lines.push_str(&format!("[{rest}\n"));
            } else {
                cfg_lines.push_str(line);
                cfg_lines.push('\n');
            }
        }
    }
    ScenarioConfig::from_toml_str(&cfg_lines)
}

pub fn load_run(dir: &Path) -> Result<LoadedRun, SimError> {
    let kpi_path = dir.join(KPI_FILE);
    let kpi_txt = fs::read_to_string(&kpi_path).map_err(|e| SimError::io(&kpi_path, e))?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest = fs::read_to_string(&manifest_path).map_err(|e| SimError::io(&manifest_path, e))?;
    Ok(LoadedRun {
        dir: dir.to_path_buf(),
        kpis: parse_kpi_text(&kpi_txt),
        config: config_from_manifest(&manifest)?,
    })
}

/// Runs are comparable when they simulate the same deployment and content:
/// same duration, cell grid, UE count, bandwidth and bitrate ladder. The
/// delivery mode and its transport parameters are exactly what may differ.
fn check_compatible(runs: &[LoadedRun]) -> Result<(), SimError> {
    let Some(first) = runs.first() else { return Ok(()) };
    for r in &runs[1..] {
        let a = &first.config;
        let b = &r.config;
        let mismatch = |what: &str| {
            Err(SimError::Incompatible(format!(
                "{} vs {}: {} differs",
                first.dir.display(),
                r.dir.display(),
                what
            )))
        };
        if a.duration_s != b.duration_s {
            return mismatch("duration_s");
        }
        if a.num_ues() != b.num_ues() {
            return mismatch("UE count");
        }
        if (a.radio.bandwidth_mhz - b.radio.bandwidth_mhz).abs() > 1e-9 {
            return mismatch("bandwidth");
        }
        if a.topology.inter_site_distance_m != b.topology.inter_site_distance_m
            || a.topology.deployment_radius_m != b.topology.deployment_radius_m
        {
            return mismatch("topology");
        }
        if a.content.ladder != b.content.ladder {
            return mismatch("bitrate ladder");
        }
    }
    Ok(())
}

fn get_f64(run: &LoadedRun, key: &str) -> Option<f64> {
    run.kpis.get(key).and_then(|v| v.parse().ok())
}

/// Side-by-side KPI table plus optional delivery-mode ordering assertions.
pub fn compare(dirs: &[PathBuf], assert_orderings: bool) -> Result<String, SimError> {
    let runs: Vec<LoadedRun> = dirs
        .iter()
        .map(|d| load_run(d))
        .collect::<Result<_, _>>()?;
    check_compatible(&runs)?;

    let keys = [
        "preset",
        "mode",
        "seed",
        "resource_consumption",
        "al_se_bits_per_s_per_hz",
        "mean_mos",
        "fraction_at_max_mos",
        "quit_ues",
    ];
    let mut out = String::new();
    let _ = writeln!(out, "{} run(s) compared", runs.len());
    for key in keys {
        let _ = write!(out, "{key:>26}");
        for r in &runs {
            let v = r.kpis.get(key).map(String::as_str).unwrap_or("-");
            let _ = write!(out, "  {v:>16}");
        }
        let _ = writeln!(out);
    }
    let _ = writeln!(out, "al_se_caveat: {AL_SE_CAVEAT}");

    if assert_orderings {
        let find = |mode: &str| {
            runs.iter()
                .find(|r| r.kpis.get("mode").map(String::as_str) == Some(mode))
        };
        let (Some(ptm), Some(ptm_ml), Some(ptp)) = (find("ptm"), find("ptm-ml"), find("ptp"))
        else {
            return Err(SimError::Incompatible(
                "ordering assertions need one run each of modes ptm, ptm-ml and ptp".into(),
            ));
        };
        let mut failures = Vec::new();

        let c = (
            get_f64(ptm, "resource_consumption"),
            get_f64(ptm_ml, "resource_consumption"),
            get_f64(ptp, "resource_consumption"),
        );
        match c {
            (Some(k1), Some(k2), Some(k3)) => {
                if !(k1 < k2 && k2 < k3) {
                    failures.push(format!(
                        "consumption ordering violated: ptm {k1:.9} < ptm-ml {k2:.9} < ptp {k3:.9} expected"
                    ));
                }
            }
            _ => failures.push("resource_consumption missing in a run".into()),
        }

        match (
            get_f64(ptm_ml, "al_se_bits_per_s_per_hz"),
            get_f64(ptp, "al_se_bits_per_s_per_hz"),
        ) {
            (Some(ml), Some(uc)) if uc > 0.0 => {
                let ratio = ml / uc;
                if ratio < 1.3 {
                    failures.push(format!(
                        "AL-SE gain below 1.3: ptm-ml {ml:.9} / ptp {uc:.9} = {ratio:.3}"
                    ));
                }
            }
            _ => failures.push("al_se_bits_per_s_per_hz missing or undefined".into()),
        }

        match (
            get_f64(ptm, "fraction_at_max_mos"),
            get_f64(ptm_ml, "fraction_at_max_mos"),
            get_f64(ptp, "fraction_at_max_mos"),
        ) {
            (Some(f1), Some(f2), Some(f3)) => {
                if !(f1 < f2 && f2 <= f3) {
                    failures.push(format!(
                        "QoE coverage ordering violated: ptm {f1:.6} < ptm-ml {f2:.6} <= ptp {f3:.6} expected"
                    ));
                }
            }
            _ => failures.push("fraction_at_max_mos missing in a run".into()),
        }

        if failures.is_empty() {
            let _ = writeln!(out, "orderings: ok");
        } else {
            for f in &failures {
                let _ = writeln!(out, "orderings: FAIL {f}");
            }
            return Err(SimError::Incompatible(failures.join("; ")));
        }
    }
    Ok(out)
}
