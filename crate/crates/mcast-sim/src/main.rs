//! Thin CLI over the simulation library: run a scenario, compare finished
//! runs, list built-in presets.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mcast_sim::report;
use mcast_sim::runner;
use mcast_sim::scenario::{preset, ScenarioConfig, PRESET_NAMES};

#[derive(Parser)]
#[command(name = "mcast-sim", version, about = "5G multicast/broadcast media delivery simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario: a built-in preset name or a TOML config path.
    Run {
        /// Preset name (see `presets`) or path to a scenario TOML file.
        config: String,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (defaults to runs/<preset>-seed<seed>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the KPI reports of finished run directories.
    Compare {
        /// Run directories, each containing manifest.toml and kpi_report.txt.
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Assert the delivery-mode orderings (consumption, AL-SE gain, QoE
        /// coverage) across ptm / ptm-ml / ptp runs; nonzero exit on failure.
        #[arg(long)]
        assert_orderings: bool,
    },
    /// List built-in presets.
    Presets,
}

fn load_config(spec: &str) -> Result<ScenarioConfig, mcast_sim::SimError> {
    if let Some(cfg) = preset(spec) {
        return Ok(cfg);
    }
    ScenarioConfig::load(std::path::Path::new(spec))
}

fn cmd_run(config: String, seed: Option<u64>, out: Option<PathBuf>) -> Result<(), mcast_sim::SimError> {
    let mut cfg = load_config(&config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let out_dir = out
        .or_else(|| cfg.out_dir.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(format!("runs/{}-seed{}", cfg.preset, cfg.seed)));

    // Manifest first: the resolved config snapshot exists even if the run is
    // interrupted; digests are appended once the artifacts are written.
    report::write_manifest(&out_dir, &cfg)?;
    let run = runner::run(cfg)?;
    report::write_outputs(&out_dir, &run)?;
    print!("{}", report::kpi_text(&run));
    eprintln!("artifacts written to {}", out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, seed, out } => cmd_run(config, seed, out),
        Command::Compare {
            dirs,
            assert_orderings,
        } => report::compare(&dirs, assert_orderings).map(|table| print!("{table}")),
        Command::Presets => {
            for name in PRESET_NAMES {
                println!("{name}");
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
