//! Configuration-driven entry point wiring the library modules into
//! reproducible experiments.
//!
//! Every run writes `manifest.json` (enough to reproduce it bit-identically
//! on one platform), scenario-specific CSV/JSON artifacts, and
//! `verdict.json` with the pass flag and margins. The process exits
//! nonzero when a scenario assertion fails.

mod config;
mod scenarios;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ExperimentConfig, Scenario};

#[derive(Parser)]
#[command(
    name = "levylab",
    version,
    about = "Jump-SDE entropy and drift-condition laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, clap::Args)]
struct CommonArgs {
    /// TOML experiment configuration; scenario defaults are used if omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the configured seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: out-<scenario>)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for the run (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate an ensemble and dump it as CSV
    Simulate(CommonArgs),
    /// Check the semigroup entropy inequality on one configuration
    EntropyBound(CommonArgs),
    /// Entropy-versus-time curve against the theoretical envelope
    DecayCurve(CommonArgs),
    /// Drift-condition classification report
    LyapunovCheck(CommonArgs),
    /// Mecke / Girsanov / entropy checks on Poisson configurations
    PoissonCheck(CommonArgs),
    /// Log-moment sharpness demonstration for the pure-jump OU process
    SharpnessDemo(CommonArgs),
}

impl Command {
    fn scenario(&self) -> Scenario {
        match self {
            Command::Simulate(_) => Scenario::Simulate,
            Command::EntropyBound(_) => Scenario::EntropyBound,
            Command::DecayCurve(_) => Scenario::DecayCurve,
            Command::LyapunovCheck(_) => Scenario::LyapunovCheck,
            Command::PoissonCheck(_) => Scenario::PoissonCheck,
            Command::SharpnessDemo(_) => Scenario::SharpnessDemo,
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Simulate(a)
            | Command::EntropyBound(a)
            | Command::DecayCurve(a)
            | Command::LyapunovCheck(a)
            | Command::PoissonCheck(a)
            | Command::SharpnessDemo(a) => a,
        }
    }
}

fn load_config(scenario: Scenario, args: &CommonArgs) -> Result<ExperimentConfig, String> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            // a manifest.json from a previous run replays directly
            let text = if path.extension().is_some_and(|e| e == "json") {
                let manifest: serde_json::Value =
                    serde_json::from_str(&text).map_err(|e| format!("manifest: {e}"))?;
                manifest["config_toml"]
                    .as_str()
                    .ok_or("manifest lacks config_toml")?
                    .to_string()
            } else {
                text
            };
            let cfg = ExperimentConfig::from_toml(&text).map_err(|e| e.to_string())?;
            if cfg.scenario != scenario {
                return Err(format!(
                    "config is for scenario '{}' but the subcommand is '{}'",
                    cfg.scenario.name(),
                    scenario.name()
                ));
            }
            cfg
        }
        None => ExperimentConfig::default_for(scenario),
    };
    if let Some(seed) = args.seed {
        cfg.run.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output.dir = Some(out.display().to_string());
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let scenario = cli.command.scenario();
    let args = cli.command.args().clone();

    let config = match load_config(scenario, &args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let out_dir = PathBuf::from(
        config
            .output
            .dir
            .clone()
            .unwrap_or_else(|| format!("out-{}", scenario.name())),
    );

    // The CLI owns the worker pool; the library only sees work-unit
    // parallelism through it.
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    };

    let result = pool.install(|| -> levylab::Result<scenarios::Verdict> {
        std::fs::create_dir_all(&out_dir)?;
        scenarios::write_manifest(&out_dir, &config, args.threads)?;
        scenarios::run(&config, &out_dir)
    });

    match result {
        Ok(verdict) => {
            let path = out_dir.join("verdict.json");
            if let Err(e) = std::fs::write(
                &path,
                serde_json::to_string_pretty(&verdict).expect("serializable"),
            ) {
                eprintln!("error: writing verdict: {e}");
                return ExitCode::from(2);
            }
            println!(
                "{}: {} (artifacts in {})",
                verdict.scenario,
                if verdict.pass { "PASS" } else { "FAIL" },
                out_dir.display()
            );
            if verdict.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
