use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hycirc::cli::{parse_config, preset, run, ExperimentConfig, ExperimentKind, RunOptions, PRESETS};
use hycirc::Error;

#[derive(Parser)]
#[command(name = "hycirc", version, about = "Hybrid circuit experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment config; defaults are used for anything it omits.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (overrides HYCIRC_WORKERS and the config).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    Sff(Common),
    TmatCheck(Common),
    Ssep(Common),
    East(Common),
    Collapse(Common),
    DilatedDemo(Common),
    /// Run a named acceptance-scale preset.
    Reproduce {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
        preset: String,
        #[command(flatten)]
        common: Common,
    },
}

fn load(kind: ExperimentKind, c: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &c.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            let cfg = parse_config(&text)?;
            if cfg.kind != kind {
                return Err(Error::Config(vec![format!(
                    "config kind {} does not match subcommand {}",
                    cfg.kind.name(),
                    kind.name()
                )]));
            }
            cfg
        }
        None => ExperimentConfig::new(kind, 0),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cfg, common) = match cli.cmd {
        Cmd::Reproduce { preset: name, common } => {
            let cfg = preset(&name).map(|mut cfg| {
                if let Some(s) = common.seed {
                    cfg.seed = s;
                }
                cfg
            });
            (cfg, common)
        }
        Cmd::Sff(c) => (load(ExperimentKind::Sff, &c), c),
        Cmd::TmatCheck(c) => (load(ExperimentKind::TmatCheck, &c), c),
        Cmd::Ssep(c) => (load(ExperimentKind::Ssep, &c), c),
        Cmd::East(c) => (load(ExperimentKind::East, &c), c),
        Cmd::Collapse(c) => (load(ExperimentKind::Collapse, &c), c),
        Cmd::DilatedDemo(c) => (load(ExperimentKind::DilatedDemo, &c), c),
    };
    let result = cfg.and_then(|cfg| {
        run(&cfg, &RunOptions { out: common.out.clone(), workers: common.workers.map(|w| w as usize) })
    });
    match result {
        Ok(s) => {
            println!("wrote {} files to {} ({} workers)", s.files.len(), s.out.display(), s.workers);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
