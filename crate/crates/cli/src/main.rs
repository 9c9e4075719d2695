use std::path::PathBuf;
use std::process::ExitCode;

use anisocahn_cli::commands::{self, MountainPassFlags};
use anisocahn_cli::config::parse_override;
use anisocahn_cli::{ExperimentConfig, Run};
use clap::{Parser, Subcommand};

/// Mountain-pass critical points and geometric diagnostics for the
/// anisotropic Allen-Cahn energy.
#[derive(Parser)]
#[command(name = "anisocahn", version)]
struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_override, global = true)]
    set: Vec<(String, String)>,
    /// Output directory (`output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed (`seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Shoot the heteroclinic profile and check equipartition.
    Heteroclinic,
    /// Audit the potential and integrand hypotheses.
    Audit,
    /// Gradient flow plus Newton from a random, stripe or snapshot start.
    Minimize,
    /// Relax a sweep path with delta continuation and extract the saddle.
    MountainPass {
        /// Continue from the checkpoints in the output directory.
        #[arg(long)]
        resume: bool,
        /// Stop after this many relaxation rounds, leaving a checkpoint.
        #[arg(long)]
        stop_after: Option<usize>,
    },
    /// Geometric diagnostics of a snapshot.
    Diagnose {
        /// Snapshot to analyse (`diagnose.input`).
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Recovery-sequence energies against the anisotropic perimeter.
    GammaSweep,
    /// Smallest Hessian eigenvalues of a snapshot.
    Spectrum {
        /// Snapshot to analyse (`spectrum.input`).
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut overrides = cli.set.clone();
    if let Some(o) = &cli.out {
        overrides.push(("output.dir".into(), o.display().to_string()));
    }
    if let Some(s) = cli.seed {
        overrides.push(("seed".into(), s.to_string()));
    }
    match &cli.command {
        Command::Diagnose { input: Some(i) } => overrides.push(("diagnose.input".into(), i.display().to_string())),
        Command::Spectrum { input: Some(i) } => overrides.push(("spectrum.input".into(), i.display().to_string())),
        _ => {}
    }
    let name = match &cli.command {
        Command::Heteroclinic => "heteroclinic",
        Command::Audit => "audit",
        Command::Minimize => "minimize",
        Command::MountainPass { .. } => "mountain-pass",
        Command::Diagnose { .. } => "diagnose",
        Command::GammaSweep => "gamma-sweep",
        Command::Spectrum { .. } => "spectrum",
    };
    let result = ExperimentConfig::load(cli.config.as_deref(), &overrides)
        .and_then(|cfg| Run::new(cfg, name))
        .and_then(|run| match &cli.command {
            Command::Heteroclinic => commands::heteroclinic_cmd(run),
            Command::Audit => commands::audit_cmd(run),
            Command::Minimize => commands::minimize_cmd(run),
            Command::MountainPass { resume, stop_after } => commands::mountain_pass_cmd(
                run,
                &MountainPassFlags {
                    resume: *resume,
                    stop_after: *stop_after,
                },
            ),
            Command::Diagnose { .. } => commands::diagnose_cmd(run),
            Command::GammaSweep => commands::gamma_sweep_cmd(run),
            Command::Spectrum { .. } => commands::spectrum_cmd(run),
        });
    match result {
        Ok(outcome) => {
            if outcome == anisocahn_cli::Outcome::CertificateFailed {
                eprintln!("{name}: certificate failed; see the report");
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(anisocahn::Error::Config(list)) => {
            eprintln!("configuration errors:");
            for e in list {
                eprintln!("  {e}");
            }
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("{name}: {e}");
            ExitCode::from(1)
        }
    }
}
