use std::path::PathBuf;
use std::process::ExitCode;

use chds::cli::{dispatch, exit, exit_code, Command, Config, Overrides};
use clap::{Parser, ValueEnum};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cmd {
    /// Integrate one configuration to the final time.
    Run,
    /// Cauchy convergence study over nested meshes.
    Converge,
    /// One step with invariant checks.
    Diagnose,
    /// Mesh statistics.
    MeshInfo,
}

/// Mixed finite element solver for the Cahn-Hilliard-Darcy-Stokes system.
#[derive(Debug, Parser)]
#[command(version)]
struct Args {
    #[arg(value_enum)]
    command: Cmd,
    /// key = value configuration file; omitted keys take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write a VTK snapshot every N steps.
    #[arg(long, value_name = "N")]
    snapshots: Option<usize>,
    /// Number of mesh levels for `converge`.
    #[arg(long, value_name = "L")]
    levels: Option<usize>,
    /// Add the next finer level to `converge`.
    #[arg(long)]
    finest: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let command = match args.command {
        Cmd::Run => Command::Run,
        Cmd::Converge => Command::Converge,
        Cmd::Diagnose => Command::Diagnose,
        Cmd::MeshInfo => Command::MeshInfo,
    };
    let loaded = match &args.config {
        Some(path) => Config::from_path(path),
        None => Ok(Config::default()),
    };
    let result = loaded.and_then(|mut config| {
        Overrides { out: args.out, snapshots: args.snapshots, levels: args.levels, finest: args.finest }
            .apply(&mut config);
        dispatch(command, &config, &mut std::io::stdout().lock())
    });
    match result {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("chds: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
