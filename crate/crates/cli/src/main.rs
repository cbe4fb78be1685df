use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ecplan_cli::{run, Command, Config, Format, Run};

/// Planning toolkit for energy communities.
#[derive(Parser)]
#[command(name = "ecplan", version)]
struct Cli {
    command: Command,
    /// Scenario configuration (TOML, dotted keys).
    #[arg(long)]
    config: PathBuf,
    /// Directory receiving the output files.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Format of summary and verdict files.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("EC_LOG_LEVEL", "warn")).init();
    let cli = Cli::parse();
    let result = Config::load(&cli.config).and_then(|config| {
        let ctx = Run { config, out: cli.out, format: cli.format };
        run(cli.command, &ctx)
    });
    match result {
        Ok(outcome) => ExitCode::from(outcome.exit_code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
