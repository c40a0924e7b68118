use anyhow::Result;
use clap::Parser;
use medsr_cli::cli::Cli;

fn main() -> Result<()> {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    medsr_cli::commands::run(&cli.command)
}
