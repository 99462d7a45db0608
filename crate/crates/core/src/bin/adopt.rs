use std::path::PathBuf;
use std::process::ExitCode;

use ad_options::cli::{run, Command, RunConfig};
use clap::Parser;

/// Batch reports for multi-keyword multi-click ad options.
#[derive(Debug, Parser)]
#[command(name = "adopt", version)]
struct Args {
    /// One of: calibrate, gof, price, backtest, revenue, simulate.
    command: Command,
    /// Flat `key = value` configuration file.
    config: PathBuf,
    /// Worker threads (overrides the config's `threads` key).
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = RunConfig::load(&args.config).and_then(|cfg| run(args.command, &cfg, args.threads));
    match result {
        Ok(summary) => {
            println!("{}", summary.message);
            for file in &summary.files {
                println!("  {}", summary.output_dir.join(file).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
