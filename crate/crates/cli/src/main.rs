use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "kolmo", version, about = "Transition-density experiments for degenerate Kolmogorov diffusions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override a config key, e.g. `--set density.samples=500000`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory [default: $KOLMO_OUT_DIR/<experiment>, else kolmo-runs/<experiment>].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Describe the available experiments.
    List {
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::List { json } => {
            if json {
                println!("{}", serde_json::to_string_pretty(&kolmo_cli::DESCRIPTORS).expect("descriptors serialise"));
            } else {
                print!("{}", kolmo_cli::list_text());
            }
            ExitCode::SUCCESS
        }
        Command::Run { config, set, seed, out } => match kolmo_cli::run(&config, &set, seed, out.as_deref()) {
            Ok(summary) => {
                for a in &summary.run.artifacts {
                    println!("wrote {}", summary.manifest.with_file_name(&a.name).display());
                }
                println!("wrote {}", summary.manifest.display());
                println!("fitted {}", summary.run.fitted);
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("kolmo: {e}");
                e.exit_code()
            }
        },
    }
}
