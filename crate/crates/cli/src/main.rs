//! Batch experiment runner.
//!
//! `splmart run <config.json> [--out DIR] [--seed N]` exits 0 when every
//! verdict passes, 2 when one fails or the numerics break down, 1 on a
//! usage or config error (in which case nothing is written).

mod config;
mod experiments;
mod output;
mod registry;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

/// Overrides the seed of the config; `--seed` wins over it.
const SEED_VAR: &str = "SPLMART_SEED";

#[derive(Parser)]
#[command(name = "splmart", version, about = "Spline projection and spline-martingale experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config.
    Run {
        config: PathBuf,
        /// Output directory (default: the config's "out", else ./splmart-out).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the knot families, functions, measures and experiments.
    List {
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::List { format } => {
            let c = registry::catalog();
            let text = match format {
                Format::Text => registry::render_text(&c),
                Format::Json => serde_json::to_string_pretty(&c).expect("catalog serializes") + "\n",
            };
            // a closed pipe (`splmart list | head`) is not an error
            let _ = std::io::stdout().write_all(text.as_bytes());
            ExitCode::SUCCESS
        }
        Command::Run { config, out, seed } => run(config, out, seed),
    }
}

fn run(path: PathBuf, out: Option<PathBuf>, seed: Option<u64>) -> ExitCode {
    let validated = match config::load(&path) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let seed = match seed {
        Some(s) => s,
        None => match std::env::var(SEED_VAR) {
            Ok(text) => match text.trim().parse() {
                Ok(s) => s,
                Err(_) => {
                    eprintln!("error: {SEED_VAR}={text:?} is not an unsigned integer");
                    return ExitCode::from(1);
                }
            },
            Err(_) => validated.config.seed,
        },
    };
    let dir = out
        .or_else(|| validated.config.out.clone())
        .unwrap_or_else(|| PathBuf::from("splmart-out"));

    let outcome = experiments::run(&validated, seed);
    if let Err(e) = output::write_all(&dir, &validated.config, seed, &outcome) {
        eprintln!("error: writing {}: {e}", dir.display());
        return ExitCode::from(1);
    }
    for v in &outcome.verdicts {
        println!(
            "{} {}: {:e} {} {:e}",
            if v.pass { "PASS" } else { "FAIL" },
            v.name,
            v.value,
            v.comparison.symbol(),
            v.threshold
        );
    }
    if let Some(e) = &outcome.error {
        println!("FAIL numerical error: {e}");
    }
    println!("results written to {}", dir.display());
    if outcome.pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}
