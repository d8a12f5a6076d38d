use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::Parser;
use log::{error, info};

use spinlab::experiments::{run, ExperimentConfig, OutputFormat, Recipe, Status};
use spinlab::Error;

/// Run a named experiment recipe.
#[derive(Parser, Debug)]
#[command(name = "spinlab", version)]
struct Cli {
    /// Recipe name, e.g. cw-clue or tiled-coupling.
    recipe: Option<String>,
    /// JSON file with recipe parameters; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// csv or json.
    #[arg(long, default_value = "csv")]
    format: String,
    #[arg(long, default_value_t = 600)]
    budget_secs: u64,
    /// Print the recipe names and exit.
    #[arg(long)]
    list: bool,
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("spinlab: {msg}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if cli.list {
        for r in Recipe::ALL {
            println!("{:<20} {}", r.name(), r.anchor());
        }
        return ExitCode::SUCCESS;
    }
    let Some(name) = cli.recipe.as_deref() else {
        return usage("missing recipe name (see --list)");
    };
    let recipe: Recipe = match name.parse() {
        Ok(r) => r,
        Err(e) => return usage(e),
    };
    let format: OutputFormat = match cli.format.parse() {
        Ok(f) => f,
        Err(e) => return usage(e),
    };
    let params = match &cli.config {
        None => serde_json::Value::Null,
        Some(path) => {
            let text = match std::fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => return usage(format!("cannot read {}: {e}", path.display())),
            };
            match serde_json::from_str(&text) {
                Ok(v) => v,
                Err(e) => return usage(format!("invalid JSON in {}: {e}", path.display())),
            }
        }
    };
    let config = ExperimentConfig {
        recipe,
        params,
        seed: cli.seed,
        out: cli.out,
        format,
        budget: Duration::from_secs(cli.budget_secs),
    };
    match run(&config) {
        Ok(summary) => {
            for c in &summary.checks {
                let mark = if c.passed { "pass" } else { "FAIL" };
                info!("{mark} {} : {} {} {}", c.name, c.value, c.relation, c.bound);
            }
            println!("{} {:?} ({:.1}s)", summary.recipe, summary.status, summary.elapsed_secs);
            match summary.status {
                Status::Pass => ExitCode::SUCCESS,
                Status::Fail | Status::Budget => ExitCode::from(1),
            }
        }
        Err(e @ Error::InvalidParameter(_)) => usage(e),
        Err(e) => {
            error!("{e}");
            ExitCode::from(1)
        }
    }
}
