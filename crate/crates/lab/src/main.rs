use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use kamlab::config::{Experiment, ExperimentConfig};

#[derive(Parser, Debug)]
#[command(name = "kamlab", version, about = "Desk-scale experiments on invariant circles of twist maps")]
struct Cli {
    /// Experiment to run.
    #[arg(value_enum)]
    experiment: Experiment,
    /// JSON configuration file; missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration field, `key=value` with a JSON value.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory for the report and tables.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cfg = match cli.config.as_deref().map(ExperimentConfig::load).unwrap_or_else(|| Ok(ExperimentConfig::default())).and_then(|c| c.with_overrides(&cli.overrides)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("kamlab: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    if let Some(e) = cfg.experiment {
        if e != cli.experiment {
            eprintln!("kamlab: config names experiment `{}` but `{}` was requested", e.name(), cli.experiment.name());
            return ExitCode::from(2);
        }
    }
    match kamlab::execute(cli.experiment, &cfg, &cli.out) {
        Ok(r) => {
            for c in &r.checks {
                println!("{} {}", if c.pass { "PASS" } else { "FAIL" }, c.name);
            }
            if r.pass {
                ExitCode::SUCCESS
            } else {
                eprintln!("kamlab: failed checks: {}", r.failed_checks().join(", "));
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("kamlab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
