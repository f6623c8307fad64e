use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use uniexp::config::{ExperimentConfig, RawConfig};
use uniexp::error::{Error, Result};
use uniexp::runner::run;

/// Uniform-expansion experiments for random walks on the 2-torus.
///
/// Exit status: 0 on success, 1 on errors, 2 when the verdict contradicts
/// an `expect=` key.
#[derive(Parser, Debug)]
#[command(name = "uniexp", version)]
struct Cli {
    /// verify, scan-n, lyapunov, stable, nonrandom, defect, orbit, equidist or smoothing
    command: String,

    /// Config file of key=value lines.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Override one key; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path)?,
        None => String::new(),
    };
    let mut raw = RawConfig::parse(&text)?;
    if let Some(file_command) = raw.get("command") {
        if file_command != cli.command {
            return Err(Error::Range {
                key: "command".into(),
                message: format!(
                    "config file says `{file_command}` but the command line says `{}`",
                    cli.command
                ),
            });
        }
    }
    raw.set(&format!("command={}", cli.command))?;
    for s in &cli.set {
        raw.set(s)?;
    }
    if let Ok(w) = std::env::var("UNIEXP_WORKERS") {
        raw.set(&format!("workers={w}"))?;
    }
    ExperimentConfig::resolve(&raw)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = load(&cli).and_then(|config| run(&config).map(|o| (config, o)));
    match outcome {
        Ok((config, outcome)) => {
            if config.output.is_none() {
                print!("{}", outcome.json);
            } else {
                for f in &outcome.files {
                    println!("wrote {}", f.display());
                }
            }
            match &config.expect {
                Some(e) if outcome.exit_code != 0 => {
                    eprintln!("verdict `{}` does not match expect={e}", outcome.verdict);
                }
                _ => eprintln!("verdict: {}", outcome.verdict),
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(1)
        }
    }
}
