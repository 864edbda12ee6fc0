mod config;
mod flags;
mod run;

use std::process::ExitCode;

use clap::Parser;
use steinforge::SteinError;

use crate::config::{load_config, Command, RunConfig};
use crate::flags::Cli;

/// Exit 2 for usage problems, 3 for failures inside the library.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Module(#[from] SteinError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Module(_) | Failure::Io { .. } => 3,
        }
    }
}

fn resolve(cli: &Cli) -> Result<(Command, RunConfig), Failure> {
    let file = match &cli.flags.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    let command = match (cli.command, file.command) {
        (Some(a), Some(b)) if a != b => {
            return Err(Failure::Usage(format!(
                "config requests {} but the command line says {}",
                b.name(),
                a.name()
            )))
        }
        (Some(c), _) | (None, Some(c)) => c,
        (None, None) => return Err(Failure::Usage("no command given; see --help".into())),
    };
    let cfg = file.apply_flags(&cli.flags)?;
    cfg.validate(command)?;
    Ok((command, RunConfig { command: Some(command), ..cfg }))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = resolve(&cli).and_then(|(command, cfg)| run::execute(command, &cfg));
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("steinforge: {e}");
            ExitCode::from(e.code())
        }
    }
}
