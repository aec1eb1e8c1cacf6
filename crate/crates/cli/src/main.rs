mod commands;
mod config;
mod contact_cmd;
mod report;
mod summary;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Config;
use summary::Run;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{message}")]
    Config { kind: String, message: String },
    #[error("{0}")]
    Hypothesis(String),
    #[error(transparent)]
    Core(#[from] acflat::Error),
}

impl CliError {
    pub fn config(kind: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config { kind: kind.into(), message: message.into() }
    }

    pub fn status(&self) -> u8 {
        use acflat::Error as E;
        match self {
            CliError::Config { .. } => 2,
            CliError::Hypothesis(_) => 4,
            CliError::Core(e) => match e {
                E::NonConvergence { .. } => 3,
                E::Precondition(_) => 4,
                E::Construction(_) | E::Invariant(_) => 5,
                E::Domain(_) | E::Range { .. } | E::Parameter(_) | E::Format(_) | E::Io(_) => 2,
            },
        }
    }

    fn kind(&self) -> String {
        use acflat::Error as E;
        match self {
            CliError::Config { kind, .. } => kind.clone(),
            CliError::Hypothesis(_) => "hypothesis".into(),
            CliError::Core(e) => match e {
                E::Domain(_) => "domain",
                E::Range { .. } => "range",
                E::Parameter(_) => "parameter",
                E::Precondition(_) => "precondition",
                E::Construction(_) => "construction",
                E::NonConvergence { .. } => "non_convergence",
                E::Invariant(_) => "invariant",
                E::Format(_) => "format",
                E::Io(_) => "io",
            }
            .into(),
        }
    }

    /// One-line JSON for stderr.
    fn line(&self) -> String {
        serde_json::json!({
            "status": self.status(),
            "kind": self.kind(),
            "error": self.to_string(),
        })
        .to_string()
    }
}

/// Runs one experiment and writes a JSON summary next to its artifacts.
///
/// Parameters are `key=value` pairs, `--key value` or `--key=value`, or a
/// `--config FILE` of `key=value` lines. Keys may be abbreviated to their
/// last segment when that is unambiguous (`--R 100` for `barrier.R`).
#[derive(Debug, Parser)]
#[command(name = "acflat", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Params {
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, num_args = 0..)]
    params: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Heteroclinic profile g and its ODE residual.
    Profile(Params),
    /// One barrier profile and its ODE inequality.
    Barrier(Params),
    /// Barrier inequality, profile comparison, ordering and radial checks.
    VerifyBarrier(Params),
    /// Discrete energy minimization with Dirichlet data.
    Minimize(Params),
    /// Zero-set flatness and the Harnack contraction.
    Flatness(Params),
    /// Improvement-of-flatness table.
    Cascade(Params),
    /// Energy, Modica gap and column bound of a field.
    Energy(Params),
    /// Contact sets of sliding paraboloids.
    Contact(Params),
    /// Merge run summaries into one table.
    Report {
        paths: Vec<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value = "report")]
        name: String,
    },
}

type Handler = fn(&mut Run) -> Result<(), CliError>;

fn run(cmd: Command) -> Result<u8, CliError> {
    let (sub, params, f): (&str, Params, Handler) = match cmd {
        Command::Profile(p) => ("profile", p, commands::profile),
        Command::Barrier(p) => ("barrier", p, commands::barrier),
        Command::VerifyBarrier(p) => ("verify-barrier", p, commands::verify_barrier),
        Command::Minimize(p) => ("minimize", p, commands::minimize),
        Command::Flatness(p) => ("flatness", p, commands::flatness),
        Command::Cascade(p) => ("cascade", p, commands::cascade),
        Command::Energy(p) => ("energy", p, commands::energy),
        Command::Contact(p) => ("contact", p, contact_cmd::contact),
        Command::Report { paths, out, name } => {
            report::report(&paths, &out, &name)?;
            return Ok(0);
        }
    };
    let cfg = Config::load(sub, &params.params)?;
    let mut run = Run::new(cfg);
    f(&mut run)?;
    Ok(run.finish()? as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            let kind = match e.kind() {
                ErrorKind::InvalidSubcommand | ErrorKind::MissingSubcommand => "unknown_subcommand",
                _ => "usage",
            };
            let err = CliError::config(kind, first);
            eprintln!("{}", err.line());
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(status) => ExitCode::from(status),
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(e.status())
        }
    }
}
