//! `manet`: fit, select, evaluate and simulate overlapping Bernoulli mixtures.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Invalid invocation or configuration; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(name = "manet", version, about = "Overlapping-cluster Bernoulli mixtures for actor-event networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every command that runs or configures a chain.
#[derive(Args, Debug, Clone, Default)]
pub struct Overrides {
    /// TOML configuration file (a run manifest also works)
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long = "burn-in")]
    pub burn_in: Option<usize>,
    /// Number of parent clusters
    #[arg(long)]
    pub k: Option<usize>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark dataset with its true heir labels
    Simulate {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        d: Option<usize>,
    },
    /// Fit a model with a fixed number of parent clusters
    Fit {
        /// Incidence CSV
        data: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Fit every candidate K, pick the lowest DIC and summarise that fit
    SelectK {
        data: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Comma-separated candidate numbers of parents
        #[arg(long, value_delimiter = ',')]
        candidates: Option<Vec<usize>>,
    },
    /// Recompute the posterior confusion matrix from a stored run
    Pcm {
        /// Output directory of an earlier `fit` or `select-k`
        run: PathBuf,
        /// Incidence CSV the run was fitted to
        #[arg(long)]
        data: PathBuf,
        /// Write the tables here instead of only printing them
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Score an estimated labelling against the truth
    Evaluate {
        /// True labels, one 1-based heir index per line
        #[arg(long)]
        truth: PathBuf,
        /// Estimated labels in the same format
        #[arg(long)]
        estimate: PathBuf,
        /// Number of parents used to match labels (inferred from the labels if omitted)
        #[arg(long)]
        k: Option<usize>,
    },
    /// Replicated simulation: overlapping model against the non-overlapping baseline
    Compare {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        replicates: Option<usize>,
        /// Components of the baseline mixture
        #[arg(long)]
        components: Option<usize>,
    },
}

fn exit_status(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<manet_core::Error>() {
            return match e.root() {
                manet_core::Error::Config(_) => 2,
                manet_core::Error::Numerical { .. } => 4,
                _ => 3,
            };
        }
    }
    3
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { overrides, n, d } => commands::simulate(&overrides, n, d),
        Command::Fit { data, overrides } => commands::fit(&data, &overrides),
        Command::SelectK {
            data,
            overrides,
            candidates,
        } => commands::select_k(&data, &overrides, candidates),
        Command::Pcm { run, data, out } => commands::pcm(&run, &data, out.as_deref()),
        Command::Evaluate { truth, estimate, k } => commands::evaluate(&truth, &estimate, k),
        Command::Compare {
            overrides,
            replicates,
            components,
        } => commands::compare(&overrides, replicates, components),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // core errors already embed their source in the message
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let text = cause.to_string();
                if !msg.contains(&text) {
                    msg = format!("{msg}: {text}");
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(exit_status(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_status_by_error_kind() {
        let numerical = manet_core::Error::Numerical {
            unit: 0,
            iteration: None,
            message: "x".into(),
        };
        let wrapped = manet_core::Error::Candidate {
            parents: 2,
            source: Box::new(numerical),
        };
        assert_eq!(exit_status(&anyhow::Error::new(wrapped)), 4);
        assert_eq!(exit_status(&anyhow::Error::new(manet_core::Error::Config("bad".into()))), 2);
        assert_eq!(exit_status(&anyhow::Error::new(UsageError("bad".into())).context("outer")), 2);
        let parse = manet_core::Error::Parse {
            path: "f".into(),
            line: 1,
            column: 1,
            message: "m".into(),
        };
        assert_eq!(exit_status(&anyhow::Error::new(parse)), 3);
        assert_eq!(exit_status(&anyhow::anyhow!("io")), 3);
    }
}
