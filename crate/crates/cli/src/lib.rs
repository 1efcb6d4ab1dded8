//! Command-line front end: batch runs, watch mode, vault tooling, the
//! publication gate and the synthetic fixture.

use std::io::{BufRead, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
pub mod fixture;
pub mod report;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book {}

pub use commands::{load_events, load_policy, load_registers_opt, Failure};

pub mod exit {
    pub const CLEAN: i32 = 0;
    pub const FINDINGS: i32 = 1;
    pub const INTOLERABLE: i32 = 2;
    pub const USAGE: i32 = 3;
    pub const IO: i32 = 4;
}

/// Environment variable naming an extra lexicon directory.
pub const LEXICON_DIR_ENV: &str = "AUDITBOT_LEXICON_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Text,
}

#[derive(Debug, Parser)]
#[command(name = "auditbot", version, about = "Ethics audit over software-lifecycle event logs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct RunArgs {
    #[arg(long)]
    pub policy: PathBuf,
    /// Directory holding the register files.
    #[arg(long)]
    pub registers: Option<PathBuf>,
    /// Evidence vault to append to.
    #[arg(long)]
    pub vault: Option<PathBuf>,
    /// Report destination; standard output when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
    /// Timestamp used for run metadata and vault records instead of the
    /// system clock.
    #[arg(long, value_name = "RFC3339")]
    pub fixed_clock: Option<String>,
    /// Add an accountability trace for every finding.
    #[arg(long)]
    pub trace: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Audit an event file.
    Run {
        #[command(flatten)]
        common: RunArgs,
        #[arg(long)]
        events: PathBuf,
        /// Sequence window `START:END`, either side optional.
        #[arg(long, default_value = ":")]
        window: String,
    },
    /// Audit events read from standard input as they arrive.
    Watch {
        #[command(flatten)]
        common: RunArgs,
    },
    /// Check a vault's hash chain.
    Verify {
        #[arg(long)]
        vault: PathBuf,
    },
    /// Print the fields and registers the policy reads.
    Manifest {
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Explain where the process broke down for a sealed finding.
    Trace {
        #[arg(long)]
        vault: PathBuf,
        #[arg(long)]
        finding: String,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        registers: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Score a text with a gate rule's lexicon.
    Gate {
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        rule: String,
        #[arg(long)]
        text: PathBuf,
    },
    /// Write a self-verifying extract of the vault for some findings.
    Export {
        #[arg(long)]
        vault: PathBuf,
        #[arg(long = "finding", required = true)]
        findings: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a deterministic synthetic scenario.
    Fixture {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        events: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Standard streams, injectable for tests.
pub struct Io<'a> {
    pub stdin: &'a mut dyn BufRead,
    pub stdout: &'a mut dyn Write,
    pub stderr: &'a mut dyn Write,
}

/// Parses `args` (program name first) and runs the command, returning the
/// exit code.
pub fn run<I, T>(args: I, io: &mut Io<'_>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let shown = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let text = e.render().to_string();
            if shown {
                let _ = write!(io.stdout, "{text}");
                return exit::CLEAN;
            }
            let _ = write!(io.stderr, "{text}");
            return exit::USAGE;
        }
    };
    match commands::dispatch(cli.command, io) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(io.stderr, "error: {f}");
            f.code()
        }
    }
}
