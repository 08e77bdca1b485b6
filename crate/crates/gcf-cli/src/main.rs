use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};
use gcf_core::suite::SuiteName;

use gcf_cli::runcmd::parse_resolution;
use gcf_cli::{cmd_polar, cmd_run, cmd_sweep, cmd_verify};

/// Gauss curvature flow laboratory: contract a convex body by its Gauss
/// curvature, follow the induced expansion of its polar, and check the
/// duality diagnostics that tie the two together.
#[derive(Parser)]
#[command(name = "gcf", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Duality,
    Consistency,
    Bounds,
    Chi,
    All,
}

impl From<SuiteArg> for SuiteName {
    fn from(v: SuiteArg) -> SuiteName {
        match v {
            SuiteArg::Duality => SuiteName::Duality,
            SuiteArg::Consistency => SuiteName::Consistency,
            SuiteArg::Bounds => SuiteName::Bounds,
            SuiteArg::Chi => SuiteName::Chi,
            SuiteArg::All => SuiteName::All,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a flow from a JSON config and write snapshots, diagnostics CSV,
    /// SVG curves (planar runs) and a manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a named verification suite on the built-in body set.
    Verify {
        #[arg(long)]
        suite: SuiteArg,
        #[arg(long, default_value_t = 2)]
        n: usize,
        /// Nodes per angular direction, N or N,M.
        #[arg(long)]
        resolution: Option<String>,
    },
    /// Compute the polar body of a body file.
    Polar {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Ambient dimension for analytic seeds without an embedded grid.
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long)]
        resolution: Option<String>,
    },
    /// Run one trajectory per parameter value, in parallel (bounded by
    /// GCF_THREADS), and aggregate a comparison table.
    Sweep {
        #[arg(long)]
        param: String,
        /// Comma-separated list, e.g. 64,128,256.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn default_resolution(n: usize) -> Vec<usize> {
    if n == 2 {
        vec![256]
    } else {
        vec![32, 64]
    }
}

fn resolve_resolution(n: usize, text: &Option<String>) -> Result<Vec<usize>> {
    match text {
        Some(t) => parse_resolution(t),
        None => Ok(default_resolution(n)),
    }
}

fn run() -> Result<i32> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out } => cmd_run(&config, &out),
        Command::Verify {
            suite,
            n,
            resolution,
        } => {
            let res = resolve_resolution(n, &resolution)?;
            cmd_verify(suite.into(), n, &res)
        }
        Command::Polar {
            input,
            out,
            n,
            resolution,
        } => {
            let res = resolve_resolution(n, &resolution)?;
            cmd_polar(&input, &out, n, &res)
        }
        Command::Sweep {
            param,
            values,
            config,
            out,
        } => cmd_sweep(&param, &values, &config, &out),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
