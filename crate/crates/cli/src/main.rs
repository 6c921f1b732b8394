use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use etc_traffic_cli::commands::{self, Overrides};

#[derive(Parser)]
#[command(name = "etc-traffic", version, about = "Traffic abstractions of event-triggered control systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct Common {
    /// Job configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Worker threads (defaults to the machine's parallelism).
    #[arg(long)]
    jobs: Option<usize>,
    /// Seed for random disturbance signals.
    #[arg(long)]
    seed: Option<u64>,
    /// Certify the trigger on the whole state box before running.
    #[arg(long)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Build the abstraction and write it as JSON.
    Abstract {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "abstraction.json")]
        out: PathBuf,
        /// Also write a Graphviz rendering.
        #[arg(long)]
        dot: Option<PathBuf>,
        /// Also write all flowpipe segments as CSV.
        #[arg(long)]
        flowpipes: Option<PathBuf>,
    },
    /// Simulate the closed loop and write the sampling trace.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "trace.csv")]
        out: PathBuf,
        /// Attach the region intervals of this abstraction to the plot data.
        #[arg(long)]
        abstraction: Option<PathBuf>,
    },
    /// Simulate and check the trace against an abstraction.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        abstraction: PathBuf,
        #[arg(long, default_value = "validation.json")]
        out: PathBuf,
    },
    /// Print parsed and derived quantities.
    Info {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        abstraction: Option<PathBuf>,
    },
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            jobs: self.jobs,
            seed: self.seed,
            strict: self.strict,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Abstract {
            common,
            out,
            dot,
            flowpipes,
        } => commands::cmd_abstract(&common.config, &common.overrides(), out, dot.as_deref(), flowpipes.as_deref()),
        Command::Simulate {
            common,
            out,
            abstraction,
        } => commands::cmd_simulate(&common.config, &common.overrides(), out, abstraction.as_deref()),
        Command::Validate {
            common,
            abstraction,
            out,
        } => commands::cmd_validate(&common.config, &common.overrides(), abstraction, out),
        Command::Info { common, abstraction } => {
            commands::cmd_info(&common.config, &common.overrides(), abstraction.as_deref())
        }
    };
    match result {
        Ok(status) => ExitCode::from(status.code()),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
