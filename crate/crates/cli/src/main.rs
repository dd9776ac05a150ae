mod commands;
mod input;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dlcost_core::sweep::Resource;
use dlcost_core::{ArchitectureKind, OverlapMode};

use crate::input::{CliError, EX_USAGE};

/// Analytical step-time model for distributed deep-learning training jobs.
#[derive(Parser, Debug)]
#[command(name = "dlcost", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Per-job step-time breakdown and shares
    Breakdown {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Evaluate every job as if it ran under this architecture
        #[arg(long, value_name = "ARCH")]
        as_arch: Option<ArchitectureKind>,
    },
    /// Project jobs onto another training architecture
    Project {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        output: OutputArgs,
        #[arg(long, value_name = "ARCH")]
        target: ArchitectureKind,
        /// Emit speedup CDFs instead of per-job rows
        #[arg(long)]
        cdf: bool,
    },
    /// Hardware what-if sweep
    Sweep {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Resources to vary: ethernet, pcie, gpu_flops, gpu_mem_bandwidth
        #[arg(long, value_delimiter = ',', required = true, value_name = "RESOURCE")]
        axes: Vec<Resource>,
        /// Candidate values for one axis, e.g. ethernet=10Gbps,25Gbps,100Gbps
        #[arg(long, value_name = "RESOURCE=V1,V2,...")]
        candidates: Vec<String>,
        /// Vary all axes jointly instead of one at a time
        #[arg(long)]
        cartesian: bool,
    },
    /// Cluster-level composition, mean shares and CDFs
    Aggregate {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Statistics to emit (default: all)
        #[arg(long, value_delimiter = ',', value_name = "STAT")]
        stats: Vec<Stat>,
    },
    /// Sensitivity to efficiency assumptions or to overlap
    Sensitivity {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Compute efficiencies to try
        #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.7,1.0")]
        compute_eff: Vec<f64>,
        /// Communication efficiencies to try
        #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.7,1.0")]
        comm_eff: Vec<f64>,
        /// Compare no overlap with ideal overlap for a projection instead
        #[arg(long, value_name = "ARCH")]
        overlap_target: Option<ArchitectureKind>,
    },
    /// Generate a seeded synthetic trace
    Synth {
        /// TOML population spec
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        size: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a trace and compare predictions with measured step times
    Validate {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Write the built-in case-study corpus as a trace
    Corpus {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false, id = "source")]
pub struct InputArgs {
    /// Newline-delimited JSON trace
    #[arg(long, value_name = "PATH")]
    pub trace: Option<PathBuf>,
    /// Use the built-in case-study corpus
    #[arg(long)]
    pub corpus: bool,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Hardware preset name or config path
    #[arg(long, default_value = "pai-baseline", value_name = "PRESET|PATH")]
    pub hw: String,
    /// Efficiency model: default, measured:<job_id> or a config path
    #[arg(long, default_value = "default", value_name = "SPEC")]
    pub eff: String,
    #[arg(long, default_value = "none", value_parser = parse_overlap)]
    pub overlap: OverlapMode,
    /// Stop at the first invalid trace line
    #[arg(long, conflicts_with = "skip_invalid")]
    pub strict: bool,
    /// Report invalid trace lines as warnings and continue
    #[arg(long)]
    pub skip_invalid: bool,
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Write the report here instead of stdout
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stat {
    Composition,
    MeanShare,
    ShareCdf,
    ScaleCdf,
}

fn parse_overlap(s: &str) -> Result<OverlapMode, String> {
    s.parse().map_err(|_| format!("expected 'none' or 'ideal', got '{s}'"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(EX_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("dlcost: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn run(command: Command) -> Result<u8, CliError> {
    match command {
        Command::Breakdown { input, model, output, as_arch } => {
            commands::breakdown(&input, &model, &output, as_arch)
        }
        Command::Project { input, model, output, target, cdf } => {
            commands::project(&input, &model, &output, target, cdf)
        }
        Command::Sweep { input, model, output, axes, candidates, cartesian } => {
            commands::sweep(&input, &model, &output, &axes, &candidates, cartesian)
        }
        Command::Aggregate { input, model, output, stats } => {
            commands::aggregate(&input, &model, &output, &stats)
        }
        Command::Sensitivity { input, model, output, compute_eff, comm_eff, overlap_target } => {
            commands::sensitivity(&input, &model, &output, &compute_eff, &comm_eff, overlap_target)
        }
        Command::Synth { spec, size, seed, out } => commands::synth(spec.as_deref(), size, seed, out.as_deref()),
        Command::Validate { input, model, output } => commands::validate(&input, &model, &output),
        Command::Corpus { out } => commands::corpus(out.as_deref()),
    }
}
