use std::path::PathBuf;

use bvmt_core::tracer::DEFAULT_MAX_STEPS;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "bvmt", version, about = "Boundary-value mutation testing for MiniC programs")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub cmd: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// Root under which run directories are created.
    #[arg(long, global = true, default_value = "run")]
    pub out: PathBuf,
    /// Write into exactly this directory instead of a fresh one under --out.
    #[arg(long, global = true)]
    pub run_dir: Option<PathBuf>,
    /// Worker threads for mutant evaluation; does not affect results.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Target {
    /// Bundled subject name.
    #[arg(long, conflicts_with = "source", required_unless_present = "source")]
    pub subject: Option<String>,
    /// MiniC source file.
    #[arg(long)]
    pub source: Option<PathBuf>,
    /// Domain spec JSON, overriding the subject's.
    #[arg(long)]
    pub domain: Option<PathBuf>,
    /// Fault manifest JSON, overriding the subject's.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Evaluate every enumerated mutant instead of the manifest.
    #[arg(long)]
    pub all_mutants: bool,
    /// Step budget per execution.
    #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
    pub budget: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum LabelArg {
    Boundary,
    General,
    Imported,
    Random,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SuiteArgs {
    /// `random`, `boundary`, or a path to a suite file.
    #[arg(long, default_value = "random")]
    pub suite: String,
    /// Inputs to generate.
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    /// Generator seed; generated and recorded when absent.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Float tolerance for boundary bisection.
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
    /// Row name in comparison tables (defaults to the suite label).
    #[arg(long)]
    pub method: Option<String>,
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Parse and validate a program.
    Check {
        #[command(flatten)]
        target: Target,
    },
    /// Enumerate, sample and export mutants.
    Mutants {
        #[command(flatten)]
        target: Target,
        /// Operators to enumerate (default: all).
        #[arg(long, value_delimiter = ',')]
        ops: Vec<String>,
        /// Sample counts such as `ROR=5,LOR=2` instead of using the manifest.
        #[arg(long)]
        counts: Option<String>,
        /// Sampling seed; generated and recorded when absent.
        #[arg(long)]
        seed: Option<u64>,
        /// Write each mutant's source into the run directory.
        #[arg(long)]
        export: bool,
    },
    /// Render one of the four prompt templates for the program.
    EmitPrompt {
        #[command(flatten)]
        target: Target,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
        template: u8,
    },
    /// Import a suite file or free text (LLM or symbolic-execution output).
    ImportSuite {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        file: PathBuf,
        #[arg(long, value_enum)]
        label: Option<LabelArg>,
    },
    /// Generate a uniform random suite.
    GenRandom {
        #[command(flatten)]
        target: Target,
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Generate a boundary suite by bisecting between path-differing inputs.
    GenBoundary {
        #[command(flatten)]
        target: Target,
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
    },
    /// Send a prompt to a chat-completion endpoint and import the reply.
    FetchLlm {
        #[command(flatten)]
        target: Target,
        /// Endpoint config JSON.
        #[arg(long)]
        endpoint: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
        template: u8,
    },
    /// Kill matrix, kill rate and coverage for one suite.
    Eval {
        #[command(flatten)]
        target: Target,
        #[command(flatten)]
        suite: SuiteArgs,
    },
    /// Kill rate and coverage for every prefix of a suite.
    Curve {
        #[command(flatten)]
        target: Target,
        #[command(flatten)]
        suite: SuiteArgs,
    },
    /// R² between branch coverage and kill rate across evaluation reports.
    Regress {
        /// Run directories or report files; searched recursively.
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
    },
    /// Comparison table across evaluation reports.
    Compare {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long, default_value = "kill")]
        metric: String,
        #[arg(long, value_enum, default_value = "method")]
        group_by: GroupArg,
        #[arg(long, default_value = "markdown")]
        format: String,
        /// Row order; listed rows without reports are dropped with a warning.
        #[arg(long, value_delimiter = ',')]
        rows: Vec<String>,
    },
    /// Line-annotated execution counts of a suite on the original program.
    ExportGcovStyle {
        #[command(flatten)]
        target: Target,
        #[command(flatten)]
        suite: SuiteArgs,
    },
    /// Re-run the command recorded in a run directory.
    Replay {
        /// Run directory or its config.json.
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum GroupArg {
    Label,
    Method,
}
