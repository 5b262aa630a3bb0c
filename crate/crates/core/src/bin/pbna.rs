use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pbna::report::{parse_cycle, render_text, run, RunConfig, Stage};
use pbna::DEFAULT_MODULUS;

#[derive(Parser)]
#[command(
    name = "pbna",
    version,
    about = "Precoding-based network alignment for groupcast networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the mincut assumptions.
    Validate(Common),
    /// Build the interference graph.
    Igraph(Common),
    /// Find the minimal extra-decode count d*.
    Dstar(Common),
    /// Build and verify precoding vectors.
    Precode(Common),
    /// Test the alternating transfer ratio around a cycle.
    Obstruct {
        #[command(flatten)]
        common: Common,
        /// Cycle to test, e.g. W1,S2,W2,S3,W3,S4,W4,S1 (default: a shortest cycle).
        #[arg(long)]
        cycle: Option<String>,
    },
    /// Transmit random messages and decode them.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Run every stage and write one consolidated report.
    Pipeline {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sim: SimArgs,
    },
}

#[derive(Args)]
struct Common {
    /// Network description (JSON).
    #[arg(long)]
    network: PathBuf,
    /// Prime field modulus.
    #[arg(long, default_value_t = DEFAULT_MODULUS)]
    q: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Precoding attempts before giving up.
    #[arg(long, default_value_t = 20)]
    attempts: usize,
    /// Random evaluations per transfer-function zero test.
    #[arg(long, default_value_t = 3)]
    zero_trials: usize,
    /// Random evaluations of the cycle ratio.
    #[arg(long, default_value_t = 5)]
    ratio_trials: usize,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimArgs {
    /// Number of random message tuples.
    #[arg(long, default_value_t = 100)]
    sessions: usize,
    /// Include full session traces in JSON output.
    #[arg(long)]
    traces: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (stage, common, sim, cycle) = match cli.command {
        Command::Validate(c) => (Stage::Validate, c, None, None),
        Command::Igraph(c) => (Stage::Igraph, c, None, None),
        Command::Dstar(c) => (Stage::Dstar, c, None, None),
        Command::Precode(c) => (Stage::Precode, c, None, None),
        Command::Obstruct { common, cycle } => (Stage::Obstruct, common, None, cycle),
        Command::Simulate { common, sim } => (Stage::Simulate, common, Some(sim), None),
        Command::Pipeline { common, sim } => (Stage::Pipeline, common, Some(sim), None),
    };
    let fail = |code: u8, msg: String| {
        eprintln!("error: {msg}");
        ExitCode::from(code)
    };
    let cycle = match cycle.as_deref().map(parse_cycle).transpose() {
        Ok(c) => c,
        Err(e) => return fail(2, e),
    };
    let text = match std::fs::read_to_string(&common.network) {
        Ok(t) => t,
        Err(e) => return fail(2, format!("cannot read {}: {e}", common.network.display())),
    };
    let defaults = RunConfig::default();
    let cfg = RunConfig {
        q: common.q,
        seed: common.seed,
        max_attempts: common.attempts,
        zero_test_trials: common.zero_trials,
        ratio_trials: common.ratio_trials,
        sessions: sim.as_ref().map_or(defaults.sessions, |s| s.sessions),
        include_traces: sim.as_ref().is_some_and(|s| s.traces),
        cycle,
    };
    let report = match run(stage, &text, &cfg) {
        Ok(r) => r,
        Err(e) => return fail(e.exit_code() as u8, e.to_string()),
    };
    let rendered = match common.format {
        Format::Json => report.to_json(),
        Format::Text => render_text(&report),
    };
    match &common.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, rendered) {
                return fail(1, format!("cannot write {}: {e}", path.display()));
            }
        }
        None => print!("{rendered}"),
    }
    ExitCode::SUCCESS
}
