mod commands;
mod output;
mod plot;

use clap::{Args, Parser, Subcommand, ValueEnum};
use delegation::rational::parse_rational;
use delegation::{Error, Rational};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "delegation", version, about = "Multi-agent delegated search experiments")]
pub struct Cli {
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Report file; defaults to `<output-dir>/<command>.json`, or stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Directory for report files.
    #[arg(long, global = true, env = "DELEGATION_OUTPUT_DIR")]
    pub output_dir: Option<PathBuf>,
    /// Also write a CSV summary here.
    #[arg(long, global = true)]
    pub csv: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Sampling {
    #[arg(long, value_enum, default_value_t = Mode::Exact)]
    pub mode: Mode,
    #[arg(long, default_value_t = 100_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone)]
pub struct Cap {
    /// Bound on enumerated type profiles, strategy combinations or mechanisms.
    #[arg(long, default_value_t = delegation::model::DEFAULT_PROFILE_CAP)]
    pub cap: u64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Exact,
    Mc,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Agents {
    Pessimistic,
    Constrained,
    Truthful,
    Equilibrium,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Independent,
    Balanced,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
#[value(rename_all = "snake_case")]
pub enum PlotKind {
    RatioVsK,
    BoundsVsK,
    RatioVsEps,
}

fn rational(s: &str) -> Result<Rational, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Root of p^k + p − 1 = 0.
    SolveP {
        #[arg(short)]
        k: usize,
    },
    /// Expected principal utility and ratio to first-best.
    Eval {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        mechanism: PathBuf,
        /// Strategy profile file; overrides --agents.
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long, value_enum)]
        agents: Option<Agents>,
        #[command(flatten)]
        sampling: Sampling,
        #[command(flatten)]
        cap: Cap,
    },
    /// Ratio achieved by the constructive threshold plan against p and the upper bound.
    Gap {
        #[arg(long)]
        instance: PathBuf,
        #[command(flatten)]
        sampling: Sampling,
        #[command(flatten)]
        cap: Cap,
    },
    /// Principal-best pure equilibrium of a strategic instance.
    Equilibrium {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        mechanism: PathBuf,
        /// List every pure equilibrium.
        #[arg(long)]
        all: bool,
        #[command(flatten)]
        cap: Cap,
    },
    /// Analogous strategic instance; with a mechanism, compares its
    /// equilibrium with adversarial behavior.
    Analogous {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        mechanism: Option<PathBuf>,
        #[command(flatten)]
        cap: Cap,
    },
    /// Exact utility of all k + 1 atom-split threshold plans.
    AtomScan {
        #[arg(long)]
        instance: PathBuf,
        #[command(flatten)]
        cap: Cap,
    },
    /// Shuffled threshold plan over random assignments of a pool.
    ShuffleEval {
        #[arg(long)]
        pool: PathBuf,
        #[arg(long, value_enum, default_value_t = Variant::Independent)]
        variant: Variant,
        #[command(flatten)]
        sampling: Sampling,
        #[command(flatten)]
        cap: Cap,
    },
    /// Hard instance for the upper bound.
    HardInstance {
        #[arg(short)]
        k: usize,
        #[arg(long, value_parser = rational)]
        eps: Rational,
        /// Scan every per-element acceptance set.
        #[arg(long)]
        scan: bool,
        #[command(flatten)]
        cap: Cap,
    },
    /// Bracket on p(k) for large k.
    Asymptotics {
        #[arg(long, default_value_t = 2)]
        k_min: usize,
        #[arg(long, default_value_t = 1000)]
        k_max: usize,
    },
    /// CSV series for plotting.
    PlotData {
        #[arg(long, value_enum)]
        kind: PlotKind,
        #[arg(long, default_value_t = 2)]
        k_min: usize,
        #[arg(long, default_value_t = 100)]
        k_max: usize,
        /// ε values (comma separated) for ratio_vs_eps; the first is used by ratio_vs_k.
        #[arg(long, value_parser = rational, value_delimiter = ',', default_value = "1/10")]
        eps: Vec<Rational>,
        /// Agent count for ratio_vs_eps.
        #[arg(short, default_value_t = 2)]
        k: usize,
    },
}

fn run(cli: &Cli) -> Result<(), Error> {
    let outcome = commands::dispatch(&cli.command)?;
    output::emit(cli, outcome)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(&cli)),
            Err(e) => Err(Error::Domain(format!("thread pool: {e}"))),
        },
        None => run(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
