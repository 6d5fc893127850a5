use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use opdyn_cli::{run, Command, OutputFormat, RunConfig, Space};
use opdyn_core::{AtomId, Notion};

/// Expansivity, conjugacy and chaos analyses for weighted composition
/// operators on atomic spaces.
#[derive(Parser)]
#[command(name = "opdyn", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Check a system file and print its boundedness constants.
    Validate(Common),
    /// Split the orbits into conservative and dissipative parts.
    Hopf(Common),
    /// Decide the expansivity notions on L^p or a sequence space.
    Expansivity(Common),
    /// Expansivity on a sequence space (defaults to c0).
    Cfs(Common),
    /// Build the conjugacy to an unweighted composition operator.
    Conjugate(Common),
    /// Check the conjugacy on seeded random functions.
    Verify(Common),
    /// Classify Devaney chaos, mixing and frequent hypercyclicity.
    Classify(Common),
    /// Run every analysis and print one combined report.
    ReportAll(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum SpaceArg {
    Lp,
    Lb,
    C0,
    Compact,
    Pointwise,
}

#[derive(Clone, Copy, ValueEnum)]
enum NotionArg {
    Expansive,
    Average,
    Uniform,
    Positive,
    AveragePositive,
    UniformPositive,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputArg {
    Text,
    Json,
    Csv,
}

#[derive(Args)]
struct Common {
    /// System description file (JSON).
    system: PathBuf,
    /// Function space: lp, lb (bounded), c0 (null sequences), compact or pointwise.
    #[arg(long, value_enum)]
    space: Option<SpaceArg>,
    /// Run a single notion instead of all six.
    #[arg(long, value_enum)]
    notion: Option<NotionArg>,
    /// Iteration horizon for witnesses and inconclusive cases.
    #[arg(long, env = "OPDYN_HORIZON", default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
    horizon: u32,
    /// Growth factor over the n = 1 value that counts as divergence.
    #[arg(long, default_value_t = 1e6)]
    threshold: f64,
    /// Number of random functions used by verification.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    samples: u64,
    /// Seed for the verification samples.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Convert float weights to rationals and use exact arithmetic.
    #[arg(long)]
    exact: bool,
    /// Output format; csv prints the growth profile of one atom.
    #[arg(long, value_enum, default_value = "text")]
    output: OutputArg,
    /// Atom for the CSV profile, as orbit:position.
    #[arg(long)]
    atom: Option<AtomId>,
    /// Package file to verify instead of rebuilding it from the system.
    #[arg(long)]
    package: Option<PathBuf>,
}

impl Common {
    fn into_config(self, command: Command) -> RunConfig {
        let space = self.space.map(|s| {
            Space::parse(match s {
                SpaceArg::Lp => "lp",
                SpaceArg::Lb => "lb",
                SpaceArg::C0 => "c0",
                SpaceArg::Compact => "compact",
                SpaceArg::Pointwise => "pointwise",
            })
            .expect("known space")
        });
        let notion = self.notion.map(|n| match n {
            NotionArg::Expansive => Notion::Expansive,
            NotionArg::Average => Notion::Average,
            NotionArg::Uniform => Notion::Uniform,
            NotionArg::Positive => Notion::Positive,
            NotionArg::AveragePositive => Notion::AveragePositive,
            NotionArg::UniformPositive => Notion::UniformPositive,
        });
        RunConfig {
            command,
            system_path: self.system,
            space,
            notion,
            horizon: self.horizon,
            threshold: self.threshold,
            samples: self.samples as usize,
            seed: self.seed,
            exact: self.exact,
            output: match self.output {
                OutputArg::Text => OutputFormat::Text,
                OutputArg::Json => OutputFormat::Json,
                OutputArg::Csv => OutputFormat::Csv,
            },
            package: self.package,
            atom: self.atom,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match cli.command {
        Sub::Validate(c) => c.into_config(Command::Validate),
        Sub::Hopf(c) => c.into_config(Command::Hopf),
        Sub::Expansivity(c) => c.into_config(Command::Expansivity),
        Sub::Cfs(c) => c.into_config(Command::Cfs),
        Sub::Conjugate(c) => c.into_config(Command::Conjugate),
        Sub::Verify(c) => c.into_config(Command::Verify),
        Sub::Classify(c) => c.into_config(Command::Classify),
        Sub::ReportAll(c) => c.into_config(Command::ReportAll),
    };
    let outcome = run(&config);
    print!("{}", outcome.stdout);
    eprint!("{}", outcome.stderr);
    let _ = std::io::stdout().flush();
    ExitCode::from(outcome.exit_code as u8)
}
