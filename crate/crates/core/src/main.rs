use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand as ClapSubcommand, ValueEnum};
use moneyflow::network::WeightKind;
use moneyflow::pipeline::{
    run_all, run_subcommand, FieldError, PipelineError, RunConfig, Scenario, Subcommand,
};

#[derive(Parser)]
#[command(
    name = "moneyflow",
    version,
    about = "Analyze inter-firm bank-transfer networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(ClapSubcommand, Clone, Copy)]
enum Command {
    /// Generate a synthetic transfer log with planted structure
    Synth,
    /// Parse, filter and aggregate a transfer log into links
    Ingest,
    /// Degree, weight and correlation statistics
    Stats,
    /// Bowtie decomposition of the network
    Bowtie,
    /// Hodge potentials and circular flow
    Hodge,
    /// Hierarchical map-equation communities
    Communities,
    /// Geographic flow matrix and its NMF
    Nmf,
    /// Summary bundle and figures from all analyses
    Report,
    /// Every step in order
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum Weight {
    Flow,
    Frequency,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Default,
    Walnut,
    Cities,
    Blocks,
}

#[derive(Args)]
struct Opts {
    /// Transfer log (CSV); defaults to the output of `synth`
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Link weight used by hodge and communities
    #[arg(long, global = true, value_enum, default_value = "frequency")]
    weight: Weight,
    /// Relative residual tolerance of the potential solver
    #[arg(long, global = true, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Restarts of the community search
    #[arg(long, global = true, default_value_t = 10)]
    trials: usize,
    /// Cells per side of the geographic grid
    #[arg(long, global = true, default_value_t = 100)]
    grid_k: usize,
    /// LAT_MIN,LAT_MAX,LON_MIN,LON_MAX of the grid; derived from the data if absent
    #[arg(
        long,
        global = true,
        value_delimiter = ',',
        num_args = 4,
        allow_negative_numbers = true
    )]
    grid_bounds: Option<Vec<f64>>,
    /// NMF rank
    #[arg(long, global = true, default_value_t = 10)]
    nmf_d: usize,
    /// Also sweep ranks MIN:MAX
    #[arg(long, global = true)]
    nmf_d_range: Option<String>,
    #[arg(long, global = true, default_value_t = 5000)]
    nmf_max_iter: usize,
    /// Relative objective decrease that stops NMF
    #[arg(long, global = true, default_value_t = 1e-8)]
    nmf_tol: f64,
    /// Disc radius for basis localization
    #[arg(long, global = true, default_value_t = 10.0)]
    radius_km: f64,
    /// Abort ingest on the first malformed line
    #[arg(long, global = true)]
    strict: bool,
    /// Keep transfers involving external banks, individuals or self-loops
    #[arg(long, global = true)]
    keep_all: bool,
    /// Accounts generated by `synth`
    #[arg(long, global = true, default_value_t = 10_000)]
    nodes: usize,
    #[arg(long, global = true, value_enum, default_value = "default")]
    scenario: ScenarioArg,
}

fn parse_range(s: &str) -> Result<(usize, usize), PipelineError> {
    let bad = || {
        PipelineError::Config(vec![FieldError {
            field: "nmf-d-range",
            message: format!("expected MIN:MAX, got `{s}`"),
        }])
    };
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    Ok((
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    ))
}

fn config(o: Opts) -> Result<RunConfig, PipelineError> {
    let grid_bounds = o.grid_bounds.map(|v| [v[0], v[1], v[2], v[3]]);
    Ok(RunConfig {
        input: o.input,
        out: o.out,
        policy: if o.keep_all {
            moneyflow::ingest::FilterPolicy::permissive()
        } else {
            Default::default()
        },
        strict: o.strict,
        weight: match o.weight {
            Weight::Flow => WeightKind::Flow,
            Weight::Frequency => WeightKind::Frequency,
        },
        tol: o.tol,
        seed: o.seed,
        trials: o.trials,
        grid_k: o.grid_k,
        grid_bounds,
        nmf_d: o.nmf_d,
        nmf_d_range: o.nmf_d_range.as_deref().map(parse_range).transpose()?,
        nmf_max_iter: o.nmf_max_iter,
        nmf_tol: o.nmf_tol,
        radius_km: o.radius_km,
        nodes: o.nodes,
        scenario: match o.scenario {
            ScenarioArg::Default => Scenario::Default,
            ScenarioArg::Walnut => Scenario::Walnut,
            ScenarioArg::Cities => Scenario::Cities,
            ScenarioArg::Blocks => Scenario::Blocks,
        },
    })
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let cfg = config(cli.opts)?;
    let manifests = match cli.command {
        Command::All => run_all(&cfg)?,
        c => {
            let sub = match c {
                Command::Synth => Subcommand::Synth,
                Command::Ingest => Subcommand::Ingest,
                Command::Stats => Subcommand::Stats,
                Command::Bowtie => Subcommand::Bowtie,
                Command::Hodge => Subcommand::Hodge,
                Command::Communities => Subcommand::Communities,
                Command::Nmf => Subcommand::Nmf,
                Command::Report => Subcommand::Report,
                Command::All => unreachable!(),
            };
            vec![run_subcommand(sub, &cfg)?]
        }
    };
    for m in manifests {
        eprintln!(
            "{}: wrote {} files to {}",
            m.subcommand,
            m.artifacts.len() + 1,
            cfg.out.join(m.subcommand.as_str()).display()
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
