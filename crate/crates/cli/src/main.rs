use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::error;

use sepfluct::grid::{read_grid, write_grid};
use sepfluct::{build_grid, Bandwidth, ManifoldModel};
use sepfluct_cli::{exit, load_config, report, run_suites, write_report, ConfigError, Overrides, RunError};

/// Simulate the symmetric exclusion process on random manifold grids and
/// check its equilibrium fluctuations against exact oracles.
#[derive(Parser)]
#[command(name = "sepfluct", version)]
struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build or inspect grid files.
    #[command(subcommand)]
    Grid(GridCommand),
    /// Run the experiment described by a TOML config.
    Run(RunArgs),
    /// Print the summary of a finished run and exit with its verdict.
    Report { dir: PathBuf },
}

#[derive(Subcommand)]
enum GridCommand {
    /// Sample a grid and write it in the binary grid format.
    Build(BuildArgs),
    /// Print a grid file's header and basic statistics.
    Inspect { file: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum ManifoldArg {
    Circle,
    Torus1,
    Torus2,
    Sphere,
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long, value_enum)]
    manifold: ManifoldArg,
    /// Number of grid points.
    #[arg(short, long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bandwidth scale A in ε = A (ln N / N)^{1/(d+4)}; defaults to the built-in constant.
    #[arg(long, conflicts_with = "epsilon")]
    scale: Option<f64>,
    /// Fixed bandwidth ε.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Master seed for replica streams.
    #[arg(long, env = "SEPFLUCT_SEED")]
    seed: Option<u64>,
    #[arg(long, env = "SEPFLUCT_REPLICAS")]
    replicas: Option<usize>,
    #[arg(long, env = "SEPFLUCT_THREADS")]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, env = "SEPFLUCT_OUT")]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    ExitCode::from(match cli.command {
        Command::Grid(GridCommand::Build(a)) => grid_build(a),
        Command::Grid(GridCommand::Inspect { file }) => grid_inspect(file),
        Command::Run(a) => run(a),
        Command::Report { dir } => match report::read_summary(&dir) {
            Ok((text, pass)) => {
                print!("{text}");
                if pass {
                    exit::PASS
                } else {
                    exit::CHECK_FAILED
                }
            }
            Err(e) => {
                error!("cannot read report in {}: {e}", dir.display());
                exit::IO
            }
        },
    })
}

fn grid_build(a: BuildArgs) -> u8 {
    let m = match a.manifold {
        ManifoldArg::Circle => ManifoldModel::circle(),
        ManifoldArg::Torus1 => ManifoldModel::flat_torus(1).expect("1-torus"),
        ManifoldArg::Torus2 => ManifoldModel::flat_torus(2).expect("2-torus"),
        ManifoldArg::Sphere => ManifoldModel::sphere2(),
    };
    let bw = match (a.scale, a.epsilon) {
        (Some(s), _) => Bandwidth::Scaled(s),
        (_, Some(e)) => Bandwidth::Fixed(e),
        _ => Bandwidth::Auto,
    };
    let grid = match build_grid(&m, a.n, bw, a.seed) {
        Ok(g) => g,
        Err(e) => {
            error!("{e}");
            return exit::CONFIG;
        }
    };
    let written = File::create(&a.out)
        .map_err(sepfluct::Error::from)
        .and_then(|f| write_grid(&grid, BufWriter::new(f)));
    match written {
        Ok(()) => {
            println!(
                "wrote {} grid with N = {}, eps = {:.6}, {} edges to {}",
                m.name(),
                grid.n(),
                grid.epsilon(),
                grid.edges().len(),
                a.out.display()
            );
            exit::PASS
        }
        Err(e) => {
            error!("cannot write {}: {e}", a.out.display());
            exit::IO
        }
    }
}

fn grid_inspect(file: PathBuf) -> u8 {
    let grid = match File::open(&file).map_err(sepfluct::Error::from).and_then(|f| read_grid(BufReader::new(f))) {
        Ok(g) => g,
        Err(e) => {
            error!("cannot read {}: {e}", file.display());
            return exit::IO;
        }
    };
    let m = grid.manifold();
    println!("manifold      {}", m.name());
    println!("points        {}", grid.n());
    println!("seed          {}", grid.seed());
    println!("epsilon       {:.6}", grid.epsilon());
    println!("edges         {}", grid.edges().len());
    println!("mean degree   {:.2}", grid.mean_degree());
    println!("isolated      {}", grid.isolated().len());
    println!("total rate    {:.6e}", grid.total_rate());
    let first = if m.dim() == 1 { vec![1] } else { vec![1, 0] };
    if let Ok(f) = m.eigenfunction(&first) {
        println!("E_f for {:<5} {:.4}", f.name(), grid.laplacian_error(&f));
    }
    exit::PASS
}

fn run(a: RunArgs) -> u8 {
    let overrides = Overrides {
        seed: a.seed,
        replicas: a.replicas,
        threads: a.threads,
        output: a.out,
    };
    let cfg = match load_config(&a.config, &overrides) {
        Ok(c) => c,
        Err(e @ ConfigError::Read { .. }) => {
            error!("{e}");
            return exit::IO;
        }
        Err(e) => {
            eprintln!("{e}");
            return exit::CONFIG;
        }
    };
    let results = match run_suites(&cfg) {
        Ok(r) => r,
        Err(e) => {
            error!("{e}");
            return if e.is_io() { exit::IO } else { exit::RUNTIME };
        }
    };
    match write_report(&cfg, results) {
        Ok(rep) => {
            let body = serde_json::to_value(&rep.body).expect("report body serializes");
            print!("{}", report::summary(&body));
            println!("report written to {}", cfg.output.display());
            if rep.body.pass {
                exit::PASS
            } else {
                exit::CHECK_FAILED
            }
        }
        Err(e) => {
            error!("cannot write report to {}: {}", cfg.output.display(), RunError::from(e));
            exit::IO
        }
    }
}
