//! `graphtest` command line: `test`, `power`, `diagnostics`, `learn`.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 usage or IO error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use graphtest::Error as CoreError;
use graphtest_cli::diagnostics::{
    diagnostics_csv, null_diagnostics, pairs_csv, DiagnosticsConfig,
};
use graphtest_cli::io::{points_to_csv, read_points};
use graphtest_cli::learn::{learn_toy, Architecture, LearnConfig};
use graphtest_cli::power::{power_csv, power_experiment, PowerConfig};
use graphtest_cli::report::{run_test_on_samples, TestKind, TestOptions};
use graphtest_cli::svg;

#[derive(Parser)]
#[command(
    name = "graphtest",
    about = "Graph two-sample tests: classical, smoothed, and experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one two-sample test on two CSV point files and print JSON.
    Test(TestArgs),
    /// Estimate test power across dimensions and temperatures.
    Power(PowerArgs),
    /// Null-normality diagnostics on two-moons data over a lambda grid.
    Diagnostics(DiagnosticsArgs),
    /// Train a toy generator against two moons by ascending the smoothed
    /// t-statistic.
    Learn(LearnArgs),
}

#[derive(Args)]
struct TestArgs {
    /// First sample, CSV (no header, one point per row).
    file1: PathBuf,
    /// Second sample, CSV of the same dimension.
    file2: PathBuf,
    #[arg(long, default_value = "fr-smooth")]
    test: TestKind,
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Temperature (and MMD bandwidth); conflicts with --gamma.
    #[arg(long)]
    lambda: Option<f64>,
    /// Sets lambda = d^gamma from the data dimension.
    #[arg(long, conflicts_with = "lambda")]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    permutations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Significance level echoed for downstream tooling.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

#[derive(Args)]
struct PowerArgs {
    /// Comma-separated dimensions.
    #[arg(long, value_delimiter = ',', default_value = "2,5,10")]
    dims: Vec<usize>,
    /// Per-sample size (n1 = n2).
    #[arg(long, default_value_t = 128)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long = "mu-shift", default_value_t = 0.0)]
    mu_shift: f64,
    #[arg(long = "sigma-scale", default_value_t = 1.0)]
    sigma_scale: f64,
    /// Comma-separated temperature exponents in [0, 1].
    #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
    gammas: Vec<f64>,
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Comma-separated tests to run.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "fr,fr-smooth,knn,knn-smooth,mmd,energy"
    )]
    tests: Vec<TestKind>,
    #[arg(long, default_value_t = 1000)]
    permutations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the CSV table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnosticsArgs {
    /// Comma-separated temperatures.
    #[arg(long, value_delimiter = ',', default_value = "10,1,0.05")]
    lambdas: Vec<f64>,
    /// Per-sample size (pooled set is twice as large).
    #[arg(long, default_value_t = 128)]
    n: usize,
    #[arg(long, default_value_t = 1000)]
    labellings: usize,
    #[arg(long, default_value = "knn-smooth")]
    test: TestKind,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for summary.csv and pairs.csv; stdout gets the summary.
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct LearnArgs {
    #[arg(long, default_value = "knn-smooth")]
    test: TestKind,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Per-sample batch size.
    #[arg(long, default_value_t = 256)]
    batch: usize,
    #[arg(long, default_value_t = 500)]
    steps: usize,
    #[arg(long, default_value_t = 1e-4)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Generator architecture: "affine" or "tanh:WIDTH".
    #[arg(long, default_value = "affine")]
    arch: String,
    #[arg(long = "noise-dim", default_value_t = 10)]
    noise_dim: usize,
    /// Directory for params.json, samples.csv, trace.csv, scatter.svg.
    #[arg(long = "out-dir", default_value = "learn-out")]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        let code = match e {
            // Numerical failures keep exit code 1; bad inputs and
            // parameters are usage errors.
            CoreError::IllConditioned { .. }
            | CoreError::Numerical(_)
            | CoreError::DegenerateNull { .. }
            | CoreError::DegenerateBandwidth => 1,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            code: 2,
            message: e.to_string(),
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Test(args) => {
            let x1 = read_points(&args.file1).map_err(|e| Failure::usage(e.to_string()))?;
            let x2 = read_points(&args.file2).map_err(|e| Failure::usage(e.to_string()))?;
            if !(args.alpha > 0.0 && args.alpha < 1.0) {
                return Err(Failure::usage(format!(
                    "alpha = {} must lie in (0, 1)",
                    args.alpha
                )));
            }
            let opts = TestOptions {
                test: args.test,
                k: args.k,
                lambda: args.lambda,
                gamma: args.gamma,
                permutations: args.permutations,
                seed: args.seed,
            };
            let report = run_test_on_samples(&x1, &x2, &opts)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
            Ok(())
        }
        Command::Power(args) => {
            let cfg = PowerConfig {
                dims: args.dims,
                n: args.n,
                trials: args.trials,
                alpha_level: args.alpha,
                mu_shift: args.mu_shift,
                sigma_scale: args.sigma_scale,
                gammas: args.gammas,
                k: args.k,
                tests: args.tests,
                permutations: args.permutations,
                seed: args.seed,
            };
            let cells = power_experiment(&cfg)?;
            let csv = power_csv(&cells);
            match args.out {
                Some(path) => std::fs::write(&path, csv)?,
                None => print!("{csv}"),
            }
            Ok(())
        }
        Command::Diagnostics(args) => {
            let cfg = DiagnosticsConfig {
                lambdas: args.lambdas,
                n: args.n,
                labellings: args.labellings,
                test: args.test,
                k: args.k,
                seed: args.seed,
                ..Default::default()
            };
            let (rows, pairs) = null_diagnostics(&cfg)?;
            let summary = diagnostics_csv(&rows);
            if let Some(dir) = args.out_dir {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("summary.csv"), &summary)?;
                std::fs::write(dir.join("pairs.csv"), pairs_csv(&pairs))?;
            }
            print!("{summary}");
            Ok(())
        }
        Command::Learn(args) => {
            let arch = parse_arch(&args.arch)?;
            let cfg = LearnConfig {
                test: args.test,
                k: args.k,
                lambda: args.lambda,
                batch: args.batch,
                steps: args.steps,
                lr: args.lr,
                arch,
                noise_dim: args.noise_dim,
                seed: args.seed,
                ..Default::default()
            };
            let outcome = learn_toy(&cfg)?;
            std::fs::create_dir_all(&args.out_dir)?;
            std::fs::write(
                args.out_dir.join("params.json"),
                serde_json::to_string_pretty(&outcome.params).expect("serializable"),
            )?;
            std::fs::write(
                args.out_dir.join("samples.csv"),
                points_to_csv(&outcome.samples),
            )?;
            let mut trace_csv = String::from("step,t_statistic\n");
            for (i, t) in outcome.trace.iter().enumerate() {
                trace_csv.push_str(&format!("{i},{t}\n"));
            }
            std::fs::write(args.out_dir.join("trace.csv"), trace_csv)?;

            let sample_points: Vec<(f64, f64)> = (0..outcome.samples.len())
                .map(|i| {
                    let r = outcome.samples.row(i);
                    (r[0], r[1])
                })
                .collect();
            let scatter = svg::scatter(&[svg::Series {
                points: &sample_points,
                color: "steelblue",
                label: "generated",
            }]);
            std::fs::write(args.out_dir.join("scatter.svg"), scatter)?;
            if let Some(last) = outcome.trace.last() {
                eprintln!("final t-statistic: {last}");
            }
            Ok(())
        }
    }
}

fn parse_arch(s: &str) -> Result<Architecture, Failure> {
    if s == "affine" {
        return Ok(Architecture::Affine);
    }
    if let Some(width) = s.strip_prefix("tanh:") {
        let width: usize = width
            .parse()
            .map_err(|_| Failure::usage(format!("bad tanh width in --arch {s}")))?;
        if width == 0 {
            return Err(Failure::usage("tanh width must be positive"));
        }
        return Ok(Architecture::OneHiddenTanh { width });
    }
    Err(Failure::usage(format!(
        "unknown architecture '{s}' (expected affine or tanh:WIDTH)"
    )))
}
