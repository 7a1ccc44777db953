use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use convex_extremum::benchmarks::{benchmark, BenchmarkValues};
use convex_extremum::harness::{
    run_experiment, write_outputs, write_partial_records, write_summary_csv, write_summary_json,
    Execution, Experiment, ExperimentConfig, OutputPaths,
};
use convex_extremum::regression::{self, RegressionSample};
use convex_extremum::whitenoise::{self, DEFAULT_J_MAX};
use convex_extremum::{ConvexFunction, Error, FunctionSpec, Probability};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "convex-extremum", version, about = "Minimizer and minimum of a convex function under noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Water-filling benchmarks rho_m and rho_z for one function and noise level.
    Benchmark {
        #[command(flatten)]
        function: FunctionArgs,
        #[arg(long)]
        eps: f64,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One replication of the procedures; prints the full result as JSON.
    Simulate {
        #[arg(long, value_enum)]
        model: ModelArg,
        #[command(flatten)]
        function: FunctionArgs,
        /// White-noise level.
        #[arg(long)]
        eps: Option<f64>,
        /// Regression design size (n + 1 observations).
        #[arg(long)]
        n: Option<usize>,
        /// Regression noise level.
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_J_MAX)]
        j_max: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo experiment from a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `base_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for records.csv, summary.csv and summary.json.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Summary format printed to stdout.
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Worker threads; 0 uses all cores.
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Run replications on the calling thread.
        #[arg(long, conflicts_with = "threads")]
        serial: bool,
    },
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ModelArg {
    #[value(alias = "white-noise")]
    Whitenoise,
    Regression,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Family {
    #[value(alias = "power-cusp")]
    Cusp,
    Asymmetric,
    Quadratic,
    Piecewise,
}

/// Function selection: a family with its parameters, or a JSON spec.
#[derive(Args, Debug)]
struct FunctionArgs {
    #[arg(long, value_enum, required_unless_present = "function", conflicts_with = "function")]
    family: Option<Family>,
    /// Exponent of the cusp family.
    #[arg(long, default_value_t = 1.0)]
    k: f64,
    #[arg(long, default_value_t = 0.5)]
    center: f64,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, default_value_t = 0.0)]
    offset: f64,
    #[arg(long, allow_hyphen_values = true)]
    left_slope: Option<f64>,
    #[arg(long)]
    right_slope: Option<f64>,
    #[arg(long)]
    curvature: Option<f64>,
    /// Comma-separated knots of the piecewise-linear family.
    #[arg(long, value_delimiter = ',')]
    knots: Vec<f64>,
    /// Comma-separated values at the knots.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    values: Vec<f64>,
    /// Full function spec as JSON, e.g. '{"family":"quadratic","params":{"curvature":1,"center":0.3}}'.
    #[arg(long)]
    function: Option<String>,
}

impl FunctionArgs {
    fn spec(&self) -> Result<FunctionSpec, Error> {
        if let Some(json) = &self.function {
            return serde_json::from_str(json).map_err(|e| Error::Config {
                path: "--function".into(),
                message: e.to_string(),
            });
        }
        let missing = |flag: &str| Error::Config {
            path: flag.into(),
            message: "required for this family".into(),
        };
        Ok(match self.family.expect("clap enforces --family or --function") {
            Family::Cusp => FunctionSpec::PowerCusp {
                center: self.center,
                exponent: self.k,
                scale: self.scale,
                offset: self.offset,
            },
            Family::Asymmetric => FunctionSpec::AsymmetricCusp {
                center: self.center,
                left_slope: self.left_slope.ok_or_else(|| missing("--left-slope"))?,
                right_slope: self.right_slope.ok_or_else(|| missing("--right-slope"))?,
                offset: self.offset,
            },
            Family::Quadratic => FunctionSpec::Quadratic {
                curvature: self.curvature.ok_or_else(|| missing("--curvature"))?,
                center: self.center,
                offset: self.offset,
            },
            Family::Piecewise => FunctionSpec::PiecewiseLinear {
                knots: self.knots.clone(),
                values: self.values.clone(),
            },
        })
    }

    fn build(&self) -> Result<ConvexFunction, Failure> {
        ConvexFunction::new(self.spec().map_err(Failure::usage)?).map_err(Failure::usage)
    }
}

/// An error together with its exit code.
struct Failure {
    code: u8,
    error: Error,
}

impl Failure {
    fn usage(error: Error) -> Self {
        Failure { code: EXIT_CONFIG, error }
    }

    fn runtime(error: Error) -> Self {
        Failure { code: EXIT_RUNTIME, error }
    }
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        let code = match error {
            Error::Config { .. }
            | Error::Domain(_)
            | Error::InvalidFunction(_)
            | Error::NonConvex { .. }
            | Error::NonUniqueMinimizer(_) => EXIT_CONFIG,
            _ => EXIT_RUNTIME,
        };
        Failure { code, error }
    }
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    match out {
        Some(path) => {
            let file = File::create(path).map_err(|e| Failure::runtime(e.into()))?;
            Ok(Box::new(file))
        }
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn write_benchmark(mut w: impl Write, values: &BenchmarkValues, format: Format) -> Result<(), Error> {
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, values)?;
            writeln!(w)?;
        }
        Format::Csv => {
            let mut csv = csv::Writer::from_writer(w);
            csv.serialize(values)?;
            csv.flush()?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Benchmark { function, eps, format, out } => {
            let f = function.build()?;
            let values = benchmark(&f, eps).map_err(Failure::usage)?;
            write_benchmark(sink(&out)?, &values, format).map_err(Failure::runtime)
        }
        Command::Simulate {
            model,
            function,
            eps,
            n,
            sigma,
            alpha,
            seed,
            j_max,
            out,
        } => {
            let f = function.build()?;
            let alpha = Probability::open(alpha).map_err(Failure::usage)?;
            let result = match model {
                ModelArg::Whitenoise => {
                    let eps = eps.ok_or_else(|| Failure::usage(Error::Config {
                        path: "--eps".into(),
                        message: "required for the whitenoise model".into(),
                    }))?;
                    whitenoise::run(&f, eps, alpha, seed, j_max)?
                }
                ModelArg::Regression => {
                    let (n, sigma) = match (n, sigma) {
                        (Some(n), Some(s)) => (n, s),
                        _ => {
                            return Err(Failure::usage(Error::Config {
                                path: "--n/--sigma".into(),
                                message: "both are required for the regression model".into(),
                            }))
                        }
                    };
                    let sample = RegressionSample::simulate(&f, n, sigma, seed)?;
                    regression::run(&sample, alpha, seed)?
                }
            };
            let mut w = sink(&out)?;
            serde_json::to_writer_pretty(&mut w, &result).map_err(|e| Failure::runtime(e.into()))?;
            writeln!(w).map_err(|e| Failure::runtime(e.into()))
        }
        Command::Experiment {
            config,
            seed,
            out,
            format,
            threads,
            serial,
        } => {
            let mut config = ExperimentConfig::from_path(&config)?;
            if let Some(seed) = seed {
                config.base_seed = seed;
            }
            if let Some(dir) = &out {
                config.output = OutputPaths::in_dir(dir);
            }
            let paths = config.output.clone();
            let experiment = Experiment::new(config)?;
            let execution = match (serial, threads) {
                (true, _) => Execution::Serial,
                (false, 0) => Execution::Parallel,
                (false, t) => Execution::ParallelWith(t),
            };
            match run_experiment(&experiment, execution) {
                Ok(outcome) => {
                    write_outputs(&outcome, &paths).map_err(Failure::runtime)?;
                    let stdout = io::stdout().lock();
                    match format {
                        Format::Csv => write_summary_csv(stdout, &outcome.summary),
                        Format::Json => write_summary_json(stdout, &outcome.summary),
                    }
                    .map_err(Failure::runtime)
                }
                Err(partial) => {
                    if let Some(path) = &paths.records_csv {
                        let partial_path = path.with_extension("partial.csv");
                        write_partial_records(&partial_path, &partial.records).map_err(Failure::runtime)?;
                        eprintln!(
                            "wrote {} completed replications to {}",
                            partial.records.len(),
                            partial_path.display()
                        );
                    }
                    Err(Failure::runtime(partial.error))
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.error);
            ExitCode::from(failure.code)
        }
    }
}

