//! Command-line experiment runner for drift-corrected subspace projection.
//!
//! Exit codes: 0 success, 1 dataset validation failure, 2 malformed input,
//! 3 numerical failure.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use driftlens::dataio::{
    load_ucsd_batches, pad_feature_dim, parse_svmlight_with_map, synth_two_domain, uniform_drift,
    validate_batches, BatchRegistry, LabelMap, DATA_DIR_ENV,
};
use driftlens::harness::{
    emit_heatmap, emit_projection_2d, fit_task_model, grid_search, reproduce_ucsd, run_task,
    Classifier, GridSurface, Norm, ParamGrids, SavedModel,
};
use driftlens::subspace::DEFAULT_RIDGE_TAU;
use driftlens::{Error, HyperParams, LabeledDataset, Method};

#[derive(Parser)]
#[command(name = "driftlens", version, about = "Drift-corrected subspace projection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse batch1..batch10 and check sample counts against the registry
    Validate {
        /// Dataset directory (default: $DRIFTLENS_DATA)
        dir: Option<PathBuf>,
    },
    /// Fit a projection model and save it as JSON
    Fit {
        #[command(flatten)]
        input: TaskInput,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value = "zscore")]
        norm: Norm,
        /// Output model file
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one task end to end and report its accuracy
    Eval {
        #[command(flatten)]
        input: TaskInput,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value = "1nn")]
        classifier: Classifier,
        #[arg(long, default_value = "zscore")]
        norm: Norm,
        /// Optional result file
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "csv")]
        format: Format,
    },
    /// Sweep the parameter grids and emit the full accuracy surface
    Grid {
        #[command(flatten)]
        input: TaskInput,
        #[arg(long, default_value = "ddrca")]
        method: Method,
        /// Subspace dimensions, comma separated (default: published grid)
        #[arg(long, value_delimiter = ',')]
        grid_d: Option<Vec<usize>>,
        /// Lambda values, comma separated
        #[arg(long, value_delimiter = ',')]
        grid_lambda: Option<Vec<f64>>,
        /// Kappa values, comma separated
        #[arg(long, value_delimiter = ',')]
        grid_kappa: Option<Vec<f64>>,
        /// Mu values, comma separated
        #[arg(long, value_delimiter = ',')]
        grid_mu: Option<Vec<f64>>,
        #[arg(long, default_value_t = DEFAULT_RIDGE_TAU)]
        ridge_tau: f64,
        #[arg(long, default_value = "1nn")]
        classifier: Classifier,
        #[arg(long, default_value = "zscore")]
        norm: Norm,
        /// Surface output file
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "csv")]
        format: Format,
    },
    /// Batch-series reproduction: batch 1 as source, batches 2..10 as targets
    ReproduceUcsd {
        /// Dataset directory (default: $DRIFTLENS_DATA)
        dir: Option<PathBuf>,
        /// Methods to sweep, comma separated
        #[arg(long, value_delimiter = ',', default_values = ["pca", "lda", "drca", "ddrca"])]
        methods: Vec<Method>,
        #[arg(long, default_value = "1nn")]
        classifier: Classifier,
        #[arg(long, default_value = "zscore")]
        norm: Norm,
        /// Output prefix for <prefix>.csv and <prefix>.json
        #[arg(long, default_value = "ucsd_report")]
        out: String,
    },
    /// Project the whole batch series to 2-D with PCA and write a CSV
    Project2d {
        /// Dataset directory (default: $DRIFTLENS_DATA)
        dir: Option<PathBuf>,
        /// Output CSV file
        out: PathBuf,
    },
    /// Slice a saved grid surface into an x/y accuracy matrix
    Heatmap {
        /// Surface JSON produced by `grid --format json`
        #[arg(long)]
        surface: PathBuf,
        #[arg(long)]
        x_axis: String,
        #[arg(long)]
        y_axis: String,
        /// Pin a remaining axis, e.g. --fixed d=8 (repeatable)
        #[arg(long)]
        fixed: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Where a task's source/target pair comes from: two svmlight files, or the
/// seeded synthetic generator.
#[derive(Args)]
struct TaskInput {
    /// Labeled source file (svmlight format)
    #[arg(long, required_unless_present = "synth", conflicts_with = "synth")]
    source: Option<PathBuf>,
    /// Target file (svmlight format; labels used only for scoring)
    #[arg(long, requires = "source")]
    target: Option<PathBuf>,
    /// Generate a synthetic two-domain task instead of reading files
    #[arg(long)]
    synth: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    classes: usize,
    #[arg(long, default_value_t = 8)]
    dim: usize,
    #[arg(long, default_value_t = 50)]
    n_per_class: usize,
    /// Euclidean length of the synthetic drift vector
    #[arg(long, default_value_t = 5.0)]
    drift_mag: f64,
}

impl TaskInput {
    fn load(&self) -> Result<(LabeledDataset, Option<LabeledDataset>), Error> {
        if self.synth {
            let drift = uniform_drift(self.dim, self.drift_mag);
            let (s, t) =
                synth_two_domain(self.seed, self.n_per_class, self.classes, self.dim, &drift)?;
            return Ok((s, Some(t)));
        }
        let source_path = self.source.as_ref().expect("clap enforces source|synth");
        let mut map = LabelMap::new();
        let source = parse_svmlight_with_map(source_path, None, &mut map)?;
        match &self.target {
            Some(target_path) => {
                let target = parse_svmlight_with_map(target_path, None, &mut map)?;
                let dim = source.dim().max(target.dim());
                Ok((
                    pad_feature_dim(&source, dim)?,
                    Some(pad_feature_dim(&target, dim)?),
                ))
            }
            None => Ok((source, None)),
        }
    }
}

#[derive(Args)]
struct ParamArgs {
    #[arg(long, default_value = "ddrca")]
    method: Method,
    /// Subspace dimension
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, default_value_t = DEFAULT_RIDGE_TAU)]
    ridge_tau: f64,
}

impl ParamArgs {
    fn to_params(&self) -> HyperParams {
        HyperParams {
            d: self.d,
            lambda: self.lambda,
            kappa: self.kappa,
            mu: self.mu,
            ridge_tau: self.ridge_tau,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn data_dir(arg: Option<PathBuf>) -> Result<PathBuf, Error> {
    if let Some(dir) = arg {
        return Ok(dir);
    }
    std::env::var_os(DATA_DIR_ENV)
        .map(PathBuf::from)
        .ok_or_else(|| {
            Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("no dataset directory given and {} is unset", DATA_DIR_ENV),
            ))
        })
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::DataInvalid { .. } => 1,
        Error::NotPositiveDefinite { .. }
        | Error::NoConvergence { .. }
        | Error::SingularDiagonal { .. } => 3,
        Error::TaskFailed { source, .. } => exit_code(source),
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {}", err);
            ExitCode::from(exit_code(&err))
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Validate { dir } => {
            let dir = data_dir(dir)?;
            let (batches, map) = load_ucsd_batches(&dir)?;
            let report = validate_batches(&batches, &map, &BatchRegistry::ucsd());
            print!("{}", report);
            Ok(if report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Fit {
            input,
            params,
            norm,
            out,
        } => {
            let (source, target) = input.load()?;
            let p = params.to_params();
            let target_features = match (&target, params.method) {
                (Some(t), _) => t.features().clone(),
                (None, Method::Pca | Method::Lda) => source.features().clone(),
                (None, m) => {
                    return Err(Error::Io(std::io::Error::new(
                        std::io::ErrorKind::InvalidInput,
                        format!("method {} needs --target", m),
                    )))
                }
            };
            let (model, _, _, stats) =
                fit_task_model(&source, &target_features, params.method, &p, norm)?;
            SavedModel { model, norm: stats }.save(&out)?;
            println!("model written to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval {
            input,
            params,
            classifier,
            norm,
            out,
            format,
        } => {
            let (source, target) = input.load()?;
            let target = target.ok_or_else(|| {
                Error::Io(std::io::Error::new(
                    std::io::ErrorKind::InvalidInput,
                    "eval needs --target or --synth",
                ))
            })?;
            let result = run_task(
                &source,
                &target,
                params.method,
                &params.to_params(),
                classifier,
                norm,
            )?;
            println!(
                "{} -> {} [{}] accuracy {:.2} ({:.2}s)",
                result.source, result.target, result.method, result.accuracy, result.wall_time
            );
            if let Some(path) = out {
                match format {
                    Format::Json => std::fs::write(&path, serde_json::to_string_pretty(&result)?)?,
                    Format::Csv => {
                        let p = result.params;
                        std::fs::write(
                            &path,
                            format!(
                                "source,target,method,d,lambda,kappa,mu,ridge_tau,accuracy\n{},{},{},{},{},{},{},{},{:.2}\n",
                                result.source, result.target, result.method,
                                p.d, p.lambda, p.kappa, p.mu, p.ridge_tau, result.accuracy
                            ),
                        )?
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Grid {
            input,
            method,
            grid_d,
            grid_lambda,
            grid_kappa,
            grid_mu,
            ridge_tau,
            classifier,
            norm,
            out,
            format,
        } => {
            let (source, target) = input.load()?;
            let target = target.ok_or_else(|| {
                Error::Io(std::io::Error::new(
                    std::io::ErrorKind::InvalidInput,
                    "grid needs --target or --synth",
                ))
            })?;
            let defaults = ParamGrids::ucsd();
            let grids = ParamGrids {
                d: grid_d.unwrap_or(defaults.d),
                lambda: grid_lambda.unwrap_or(defaults.lambda),
                kappa: grid_kappa.unwrap_or(defaults.kappa),
                mu: grid_mu.unwrap_or(defaults.mu),
                ridge_tau,
            };
            let outcome = grid_search(&source, &target, method, &grids, classifier, norm)?;
            match format {
                Format::Csv => outcome.surface.write_csv(&out)?,
                Format::Json => outcome.surface.write_json(&out)?,
            }
            match &outcome.best {
                Some(best) => println!(
                    "best: d={} lambda={} kappa={} mu={} accuracy {:.2} ({} cells, {:.2}s)",
                    best.params.d,
                    best.params.lambda,
                    best.params.kappa,
                    best.params.mu,
                    best.accuracy,
                    outcome.surface.records.len(),
                    best.wall_time
                ),
                None => println!("all {} cells failed", outcome.surface.records.len()),
            }
            println!("surface written to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::ReproduceUcsd {
            dir,
            methods,
            classifier,
            norm,
            out,
        } => {
            let dir = data_dir(dir)?;
            let report = reproduce_ucsd(&dir, &methods, &ParamGrids::ucsd(), classifier, norm)?;
            print!("{}", report);
            let csv_path = PathBuf::from(format!("{}.csv", out));
            let json_path = PathBuf::from(format!("{}.json", out));
            report.write_csv(&csv_path)?;
            report.write_json(&json_path)?;
            println!(
                "report written to {} and {}",
                csv_path.display(),
                json_path.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Project2d { dir, out } => {
            let dir = data_dir(dir)?;
            let (batches, _) = load_ucsd_batches(&dir)?;
            let all = LabeledDataset::concat(&batches, "ucsd")?;
            emit_projection_2d(&all, &out)?;
            println!(
                "{} samples projected to {}",
                all.num_samples(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Heatmap {
            surface,
            x_axis,
            y_axis,
            fixed,
            out,
        } => {
            let surface = GridSurface::load_json(&surface)?;
            let fixed = parse_fixed(&fixed)?;
            emit_heatmap(&surface, &fixed, &x_axis, &y_axis, &out)?;
            println!("heatmap written to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn parse_fixed(args: &[String]) -> Result<Vec<(String, f64)>, Error> {
    args.iter()
        .map(|pair| {
            let (name, value) = pair.split_once('=').ok_or_else(|| {
                Error::Io(std::io::Error::new(
                    std::io::ErrorKind::InvalidInput,
                    format!("--fixed expects name=value, got {:?}", pair),
                ))
            })?;
            let value: f64 = value.parse().map_err(|_| {
                Error::Io(std::io::Error::new(
                    std::io::ErrorKind::InvalidInput,
                    format!("--fixed value in {:?} is not a number", pair),
                ))
            })?;
            Ok((name.to_string(), value))
        })
        .collect()
}
