use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use ttclass::classifier::{cross_validate_gamma, evaluate_predictions, train_multiclass_for};
use ttclass::data::{load_csv, load_idx, load_model, pca_fit, save_model, LabelColumn};
use ttclass::sweep::Loss;
use ttclass::{Dataset, DegreeVector, Error, ModelFile, SparsePolynomial, Strategy, TrainConfig};

#[derive(Parser)]
#[command(name = "ttclass", version, about = "Polynomial classifiers in tensor-train format")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a classifier and write the model file.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        /// Regularization weight.
        #[arg(long, default_value_t = 0.0)]
        gamma: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict labels, one per line.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        /// Output file (standard output if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the error rate and the confusion matrix.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Choose the regularization weight by k-fold cross-validation.
    Cv {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        /// Comma-separated candidate weights.
        #[arg(long, value_delimiter = ',', required = true)]
        gamma_grid: Vec<f64>,
        #[arg(long, default_value_t = 10)]
        folds: usize,
    },
    /// Evaluate a polynomial such as "4*x1 + 1*x1^3 - 2*x1 x2 x3" at a point.
    Polyval {
        poly: String,
        #[arg(allow_negative_numbers = true, required = true)]
        x: Vec<f64>,
    },
}

#[derive(Args)]
struct DataArgs {
    /// CSV file with one sample per row.
    #[arg(long, conflicts_with_all = ["idx_images", "idx_labels"])]
    data: Option<PathBuf>,
    /// Label column of the CSV file: first, last or a 0-based index.
    #[arg(long, default_value = "last")]
    label_column: LabelColumn,
    #[arg(long, requires = "idx_labels")]
    idx_images: Option<PathBuf>,
    #[arg(long, requires = "idx_images")]
    idx_labels: Option<PathBuf>,
    /// Use only the first N samples.
    #[arg(long)]
    limit: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    /// Maximal degree per variable; one value for all or a comma list.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    degree: Vec<usize>,
    /// Maximal TT-rank.
    #[arg(long, default_value_t = 4)]
    ranks: usize,
    #[arg(long, value_enum, default_value_t = LossArg::Ls)]
    loss: LossArg,
    /// Maximal number of sweeps.
    #[arg(long, default_value_t = 4)]
    sweeps: usize,
    #[arg(long, value_enum, default_value_t = StrategyArg::Ova)]
    strategy: StrategyArg,
    /// Reduce the features to this many principal components first.
    #[arg(long)]
    pca: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    Ls,
    Lr,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Ova,
    Ovo,
    Code,
}

/// Failures split by exit code.
enum Failure {
    Usage(String),
    Data(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(msg) => Failure::Usage(msg),
            e => Failure::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

/// Prefixes I/O errors with the offending path.
fn at(path: &Path) -> impl FnOnce(Error) -> Failure + '_ {
    move |e| match e {
        Error::Io(io) => Failure::Data(format!("{}: {io}", path.display())),
        e => e.into(),
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Train { data, train, gamma, out } => {
            let ds = data.load()?;
            let (features, pca) = reduce(&ds, train.pca)?;
            let config = train.config(features.dim())?.with_gamma(gamma);
            let model = fit(&features, &config, train.strategy.into())?;
            save_model(&ModelFile { model, pca }, &out).map_err(at(&out))?;
            log::info!("model written to {}", out.display());
        }
        Command::Predict { model, data, out } => {
            let model = load_model(&model).map_err(at(&model))?;
            let ds = data.load()?;
            let predicted = model.predict(&ds)?;
            let mut text = String::with_capacity(predicted.len() * 3);
            for p in predicted {
                text.push_str(&p.to_string());
                text.push('\n');
            }
            match out {
                Some(path) => fs::write(&path, text).map_err(|e| at(&path)(e.into()))?,
                None => std::io::stdout().write_all(text.as_bytes())?,
            }
        }
        Command::Eval { model, data } => {
            let model = load_model(&model).map_err(at(&model))?;
            let ds = data.load()?;
            let predicted = model.predict(&ds)?;
            let classes = &model.model.class_labels;
            let ev = evaluate_predictions(classes, ds.labels(), &predicted);
            println!("error {:.4}", ev.error_rate);
            println!("samples {}", ev.n);
            if ev.unknown > 0 {
                println!("unknown_labels {}", ev.unknown);
            }
            println!("confusion (rows: true, columns: predicted)");
            let width = classes
                .iter()
                .map(|c| c.to_string().len())
                .chain(ev.confusion.iter().flatten().map(|c| c.to_string().len()))
                .max()
                .unwrap_or(1);
            let header: Vec<String> = classes.iter().map(|c| format!("{c:>width$}")).collect();
            println!("{:>width$} {}", "", header.join(" "));
            for (c, row) in classes.iter().zip(&ev.confusion) {
                let cells: Vec<String> = row.iter().map(|n| format!("{n:>width$}")).collect();
                println!("{c:>width$} {}", cells.join(" "));
            }
        }
        Command::Cv { data, train, gamma_grid, folds } => {
            let ds = data.load()?;
            let (features, _) = reduce(&ds, train.pca)?;
            let config = train.config(features.dim())?;
            let cv = cross_validate_gamma(&features, &config, train.strategy.into(), &gamma_grid, folds)?;
            for (g, e) in &cv.mean_errors {
                println!("gamma {g:e} mean_error {e:.4}");
            }
            println!("best_gamma {:e}", cv.best_gamma);
        }
        Command::Polyval { poly, x } => {
            let f: SparsePolynomial = poly.parse().map_err(|e: Error| Failure::Usage(e.to_string()))?;
            println!("{}", f.eval(&x)?);
        }
    }
    Ok(())
}

impl DataArgs {
    fn load(&self) -> CliResult<Dataset> {
        let ds = match (&self.data, &self.idx_images, &self.idx_labels) {
            (Some(path), _, _) => load_csv(path, self.label_column).map_err(at(path))?,
            (None, Some(images), Some(labels)) => load_idx(images, labels).map_err(at(images))?,
            _ => {
                return Err(Failure::Usage(
                    "no input data: pass --data FILE or --idx-images FILE --idx-labels FILE".into(),
                ))
            }
        };
        log::info!("loaded {} samples with {} features from {}", ds.len(), ds.dim(), ds.provenance);
        match self.limit {
            Some(n) if n < ds.len() => Ok(ds.head(n)?),
            _ => Ok(ds),
        }
    }
}

impl TrainArgs {
    fn config(&self, dim: usize) -> CliResult<TrainConfig> {
        let degree = match self.degree[..] {
            [p] => DegreeVector::uniform(p, dim)?,
            _ => DegreeVector::new(self.degree.clone())?,
        };
        let loss = match self.loss {
            LossArg::Ls => Loss::LeastSquares,
            LossArg::Lr => Loss::Logistic,
        };
        let config = TrainConfig::new(degree, self.ranks)?
            .with_loss(loss)
            .with_max_sweeps(self.sweeps)
            .with_seed(self.seed);
        Ok(config)
    }
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Ova => Strategy::OneVsAll,
            StrategyArg::Ovo => Strategy::OneVsOne,
            StrategyArg::Code => Strategy::BinaryCoding,
        }
    }
}

fn reduce(ds: &Dataset, pca: Option<usize>) -> CliResult<(Dataset, Option<ttclass::Pca>)> {
    match pca {
        None => Ok((ds.clone(), None)),
        Some(d) => {
            let p = pca_fit(ds, d)?;
            log::info!(
                "PCA to {d} components keeps {:.2}% of the variance",
                100.0 * p.explained_variance_ratio()
            );
            Ok((p.apply(ds)?, Some(p)))
        }
    }
}

fn fit(ds: &Dataset, config: &TrainConfig, strategy: Strategy) -> CliResult<ttclass::MulticlassModel> {
    let classes = ds.classes();
    log::info!(
        "training {} classifier(s) for {} classes, ranks <= {}, gamma {:e}",
        strategy.num_classifiers(classes.len()),
        classes.len(),
        config.ranks.ranks().iter().max().copied().unwrap_or(1),
        config.gamma
    );
    let model = train_multiclass_for(ds, &classes, config, strategy, |p, entry| {
        log::info!("classifier={} {entry}", p + 1)
    })?;
    Ok(model)
}
