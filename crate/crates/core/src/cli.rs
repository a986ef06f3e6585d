//! The `tensorkit` command line.
//!
//! Every successful command prints a single-line JSON record on stdout.
//! Diagnostics go to stderr. Exit codes: 0 success, 2 usage, 3 data or
//! validation, 4 numeric failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::decomp::{cpd_als, cpd_randomized, hooi, hosvd, tt_svd, FitOptions, TtTarget};
use crate::error::{ErrorClass, Result, TensorError};
use crate::forms::{rel_error, EfficientForm};
use crate::fusion::{cmtf, parafac2, CoupledData, Parafac2Data};
use crate::gaussian::{dof_ratio, fit_flip_flop, logpdf, sample, FlipFlopOptions};
use crate::io::{
    emit_report, import_csv, json::to_canonical_string, load, load_form, load_tensor, save, HtbValue, PlotKind,
};
use crate::learning::{
    lsstm_predict, lsstm_train, tel_predict, tel_train, DecompositionSpec, LsSvmFactory, TensorDataset,
};
use crate::tensor::Tensor;
use crate::Matrix;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "tensorkit", version, about = "Multilinear decompositions, fusion, tensor classifiers and tensor Gaussians")]
struct Cli {
    /// Log progress to stderr.
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a CPD, Tucker or TT form to a stored tensor.
    Decompose(DecomposeArgs),
    /// Expand a stored form into a dense tensor.
    Reconstruct {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Relative error of a form against a tensor.
    Residual {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        form: PathBuf,
    },
    /// Coupled factorisations.
    Fuse(FuseArgs),
    /// Train or apply tensor classifiers.
    #[command(subcommand)]
    Classify(ClassifyCommand),
    /// Tensor normal distributions.
    #[command(subcommand)]
    Stats(StatsCommand),
    /// Convert a CSV file into a tensor document.
    ImportCsv {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        shape: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug, Clone, Copy)]
struct FitArgs {
    #[arg(long, default_value_t = 50)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl FitArgs {
    fn options(&self, verbose: bool) -> FitOptions {
        FitOptions {
            max_iter: self.max_iter,
            tol: self.tol,
            seed: self.seed,
            verbose,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum DecomposeMethod {
    Cpd,
    CpdRand,
    Hosvd,
    Hooi,
    Tt,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum PlotArg {
    Line,
    Bar,
}

#[derive(Args, Debug)]
struct DecomposeArgs {
    #[arg(long, value_enum)]
    method: DecomposeMethod,
    /// CPD rank, one Tucker rank per mode, or the TT inner ranks.
    #[arg(long, value_delimiter = ',', required_unless_present = "eps")]
    rank: Option<Vec<usize>>,
    /// TT relative error budget (tt only).
    #[arg(long)]
    eps: Option<f64>,
    /// Rows sampled per mode update (cpd-rand); defaults to 10 x rank.
    #[arg(long)]
    sample_size: Option<usize>,
    #[command(flatten)]
    fit: FitArgs,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also write a plot-data report (CPD and Tucker only).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Override the suggested plot kind in the report.
    #[arg(long, value_enum)]
    plot_kind: Option<PlotArg>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum FuseMethod {
    Cmtf,
    Parafac2,
}

#[derive(Args, Debug)]
struct FuseArgs {
    #[arg(long, value_enum)]
    method: FuseMethod,
    #[arg(long)]
    rank: usize,
    /// Order-3 tensor coupled through mode 0 (cmtf).
    #[arg(long, required_if_eq("method", "cmtf"))]
    tensor: Option<PathBuf>,
    /// Matrix (order-2 tensor) sharing the tensor's mode 0 (cmtf).
    #[arg(long, required_if_eq("method", "cmtf"))]
    side: Option<PathBuf>,
    /// Comma-separated order-2 tensors with a shared column count (parafac2).
    #[arg(long, value_delimiter = ',', required_if_eq("method", "parafac2"))]
    slices: Vec<PathBuf>,
    #[command(flatten)]
    fit: FitArgs,
    /// Output directory; created if missing.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum ModelKind {
    Lsstm,
    Tel,
}

#[derive(Subcommand, Debug)]
enum ClassifyCommand {
    /// Fit a classifier on samples stacked along mode 0.
    Train {
        #[arg(long, value_enum)]
        model: ModelKind,
        /// Samples stacked along mode 0.
        #[arg(long)]
        data: PathBuf,
        /// CSV with one +1/-1 label per sample.
        #[arg(long)]
        labels: PathBuf,
        /// Regularisation constant (lsstm) or base learner C (tel).
        #[arg(long, default_value_t = 10.0)]
        c: f64,
        /// CPD rank of the per-sample decomposition (tel).
        #[arg(long, conflicts_with = "tucker_ranks")]
        rank: Option<usize>,
        /// Tucker ranks of the per-sample decomposition (tel).
        #[arg(long, value_delimiter = ',')]
        tucker_ranks: Option<Vec<usize>>,
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict labels for samples stacked along mode 0.
    Predict {
        #[arg(long, value_enum)]
        model: ModelKind,
        #[arg(long)]
        model_file: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
enum StatsCommand {
    /// Flip-flop maximum likelihood on samples stacked along mode 0.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        ridge: f64,
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Log-density of one sample, or of each sample in a stack.
    Logpdf {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Draw samples, stacked along a new mode 0.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parameter counts of the tensor versus the unstructured Gaussian.
    DofRatio {
        #[arg(long, value_delimiter = ',', required = true)]
        shape: Vec<usize>,
    },
}

/// Exit code for a library error.
pub fn exit_code(e: &TensorError) -> i32 {
    match e.class() {
        ErrorClass::Usage => EXIT_USAGE,
        ErrorClass::Data => EXIT_DATA,
        ErrorClass::Numeric => EXIT_NUMERIC,
    }
}

/// Runs the command line; `argv[0]` is the program name.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => return clap_exit(e),
    };
    if cli.verbose {
        let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
            .target(env_logger::Target::Stderr)
            .try_init();
    }
    match dispatch(cli) {
        Ok(Ok(record)) => {
            println!("{record}");
            EXIT_OK
        }
        Ok(Err(usage)) => clap_exit(usage),
        Err(e) => {
            eprintln!("tensorkit: {e}");
            exit_code(&e)
        }
    }
}

fn clap_exit(e: clap::Error) -> i32 {
    match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
            print!("{e}");
            EXIT_OK
        }
        _ => {
            eprint!("{}", e.render());
            EXIT_USAGE
        }
    }
}

/// A usage error rendered with clap's usage text.
fn usage_error(kind: ErrorKind, msg: &str, sub: &[&str]) -> clap::Error {
    let mut cmd = Cli::command();
    for name in sub {
        cmd = cmd.find_subcommand(name).cloned().unwrap_or(cmd);
    }
    cmd.error(kind, msg)
}

type Outcome = Result<std::result::Result<Value, clap::Error>>;

fn dispatch(cli: Cli) -> Outcome {
    let verbose = cli.verbose;
    match cli.command {
        Command::Decompose(args) => decompose(args, verbose),
        Command::Reconstruct { input, out } => {
            let form = load_form(&input)?;
            let x = form.reconstruct()?;
            save(&HtbValue::Tensor(x.clone()), &out)?;
            Ok(Ok(json!({"command": "reconstruct", "kind": form.kind(), "shape": x.shape()})))
        }
        Command::Residual { data, form } => {
            let x = load_tensor(&data)?;
            let f = load_form(&form)?;
            let err = rel_error(&x, &f)?;
            Ok(Ok(json!({"command": "residual", "kind": f.kind(), "rel_error": err})))
        }
        Command::Fuse(args) => fuse(args, verbose),
        Command::Classify(c) => classify(c, verbose),
        Command::Stats(s) => stats(s, verbose),
        Command::ImportCsv { input, shape, out } => {
            let t = import_csv(&input, &shape)?;
            save(&HtbValue::Tensor(t), &out)?;
            Ok(Ok(json!({"command": "import-csv", "shape": shape})))
        }
    }
}

fn decompose(a: DecomposeArgs, verbose: bool) -> Outcome {
    let opts = a.fit.options(verbose);
    let x = load_tensor(&a.input)?;
    let single_rank = |ranks: &[usize]| -> std::result::Result<usize, clap::Error> {
        match ranks {
            [r] => Ok(*r),
            _ => Err(usage_error(
                ErrorKind::ValueValidation,
                "CPD takes a single --rank value",
                &["decompose"],
            )),
        }
    };
    if a.eps.is_some() && a.method != DecomposeMethod::Tt {
        return Ok(Err(usage_error(
            ErrorKind::ArgumentConflict,
            "--eps only applies to --method tt",
            &["decompose"],
        )));
    }
    let rank = a.rank.clone().unwrap_or_default();
    let result = match a.method {
        DecomposeMethod::Tt => {
            let target = match (a.eps, a.rank) {
                (Some(eps), None) => TtTarget::Eps(eps),
                (None, Some(r)) => TtTarget::Ranks(r),
                _ => {
                    return Ok(Err(usage_error(
                        ErrorKind::ArgumentConflict,
                        "give exactly one of --rank and --eps for tt",
                        &["decompose"],
                    )))
                }
            };
            tt_svd(&x, &target)?
        }
        DecomposeMethod::Cpd => match single_rank(&rank) {
            Ok(r) => cpd_als(&x, r, &opts)?,
            Err(e) => return Ok(Err(e)),
        },
        DecomposeMethod::CpdRand => match single_rank(&rank) {
            Ok(r) => cpd_randomized(&x, r, a.sample_size.unwrap_or(10 * r), &opts)?,
            Err(e) => return Ok(Err(e)),
        },
        DecomposeMethod::Hosvd => hosvd(&x, &rank)?,
        DecomposeMethod::Hooi => hooi(&x, &rank, &opts)?,
    };
    save(&HtbValue::from(result.form.clone()), &a.out)?;
    if let Some(path) = &a.report {
        let kind = a.plot_kind.map(|k| match k {
            PlotArg::Line => PlotKind::Line,
            PlotArg::Bar => PlotKind::Bar,
        });
        let bundle = emit_report(&result.form, Some(result.rel_error()), kind)?;
        write_text(path, &to_canonical_string(&bundle)?)?;
    }
    Ok(Ok(json!({
        "command": "decompose",
        "kind": result.form.kind(),
        "rel_error": result.rel_error(),
        "iterations": result.iterations,
        "converged": result.converged,
    })))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| TensorError::Io(format!("{}: {e}", path.display())))
}

fn load_matrix(path: &Path) -> Result<Matrix> {
    let t = load_tensor(path)?;
    t.to_matrix()
        .map_err(|e| e.context(format!("{} must hold an order-2 tensor", path.display())))
}

fn save_matrix(m: &Matrix, path: &Path) -> Result<()> {
    save(&HtbValue::Tensor(Tensor::from_matrix(m)), path)
}

fn fuse(a: FuseArgs, verbose: bool) -> Outcome {
    let opts = a.fit.options(verbose);
    fs::create_dir_all(&a.out_dir)
        .map_err(|e| TensorError::Io(format!("{}: {e}", a.out_dir.display())))?;
    match a.method {
        FuseMethod::Cmtf => {
            let (Some(tensor), Some(side)) = (&a.tensor, &a.side) else {
                unreachable!("clap enforces --tensor and --side for cmtf")
            };
            let d = CoupledData::new(load_tensor(tensor)?, load_matrix(side)?)?;
            let r = cmtf(&d, a.rank, &opts)?;
            save(&HtbValue::Cpd(r.cpd.clone()), a.out_dir.join("cpd.htb"))?;
            save_matrix(&r.v, &a.out_dir.join("side-loadings.htb"))?;
            Ok(Ok(json!({
                "command": "fuse",
                "method": "cmtf",
                "rel_error": r.rel_error(),
                "iterations": r.iterations,
                "converged": r.converged,
            })))
        }
        FuseMethod::Parafac2 => {
            let slices = a
                .slices
                .iter()
                .map(|p| load_matrix(p))
                .collect::<Result<Vec<_>>>()?;
            let r = parafac2(&Parafac2Data::new(slices)?, a.rank, &opts)?;
            for (k, u) in r.u.iter().enumerate() {
                save_matrix(u, &a.out_dir.join(format!("u-{k}.htb")))?;
            }
            save_matrix(&r.s, &a.out_dir.join("s.htb"))?;
            save_matrix(&r.v, &a.out_dir.join("v.htb"))?;
            Ok(Ok(json!({
                "command": "fuse",
                "method": "parafac2",
                "rel_error": r.rel_error(),
                "iterations": r.iterations,
                "converged": r.converged,
            })))
        }
    }
}

/// Splits a tensor along mode 0 into its slices; each keeps the remaining
/// modes' metadata.
fn unstack(t: &Tensor) -> Result<Vec<Tensor>> {
    if t.order() < 2 {
        return Err(TensorError::Dimension(
            "stacked samples need an order of at least 2 (mode 0 indexes samples)".into(),
        ));
    }
    let shape = t.shape()[1..].to_vec();
    let modes = t.modes()[1..].to_vec();
    let block: usize = shape.iter().product();
    t.values()
        .chunks(block)
        .map(|c| Tensor::from_parts(shape.clone(), c.to_vec(), modes.clone(), Vec::new()))
        .collect()
}

/// Inverse of [`unstack`]; mode 0 is named `sample`.
fn stack(samples: &[Tensor]) -> Result<Tensor> {
    let first = samples
        .first()
        .ok_or_else(|| TensorError::Argument("nothing to stack".into()))?;
    let mut shape = vec![samples.len()];
    shape.extend_from_slice(first.shape());
    let mut modes = vec![crate::tensor::Mode::new("sample")];
    modes.extend_from_slice(first.modes());
    let values = samples.iter().flat_map(|s| s.values().iter().copied()).collect();
    Tensor::from_parts(shape, values, modes, Vec::new())
}

fn load_labels(path: &Path, count: usize) -> Result<Vec<i8>> {
    let raw = import_csv(path, &[count])?;
    raw.values()
        .iter()
        .enumerate()
        .map(|(i, &v)| match v {
            1.0 => Ok(1),
            -1.0 => Ok(-1),
            _ => Err(TensorError::Data(format!("label {i} is {v}, expected +1 or -1"))),
        })
        .collect()
}

fn classify(c: ClassifyCommand, verbose: bool) -> Outcome {
    match c {
        ClassifyCommand::Train {
            model,
            data,
            labels,
            c,
            rank,
            tucker_ranks,
            fit,
            out,
        } => {
            let opts = fit.options(verbose);
            let samples = unstack(&load_tensor(&data)?)?;
            let labels = load_labels(&labels, samples.len())?;
            let d = TensorDataset::new(samples, labels)?;
            let (value, accuracy) = match model {
                ModelKind::Lsstm => {
                    if rank.is_some() || tucker_ranks.is_some() {
                        return Ok(Err(usage_error(
                            ErrorKind::ArgumentConflict,
                            "--rank and --tucker-ranks only apply to --model tel",
                            &["classify", "train"],
                        )));
                    }
                    let m = lsstm_train(&d, c, &opts)?;
                    let acc = accuracy(&d, |x| lsstm_predict(&m, x))?;
                    (HtbValue::Lsstm(m), acc)
                }
                ModelKind::Tel => {
                    let spec = match (rank, tucker_ranks) {
                        (Some(rank), None) => DecompositionSpec::Cpd { rank },
                        (None, Some(ranks)) => DecompositionSpec::Tkd { ranks },
                        _ => {
                            return Ok(Err(usage_error(
                                ErrorKind::MissingRequiredArgument,
                                "--model tel needs --rank or --tucker-ranks",
                                &["classify", "train"],
                            )))
                        }
                    };
                    let m = tel_train(&d, &spec, &LsSvmFactory { c }, &opts)?;
                    let acc = accuracy(&d, |x| tel_predict(&m, x))?;
                    (HtbValue::Tel(m), acc)
                }
            };
            save(&value, &out)?;
            Ok(Ok(json!({
                "command": "classify-train",
                "model": value.kind(),
                "samples": d.len(),
                "training_accuracy": accuracy,
            })))
        }
        ClassifyCommand::Predict {
            model,
            model_file,
            data,
        } => {
            let samples = unstack(&load_tensor(&data)?)?;
            let predictions: Vec<i8> = match (model, load(&model_file)?) {
                (ModelKind::Lsstm, HtbValue::Lsstm(m)) => {
                    samples.iter().map(|x| lsstm_predict(&m, x)).collect::<Result<_>>()?
                }
                (ModelKind::Tel, HtbValue::Tel(m)) => {
                    samples.iter().map(|x| tel_predict(&m, x)).collect::<Result<_>>()?
                }
                (want, found) => {
                    let want = if want == ModelKind::Lsstm { "lsstm" } else { "tel" };
                    return Err(TensorError::validation(
                        "kind",
                        format!("expected `{want}`, found `{}`", found.kind()),
                    ));
                }
            };
            Ok(Ok(json!({"command": "classify-predict", "predictions": predictions})))
        }
    }
}

fn accuracy(d: &TensorDataset, predict: impl Fn(&Tensor) -> Result<i8>) -> Result<f64> {
    let mut hits = 0usize;
    for (x, &y) in d.samples().iter().zip(d.labels()) {
        if predict(x)? == y {
            hits += 1;
        }
    }
    Ok(hits as f64 / d.len() as f64)
}

fn load_normal(path: &Path) -> Result<crate::gaussian::TensorNormal> {
    match load(path)? {
        HtbValue::TensorNormal(m) => Ok(m),
        other => Err(TensorError::validation(
            "kind",
            format!("expected `tensor_normal`, found `{}`", other.kind()),
        )),
    }
}

fn stats(s: StatsCommand, verbose: bool) -> Outcome {
    match s {
        StatsCommand::Fit {
            data,
            ridge,
            fit,
            out,
        } => {
            let samples = unstack(&load_tensor(&data)?)?;
            let r = fit_flip_flop(
                &samples,
                &FlipFlopOptions {
                    fit: fit.options(verbose),
                    ridge,
                },
            )?;
            save(&HtbValue::TensorNormal(r.model), &out)?;
            Ok(Ok(json!({
                "command": "stats-fit",
                "loglik": r.loglik_trace.last(),
                "iterations": r.iterations,
                "converged": r.converged,
            })))
        }
        StatsCommand::Logpdf { model, input } => {
            let m = load_normal(&model)?;
            let x = load_tensor(&input)?;
            let value = if x.order() == m.shape().len() + 1 && &x.shape()[1..] == m.shape() {
                let v = unstack(&x)?
                    .iter()
                    .map(|s| logpdf(&m, s))
                    .collect::<Result<Vec<_>>>()?;
                json!(v)
            } else {
                json!(logpdf(&m, &x)?)
            };
            Ok(Ok(json!({"command": "stats-logpdf", "logpdf": value})))
        }
        StatsCommand::Sample {
            model,
            count,
            seed,
            out,
        } => {
            let m = load_normal(&model)?;
            let draws = sample(&m, count, seed)?;
            let stacked = stack(&draws)?;
            save(&HtbValue::Tensor(stacked.clone()), &out)?;
            Ok(Ok(json!({"command": "stats-sample", "shape": stacked.shape()})))
        }
        StatsCommand::DofRatio { shape } => {
            let d = dof_ratio(&shape)?;
            Ok(Ok(json!({
                "command": "stats-dof-ratio",
                "shape": shape,
                "eta_tensor": d.eta_tensor,
                "eta_multi": d.eta_multi,
                "ratio": d.ratio,
            })))
        }
    }
}
