//! Command-line front end: single training runs, lambda sweeps across the
//! distributed merge methods, and a stage-timing benchmark that tunes the
//! L1 strength toward a target sparsity.
//!
//! Informational text goes to stderr whenever CSV may occupy stdout, so
//! redirected output stays machine readable. Exit codes: 0 when every
//! requested run completed, 1 when some sweep runs failed, 2 for bad
//! flags, paths, or data.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use flate2::read::GzDecoder;

use acowa::aggregate::{run_pipeline, MergePolicy, Method, MethodSpec, PipelineOutput};
use acowa::data::{parse_libsvm, SparseDataset};
use acowa::eval::accuracy;
use acowa::objective::{lambda_max, ModelVector, Penalty};
use acowa::solver::SolverConfig;
use acowa::util::log_space;

#[derive(Parser)]
#[command(
    name = "acowa",
    version,
    about = "Distributed sparse logistic regression: training, sweeps, benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model and write its nonzero coefficients to a file.
    Train(TrainArgs),
    /// Run a method x lambda1 x seed grid and emit one CSV row per run.
    Sweep(SweepArgs),
    /// Tune lambda1 to a target nnz, then report per-stage wall times.
    Bench(BenchArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
enum MethodArg {
    Naive,
    Owa,
    Acowa,
    AcowaCentroidOnly,
    AcowaFwOnly,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::Naive => Method::Naive,
            MethodArg::Owa => Method::Owa,
            MethodArg::Acowa => Method::Acowa,
            MethodArg::AcowaCentroidOnly => Method::AcowaCentroidOnly,
            MethodArg::AcowaFwOnly => Method::AcowaFwOnly,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
enum MergePolicyArg {
    PaperMin,
    MainPartition,
}

impl From<MergePolicyArg> for MergePolicy {
    fn from(m: MergePolicyArg) -> MergePolicy {
        match m {
            MergePolicyArg::PaperMin => MergePolicy::PaperMin,
            MergePolicyArg::MainPartition => MergePolicy::MainPartition,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
enum SolverModeArg {
    Relaxed,
    Full,
}

/// Flags shared by every subcommand that runs the pipeline.
#[derive(Args, Debug)]
struct PipelineArgs {
    /// Number of row partitions.
    #[arg(long, default_value_t = 1)]
    p: usize,

    /// Quadratic penalty weight (elastic net when nonzero).
    #[arg(long, default_value_t = 0.0)]
    lambda2: f64,

    /// Base seed for partitioning, merge sampling, and CV folds.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Where the merge set for the weighted merges comes from.
    #[arg(long, value_enum, default_value = "main_partition")]
    merge_policy: MergePolicyArg,

    /// Iteration budget for the partition solves.
    #[arg(long, value_enum, default_value = "relaxed")]
    solver_mode: SolverModeArg,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Training data, LIBSVM text (.gz accepted).
    #[arg(long)]
    train: PathBuf,

    /// Held-out data for test accuracy.
    #[arg(long)]
    test: Option<PathBuf>,

    /// Merge method.
    #[arg(long, value_enum, default_value = "acowa")]
    method: MethodArg,

    /// L1 strength; defaults to a tenth of the data's lambda_max.
    #[arg(long)]
    lambda1: Option<f64>,

    /// Round-2 penalty reweighting strength.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,

    /// Model output path.
    #[arg(long, default_value = "model.txt")]
    out: PathBuf,

    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Training data, LIBSVM text (.gz accepted).
    #[arg(long)]
    train: PathBuf,

    /// Held-out data; sweep accuracy is measured here.
    #[arg(long)]
    test: PathBuf,

    /// Methods to run (repeat the flag or separate with commas).
    #[arg(long = "method", value_enum, value_delimiter = ',')]
    methods: Vec<MethodArg>,

    /// Runs per configuration, with seeds counting up from --seed.
    #[arg(long, default_value_t = 10)]
    seeds: u64,

    /// Smallest lambda1 on the grid; defaults to lambda_max * 1e-4.
    #[arg(long)]
    lambda1_min: Option<f64>,

    /// Largest lambda1 on the grid; defaults to lambda_max.
    #[arg(long)]
    lambda1_max: Option<f64>,

    /// Number of geometrically spaced lambda1 values.
    #[arg(long, default_value_t = 20)]
    lambda1_count: usize,

    /// Reweighting strengths to sweep (comma separated).
    #[arg(long = "beta", value_delimiter = ',')]
    betas: Vec<f64>,

    /// CSV output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,

    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Training data, LIBSVM text (.gz accepted).
    #[arg(long)]
    train: PathBuf,

    /// Optional held-out data; reported, not used for tuning.
    #[arg(long)]
    test: Option<PathBuf>,

    /// Method to time.
    #[arg(long, value_enum, default_value = "acowa")]
    method: MethodArg,

    /// Nonzero count the lambda1 tuner aims for, within 10 percent.
    #[arg(long, default_value_t = 1000)]
    target_nnz: usize,

    /// Round-2 penalty reweighting strength.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,

    /// Stage CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,

    #[command(flatten)]
    pipeline: PipelineArgs,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Bench(args) => cmd_bench(args),
    };
    result.unwrap_or_else(|err| {
        eprintln!("error: {err:#}");
        ExitCode::from(2)
    })
}

/// Worker threads: `ACOWA_THREADS` when set, hardware parallelism
/// otherwise, never more than the partition count.
fn thread_budget(p: usize) -> Result<usize> {
    let cap = match std::env::var("ACOWA_THREADS") {
        Ok(raw) => {
            let n: usize = raw
                .trim()
                .parse()
                .with_context(|| format!("ACOWA_THREADS=`{raw}` is not an integer"))?;
            if n == 0 {
                bail!("ACOWA_THREADS must be at least 1");
            }
            n
        }
        Err(std::env::VarError::NotPresent) => {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        }
        Err(err) => bail!("ACOWA_THREADS: {err}"),
    };
    Ok(cap.min(p).max(1))
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut reader: Box<dyn Read> = if path.extension().is_some_and(|e| e == "gz") {
        Box::new(GzDecoder::new(BufReader::new(file)))
    } else {
        Box::new(BufReader::new(file))
    };
    let mut buf = Vec::new();
    reader
        .read_to_end(&mut buf)
        .with_context(|| format!("cannot read {}", path.display()))?;
    Ok(buf)
}

fn parse_dataset(bytes: &[u8], dims: Option<usize>, path: &Path) -> Result<SparseDataset> {
    parse_libsvm(bytes, dims).with_context(|| format!("parsing {}", path.display()))
}

/// Loads train and test and aligns their column counts to the larger of
/// the two, so the trained model can score every test row.
fn load_train_test(
    train: &Path,
    test: Option<&Path>,
) -> Result<(SparseDataset, Option<SparseDataset>)> {
    let train_bytes = read_maybe_gz(train)?;
    let Some(test) = test else {
        return Ok((parse_dataset(&train_bytes, None, train)?, None));
    };
    let test_bytes = read_maybe_gz(test)?;
    let mut tr = parse_dataset(&train_bytes, None, train)?;
    let mut te = parse_dataset(&test_bytes, None, test)?;
    let d = tr.n_cols().max(te.n_cols());
    if tr.n_cols() < d {
        tr = parse_dataset(&train_bytes, Some(d), train)?;
    }
    if te.n_cols() < d {
        te = parse_dataset(&test_bytes, Some(d), test)?;
    }
    Ok((tr, Some(te)))
}

fn method_spec(method: Method, pipeline: &PipelineArgs, beta: f64, seed: u64) -> MethodSpec {
    let mut spec = MethodSpec::new(method, pipeline.p, seed);
    spec.beta = beta;
    spec.merge_set_policy = pipeline.merge_policy.into();
    spec
}

fn solver_config(mode: SolverModeArg, lambda1: f64, lambda2: f64) -> SolverConfig {
    let penalty = Penalty::new(lambda1, lambda2);
    match mode {
        SolverModeArg::Relaxed => SolverConfig::relaxed(penalty),
        SolverModeArg::Full => SolverConfig::full(penalty),
    }
}

/// Writes nonzero coefficients as `idx:value` lines with the same 1-based
/// index convention as the data files. Shortest round-trip float text, so
/// identical models produce identical bytes.
fn write_model(path: &Path, model: &ModelVector) -> Result<()> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut out = BufWriter::new(file);
    for (j, &v) in model.coefficients.iter().enumerate() {
        if v != 0.0 {
            writeln!(out, "{}:{}", j + 1, v)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn csv_writer(path: Option<&Path>) -> Result<csv::Writer<Box<dyn Write>>> {
    let sink: Box<dyn Write> = match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    };
    Ok(csv::Writer::from_writer(sink))
}

fn cmd_train(args: TrainArgs) -> Result<ExitCode> {
    let (train, test) = load_train_test(&args.train, args.test.as_deref())?;
    let lambda1 = match args.lambda1 {
        Some(v) => v,
        None => lambda_max(&train)? * 0.1,
    };
    let cfg = solver_config(args.pipeline.solver_mode, lambda1, args.pipeline.lambda2);
    let spec = method_spec(args.method.into(), &args.pipeline, args.beta, args.pipeline.seed);
    let threads = thread_budget(spec.p)?;
    let output = run_pipeline(&train, &spec, &cfg, threads)?;
    write_model(&args.out, &output.model)?;

    println!("method: {}", spec.method.name());
    println!("p: {}", spec.p);
    println!("lambda1: {lambda1}");
    println!("nnz: {}", output.model.nnz());
    println!("train_accuracy: {:.6}", accuracy(&train, &output.model)?);
    if let Some(te) = &test {
        println!("test_accuracy: {:.6}", accuracy(te, &output.model)?);
    }
    println!("time_total_s: {:.6}", output.timings.total.as_secs_f64());
    println!("model_path: {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

const SWEEP_HEADER: [&str; 11] = [
    "method",
    "p",
    "lambda1",
    "lambda2",
    "beta",
    "seed",
    "nnz",
    "accuracy",
    "time_total",
    "status",
    "accuracy_std",
];

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn cmd_sweep(args: SweepArgs) -> Result<ExitCode> {
    if args.seeds < 1 {
        bail!("--seeds must be at least 1");
    }
    if args.lambda1_count < 1 {
        bail!("--lambda1-count must be at least 1");
    }
    let (train, test) = load_train_test(&args.train, Some(&args.test))?;
    let test = test.expect("test path was given");
    let methods: Vec<Method> = if args.methods.is_empty() {
        vec![Method::Naive, Method::Owa, Method::Acowa]
    } else {
        args.methods.iter().copied().map(Method::from).collect()
    };
    let betas = if args.betas.is_empty() { vec![1.0] } else { args.betas.clone() };
    let lmax = lambda_max(&train)?;
    let lo = args.lambda1_min.unwrap_or(lmax * 1e-4);
    let hi = args.lambda1_max.unwrap_or(lmax);
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        bail!("lambda1 grid needs 0 < min <= max, got [{lo}, {hi}]");
    }
    let grid = log_space(lo, hi, args.lambda1_count);
    let threads = thread_budget(args.pipeline.p)?;

    let mut writer = csv_writer(args.out.as_deref())?;
    writer.write_record(SWEEP_HEADER)?;

    // Detail rows stream out as runs finish; aggregates go at the end.
    let mut aggregates: Vec<Vec<String>> = Vec::new();
    let mut total = 0usize;
    let mut failed = 0usize;
    for &method in &methods {
        for &beta in &betas {
            for &lambda1 in &grid {
                let cfg = solver_config(args.pipeline.solver_mode, lambda1, args.pipeline.lambda2);
                let mut nnzs: Vec<f64> = Vec::new();
                let mut accs: Vec<f64> = Vec::new();
                let mut times: Vec<f64> = Vec::new();
                for k in 0..args.seeds {
                    total += 1;
                    let seed = args.pipeline.seed.wrapping_add(k);
                    let spec = method_spec(method, &args.pipeline, beta, seed);
                    let run = run_pipeline(&train, &spec, &cfg, threads).and_then(|out| {
                        let acc = accuracy(&test, &out.model)?;
                        Ok((out.diagnostics.final_nnz, acc, out.timings.total.as_secs_f64()))
                    });
                    let prefix = [
                        method.name().to_string(),
                        args.pipeline.p.to_string(),
                        lambda1.to_string(),
                        args.pipeline.lambda2.to_string(),
                        beta.to_string(),
                    ];
                    match run {
                        Ok((nnz, acc, secs)) => {
                            writer.write_record(prefix.iter().cloned().chain([
                                seed.to_string(),
                                nnz.to_string(),
                                acc.to_string(),
                                secs.to_string(),
                                "ok".to_string(),
                                String::new(),
                            ]))?;
                            nnzs.push(nnz as f64);
                            accs.push(acc);
                            times.push(secs);
                        }
                        Err(err) => {
                            failed += 1;
                            writer.write_record(prefix.iter().cloned().chain([
                                seed.to_string(),
                                String::new(),
                                String::new(),
                                String::new(),
                                err.to_string(),
                                String::new(),
                            ]))?;
                        }
                    }
                }
                let mut agg = vec![
                    method.name().to_string(),
                    args.pipeline.p.to_string(),
                    lambda1.to_string(),
                    args.pipeline.lambda2.to_string(),
                    beta.to_string(),
                    "-1".to_string(),
                ];
                if accs.is_empty() {
                    agg.extend([String::new(), String::new(), String::new()]);
                    agg.extend(["aggregate".to_string(), String::new()]);
                } else {
                    agg.extend([
                        mean(&nnzs).to_string(),
                        mean(&accs).to_string(),
                        mean(&times).to_string(),
                    ]);
                    agg.extend(["aggregate".to_string(), sample_std(&accs).to_string()]);
                }
                aggregates.push(agg);
            }
        }
    }
    for row in &aggregates {
        writer.write_record(row)?;
    }
    writer.flush()?;
    eprintln!("sweep: {total} runs, {failed} failed");
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

const BENCH_MAX_EVALS: usize = 30;

fn cmd_bench(args: BenchArgs) -> Result<ExitCode> {
    let (train, test) = load_train_test(&args.train, args.test.as_deref())?;
    let spec = method_spec(args.method.into(), &args.pipeline, args.beta, args.pipeline.seed);
    let threads = thread_budget(spec.p)?;
    let lmax = lambda_max(&train)?;
    let target = args.target_nnz as f64;

    // nnz falls as lambda1 grows, so bisect in log space over
    // [lmax * 1e-6, lmax], endpoints first. The top endpoint solves a
    // zero-nnz target on the first evaluation.
    let mut lo = lmax * 1e-6;
    let mut hi = lmax;
    let mut best: Option<(f64, f64, PipelineOutput)> = None;
    let mut evals = 0usize;
    let mut converged = false;
    for step in 0..BENCH_MAX_EVALS {
        let lambda1 = match step {
            0 => hi,
            1 => lo,
            _ => ((lo.ln() + hi.ln()) / 2.0).exp(),
        };
        let cfg = solver_config(args.pipeline.solver_mode, lambda1, args.pipeline.lambda2);
        let output = run_pipeline(&train, &spec, &cfg, threads)?;
        evals += 1;
        let nnz = output.diagnostics.final_nnz;
        let dist = (nnz as f64 - target).abs();
        if best.as_ref().is_none_or(|(d, _, _)| dist < *d) {
            best = Some((dist, lambda1, output));
        }
        if dist <= 0.1 * target {
            converged = true;
            break;
        }
        if nnz as f64 > target {
            lo = lambda1;
        } else {
            hi = lambda1;
        }
    }
    let (_, lambda1, output) = best.expect("at least one evaluation ran");
    let nnz = output.diagnostics.final_nnz;

    eprintln!(
        "bench: method={} p={} target_nnz={} tuned_lambda1={} achieved_nnz={} evaluations={} status={}",
        spec.method.name(),
        spec.p,
        args.target_nnz,
        lambda1,
        nnz,
        evals,
        if converged { "converged" } else { "nearest" },
    );
    if let Some(te) = &test {
        eprintln!("bench: test_accuracy={:.6}", accuracy(te, &output.model)?);
    }

    let mut writer = csv_writer(args.out.as_deref())?;
    writer.write_record(["stage", "seconds"])?;
    for (stage, duration) in output.timings.stage_rows() {
        writer.write_record([stage.to_string(), duration.as_secs_f64().to_string()])?;
    }
    writer.flush()?;
    Ok(ExitCode::SUCCESS)
}
