//! Command-line orchestration: the full training pipeline, recommendation,
//! evaluation, synthetic data generation, the EM baseline, and the bound
//! calculator.
//!
//! Diagnostics go to standard error; data outputs go to files or standard
//! output so pipelines compose. Exit codes: 0 success, 1 usage error,
//! 2 data or model error.

use std::collections::HashSet;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use ndarray::Array1;

use crate::baseline::{self, PlsiModel};
use crate::bounds::{compute_bounds, BoundInputs};
use crate::data::{compute_stats, load_triplets, TripletData, TripletSchema};
use crate::error::{Error, Result};
use crate::eval::ranking_metrics;
use crate::model::{compute_posteriors, recommend_top, recover_parameters, MomModel};
use crate::moments::{estimate_m2, estimate_whitened_m3};
use crate::synth::{
    sample_dataset, write_triplets, ItemsPerUserLaw, PlantedModel, UserPriorLaw,
};
use crate::tensor::robust_decompose;
use crate::whitening::{build_whitener, topk_eig, WhiteningTransform};

const DEFAULT_TAUS: &str = "5,10,20,40,60,80,100,200,300,400,500";

#[derive(Parser)]
#[command(
    name = "speccf",
    version,
    about = "Spectral collaborative filtering from implicit feedback"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model with the three-pass moment pipeline.
    Train(TrainArgs),
    /// Print top-tau recommendations for training users.
    Recommend(RecommendArgs),
    /// Score a model against a held-out test set.
    Eval(EvalArgs),
    /// Sample a synthetic dataset from a planted model.
    Synth(SynthArgs),
    /// Train the EM baseline on the same latent structure.
    PlsiTrain(PlsiArgs),
    /// Evaluate sample-size thresholds and parameter-error bounds.
    Bounds(BoundsArgs),
}

#[derive(Args, Clone)]
struct SchemaArgs {
    /// 0-based column of the user key.
    #[arg(long, default_value_t = 0)]
    user_col: usize,
    /// 0-based column of the item key.
    #[arg(long, default_value_t = 1)]
    item_col: usize,
    /// Field delimiter: "tab", "comma", a single character, or "auto".
    #[arg(long, default_value = "auto")]
    delimiter: String,
}

impl SchemaArgs {
    fn to_schema(&self) -> std::result::Result<TripletSchema, String> {
        let delimiter = match self.delimiter.as_str() {
            "auto" => None,
            "tab" => Some('\t'),
            "comma" => Some(','),
            other => {
                let mut chars = other.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) => Some(c),
                    _ => return Err(format!("invalid delimiter '{other}'")),
                }
            }
        };
        Ok(TripletSchema {
            user_col: self.user_col,
            item_col: self.item_col,
            delimiter,
        })
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Triplet interaction log.
    #[arg(long)]
    input: PathBuf,
    /// Output model file.
    #[arg(long)]
    output: PathBuf,
    /// Output posterior table (defaults to `<output>.posteriors.tsv`).
    #[arg(long)]
    posteriors: Option<PathBuf>,
    /// Skip writing the posterior table.
    #[arg(long, default_value_t = false)]
    no_posteriors: bool,
    /// Number of latent states.
    #[arg(long, default_value_t = 100)]
    k: usize,
    /// Eigensolver residual tolerance, relative to the top eigenvalue.
    #[arg(long, default_value_t = 1e-10)]
    eig_tol: f64,
    /// Eigensolver budget in matrix-vector products (default 300 * k).
    #[arg(long)]
    eig_max_iter: Option<usize>,
    /// Tensor power method restarts per component (default 50 * k).
    #[arg(long)]
    restarts: Option<usize>,
    /// Power iterations per restart.
    #[arg(long, default_value_t = 100)]
    power_iters: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Drop the self-pair diagonal from the co-occurrence matrix.
    #[arg(long, default_value_t = false)]
    no_diagonal: bool,
    /// Recommendation default stored in diagnostics only.
    #[arg(long, default_value_t = false)]
    include_seen: bool,
    #[command(flatten)]
    schema: SchemaArgs,
}

#[derive(Args)]
struct RecommendArgs {
    #[arg(long)]
    model: PathBuf,
    /// Training triplet log, used to rebuild histories and key mappings.
    #[arg(long)]
    input: PathBuf,
    /// User key to recommend for; repeatable.
    #[arg(long, conflicts_with = "all_users")]
    user: Vec<String>,
    #[arg(long, default_value_t = false)]
    all_users: bool,
    #[arg(long, default_value_t = 10)]
    tau: usize,
    /// Allow items already in the user's history.
    #[arg(long, default_value_t = false)]
    include_seen: bool,
    #[command(flatten)]
    schema: SchemaArgs,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Comma-separated cutoffs.
    #[arg(long, default_value = DEFAULT_TAUS)]
    taus: String,
    /// Report file (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = false)]
    include_seen: bool,
    #[command(flatten)]
    schema: SchemaArgs,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    users: usize,
    #[arg(long)]
    items: usize,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output triplet file.
    #[arg(long)]
    out: PathBuf,
    /// Also write the planted parameters as a model file.
    #[arg(long)]
    save_model: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    nu_min: usize,
    #[arg(long, default_value_t = 10)]
    nu_max: usize,
    /// Dirichlet concentration of the item columns.
    #[arg(long, default_value_t = 1.0)]
    column_concentration: f64,
    /// Explicit mixing weights, comma-separated (random when omitted).
    #[arg(long)]
    pi: Option<String>,
    /// Per-user Dirichlet prior concentration (shared prior when omitted).
    #[arg(long)]
    dirichlet_users: Option<f64>,
}

#[derive(Args)]
struct PlsiArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 100)]
    k: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = baseline::DEFAULT_REL_TOL)]
    rel_tol: f64,
    #[arg(long, default_value_t = baseline::DEFAULT_MAX_ITER)]
    max_iter: usize,
    #[command(flatten)]
    schema: SchemaArgs,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    sigma1: f64,
    #[arg(long)]
    sigma_k: f64,
    #[arg(long)]
    d2s: f64,
    #[arg(long)]
    d3s: f64,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 1.0)]
    pi_max: f64,
    #[arg(long, default_value_t = 1.0)]
    pi_min: f64,
    #[arg(long, default_value_t = 1.0)]
    c1: f64,
    #[arg(long, default_value_t = 1.0)]
    c2: f64,
    /// Emit tab-separated key/value pairs instead of aligned text.
    #[arg(long, default_value_t = false)]
    tsv: bool,
}

enum CliFailure {
    Usage(String),
    Run(Error),
}

impl From<Error> for CliFailure {
    fn from(e: Error) -> Self {
        CliFailure::Run(e)
    }
}

/// Entry point used by `main`.
pub fn run_from_env() -> i32 {
    run(std::env::args_os())
}

/// Parses and executes a full argument vector, returning the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Recommend(args) => cmd_recommend(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Synth(args) => cmd_synth(args),
        Command::PlsiTrain(args) => cmd_plsi(args),
        Command::Bounds(args) => cmd_bounds(args),
    };
    match outcome {
        Ok(()) => 0,
        Err(CliFailure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            1
        }
        Err(CliFailure::Run(e)) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            2
        }
    }
}

/// Full configuration of a training run.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub input: PathBuf,
    pub output: PathBuf,
    /// Posterior table destination; `None` skips persisting it.
    pub posteriors: Option<PathBuf>,
    pub k: usize,
    pub eig_tol: f64,
    pub eig_max_iter: Option<usize>,
    pub restarts: Option<usize>,
    pub power_iters: usize,
    pub seed: u64,
    pub include_diagonal: bool,
    pub exclude_seen: bool,
    pub schema: TripletSchema,
}

impl TrainConfig {
    pub fn new(input: impl Into<PathBuf>, output: impl Into<PathBuf>, k: usize) -> Self {
        TrainConfig {
            input: input.into(),
            output: output.into(),
            posteriors: None,
            k,
            eig_tol: crate::whitening::DEFAULT_EIG_TOL,
            eig_max_iter: None,
            restarts: None,
            power_iters: 100,
            seed: 42,
            include_diagonal: true,
            exclude_seen: true,
            schema: TripletSchema::default(),
        }
    }
}

/// Diagnostics of a completed training run.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub n_users: usize,
    pub n_items: usize,
    pub nnz: usize,
    pub k: usize,
    /// Full data passes consumed by the pipeline.
    pub passes: u64,
    pub eigenvalues: Vec<f64>,
    /// Deviation of the raw inverse-square eigenvalue weights from a
    /// probability vector before renormalization.
    pub pi_gap: f64,
    pub whiten_residual: f64,
    pub pinv_residual: f64,
    pub stages: Vec<(&'static str, f64)>,
    pub total_seconds: f64,
    pub effective_parameters: usize,
}

fn timed<T>(
    stages: &mut Vec<(&'static str, f64)>,
    name: &'static str,
    f: impl FnOnce() -> Result<T>,
) -> Result<T> {
    let start = Instant::now();
    let value = f().map_err(|e| Error::Stage {
        stage: name,
        source: Box::new(e),
    })?;
    stages.push((name, start.elapsed().as_secs_f64()));
    Ok(value)
}

/// Executes the whole pipeline: load, pairwise moment, eigendecomposition,
/// whitening, whitened third moment, tensor decomposition, parameter
/// recovery, posteriors, and persistence. Exactly three data passes.
pub fn run_train(cfg: &TrainConfig) -> Result<TrainReport> {
    let total_start = Instant::now();
    let mut stages: Vec<(&'static str, f64)> = Vec::new();

    let data = timed(&mut stages, "load", || {
        let file = File::open(&cfg.input)
            .map_err(|e| Error::io(format!("opening {}", cfg.input.display()), e))?;
        load_triplets(BufReader::new(file), &cfg.schema)
    })?;
    let TripletData { matrix, users, .. } = data;

    let stats = timed(&mut stages, "stats", || compute_stats(&matrix))?;
    let m2 = timed(&mut stages, "m2", || {
        estimate_m2(&matrix, cfg.include_diagonal)
    })?;
    let max_iter = cfg.eig_max_iter.unwrap_or_else(|| {
        crate::whitening::default_max_iter(cfg.k)
    });
    let (eigvals, eigvecs) = timed(&mut stages, "eig", || {
        topk_eig(&m2, cfg.k, cfg.eig_tol, max_iter, cfg.seed)
    })?;
    let wt: WhiteningTransform = timed(&mut stages, "whiten", || {
        build_whitener(&eigvals, &eigvecs)
    })?;
    let m3 = timed(&mut stages, "m3", || {
        estimate_whitened_m3(&matrix, wt.w().view())
    })?;
    let restarts = cfg.restarts.unwrap_or(50 * cfg.k);
    let pairs = timed(&mut stages, "tensor", || {
        robust_decompose(&m3, cfg.k, restarts, cfg.power_iters, cfg.seed)
    })?;
    let pi_gap = (pairs.iter().map(|p| p.lambda.powi(-2)).sum::<f64>() - 1.0).abs();
    let model = timed(&mut stages, "recover", || recover_parameters(&wt, &pairs))?;
    let posteriors = timed(&mut stages, "posteriors", || {
        compute_posteriors(&matrix, &model)
    })?;

    timed(&mut stages, "write", || {
        let file = File::create(&cfg.output)
            .map_err(|e| Error::io(format!("creating {}", cfg.output.display()), e))?;
        let mut out = BufWriter::new(file);
        model.write_to(&mut out)?;
        out.flush()
            .map_err(|e| Error::io("flushing model file", e))?;
        if let Some(path) = &cfg.posteriors {
            let file = File::create(path)
                .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
            let mut out = BufWriter::new(file);
            writeln!(out, "#user\tposterior").map_err(|e| Error::io("writing posteriors", e))?;
            for u in 0..matrix.n_users() {
                let row: Vec<String> = posteriors
                    .row(u)
                    .iter()
                    .map(|v| format!("{v:.6e}"))
                    .collect();
                writeln!(out, "{}\t{}", users.key(u), row.join(" "))
                    .map_err(|e| Error::io("writing posteriors", e))?;
            }
            out.flush()
                .map_err(|e| Error::io("flushing posteriors", e))?;
        }
        Ok(())
    })?;

    let (whiten_residual, pinv_residual) = wt.identity_residuals(&m2);
    let report = TrainReport {
        n_users: matrix.n_users(),
        n_items: matrix.n_items(),
        nnz: matrix.nnz(),
        k: cfg.k,
        passes: matrix.passes(),
        eigenvalues: eigvals.to_vec(),
        pi_gap,
        whiten_residual,
        pinv_residual,
        stages,
        total_seconds: total_start.elapsed().as_secs_f64(),
        effective_parameters: model.effective_parameter_count(),
    };
    let _ = stats; // consumed by diagnostics printing at the call site
    Ok(report)
}

fn print_train_diagnostics(report: &TrainReport, exclude_seen: bool) {
    eprintln!(
        "trained k={} on {} users x {} items ({} interactions)",
        report.k, report.n_users, report.n_items, report.nnz
    );
    eprintln!("data passes: {}", report.passes);
    eprintln!("effective parameters: {}", report.effective_parameters);
    eprintln!("recommendation default exclude_seen={}", exclude_seen);
    let spectrum: Vec<String> = report
        .eigenvalues
        .iter()
        .map(|v| format!("{v:.4e}"))
        .collect();
    eprintln!("spectrum: [{}]", spectrum.join(", "));
    eprintln!(
        "whitening identity deviations: {:.3e} (m2), {:.3e} (pseudo-inverse)",
        report.whiten_residual, report.pinv_residual
    );
    eprintln!("mixing weight normalization gap: {:.3e}", report.pi_gap);
    for (name, secs) in &report.stages {
        eprintln!("stage {name:<10} {secs:>10.4}s");
    }
    eprintln!("total          {:>10.4}s", report.total_seconds);
}

fn cmd_train(args: TrainArgs) -> std::result::Result<(), CliFailure> {
    if args.k == 0 {
        return Err(CliFailure::Usage("--k must be at least 1".to_string()));
    }
    let schema = args.schema.to_schema().map_err(CliFailure::Usage)?;
    let posteriors = if args.no_posteriors {
        None
    } else {
        Some(args.posteriors.clone().unwrap_or_else(|| {
            let mut p = args.output.as_os_str().to_owned();
            p.push(".posteriors.tsv");
            PathBuf::from(p)
        }))
    };
    let cfg = TrainConfig {
        input: args.input,
        output: args.output,
        posteriors,
        k: args.k,
        eig_tol: args.eig_tol,
        eig_max_iter: args.eig_max_iter,
        restarts: args.restarts,
        power_iters: args.power_iters,
        seed: args.seed,
        include_diagonal: !args.no_diagonal,
        exclude_seen: !args.include_seen,
        schema,
    };
    let report = run_train(&cfg)?;
    print_train_diagnostics(&report, cfg.exclude_seen);
    Ok(())
}

fn read_model(path: &Path) -> Result<MomModel> {
    let file =
        File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    MomModel::read_from(BufReader::new(file))
}

fn load_data(path: &Path, schema: &TripletSchema) -> Result<TripletData> {
    let file =
        File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    load_triplets(BufReader::new(file), schema)
}

fn cmd_recommend(args: RecommendArgs) -> std::result::Result<(), CliFailure> {
    if args.tau == 0 {
        return Err(CliFailure::Usage("--tau must be at least 1".to_string()));
    }
    if args.user.is_empty() && !args.all_users {
        return Err(CliFailure::Usage(
            "pass --user KEY (repeatable) or --all-users".to_string(),
        ));
    }
    let schema = args.schema.to_schema().map_err(CliFailure::Usage)?;
    let model = read_model(&args.model)?;
    let data = load_data(&args.input, &schema)?;
    if data.matrix.n_items() != model.d() {
        return Err(CliFailure::Run(Error::DimensionMismatch(format!(
            "model has {} items but the input vocabulary has {}",
            model.d(),
            data.matrix.n_items()
        ))));
    }

    let user_ids: Vec<usize> = if args.all_users {
        (0..data.matrix.n_users()).collect()
    } else {
        let mut ids = Vec::with_capacity(args.user.len());
        for key in &args.user {
            let id = data
                .users
                .get(key)
                .ok_or_else(|| Error::UnknownUser { key: key.clone() })?;
            ids.push(id as usize);
        }
        ids
    };

    let stdout = std::io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    for &u in &user_ids {
        let history = data.matrix.row(u);
        let recs = recommend_top(history, &model, args.tau, !args.include_seen);
        let scores = crate::model::predict_scores(history, &model);
        for (rank, &item) in recs.iter().enumerate() {
            writeln!(
                out,
                "{}\t{}\t{}\t{:.6e}",
                data.users.key(u),
                rank + 1,
                data.items.key(item as usize),
                scores[item as usize]
            )
            .map_err(|e| Error::io("writing recommendations", e))?;
        }
    }
    out.flush()
        .map_err(|e| Error::io("flushing recommendations", e))?;
    Ok(())
}

fn parse_taus(text: &str) -> std::result::Result<Vec<usize>, String> {
    let taus: std::result::Result<Vec<usize>, _> = text
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect();
    match taus {
        Ok(list) if !list.is_empty() && list.iter().all(|&t| t >= 1) => Ok(list),
        _ => Err(format!("invalid cutoff list '{text}'")),
    }
}

fn cmd_eval(args: EvalArgs) -> std::result::Result<(), CliFailure> {
    let taus = parse_taus(&args.taus).map_err(CliFailure::Usage)?;
    let schema = args.schema.to_schema().map_err(CliFailure::Usage)?;
    let model = read_model(&args.model)?;
    let train = load_data(&args.train, &schema)?;
    if train.matrix.n_items() != model.d() {
        return Err(CliFailure::Run(Error::DimensionMismatch(format!(
            "model has {} items but the training vocabulary has {}",
            model.d(),
            train.matrix.n_items()
        ))));
    }
    let test = load_data(&args.test, &schema)?;

    // Map the test set through the training dictionaries; unknown users and
    // items cannot be scored.
    let n_train_users = train.matrix.n_users();
    let mut test_sets: Vec<HashSet<u32>> = vec![HashSet::new(); n_train_users];
    let mut unknown_users = 0usize;
    let mut unknown_items = 0usize;
    for u in 0..test.matrix.n_users() {
        let key = test.users.key(u);
        let Some(train_u) = train.users.get(key) else {
            unknown_users += 1;
            continue;
        };
        for &item in test.matrix.row(u) {
            let item_key = test.items.key(item as usize);
            match train.items.get(item_key) {
                Some(mapped) => {
                    test_sets[train_u as usize].insert(mapped);
                }
                None => unknown_items += 1,
            }
        }
    }

    let tau_max = taus.iter().copied().max().unwrap();
    let mut recommendations: Vec<Vec<u32>> = Vec::with_capacity(n_train_users);
    for u in 0..n_train_users {
        if test_sets[u].is_empty() {
            recommendations.push(Vec::new());
            continue;
        }
        let history = train.matrix.row(u);
        recommendations.push(recommend_top(history, &model, tau_max, !args.include_seen));
    }

    let metrics = ranking_metrics(&recommendations, &test_sets, &taus)?;
    eprintln!(
        "evaluated {} users ({} without test activity skipped, {} unknown test users, {} unknown test items dropped)",
        metrics.n_users_evaluated, metrics.n_users_skipped, unknown_users, unknown_items
    );
    match &args.output {
        Some(path) => {
            let file = File::create(path)
                .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
            let mut out = BufWriter::new(file);
            metrics.write_tsv(&mut out)?;
            out.flush().map_err(|e| Error::io("flushing report", e))?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            metrics.write_tsv(&mut out)?;
        }
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> std::result::Result<(), CliFailure> {
    if args.users == 0 || args.items == 0 || args.k == 0 {
        return Err(CliFailure::Usage(
            "--users, --items, and --k must be at least 1".to_string(),
        ));
    }
    if args.nu_min > args.nu_max || args.nu_max > args.items {
        return Err(CliFailure::Usage(format!(
            "items-per-user range [{}, {}] invalid for {} items",
            args.nu_min, args.nu_max, args.items
        )));
    }
    let base = PlantedModel::random(args.items, args.k, args.column_concentration, args.seed)?;
    let pi = match &args.pi {
        Some(text) => {
            let values: std::result::Result<Vec<f64>, _> =
                text.split(',').map(|t| t.trim().parse::<f64>()).collect();
            let values =
                values.map_err(|_| CliFailure::Usage(format!("invalid --pi list '{text}'")))?;
            if values.len() != args.k {
                return Err(CliFailure::Usage(format!(
                    "--pi has {} entries but --k is {}",
                    values.len(),
                    args.k
                )));
            }
            Array1::from_vec(values)
        }
        None => base.pi().clone(),
    };
    let user_prior = match args.dirichlet_users {
        Some(concentration) if concentration > 0.0 => UserPriorLaw::Dirichlet { concentration },
        Some(_) => {
            return Err(CliFailure::Usage(
                "--dirichlet-users must be positive".to_string(),
            ))
        }
        None => UserPriorLaw::Shared,
    };
    let planted = PlantedModel::new(
        base.o().clone(),
        pi,
        user_prior,
        ItemsPerUserLaw::Uniform {
            lo: args.nu_min,
            hi: args.nu_max,
        },
    )?;
    let matrix = sample_dataset(&planted, args.users, args.seed)?;

    let file = File::create(&args.out)
        .map_err(|e| Error::io(format!("creating {}", args.out.display()), e))?;
    let mut out = BufWriter::new(file);
    write_triplets(&matrix, &mut out)?;
    out.flush()
        .map_err(|e| Error::io("flushing triplets", e))?;

    if let Some(path) = &args.save_model {
        let truth = MomModel::from_parts(planted.o().clone(), planted.pi().clone())?;
        let file = File::create(path)
            .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
        let mut out = BufWriter::new(file);
        truth.write_to(&mut out)?;
        out.flush()
            .map_err(|e| Error::io("flushing model file", e))?;
    }
    eprintln!(
        "sampled {} users x {} items, {} interactions ({} empty rows)",
        matrix.n_users(),
        matrix.n_items(),
        matrix.nnz(),
        matrix.empty_row_count()
    );
    Ok(())
}

fn cmd_plsi(args: PlsiArgs) -> std::result::Result<(), CliFailure> {
    if args.k == 0 {
        return Err(CliFailure::Usage("--k must be at least 1".to_string()));
    }
    let schema = args.schema.to_schema().map_err(CliFailure::Usage)?;
    let data = load_data(&args.input, &schema)?;
    let start = Instant::now();
    let model: PlsiModel = baseline::plsi_train(
        &data.matrix,
        args.k,
        args.seed,
        args.rel_tol,
        args.max_iter,
    )?;
    let elapsed = start.elapsed().as_secs_f64();

    let file = File::create(&args.output)
        .map_err(|e| Error::io(format!("creating {}", args.output.display()), e))?;
    let mut out = BufWriter::new(file);
    model.write_to(&mut out)?;
    out.flush()
        .map_err(|e| Error::io("flushing model file", e))?;

    let mom_params = (model.d() - 1) * model.k() + (model.k() - 1);
    eprintln!(
        "plsi k={} converged in {} iterations ({}) in {elapsed:.3}s",
        args.k,
        model.loglik_trace.len(),
        if model.stopped_by_tolerance {
            "stopping rule"
        } else {
            "iteration cap"
        }
    );
    if let Some(last) = model.loglik_trace.last() {
        eprintln!("final log-likelihood: {last:.6}");
    }
    eprintln!(
        "parameters: plsi {} vs moment model {}",
        model.parameter_count(),
        mom_params
    );
    Ok(())
}

fn cmd_bounds(args: BoundsArgs) -> std::result::Result<(), CliFailure> {
    let input = BoundInputs {
        sigma1: args.sigma1,
        sigma_k: args.sigma_k,
        d2s: args.d2s,
        d3s: args.d3s,
        k: args.k,
        n: args.n,
        delta: args.delta,
        pi_max: args.pi_max,
        pi_min: args.pi_min,
        c1: args.c1,
        c2: args.c2,
    };
    let report = compute_bounds(&input)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    if args.tsv {
        report.write_tsv(&mut out)?;
    } else {
        report.write_text(&mut out)?;
    }
    Ok(())
}
