use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use deconfound::confound::Group;
use deconfound::data::{
    center_columns, read_covariates, read_matrix, sidecar_path, write_covariates, write_matrix, Covariate, CovariateSet, DataMatrix,
    Dataset, PreprocessOptions, PreprocessorFile, PreprocessorState,
};
use deconfound::eval::{auc, cell_counts, confounded_test_subset, derive_seed, run_experiment, ExperimentConfig, Method};
use deconfound::models::{
    ancova_filter, dann_fit, logreg_fit, mlp_fit, predict_proba, save_model, write_loss_history, Fitted, ModelFile, TrainConfig,
};
use deconfound::onion::{load_basis, onion_fit, onion_transform, save_basis, BasisFile, OnionConfig};
use deconfound::simulate::{balance_quadrants, sim_draw, sim_world, simulate_confounded, SimConfig, TestBalance};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult, Context};
use crate::{manifest, Cli, Command};

pub const LABEL_COLUMN: &str = "label";

pub fn run(cli: &Cli) -> CliResult<()> {
    fs::create_dir_all(&cli.out_dir).map_err(|e| CliError::usage(anyhow::anyhow!("creating {}: {e}", cli.out_dir.display())))?;
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Simulate(args) => simulate(cli, args, seed),
        Command::OnionFit(args) => onion_fit_cmd(cli, args, seed),
        Command::OnionTransform(args) => onion_transform_cmd(cli, args),
        Command::Train(args) => train(cli, args, seed),
        Command::Evaluate(args) => evaluate(cli, args),
        Command::Experiment(args) => experiment(cli, args),
    }
}

fn parse_json<T: DeserializeOwned>(text: &str, origin: &str) -> CliResult<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::usage(anyhow::anyhow!("{origin}: at `{path}`: {}", e.into_inner()))
    })
}

fn read_json_file<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::usage(anyhow::anyhow!("reading {}: {e}", path.display())))?;
    parse_json(&text, &path.display().to_string())
}

fn write_json_file<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).runtime("serializing output")?;
    fs::write(path, text + "\n").runtime(&format!("writing {}", path.display()))
}

fn load_dataset(x: &Path, covariates: &Path) -> CliResult<(Dataset<f64>, Option<Vec<String>>)> {
    let (matrix, sidecar) = read_matrix::<f64>(x)?;
    let set = read_covariates::<f64>(covariates)?;
    let names = sidecar.and_then(|s| s.feature_names);
    Ok((Dataset::new(matrix, set)?, names))
}

fn select_confounders(set: &CovariateSet<f64>, names: &Option<Vec<String>>) -> CliResult<Vec<Covariate<f64>>> {
    match names {
        None => Ok(set.confounders.clone()),
        Some(names) => names
            .iter()
            .map(|n| {
                set.confounder(n)
                    .cloned()
                    .ok_or_else(|| CliError::usage(anyhow::anyhow!("no covariate named {n:?}")))
            })
            .collect(),
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Latent dimension.
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    pub d: u64,
    /// Feature count.
    #[arg(long, default_value_t = 300, value_parser = clap::value_parser!(u64).range(1..))]
    pub p: u64,
    /// Noise level.
    #[arg(long, default_value_t = 2.0)]
    pub sigma: f64,
    /// Factor count including the label.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,
    /// Dirichlet concentration, one value per factor.
    #[arg(long, value_delimiter = ',', default_values_t = vec![40.0, 50.0])]
    pub concentration: Vec<f64>,
    /// Training samples after the confounding filter.
    #[arg(long, default_value_t = 6000, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    /// Probability that a drawn sample goes to the test side.
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    /// Test-set balancing.
    #[arg(long, value_enum, default_value_t = BalanceArg::Unfiltered)]
    pub balance: BalanceArg,
    /// File name prefix.
    #[arg(long, default_value = "sim")]
    pub prefix: String,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
pub enum BalanceArg {
    Unfiltered,
    Quadrants,
}

#[derive(Serialize)]
struct SimulateManifest<'a> {
    sim: &'a SimConfig,
    alpha: Vec<f64>,
    test_fraction: f64,
    balance: TestBalance,
    train_size: usize,
    test_size: usize,
}

fn simulate(cli: &Cli, args: &SimulateArgs, seed: u64) -> CliResult<()> {
    let config = SimConfig {
        d: args.d as usize,
        p: args.p as usize,
        sigma: args.sigma,
        k: args.k as usize,
        concentration: args.concentration.clone(),
        n: args.n as usize,
        seed,
    };
    config.validate()?;
    if !(0.0 < args.test_fraction && args.test_fraction < 1.0) {
        return Err(CliError::usage(anyhow::anyhow!("--test-fraction must be in (0, 1)")));
    }
    let balance = match args.balance {
        BalanceArg::Unfiltered => TestBalance::Unfiltered,
        BalanceArg::Quadrants => TestBalance::Quadrants,
    };
    let world = sim_world::<f64>(&config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[1]));
    let (train, mut test) = if config.k == 2 {
        simulate_confounded(&world, &config, args.test_fraction, &mut rng)?
    } else {
        // Without a single confounder there is nothing to filter on.
        if balance == TestBalance::Quadrants {
            return Err(CliError::usage(anyhow::anyhow!("--balance quadrants needs --k 2")));
        }
        let n_test = ((config.n as f64) * args.test_fraction / (1.0 - args.test_fraction)).ceil() as usize;
        let train = sim_draw(&world, &config, config.n, &mut rng)?;
        let test = sim_draw(&world, &config, n_test.max(1), &mut rng)?;
        (train, test)
    };
    if balance == TestBalance::Quadrants {
        let keep = balance_quadrants(&test, &mut rng)?;
        if keep.is_empty() {
            return Err(CliError::runtime(anyhow::anyhow!("a test quadrant is empty")));
        }
        test = test.select(&keep);
    }
    let mut outputs = Vec::new();
    for (part, ds) in [("train", &train), ("test", &test)] {
        let x_path = cli.out_dir.join(format!("{}_{part}_x.csv", args.prefix));
        let c_path = cli.out_dir.join(format!("{}_{part}_covariates.csv", args.prefix));
        write_matrix(&x_path, &ds.x, None).runtime("writing matrix")?;
        write_covariates(&c_path, &ds.covariates, LABEL_COLUMN).runtime("writing covariates")?;
        outputs.extend([x_path.clone(), sidecar_path(&x_path), c_path.clone(), sidecar_path(&c_path)]);
    }
    let record = SimulateManifest {
        sim: &config,
        alpha: world.alpha.to_vec(),
        test_fraction: args.test_fraction,
        balance,
        train_size: train.n(),
        test_size: test.n(),
    };
    manifest::write(
        &cli.out_dir.join(format!("{}_manifest.json", args.prefix)),
        "simulate",
        &record,
        &[],
        &outputs,
    )?;
    log::info!("wrote {} training and {} test samples", train.n(), test.n());
    Ok(())
}

#[derive(Debug, Args, Serialize)]
pub struct OnionFitArgs {
    /// Training matrix CSV.
    #[arg(long)]
    pub x: PathBuf,
    /// Covariate CSV with sidecar.
    #[arg(long)]
    pub covariates: PathBuf,
    /// Confounder columns to use, in order (default: all).
    #[arg(long, value_delimiter = ',')]
    pub confounders: Option<Vec<String>>,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    /// Fail instead of skipping degenerate confounders.
    #[arg(long)]
    pub strict: bool,
    /// Basis file name inside the output directory.
    #[arg(long, default_value = "basis.json")]
    pub output: PathBuf,
}

fn manifest_path(out_dir: &Path, output: &Path) -> PathBuf {
    let stem = output.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned());
    out_dir.join(format!("{stem}_manifest.json"))
}

/// Columns are centered before fitting; the basis then applies to any data
/// with the same features.
fn onion_fit_cmd(cli: &Cli, args: &OnionFitArgs, seed: u64) -> CliResult<()> {
    let (ds, _) = load_dataset(&args.x, &args.covariates)?;
    let confounders = select_confounders(&ds.covariates, &args.confounders)?;
    let ys: Vec<_> = confounders.iter().map(|c| c.values.clone()).collect();
    let config = OnionConfig {
        tol: args.tol,
        max_iter: args.max_iter,
        seed,
    };
    let (centered, _) = center_columns(&ds.x);
    let (basis, report) = onion_fit(&centered, &ys, &config)?;
    if args.strict {
        report.ensure_complete()?;
    }
    let out = cli.out_dir.join(&args.output);
    save_basis(&out, &basis, &report).runtime("writing basis")?;
    manifest::write(
        &manifest_path(&cli.out_dir, &args.output),
        "onion-fit",
        serde_json::json!({ "args": args, "onion": config }),
        &[args.x.clone(), args.covariates.clone()],
        &[out],
    )?;
    println!("basis with m = {} of {} confounders", basis.m(), ys.len());
    Ok(())
}

#[derive(Debug, Args, Serialize)]
pub struct OnionTransformArgs {
    /// Matrix CSV to transform.
    #[arg(long)]
    pub x: PathBuf,
    /// Basis file from onion-fit.
    #[arg(long)]
    pub basis: PathBuf,
    /// Output file name inside the output directory.
    #[arg(long, default_value = "transformed.csv")]
    pub output: PathBuf,
    /// Check that the result has no component along the basis.
    #[arg(long)]
    pub verify: bool,
}

pub const VERIFY_TOLERANCE: f64 = 1e-8;

fn onion_transform_cmd(cli: &Cli, args: &OnionTransformArgs) -> CliResult<()> {
    let (x, sidecar) = read_matrix::<f64>(&args.x)?;
    let (basis, _) = load_basis::<f64>(&args.basis)?;
    let transformed = onion_transform(&x, &basis)?;
    if args.verify {
        let residual = transformed.values().dot(basis.columns());
        let worst = residual.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let scale = x.values().iter().fold(1.0f64, |a, v| a.max(v.abs()));
        if worst > VERIFY_TOLERANCE * scale {
            return Err(CliError::runtime(anyhow::anyhow!(
                "verification failed: max |X_n W| = {worst:e}"
            )));
        }
        println!("verified: max |X_n W| = {worst:e}");
    }
    let out = cli.out_dir.join(&args.output);
    write_matrix(&out, &transformed, sidecar.and_then(|s| s.feature_names)).runtime("writing matrix")?;
    manifest::write(
        &manifest_path(&cli.out_dir, &args.output),
        "onion-transform",
        args,
        &[args.x.clone(), args.basis.clone()],
        &[out.clone(), sidecar_path(&out)],
    )?;
    Ok(())
}

/// Everything needed to score new data: preprocessing, optional ONION
/// basis or ANCOVA column subset, and the network.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineFile {
    pub method: Method,
    pub preprocess: PreprocessorFile,
    pub onion: Option<BasisFile>,
    pub columns: Option<Vec<usize>>,
    pub model: ModelFile,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
pub enum PreprocessArg {
    /// Standardize with 99th-percentile clipping.
    Standard,
    /// Depth-normalize to 1e6, clip, standardize.
    Counts,
    /// Standardize only.
    Plain,
}

impl PreprocessArg {
    fn options(self) -> PreprocessOptions {
        match self {
            PreprocessArg::Standard => PreprocessOptions::default(),
            PreprocessArg::Counts => PreprocessOptions::counts(),
            PreprocessArg::Plain => PreprocessOptions::standardize_only(),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
pub enum MethodArg {
    Logreg,
    LogregOnion,
    Mlp,
    Dann,
    LogregAncova,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Logreg => Method::Logreg,
            MethodArg::LogregOnion => Method::LogregOnion,
            MethodArg::Mlp => Method::Mlp,
            MethodArg::Dann => Method::Dann,
            MethodArg::LogregAncova => Method::LogregAncova,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long)]
    pub covariates: PathBuf,
    /// Confounder columns (default: all).
    #[arg(long, value_delimiter = ',')]
    pub confounders: Option<Vec<String>>,
    /// Training hyperparameters as JSON; missing keys take defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = PreprocessArg::Standard)]
    pub preprocess: PreprocessArg,
    /// ANCOVA significance level for logreg_ancova.
    #[arg(long, default_value_t = 0.05)]
    pub ancova_alpha: f64,
    /// Pipeline file name inside the output directory.
    #[arg(long, default_value = "model.json")]
    pub output: PathBuf,
    /// Optional loss-history CSV name inside the output directory.
    #[arg(long)]
    pub history: Option<PathBuf>,
}

fn train(cli: &Cli, args: &TrainArgs, seed: u64) -> CliResult<()> {
    let mut config: TrainConfig = match &args.config {
        Some(path) => read_json_file(path)?,
        None => TrainConfig::default(),
    };
    if cli.seed.is_some() || args.config.is_none() {
        config.seed = seed;
    }
    config.validate()?;
    let (ds, _) = load_dataset(&args.x, &args.covariates)?;
    let confounders = select_confounders(&ds.covariates, &args.confounders)?;
    let method = Method::from(args.method);
    let needs_confounders = matches!(method, Method::LogregOnion | Method::Dann | Method::LogregAncova);
    if needs_confounders && confounders.is_empty() {
        return Err(CliError::usage(anyhow::anyhow!("{} needs at least one confounder", method.id())));
    }
    let options = args.preprocess.options();
    let pre = PreprocessorState::fit(&ds.x, &options)?;
    let x = pre.apply(&ds.x)?;
    let labels = ds.labels();
    let mut onion = None;
    let mut columns = None;
    let fitted: Fitted<f64> = match method {
        Method::Logreg => logreg_fit(&x, labels, &config)?,
        Method::Mlp => mlp_fit(&x, labels, &config)?,
        Method::Dann => dann_fit(&x, labels, &confounders, &config, None)?,
        Method::LogregOnion => {
            let ys: Vec<_> = confounders.iter().map(|c| c.values.clone()).collect();
            let (basis, report) = onion_fit(&x, &ys, &OnionConfig { seed, ..OnionConfig::default() })?;
            let fitted = logreg_fit(&onion_transform(&x, &basis)?, labels, &config)?;
            onion = Some(BasisFile::new(&basis, &report));
            fitted
        }
        Method::LogregAncova => {
            let keep = ancova_filter(&x, labels, &confounders, args.ancova_alpha)?;
            if keep.is_empty() {
                return Err(CliError::runtime(anyhow::anyhow!("ANCOVA kept no features")));
            }
            let fitted = logreg_fit(&x.select_columns(&keep), labels, &config)?;
            columns = Some(keep);
            fitted
        }
    };
    let pipeline = PipelineFile {
        method,
        preprocess: pre.to_file(),
        onion,
        columns,
        model: ModelFile::new(method.id(), &fitted.params, &config, fitted.selected_step),
    };
    let out = cli.out_dir.join(&args.output);
    write_json_file(&out, &pipeline)?;
    let mut outputs = vec![out];
    if let Some(h) = &args.history {
        let path = cli.out_dir.join(h);
        write_loss_history(&path, &fitted.history).runtime("writing loss history")?;
        outputs.push(path);
    }
    // The pipeline file itself is the model; keep a plain model file alongside for tooling.
    let model_only = cli.out_dir.join(format!(
        "{}_network.json",
        args.output.file_stem().map_or("model".into(), |s| s.to_string_lossy().into_owned())
    ));
    save_model(&model_only, &pipeline.model).runtime("writing model")?;
    outputs.push(model_only);
    manifest::write(
        &manifest_path(&cli.out_dir, &args.output),
        "train",
        serde_json::json!({ "args": args, "train": config, "preprocess": options }),
        &[args.x.clone(), args.covariates.clone()],
        &outputs,
    )?;
    println!("trained {} (selected step {})", method.display(), fitted.selected_step);
    Ok(())
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    /// Pipeline file from `train`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub x: PathBuf,
    /// Covariates holding the labels (and the grouping column, if used).
    #[arg(long)]
    pub covariates: PathBuf,
    /// Training covariates; with --group-column enables the confounded subset.
    #[arg(long)]
    pub train_covariates: Option<PathBuf>,
    /// Covariate that defines the confounding groups.
    #[arg(long)]
    pub group_column: Option<String>,
    /// Values below this are the low group.
    #[arg(long, default_value_t = 0.0)]
    pub threshold: f64,
    /// Scores CSV name inside the output directory.
    #[arg(long, default_value = "scores.csv")]
    pub output: PathBuf,
}

#[derive(Debug, Serialize)]
struct Metrics {
    n: usize,
    auc_entire: f64,
    auc_confounded: Option<f64>,
    confounded_size: Option<usize>,
}

fn groups(set: &CovariateSet<f64>, column: &str, threshold: f64) -> CliResult<Vec<Group>> {
    let c = set
        .confounder(column)
        .ok_or_else(|| CliError::usage(anyhow::anyhow!("no covariate named {column:?}")))?;
    Ok(c.values.iter().map(|&v| Group::of(v, threshold)).collect())
}

fn evaluate(cli: &Cli, args: &EvaluateArgs) -> CliResult<()> {
    let pipeline: PipelineFile = read_json_file(&args.model)?;
    let (ds, _) = load_dataset(&args.x, &args.covariates)?;
    let pre = PreprocessorState::<f64>::from_file(&pipeline.preprocess)?;
    let mut x: DataMatrix<f64> = pre.apply(&ds.x)?;
    if let Some(cols) = &pipeline.columns {
        if cols.iter().any(|&c| c >= x.p()) {
            return Err(CliError::usage(anyhow::anyhow!("pipeline column index out of range")));
        }
        x = x.select_columns(cols);
    }
    if let Some(basis) = &pipeline.onion {
        x = onion_transform(&x, &basis.basis()?)?;
    }
    let params = pipeline.model.params::<f64>()?;
    let scores = predict_proba(&params, &x)?.to_vec();
    let labels = ds.labels();
    let mut metrics = Metrics {
        n: labels.len(),
        auc_entire: auc(&scores, labels).runtime("computing AUC")?,
        auc_confounded: None,
        confounded_size: None,
    };
    let mut inputs = vec![args.model.clone(), args.x.clone(), args.covariates.clone()];
    if let (Some(train_cov), Some(column)) = (&args.train_covariates, &args.group_column) {
        let train_set = read_covariates::<f64>(train_cov)?;
        let train_counts = cell_counts(&groups(&train_set, column, args.threshold)?, &train_set.label);
        let subset = confounded_test_subset(&groups(&ds.covariates, column, args.threshold)?, labels, &train_counts, 0)
            .map_err(CliError::runtime)?;
        let s: Vec<f64> = subset.iter().map(|&i| scores[i]).collect();
        let l: Vec<bool> = subset.iter().map(|&i| labels[i]).collect();
        metrics.auc_confounded = Some(auc(&s, &l).runtime("computing confounded AUC")?);
        metrics.confounded_size = Some(subset.len());
        inputs.push(train_cov.clone());
    }
    let out = cli.out_dir.join(&args.output);
    let mut text = String::from("score,label\n");
    for (s, &l) in scores.iter().zip(labels) {
        text.push_str(&format!("{s:.16e},{}\n", u8::from(l)));
    }
    fs::write(&out, text).runtime("writing scores")?;
    let metrics_path = cli.out_dir.join(format!(
        "{}_metrics.json",
        args.output.file_stem().map_or("scores".into(), |s| s.to_string_lossy().into_owned())
    ));
    write_json_file(&metrics_path, &metrics)?;
    manifest::write(
        &manifest_path(&cli.out_dir, &args.output),
        "evaluate",
        args,
        &inputs,
        &[out, metrics_path],
    )?;
    println!("{}", serde_json::to_string_pretty(&metrics).runtime("serializing metrics")?);
    Ok(())
}

#[derive(Debug, Args, Serialize)]
pub struct ExperimentArgs {
    /// Experiment config JSON, or the name of a bundled config
    /// (figure1, table1_style).
    #[arg(long)]
    pub config: String,
    /// Override the trial count.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub workers: Option<u64>,
    /// Override the experiment name used in output file names.
    #[arg(long)]
    pub name: Option<String>,
}

pub const BUNDLED: [(&str, &str); 2] = [
    ("figure1", include_str!("../configs/figure1.json")),
    ("table1_style", include_str!("../configs/table1_style.json")),
];

fn experiment(cli: &Cli, args: &ExperimentArgs) -> CliResult<()> {
    let path = Path::new(&args.config);
    let (text, input) = if path.exists() {
        let text = fs::read_to_string(path).map_err(|e| CliError::usage(anyhow::anyhow!("reading {}: {e}", path.display())))?;
        (text, Some(path.to_path_buf()))
    } else {
        let key = args.config.trim_end_matches(".json");
        match BUNDLED.iter().find(|(name, _)| *name == key) {
            Some((_, text)) => (text.to_string(), None),
            None => {
                return Err(CliError::usage(anyhow::anyhow!(
                    "config {} not found (bundled: figure1, table1_style)",
                    path.display()
                )))
            }
        }
    };
    let mut config: ExperimentConfig = parse_json(&text, &args.config)?;
    if let Some(t) = args.trials {
        config.trials = t as usize;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(name) = &args.name {
        config.name = name.clone();
    }
    if config.name.is_empty() {
        config.name = "experiment".into();
    }
    config.validate()?;
    let out_dir = match &config.output_dir {
        Some(dir) => cli.out_dir.join(dir),
        None => cli.out_dir.clone(),
    };
    fs::create_dir_all(&out_dir).runtime("creating output directory")?;
    let report = run_experiment(&config, args.workers.map(|w| w as usize))?;
    let json_path = out_dir.join(format!("{}_report.json", config.name));
    let csv_path = out_dir.join(format!("{}_report.csv", config.name));
    report.write_json(&json_path).runtime("writing report")?;
    report.write_csv(&csv_path).runtime("writing report")?;
    print!("{}", report.table());
    let mut inputs = Vec::new();
    if let Some(p) = input {
        inputs.push(p);
    }
    if let deconfound::eval::DataSource::Files { matrix, covariates, .. } = &config.data {
        inputs.extend([matrix.clone(), covariates.clone()]);
    }
    manifest::write(
        &out_dir.join(format!("{}_manifest.json", config.name)),
        "experiment",
        &config,
        &inputs,
        &[json_path, csv_path],
    )?;
    let failures: Vec<_> = report.failures().collect();
    if !failures.is_empty() {
        for f in &failures {
            eprintln!(
                "failed: {} trial {} fold {}: {}",
                f.method,
                f.trial,
                f.fold,
                f.error.as_deref().unwrap_or("")
            );
        }
        return Err(CliError::runtime(anyhow::anyhow!("{} of {} cells failed", failures.len(), report.cells.len())));
    }
    Ok(())
}
